"""M/M/1/K queue: stationary distribution, idle probability and blocking probability."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QueueState:
    """Utilization and stationary occupancy distribution over 0..K frames."""

    rho: float
    p: np.ndarray
    p0: float
    p_blocking: float


def stationary(lam: float, et_s: float, capacity: int) -> QueueState:
    """Steady state of an M/M/1/K queue with arrival rate lam and service time et_s.

    p_i = rho^i / sum_j rho^j; at rho = 1 the uniform limit 1/(K+1) applies.
    """
    if lam < 0:
        raise ValueError(f"arrival rate must be >= 0, got {lam}")
    if et_s <= 0:
        raise ValueError(f"service time must be positive, got {et_s}")
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")

    rho = lam * et_s
    k1 = capacity + 1
    if rho == 0.0:
        p = np.zeros(k1)
        p[0] = 1.0
    elif abs(rho - 1.0) < 1e-12:
        p = np.full(k1, 1.0 / k1)
    else:
        i = np.arange(k1, dtype=float)
        # scale by the largest term so rho > 1 cannot overflow
        shift = capacity if rho > 1.0 else 0
        terms = np.power(rho, i - shift)
        p = terms / terms.sum()
    return QueueState(rho=rho, p=p, p0=float(p[0]), p_blocking=float(p[capacity]))


def mean_occupancy(state: QueueState) -> float:
    """Expected number of frames in the system."""
    return float(np.dot(np.arange(state.p.size), state.p))
