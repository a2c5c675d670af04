"""Slotted CSMA/CA chain: the (tau, alpha, beta) nonlinear system and derived MAC statistics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .params import DerivedFrame, MacParams, seconds_to_slots

SOLVER_TOL = 1e-9
_EPS = 1e-12


class ChainConvergenceError(RuntimeError):
    """Inner solver failed to reach the residual tolerance."""

    def __init__(self, message, best_residual):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass(frozen=True)
class ChainInputs:
    """Everything the chain needs for one solve at a fixed idle probability."""

    n_nodes: int
    m: int                 # max extra CSMA backoff stages
    n: int                 # max retries after a failed transmission
    l_slots: int
    l_ack_slots: int
    p0: float
    p_e: float
    mac_min_be: int
    mac_max_be: int
    slot_duration_s: float
    ifs_s: float
    turnaround_s: float

    def __post_init__(self):
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 out of range: {self.p0}")
        if not 0.0 <= self.p_e <= 1.0:
            raise ValueError(f"p_e out of range: {self.p_e}")
        if self.n_nodes < 1:
            raise ValueError(f"n_nodes must be >= 1, got {self.n_nodes}")

    @classmethod
    def from_params(cls, mac: MacParams, frame: DerivedFrame, p0: float, p_e: float):
        return cls(
            n_nodes=mac.n_nodes, m=mac.m_max_csma_backoffs, n=mac.n_max_retries,
            l_slots=frame.l_slots, l_ack_slots=frame.l_ack_slots, p0=p0, p_e=p_e,
            mac_min_be=mac.mac_min_be, mac_max_be=mac.mac_max_be,
            slot_duration_s=frame.slot_duration_s, ifs_s=mac.ifs_s,
            turnaround_s=mac.turnaround_s,
        )


@dataclass(frozen=True)
class ChainSolution:
    """Fixed-point unknowns plus every derived per-attempt probability and the service time."""

    tau: float
    alpha: float
    beta: float
    x: float
    y: float
    b000: float
    p_col: float
    p_fail: float
    p_cf: float
    p_cr: float
    et_s: float
    residual_norm: float


def geometric_sum(z: float, k: int) -> float:
    """Sum_{i=0..k} z^i by direct summation (continuous through z = 1)."""
    total, power = 0.0, 1.0
    for _ in range(k + 1):
        total += power
        power *= z
    return total


def backoff_windows(inputs: ChainInputs):
    """Window sizes W_i = 2^min(minBE + i, maxBE) for stages 0..m."""
    return [2 ** min(inputs.mac_min_be + i, inputs.mac_max_be) for i in range(inputs.m + 1)]


def tx_occupancy_slots(inputs: ChainInputs) -> int:
    """Whole slots a node is busy per transmission attempt (data, turnaround, ACK, IFS)."""
    return (inputs.l_slots + inputs.l_ack_slots
            + seconds_to_slots(inputs.turnaround_s, inputs.slot_duration_s)
            + seconds_to_slots(inputs.ifs_s, inputs.slot_duration_s))


def compute_b000(inputs: ChainInputs, x: float, y: float, alpha: float = 0.0) -> float:
    """Stationary probability of the (stage 0, counter 0, retry 0) state.

    Normalizes the per-frame state occupancy: for every retry round (weight y^j)
    and stage reached (weight x^i), the node spends the mean backoff (W_i-1)/2,
    one CCA slot (two when CCA1 was idle), and the transmission occupancy when
    both CCAs pass.  Idle time is accounted for outside the chain through the
    (1 - p0) factor on tau.
    """
    windows = backoff_windows(inputs)
    if any(w <= 0 for w in windows):
        raise ValueError("degenerate backoff window")
    per_stage = 0.0
    xi = 1.0
    for w in windows:
        per_stage += xi * ((w - 1) / 2.0 + 2.0 - alpha)
        xi *= x
    round_occupancy = per_stage + (1.0 - x ** (inputs.m + 1)) * tx_occupancy_slots(inputs)
    total = geometric_sum(y, inputs.n) * round_occupancy
    return 1.0 / total


def failure_probability(p_col: float, p_e: float) -> float:
    """Joint attempt-failure probability from collisions and link loss."""
    return 1.0 - (1.0 - p_col) * (1.0 - p_e)


def discard_probabilities(x: float, y: float, m: int, n: int):
    """(P_cf, P_cr): discard by channel-access failure and by retry exhaustion."""
    p_cf = x ** (m + 1) * geometric_sum(y, n)
    p_cr = y ** (n + 1)
    return p_cf, p_cr


def _derived(tau, alpha, beta, inputs: ChainInputs):
    t = (1.0 - inputs.p0) * tau
    q = (1.0 - t) ** (inputs.n_nodes - 1)
    p_col = 1.0 - q
    p_fail = failure_probability(p_col, inputs.p_e)
    x = alpha + (1.0 - alpha) * beta
    y = p_fail * (1.0 - x ** (inputs.m + 1))
    return t, q, p_col, p_fail, x, y


def residuals(tau: float, alpha: float, beta: float, inputs: ChainInputs):
    """Residual vector of the three steady-state equations at (tau, alpha, beta)."""
    n_nodes = inputs.n_nodes
    t, q, _, _, x, y = _derived(tau, alpha, beta, inputs)
    b000 = compute_b000(inputs, x, y, alpha)
    r1 = tau - geometric_sum(x, inputs.m) * geometric_sum(y, inputs.n) * b000

    some_tx = 1.0 - (1.0 - t) ** n_nodes
    single_tx = n_nodes * t * q
    frac = single_tx / some_tx if some_tx > 1e-12 else 1.0
    coeff = inputs.l_slots + frac * inputs.l_ack_slots
    r2 = alpha - coeff * (1.0 - q) * (1.0 - alpha) * (1.0 - beta)

    dv = 2.0 - (1.0 - t) ** n_nodes + single_tx
    r3 = beta - ((1.0 - q) + single_tx) / dv
    for r in (r1, r2, r3):
        if not math.isfinite(r):
            raise FloatingPointError("non-finite residual")
    return r1, r2, r3


def expected_service_time(inputs: ChainInputs, tau: float, alpha: float, beta: float) -> float:
    """Mean head-of-line time until a frame exits by success or discard, in seconds."""
    _, _, _, _, x, y = _derived(tau, alpha, beta, inputs)
    windows = backoff_windows(inputs)
    per_stage_slots = 0.0
    xi = 1.0
    for w in windows:
        per_stage_slots += xi * ((w - 1) / 2.0 + 2.0 - alpha)
        xi *= x
    slot = inputs.slot_duration_s
    attempt_s = (inputs.l_slots + inputs.l_ack_slots) * slot + inputs.turnaround_s + inputs.ifs_s
    round_s = per_stage_slots * slot + (1.0 - x ** (inputs.m + 1)) * attempt_s
    return geometric_sum(y, inputs.n) * round_s


def _clip(v):
    return min(max(v, _EPS), 1.0 - _EPS)


def _norm(r):
    return max(abs(r[0]), abs(r[1]), abs(r[2]))


def _newton(inputs, start, tol, max_iter=100):
    v = [_clip(s) for s in start]
    r = residuals(*v, inputs)
    best = _norm(r)
    for _ in range(max_iter):
        if best < tol:
            return v, best
        jac = np.empty((3, 3))
        for j in range(3):
            h = 1e-7 * max(abs(v[j]), 1e-3)
            hi = list(v)
            lo = list(v)
            hi[j] = _clip(v[j] + h)
            lo[j] = _clip(v[j] - h)
            rh = residuals(*hi, inputs)
            rl = residuals(*lo, inputs)
            span = hi[j] - lo[j]
            for i in range(3):
                jac[i, j] = (rh[i] - rl[i]) / span
        try:
            step = np.linalg.solve(jac, -np.asarray(r))
        except np.linalg.LinAlgError:
            break
        lam, improved = 1.0, False
        for _ in range(60):
            cand = [_clip(v[k] + lam * step[k]) for k in range(3)]
            rc = residuals(*cand, inputs)
            nc = _norm(rc)
            if nc < best:
                v, r, best, improved = cand, rc, nc, True
                break
            lam *= 0.5
        if not improved:
            break
    return v, best


def _substitution(inputs, start, tol, max_iter=20000, damping=0.5):
    v = [_clip(s) for s in start]
    best_v, best = list(v), math.inf
    for _ in range(max_iter):
        r = residuals(*v, inputs)
        n = _norm(r)
        if n < best:
            best_v, best = list(v), n
        if n < tol:
            return v, n
        # r = v - RHS(v), so RHS = v - r
        v = [_clip(v[k] - damping * r[k]) for k in range(3)]
    return best_v, best


def _solve_from(inputs, start, tol):
    v, res = _newton(inputs, start, tol)
    if res >= tol:
        v, res = _substitution(inputs, v, tol)
    return v, res


def solve_chain(inputs: ChainInputs, tol: float = SOLVER_TOL) -> ChainSolution:
    """Solve the three-equation system and populate every derived quantity.

    Damped Newton with a finite-difference Jacobian, falling back to damped
    successive substitution; a second start detects multiple roots.
    Deterministic for identical inputs.
    """
    v, res = _solve_from(inputs, (0.1, 0.1, 0.1), tol)
    if res >= tol:
        raise ChainConvergenceError("chain solver did not converge", res)
    v2, res2 = _solve_from(inputs, (0.01, 0.5, 0.5), tol)
    if res2 < tol and max(abs(v[i] - v2[i]) for i in range(3)) > 1e-6:
        warnings.warn(
            f"multiple chain roots detected: {tuple(v)} vs {tuple(v2)}",
            RuntimeWarning, stacklevel=2)

    tau, alpha, beta = v
    _, _, p_col, p_fail, x, y = _derived(tau, alpha, beta, inputs)
    b000 = compute_b000(inputs, x, y, alpha)
    p_cf, p_cr = discard_probabilities(x, y, inputs.m, inputs.n)
    et_s = expected_service_time(inputs, tau, alpha, beta)
    return ChainSolution(tau=tau, alpha=alpha, beta=beta, x=x, y=y, b000=b000,
                         p_col=p_col, p_fail=p_fail, p_cf=p_cf, p_cr=p_cr,
                         et_s=et_s, residual_norm=res)
