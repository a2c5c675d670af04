"""Outer fixed-point loop coupling the chain solve, the service time and the queue idle probability."""
from __future__ import annotations

from dataclasses import dataclass

from .mac_chain import ChainInputs, ChainSolution, solve_chain
from .mm1k import QueueState, stationary
from .params import MacParams, derive_frame

MODES = ("mac_only", "phy_mac")


class FixedPointError(RuntimeError):
    """Outer loop failed; carries the p0 trace for diagnosis."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = tuple(history)


@dataclass(frozen=True)
class Scenario:
    """One (N, lambda, mode) evaluation point."""

    mac: MacParams
    phy_pe: float
    lam: float
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lam <= 0:
            raise ValueError(f"offered load must be positive, got {self.lam}")
        if not 0.0 <= self.phy_pe <= 1.0:
            raise ValueError(f"phy_pe out of range: {self.phy_pe}")
        if self.mode == "mac_only" and self.phy_pe != 0.0:
            raise ValueError("mac_only mode requires phy_pe == 0")


@dataclass(frozen=True)
class ConvergedPoint:
    """Converged chain and queue state with the iteration trace."""

    chain: ChainSolution
    queue: QueueState
    iterations: int
    p0_history: tuple


def converge(scenario: Scenario, tol: float = 1e-6, max_iter: int = 1000,
             damping: float = 0.5, trace_path=None) -> ConvergedPoint:
    """Iterate chain -> service time -> queue -> p0 until |delta p0| < tol.

    Starts from p0 = 1 (nothing queued yet) and damps the update to avoid
    oscillation near saturation.  Deterministic for identical scenarios.
    """
    mac = scenario.mac
    frame = derive_frame(mac)
    p0 = 1.0
    history = [p0]
    trace_rows = []
    for it in range(1, max_iter + 1):
        inputs = ChainInputs.from_params(mac, frame, p0, scenario.phy_pe)
        sol = solve_chain(inputs)
        queue = stationary(scenario.lam, sol.et_s, mac.queue_capacity)
        p0_next = (1.0 - damping) * p0 + damping * queue.p0
        history.append(p0_next)
        if trace_path is not None:
            trace_rows.append((it, p0_next, sol.tau, sol.alpha, sol.beta, sol.et_s))
        delta = abs(p0_next - p0)
        p0 = p0_next
        if delta < tol:
            # re-evaluate at the converged p0 so the outputs are self-consistent
            inputs = ChainInputs.from_params(mac, frame, p0, scenario.phy_pe)
            sol = solve_chain(inputs)
            queue = stationary(scenario.lam, sol.et_s, mac.queue_capacity)
            if trace_path is not None:
                _write_trace(trace_path, trace_rows)
            return ConvergedPoint(chain=sol, queue=queue, iterations=it,
                                  p0_history=tuple(history))
        if it >= 4 and abs(history[-1] - history[-3]) < 0.01 * tol and delta > 10 * tol:
            raise FixedPointError(
                f"period-2 oscillation in p0 after {it} iterations", history)
    if trace_path is not None:
        _write_trace(trace_path, trace_rows)
    raise FixedPointError(f"no convergence after {max_iter} iterations", history)


def _write_trace(path, rows):
    with open(path, "w") as fh:
        fh.write("iteration,p0,tau,alpha,beta,et_s\n")
        for row in rows:
            fh.write(",".join(format(v, ".12g") for v in row) + "\n")
