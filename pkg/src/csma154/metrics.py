"""Per-scenario outputs: mean delay, failure probability, reliability and throughput."""
from __future__ import annotations

from dataclasses import dataclass, fields

from .driver import ConvergedPoint, Scenario
from .mac_chain import ChainSolution
from .mm1k import QueueState, mean_occupancy

CSV_COLUMNS = [
    "mode", "n_nodes", "lambda_fps", "p0", "tau", "alpha", "beta", "p_e",
    "p_col", "p_fail", "p_cf", "p_cr", "p_blocking", "et_s", "delay_s",
    "reliability", "throughput_bps",
]


@dataclass(frozen=True)
class PerformanceReport:
    """One converged (mode, N, lambda) record with full diagnostics."""

    mode: str
    n_nodes: int
    lambda_fps: float
    p0: float
    tau: float
    alpha: float
    beta: float
    p_e: float
    p_col: float
    p_fail: float
    p_cf: float
    p_cr: float
    p_blocking: float
    et_s: float
    delay_s: float
    reliability: float
    throughput_bps: float


def delay(queue: QueueState, lam: float) -> float:
    """Mean time in the system: occupancy over the accepted arrival rate (Little's law)."""
    if lam <= 0:
        raise ValueError(f"offered load must be positive, got {lam}")
    accepted = lam * (1.0 - queue.p_blocking)
    if accepted <= 0:
        raise ValueError("queue is fully blocked; delay undefined")
    return mean_occupancy(queue) / accepted


def reliability(queue: QueueState, chain: ChainSolution) -> float:
    """Probability an offered frame is eventually delivered."""
    return (1.0 - queue.p_blocking) * (1.0 - chain.p_cf) * (1.0 - chain.p_cr)


def throughput(lam: float, rel: float, payload_bits: int) -> float:
    """Delivered payload bits per second."""
    return lam * rel * payload_bits


def build_report(scenario: Scenario, point: ConvergedPoint) -> PerformanceReport:
    """Assemble the full output record for one converged scenario."""
    chain, queue = point.chain, point.queue
    rel = reliability(queue, chain)
    return PerformanceReport(
        mode=scenario.mode, n_nodes=scenario.mac.n_nodes, lambda_fps=scenario.lam,
        p0=queue.p0, tau=chain.tau, alpha=chain.alpha, beta=chain.beta,
        p_e=scenario.phy_pe, p_col=chain.p_col, p_fail=chain.p_fail,
        p_cf=chain.p_cf, p_cr=chain.p_cr, p_blocking=queue.p_blocking,
        et_s=chain.et_s, delay_s=delay(queue, scenario.lam), reliability=rel,
        throughput_bps=throughput(scenario.lam, rel, scenario.mac.frame_payload_bits),
    )


def format_value(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def to_csv_row(report: PerformanceReport) -> str:
    """Serialize a report in the exact CSV_COLUMNS order."""
    return ",".join(format_value(getattr(report, col)) for col in CSV_COLUMNS)


# every CSV column maps onto a report field
assert all(col in {f.name for f in fields(PerformanceReport)} for col in CSV_COLUMNS)
