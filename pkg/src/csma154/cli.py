"""Sweep orchestration: offered-load grids per node count and mode, CSV emission, simulator cross-checks."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace

from . import metrics, sim
from .driver import MODES, FixedPointError, Scenario, converge
from .params import ConfigError, TrafficSpec, load_config
from .phy import expected_pe

SIM_COLUMNS = ["sim_reliability", "sim_reliability_ci", "sim_rel_diff_reliability",
               "sim_et_s", "sim_et_ci", "sim_rel_diff_et"]


@dataclass(frozen=True)
class SweepSpec:
    """Everything one sweep invocation needs."""

    lambda_start: float = 0.5
    lambda_end: float = 25.0
    lambda_step: float = 0.5
    node_counts: tuple = (5, 10, 50)
    modes: tuple = ("mac_only", "phy_mac")
    output_path: str = "sweep.csv"
    sim: bool = False
    sim_slots: int = 200_000
    seed: int = 1
    config_path: str | None = None
    trace_dir: str | None = None
    pe_override: float | None = None

    def __post_init__(self):
        if self.lambda_step <= 0:
            raise ValueError(f"lambda_step must be positive, got {self.lambda_step}")
        if self.lambda_start > self.lambda_end:
            raise ValueError("lambda_start must not exceed lambda_end")
        if not self.node_counts:
            raise ValueError("node_counts must be non-empty")
        for mode in self.modes:
            if mode not in MODES:
                raise ValueError(f"unknown mode {mode!r}")


def _lambda_grid(spec: SweepSpec):
    count = int(round((spec.lambda_end - spec.lambda_start) / spec.lambda_step)) + 1
    return [spec.lambda_start + i * spec.lambda_step for i in range(count)]


def run_sweep(spec: SweepSpec, stream=None):
    """Evaluate every (mode, N, lambda) point, write the CSV, return (rows, summary, exit_code)."""
    stream = stream if stream is not None else sys.stdout
    phy, mac, _ = load_config(spec.config_path)
    grid = _lambda_grid(spec)

    p_e = 0.0
    if "phy_mac" in spec.modes:
        if spec.pe_override is not None:
            p_e = spec.pe_override
        else:
            p_e = expected_pe(phy, seed=spec.seed).p_e

    header = list(metrics.CSV_COLUMNS) + ["status"]
    if spec.sim:
        header += SIM_COLUMNS
    rows = []
    records = {}
    any_failed = False
    for mode in spec.modes:
        for n in spec.node_counts:
            mac_n = replace(mac, n_nodes=int(n))
            for lam in grid:
                scenario = Scenario(mac=mac_n, phy_pe=p_e if mode == "phy_mac" else 0.0,
                                    lam=lam, mode=mode)
                trace_path = None
                if spec.trace_dir:
                    os.makedirs(spec.trace_dir, exist_ok=True)
                    trace_path = os.path.join(spec.trace_dir, f"{mode}_n{n}_lam{lam:g}.csv")
                try:
                    point = converge(scenario, trace_path=trace_path)
                    report = metrics.build_report(scenario, point)
                    records[(mode, int(n), lam)] = report
                    row = metrics.to_csv_row(report) + ",ok"
                except FixedPointError as exc:
                    any_failed = True
                    last_p0 = exc.history[-1] if exc.history else float("nan")
                    blanks = ",".join("nan" for _ in range(len(metrics.CSV_COLUMNS) - 3))
                    row = f"{mode},{n},{metrics.format_value(lam)},{blanks},no-convergence"
                    _ = last_p0
                if spec.sim:
                    if "no-convergence" in row:
                        row += "," + ",".join("nan" for _ in SIM_COLUMNS)
                    else:
                        stats = sim.run(scenario, spec.sim_slots, spec.seed)
                        rel_diff = (abs(report.reliability - stats.reliability)
                                    / stats.reliability if stats.reliability else float("nan"))
                        et_diff = (abs(report.et_s - stats.mean_service_s)
                                   / stats.mean_service_s if stats.mean_service_s else float("nan"))
                        row += "," + ",".join(metrics.format_value(v) for v in (
                            stats.reliability, stats.ci_halfwidths["reliability"], rel_diff,
                            stats.mean_service_s, stats.ci_halfwidths["mean_service_s"], et_diff))
                rows.append(row)

    with open(spec.output_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(row + "\n")

    summary = {}
    if "mac_only" in spec.modes and "phy_mac" in spec.modes:
        for n in spec.node_counts:
            gaps = []
            for lam in grid:
                a = records.get(("mac_only", int(n), lam))
                b = records.get(("phy_mac", int(n), lam))
                if a is not None and b is not None:
                    gaps.append((abs(b.delay_s - a.delay_s), lam))
            if gaps:
                gap, lam_at = max(gaps)
                summary[int(n)] = (gap, lam_at)
                print(f"N={n}: max delay gap between modes = {gap * 1e3:.2f} ms "
                      f"at lambda = {lam_at:g} frames/s", file=stream)
    print(f"wrote {len(rows)} rows to {spec.output_path}", file=stream)
    return records, summary, (2 if any_failed else 0)


def _parse_lambda(text):
    parts = text.split(":")
    if len(parts) == 1:
        v = float(parts[0])
        return v, v, 1.0
    if len(parts) == 3:
        return float(parts[0]), float(parts[1]), float(parts[2])
    raise argparse.ArgumentTypeError("expected START:END:STEP or a single value")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="csma154",
        description="Analytical IEEE 802.15.4 star-network performance sweeps "
                    "with optional Monte Carlo cross-validation.")
    parser.add_argument("--config", dest="config_path", default=None,
                        help="key = value config file (defaults reproduce the built-in scenario)")
    parser.add_argument("--nodes", default="5,10,50",
                        help="comma-separated node counts")
    parser.add_argument("--lambda", dest="lam", default="0.5:25:0.5", type=_parse_lambda,
                        help="offered load grid START:END:STEP in frames/s")
    parser.add_argument("--mode", choices=["mac-only", "phy-mac", "both"], default="both")
    parser.add_argument("--out", dest="output_path", default="sweep.csv")
    parser.add_argument("--sim", action="store_true",
                        help="cross-validate each converged point against the simulator")
    parser.add_argument("--sim-slots", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trace", dest="trace_dir", default=None,
                        help="directory for per-scenario fixed-point traces")
    parser.add_argument("--pe", dest="pe_override", type=float, default=None,
                        help="use this link-loss probability instead of the PHY average")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    modes = {"mac-only": ("mac_only",), "phy-mac": ("phy_mac",),
             "both": ("mac_only", "phy_mac")}[args.mode]
    start, end, step = args.lam
    try:
        node_counts = tuple(int(v) for v in args.nodes.replace(",", " ").split())
        spec = SweepSpec(lambda_start=start, lambda_end=end, lambda_step=step,
                         node_counts=node_counts, modes=modes,
                         output_path=args.output_path, sim=args.sim,
                         sim_slots=args.sim_slots, seed=args.seed,
                         config_path=args.config_path, trace_dir=args.trace_dir,
                         pe_override=args.pe_override)
        _, _, code = run_sweep(spec)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
