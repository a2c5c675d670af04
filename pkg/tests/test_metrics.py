"""Output metrics: delay, reliability, throughput and CSV serialization."""
import dataclasses

import numpy as np
import pytest

from csma154.driver import Scenario, converge
from csma154.metrics import (CSV_COLUMNS, build_report, delay, format_value,
                             reliability, throughput, to_csv_row)
from csma154.mm1k import QueueState, stationary
from csma154.params import MacParams


def _queue(p):
    p = np.asarray(p, dtype=float)
    return QueueState(rho=0.0, p=p, p0=float(p[0]), p_blocking=float(p[-1]))


def test_delay_arithmetic():
    # two frames on average, effective arrival rate 10/s -> 0.2 s
    queue = _queue([0.0, 0.0, 1.0])
    queue = dataclasses.replace(queue, p_blocking=0.0)
    assert delay(queue, 10.0) == pytest.approx(0.2)


def test_delay_light_load_tends_to_service_time():
    mac = MacParams()
    lam = 1e-3
    point = converge(Scenario(mac=mac, phy_pe=0.0, lam=lam, mode="mac_only"))
    assert lam * point.chain.et_s < 1e-3
    assert delay(point.queue, lam) == pytest.approx(point.chain.et_s, rel=0.01)


def test_delay_validation():
    queue = stationary(1.0, 0.1, 5)
    with pytest.raises(ValueError):
        delay(queue, 0.0)
    blocked = _queue([0.0, 1.0])
    with pytest.raises(ValueError):
        delay(blocked, 1.0)


class _Chain:
    def __init__(self, p_cf, p_cr):
        self.p_cf, self.p_cr = p_cf, p_cr


def test_reliability_values():
    assert reliability(_queue([1.0, 0.0]), _Chain(0.0, 0.0)) == 1.0
    queue = dataclasses.replace(_queue([0.9, 0.1]), p_blocking=0.1)
    assert reliability(queue, _Chain(0.2, 0.05)) == pytest.approx(0.9 * 0.8 * 0.95)


def test_reliability_monotone():
    base = reliability(dataclasses.replace(_queue([1.0, 0.0]), p_blocking=0.1),
                       _Chain(0.2, 0.05))
    assert reliability(dataclasses.replace(_queue([1.0, 0.0]), p_blocking=0.2),
                       _Chain(0.2, 0.05)) < base
    assert reliability(dataclasses.replace(_queue([1.0, 0.0]), p_blocking=0.1),
                       _Chain(0.3, 0.05)) < base
    assert reliability(dataclasses.replace(_queue([1.0, 0.0]), p_blocking=0.1),
                       _Chain(0.2, 0.10)) < base


def test_throughput_values():
    assert throughput(10.0, 1.0, 800) == pytest.approx(8000.0)
    assert throughput(10.0, 0.0, 800) == 0.0
    assert throughput(10.0, 0.684, 800) == pytest.approx(5472.0)


def test_report_invariants():
    scenario = Scenario(mac=MacParams(), phy_pe=0.3, lam=5.0, mode="phy_mac")
    report = build_report(scenario, converge(scenario))
    assert 0.0 <= report.reliability <= 1.0
    assert report.throughput_bps == pytest.approx(
        scenario.lam * report.reliability * 800, rel=1e-9)
    assert report.delay_s > 0
    assert report.throughput_bps <= scenario.lam * 800
    assert report.mode == "phy_mac" and report.n_nodes == 10
    assert report.p_e == 0.3


def test_csv_row():
    scenario = Scenario(mac=MacParams(), phy_pe=0.0, lam=2.0, mode="mac_only")
    report = build_report(scenario, converge(scenario))
    row = to_csv_row(report)
    cells = row.split(",")
    assert len(cells) == len(CSV_COLUMNS)
    assert cells[0] == "mac_only"
    assert cells[1] == "10"
    assert cells[2] == "2"
    assert float(cells[CSV_COLUMNS.index("reliability")]) == pytest.approx(report.reliability)
    assert to_csv_row(report) == row  # serialization is stable


def test_csv_columns_pinned():
    assert CSV_COLUMNS == [
        "mode", "n_nodes", "lambda_fps", "p0", "tau", "alpha", "beta", "p_e",
        "p_col", "p_fail", "p_cf", "p_cr", "p_blocking", "et_s", "delay_s",
        "reliability", "throughput_bps"]


def test_format_value():
    assert format_value(0.5) == "0.5"
    assert format_value(10) == "10"
    assert format_value("mac_only") == "mac_only"
