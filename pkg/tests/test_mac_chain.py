"""Chain solver oracles: dual residual implementation, state enumeration, automaton Monte Carlo."""
import math

import numpy as np
import pytest

from csma154.mac_chain import (ChainInputs, backoff_windows, compute_b000,
                               discard_probabilities, expected_service_time,
                               failure_probability, geometric_sum, residuals,
                               solve_chain, tx_occupancy_slots)
from csma154.params import MacParams, derive_frame

MAC = MacParams()
FRAME = derive_frame(MAC)


def make_inputs(n_nodes=10, p0=0.5, p_e=0.0, m=4, n=3):
    mac = MacParams(n_nodes=n_nodes, m_max_csma_backoffs=m, n_max_retries=n)
    return ChainInputs.from_params(mac, FRAME, p0, p_e)


# --- residuals: independent straight-line transcription ------------------------------

def straightline_residuals(tau, alpha, beta, N, m, n, p0, p_e, L, La,
                           minbe, maxbe, tx_occ):
    t = (1 - p0) * tau
    pcol = 1 - (1 - t) ** (N - 1)
    pfail = 1 - (1 - pcol) * (1 - p_e)
    x = alpha + (1 - alpha) * beta
    y = pfail * (1 - x ** (m + 1))
    sy = sum(y ** j for j in range(n + 1))
    occ = sum(x ** i * ((2 ** min(minbe + i, maxbe) - 1) / 2 + 2 - alpha)
              for i in range(m + 1))
    occ += (1 - x ** (m + 1)) * tx_occ
    b000 = 1.0 / (sy * occ)
    r1 = tau - sum(x ** i for i in range(m + 1)) * sy * b000
    some = 1 - (1 - t) ** N
    single = N * t * (1 - t) ** (N - 1)
    frac = single / some if some > 1e-12 else 1.0
    r2 = alpha - (L + frac * La) * pcol * (1 - alpha) * (1 - beta)
    dv = 2 - (1 - t) ** N + single
    r3 = beta - (pcol + single) / dv
    return r1, r2, r3


def _compare_residuals(tau, alpha, beta, inputs):
    got = residuals(tau, alpha, beta, inputs)
    want = straightline_residuals(
        tau, alpha, beta, inputs.n_nodes, inputs.m, inputs.n, inputs.p0,
        inputs.p_e, inputs.l_slots, inputs.l_ack_slots, inputs.mac_min_be,
        inputs.mac_max_be, tx_occupancy_slots(inputs))
    for g, w in zip(got, want):
        assert g == pytest.approx(w, abs=1e-12)


def test_residuals_pinned_point():
    _compare_residuals(0.1, 0.1, 0.1, make_inputs(n_nodes=10, p0=0.5, p_e=0.0))


def test_residuals_random_points():
    rng = np.random.default_rng(11)
    for _ in range(100):
        tau, alpha, beta = rng.uniform(0.01, 0.9, 3)
        inputs = make_inputs(n_nodes=int(rng.integers(1, 60)),
                             p0=float(rng.uniform(0, 1)),
                             p_e=float(rng.uniform(0, 0.9)))
        _compare_residuals(float(tau), float(alpha), float(beta), inputs)


def test_residuals_idle_network():
    # p0 = 1: nobody transmits, so alpha = beta = 0 satisfies the busy equations
    _, r2, r3 = residuals(0.3, 0.0, 0.0, make_inputs(p0=1.0))
    assert r2 == 0.0 and r3 == 0.0


def test_residuals_single_node():
    _, r2, _ = residuals(0.3, 0.0, 0.0, make_inputs(n_nodes=1, p0=0.2))
    assert r2 == 0.0


# --- b000: explicit state enumeration oracle -----------------------------------------

def enumerate_b000(inputs, alpha, beta, p_fail):
    """Stationary probability of the first CCA1 state by explicit linear algebra.

    States: backoff counters, CCA1, CCA2 per (retry, stage) and transmission
    occupancy slots per retry; every frame exit restarts at (retry 0, stage 0).
    """
    windows = backoff_windows(inputs)
    tx_occ = tx_occupancy_slots(inputs)
    states = {}
    for j in range(inputs.n + 1):
        for i, w in enumerate(windows):
            for c in range(1, w):
                states[("bk", j, i, c)] = len(states)
            states[("cca1", j, i)] = len(states)
            states[("cca2", j, i)] = len(states)
        for k in range(tx_occ):
            states[("tx", j, k)] = len(states)
    size = len(states)
    P = np.zeros((size, size))

    def enter_stage(row, j, i, weight):
        w = windows[i]
        for c in range(1, w):
            P[row, states[("bk", j, i, c)]] += weight / w
        P[row, states[("cca1", j, i)]] += weight / w

    def on_busy(row, j, i, weight):
        # busy CCA: advance a stage, or give up the frame after stage m
        if i < inputs.m:
            enter_stage(row, j, i + 1, weight)
        else:
            enter_stage(row, 0, 0, weight)

    for j in range(inputs.n + 1):
        for i, w in enumerate(windows):
            for c in range(2, w):
                P[states[("bk", j, i, c)], states[("bk", j, i, c - 1)]] = 1.0
            if w > 1:
                P[states[("bk", j, i, 1)], states[("cca1", j, i)]] = 1.0
            row = states[("cca1", j, i)]
            on_busy(row, j, i, alpha)
            P[row, states[("cca2", j, i)]] = 1.0 - alpha
            row = states[("cca2", j, i)]
            on_busy(row, j, i, beta)
            P[row, states[("tx", j, 0)]] = 1.0 - beta
        for k in range(tx_occ - 1):
            P[states[("tx", j, k)], states[("tx", j, k + 1)]] = 1.0
        last = states[("tx", j, tx_occ - 1)]
        if j < inputs.n:
            enter_stage(last, j + 1, 0, p_fail)
            enter_stage(last, 0, 0, 1.0 - p_fail)
        else:
            enter_stage(last, 0, 0, 1.0)

    assert np.allclose(P.sum(axis=1), 1.0)
    a = np.vstack([P.T - np.eye(size), np.ones(size)])
    b = np.zeros(size + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return float(pi[states[("cca1", 0, 0)]])


def test_b000_single_pass_enumeration():
    inputs = make_inputs(m=0, n=0)
    pi = enumerate_b000(inputs, alpha=0.0, beta=0.0, p_fail=0.0)
    w0 = backoff_windows(inputs)[0]
    expected = 1.0 / ((w0 - 1) / 2 + 2 + tx_occupancy_slots(inputs))
    assert pi == pytest.approx(expected, abs=1e-10)
    assert compute_b000(inputs, 0.0, 0.0) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("m,n", [(0, 0), (1, 0), (1, 1), (2, 1)])
def test_b000_matches_enumeration(m, n):
    inputs = make_inputs(m=m, n=n)
    alpha, beta, p_fail = 0.2, 0.25, 0.3
    x = alpha + (1 - alpha) * beta
    y = p_fail * (1 - x ** (m + 1))
    pi = enumerate_b000(inputs, alpha, beta, p_fail)
    assert compute_b000(inputs, x, y, alpha) == pytest.approx(pi, abs=1e-9)


def test_b000_decreasing_in_m():
    values = [compute_b000(make_inputs(m=m), 0.3, 0.0) for m in (0, 1, 2)]
    assert values[0] > values[1] > values[2]


def test_b000_is_probability():
    rng = np.random.default_rng(4)
    for _ in range(50):
        inputs = make_inputs(m=int(rng.integers(0, 5)), n=int(rng.integers(0, 4)))
        b = compute_b000(inputs, float(rng.uniform(0, 0.99)),
                         float(rng.uniform(0, 0.99)), float(rng.uniform(0, 1)))
        assert 0.0 < b <= 1.0


# --- discard probabilities and service time: automaton Monte Carlo -------------------

def automaton_discards(x, y, m, n, n_packets, seed):
    """Vectorized per-packet run of the stage/retry automaton; returns discard rates."""
    rng = np.random.default_rng(seed)
    p_tx = 1.0 - x ** (m + 1)
    p_fail = y / p_tx
    status = np.zeros(n_packets, np.int8)  # 0 pending, 1 ok, 2 cf, 3 cr
    for j in range(n + 1):
        idx = np.flatnonzero(status == 0)
        transmitted = np.zeros(idx.size, bool)
        for _ in range(m + 1):
            need = np.flatnonzero(~transmitted)
            transmitted[need[rng.random(need.size) >= x]] = True
        status[idx[~transmitted]] = 2
        tx_idx = idx[transmitted]
        failed = rng.random(tx_idx.size) < p_fail
        status[tx_idx[~failed]] = 1
        if j == n:
            status[tx_idx[failed]] = 3
    return float((status == 2).mean()), float((status == 3).mean())


def automaton_service(inputs, alpha, beta, p_fail, n_packets, seed):
    """Scalar per-packet automaton with slot accounting; returns (mean_s, se_s)."""
    rng = np.random.default_rng(seed)
    windows = backoff_windows(inputs)
    attempt = (inputs.l_slots + inputs.l_ack_slots
               + (inputs.turnaround_s + inputs.ifs_s) / inputs.slot_duration_s)
    totals = np.empty(n_packets)
    for p in range(n_packets):
        slots = 0.0
        for _ in range(inputs.n + 1):
            transmitted = False
            for i in range(inputs.m + 1):
                slots += rng.integers(0, windows[i]) + 1  # backoff + CCA1
                if rng.random() < alpha:
                    continue
                slots += 1  # CCA2
                if rng.random() < beta:
                    continue
                transmitted = True
                break
            if not transmitted:
                break  # access failure
            slots += attempt
            if rng.random() >= p_fail:
                break  # delivered; otherwise retry
        totals[p] = slots
    mean = float(totals.mean()) * inputs.slot_duration_s
    se = float(totals.std(ddof=1)) / math.sqrt(n_packets) * inputs.slot_duration_s
    return mean, se


def test_discard_trivial_cases():
    assert discard_probabilities(0.0, 0.5, 4, 3)[0] == 0.0
    assert discard_probabilities(0.5, 0.0, 4, 3)[1] == 0.0
    assert discard_probabilities(0.5, 0.0, 1, 3)[0] == pytest.approx(0.25)


def test_discard_against_automaton():
    x, y, m, n = 0.3, 0.4, 4, 3
    n_packets = 1_000_000
    cf_hat, cr_hat = automaton_discards(x, y, m, n, n_packets, seed=8)
    p_cf, p_cr = discard_probabilities(x, y, m, n)
    for hat, p in ((cf_hat, p_cf), (cr_hat, p_cr)):
        se = math.sqrt(p * (1 - p) / n_packets)
        assert abs(hat - p) < 3 * se


def test_discard_plus_success_is_one():
    rng = np.random.default_rng(9)
    for _ in range(20):
        x, y = (float(v) for v in rng.uniform(0.01, 0.9, 2))
        m, n = int(rng.integers(0, 6)), int(rng.integers(0, 5))
        p_cf, p_cr = discard_probabilities(x, y, m, n)
        p_tx = 1 - x ** (m + 1)
        p_success = geometric_sum(y, n) * p_tx * (1 - y / p_tx)
        assert p_cf + p_cr + p_success == pytest.approx(1.0, abs=1e-12)


def test_service_time_single_path():
    inputs = make_inputs(n_nodes=1)
    slot = inputs.slot_duration_s
    expected = (((backoff_windows(inputs)[0] - 1) / 2 + 2) * slot
                + inputs.l_slots * slot + inputs.turnaround_s
                + inputs.l_ack_slots * slot + inputs.ifs_s)
    # alpha = beta = 0 with one node and p_e = 0 forces the single-transmission path
    assert expected_service_time(inputs, 0.1, 0.0, 0.0) == pytest.approx(expected, rel=1e-12)


def test_service_time_nondecreasing_in_y():
    prev = 0.0
    for p_e in np.linspace(0.0, 0.9, 10):
        et = expected_service_time(make_inputs(p_e=float(p_e)), 0.05, 0.2, 0.1)
        assert et >= prev
        prev = et


def test_service_time_against_automaton():
    inputs = make_inputs(n_nodes=10, p0=0.3, p_e=0.1)
    sol = solve_chain(inputs)
    p_fail_attempt = sol.y / (1 - sol.x ** (inputs.m + 1))
    mean_s, se_s = automaton_service(inputs, sol.alpha, sol.beta,
                                     p_fail_attempt, 100_000, seed=12)
    assert abs(sol.et_s - mean_s) < 3 * se_s


# --- solve_chain ----------------------------------------------------------------------

def test_solve_single_node():
    sol = solve_chain(make_inputs(n_nodes=1, p0=0.5, p_e=0.0))
    assert sol.p_col == 0.0
    assert sol.p_fail == 0.0
    assert sol.residual_norm < 1e-9


def test_failure_probability_values():
    assert failure_probability(0.0, 0.0) == 0.0
    assert failure_probability(0.3, 0.0) == pytest.approx(0.3)
    assert failure_probability(0.0, 0.3) == pytest.approx(0.3)
    assert failure_probability(0.2, 0.3) == pytest.approx(0.44)


def test_solution_invariants():
    for p_e in (0.0, 0.2, 0.5):
        sol = solve_chain(make_inputs(p_e=p_e))
        assert sol.residual_norm < 1e-9
        assert sol.x == pytest.approx(sol.alpha + (1 - sol.alpha) * sol.beta, abs=1e-12)
        assert sol.y == pytest.approx(sol.p_fail * (1 - sol.x ** 5), abs=1e-12)
        assert sol.p_fail >= sol.p_col - 1e-15
        assert sol.p_fail >= p_e - 1e-15
        for field in ("tau", "alpha", "beta", "x", "y", "b000",
                      "p_col", "p_fail", "p_cf", "p_cr"):
            assert 0.0 <= getattr(sol, field) <= 1.0, field
        assert sol.et_s > 0


def test_mac_only_reduction():
    sol = solve_chain(make_inputs(p_e=0.0))
    assert sol.p_fail == sol.p_col


def test_solve_deterministic():
    assert solve_chain(make_inputs(p_e=0.2)) == solve_chain(make_inputs(p_e=0.2))


def test_p_col_monotone_in_n_nodes():
    prev = -1.0
    for n_nodes in range(2, 51, 4):
        sol = solve_chain(make_inputs(n_nodes=n_nodes, p0=0.3))
        assert sol.p_col >= prev - 1e-6
        prev = sol.p_col


def test_geometric_sum_continuity():
    for k in (3, 4, 10):
        assert geometric_sum(1.0, k) == k + 1
        assert geometric_sum(1.0 - 1e-9, k) == pytest.approx(k + 1, abs=1e-6)
        assert geometric_sum(1.0 + 1e-9, k) == pytest.approx(k + 1, abs=1e-6)
        z = 0.37
        assert geometric_sum(z, k) == pytest.approx((1 - z ** (k + 1)) / (1 - z))


def test_inputs_validation():
    with pytest.raises(ValueError):
        make_inputs(p0=1.5)
    with pytest.raises(ValueError):
        ChainInputs(n_nodes=0, m=4, n=3, l_slots=11, l_ack_slots=2, p0=0.5,
                    p_e=0.0, mac_min_be=3, mac_max_be=5,
                    slot_duration_s=FRAME.slot_duration_s,
                    ifs_s=640e-6, turnaround_s=192e-6)
    with pytest.raises(ValueError):
        ChainInputs(n_nodes=5, m=4, n=3, l_slots=11, l_ack_slots=2, p0=0.5,
                    p_e=-0.2, mac_min_be=3, mac_max_be=5,
                    slot_duration_s=FRAME.slot_duration_s,
                    ifs_s=640e-6, turnaround_s=192e-6)
