"""Slot-level Monte Carlo of the N-node slotted CSMA/CA star network (independent oracle)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .driver import Scenario
from .params import derive_frame, seconds_to_slots

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

IDLE, CCA1, CCA2, OUTCOME = 0, 1, 2, 3
RES_SUCCESS, RES_COLLIDED, RES_PHY, RES_ACKLOST = 1, 2, 3, 4


@dataclass(frozen=True)
class NodeState:
    """Final snapshot of one node, for debugging and invariant checks."""

    queue_len: int
    backoff_stage: int
    retry_count: int
    phase: str


@dataclass(frozen=True)
class SimStats:
    """Aggregated post-warmup statistics of one run."""

    generated: int
    carried: int
    delivered: int
    collided: int
    phy_lost: int
    cf_discarded: int
    cr_discarded: int
    blocked: int
    still_queued: int
    attempts: int
    accepted: int
    reliability: float
    mean_service_s: float
    mean_sojourn_s: float
    mean_occupancy: float
    tau_hat: float
    alpha_hat: float
    beta_hat: float
    nonidle_slots: float
    ci_halfwidths: dict
    unstable: bool
    nodes: tuple
    horizon_slots: int
    seed: int


@njit(cache=True)
def _run_core(n_nodes, cap, m, n_ret, minbe, maxbe, w0, l_slots, l_ack,
              turn_slots, ifs_slots, inv_rate, p_e, ack_loss,
              horizon, warmup, seed, n_batches, attempt_excess):
    np.random.seed(seed)

    phase = np.zeros(n_nodes, np.int64)
    wake = np.full(n_nodes, horizon + 10, np.int64)
    stage = np.zeros(n_nodes, np.int64)
    retry = np.zeros(n_nodes, np.int64)
    qlen = np.zeros(n_nodes, np.int64)
    qhead = np.zeros(n_nodes, np.int64)
    arr_buf = np.zeros((n_nodes, cap), np.float64)
    head_start = np.zeros(n_nodes, np.int64)
    head_attempts = np.zeros(n_nodes, np.int64)
    outcome = np.zeros(n_nodes, np.int64)
    free_at = np.zeros(n_nodes, np.int64)
    busy_from = np.zeros(n_nodes, np.float64)
    q_last = np.zeros(n_nodes, np.float64)
    next_arr = np.empty(n_nodes, np.float64)
    for i in range(n_nodes):
        next_arr[i] = np.random.exponential(inv_rate)
    passers = np.empty(n_nodes, np.int64)

    tx_s = -1
    tx_e = -1
    ack_s = -1
    ack_e = -1

    generated = 0
    delivered = 0
    cf_disc = 0
    cr_disc = 0
    blocked = 0
    accepted = 0
    attempts = 0
    collided_att = 0
    phy_lost_att = 0
    success_att = 0
    cca1_cnt = 0
    cca1_busy = 0
    cca2_cnt = 0
    cca2_busy = 0
    carried = 0
    nonidle = 0.0
    svc_sum = 0.0
    svc_cnt = 0
    soj_sum = 0.0
    soj_cnt = 0
    qarea = 0.0

    b_del = np.zeros(n_batches, np.int64)
    b_cf = np.zeros(n_batches, np.int64)
    b_cr = np.zeros(n_batches, np.int64)
    b_blk = np.zeros(n_batches, np.int64)
    b_svc = np.zeros(n_batches, np.float64)
    b_svc_n = np.zeros(n_batches, np.int64)

    batch_len = (horizon - warmup) // n_batches
    if batch_len < 1:
        batch_len = 1
    warmup_f = float(warmup)
    reset_done = warmup == 0

    while True:
        tmin = horizon
        for i in range(n_nodes):
            if phase[i] != IDLE and wake[i] < tmin:
                tmin = wake[i]
            a_slot = int(math.ceil(next_arr[i]))
            if a_slot < tmin:
                tmin = a_slot
        if tmin >= horizon:
            break
        t = tmin

        if (not reset_done) and t >= warmup:
            reset_done = True
            for i in range(n_nodes):
                carried += qlen[i]

        # arrivals up to this slot
        for i in range(n_nodes):
            while next_arr[i] <= t:
                a = next_arr[i]
                next_arr[i] = a + np.random.exponential(inv_rate)
                if reset_done:
                    generated += 1
                if qlen[i] >= cap:
                    if reset_done:
                        blocked += 1
                        bidx = (int(a) - warmup) // batch_len
                        if bidx < 0:
                            bidx = 0
                        if bidx >= n_batches:
                            bidx = n_batches - 1
                        b_blk[bidx] += 1
                else:
                    if reset_done:
                        accepted += 1
                        t0 = q_last[i]
                        if t0 < warmup_f:
                            t0 = warmup_f
                        if a > t0:
                            qarea += qlen[i] * (a - t0)
                    q_last[i] = a
                    slot_in = (qhead[i] + qlen[i]) % cap
                    arr_buf[i, slot_in] = a
                    qlen[i] += 1
                    if qlen[i] == 1:
                        busy_from[i] = a
                        if busy_from[i] < free_at[i]:
                            busy_from[i] = float(free_at[i])
                        if phase[i] == IDLE:
                            s0 = int(math.ceil(a))
                            if s0 < free_at[i]:
                                s0 = free_at[i]
                            if s0 < t:
                                s0 = t
                            head_start[i] = s0
                            head_attempts[i] = 0
                            stage[i] = 0
                            retry[i] = 0
                            wake[i] = s0 + np.random.randint(0, w0)
                            phase[i] = CCA1

        # node actions this slot
        n_pass = 0
        for i in range(n_nodes):
            if phase[i] == IDLE or wake[i] != t:
                continue
            ph = phase[i]
            if ph == CCA1 or ph == CCA2:
                busy = (tx_s <= t < tx_e) or (ack_s <= t < ack_e)
                if reset_done:
                    if ph == CCA1:
                        cca1_cnt += 1
                        if busy:
                            cca1_busy += 1
                    else:
                        cca2_cnt += 1
                        if busy:
                            cca2_busy += 1
                if not busy:
                    if ph == CCA1:
                        phase[i] = CCA2
                        wake[i] = t + 1
                    else:
                        passers[n_pass] = i
                        n_pass += 1
                    continue
                # channel busy: next stage or access-failure discard
                stage[i] += 1
                if stage[i] <= m:
                    w = 1 << min(minbe + stage[i], maxbe)
                    wake[i] = t + 1 + np.random.randint(0, w)
                    phase[i] = CCA1
                    continue
                exit_kind = 1  # cf
                e = t + 1
            else:  # OUTCOME
                res = outcome[i]
                if res != RES_SUCCESS:
                    retry[i] += 1
                    if retry[i] <= n_ret:
                        stage[i] = 0
                        wake[i] = t + ifs_slots + np.random.randint(0, w0)
                        phase[i] = CCA1
                        continue
                    exit_kind = 2  # cr
                else:
                    exit_kind = 0  # delivered
                e = t + ifs_slots

            # frame exit (delivered / cf / cr)
            ef = float(e)
            svc_slots = (e - head_start[i]) - head_attempts[i] * attempt_excess
            a = arr_buf[i, qhead[i]]
            qhead[i] = (qhead[i] + 1) % cap
            if reset_done:
                t0 = q_last[i]
                if t0 < warmup_f:
                    t0 = warmup_f
                if ef > t0:
                    qarea += qlen[i] * (ef - t0)
            q_last[i] = ef
            qlen[i] -= 1
            if reset_done:
                bidx = (e - warmup) // batch_len
                if bidx < 0:
                    bidx = 0
                if bidx >= n_batches:
                    bidx = n_batches - 1
                if exit_kind == 0:
                    delivered += 1
                    b_del[bidx] += 1
                elif exit_kind == 1:
                    cf_disc += 1
                    b_cf[bidx] += 1
                else:
                    cr_disc += 1
                    b_cr[bidx] += 1
                svc_sum += svc_slots
                svc_cnt += 1
                b_svc[bidx] += svc_slots
                b_svc_n[bidx] += 1
                soj_sum += ef - a
                soj_cnt += 1
            free_at[i] = e
            if qlen[i] > 0:
                head_start[i] = e
                head_attempts[i] = 0
                stage[i] = 0
                retry[i] = 0
                wake[i] = e + np.random.randint(0, w0)
                phase[i] = CCA1
            else:
                phase[i] = IDLE
                wake[i] = horizon + 10
                if reset_done:
                    b0 = busy_from[i]
                    if b0 < warmup_f:
                        b0 = warmup_f
                    if ef > b0:
                        nonidle += ef - b0

        # transmissions starting next slot
        if n_pass > 0:
            tx_s = t + 1
            tx_e = tx_s + l_slots
            ack_start = tx_e + turn_slots
            ack_end = ack_start + l_ack
            if n_pass >= 2:
                res = RES_COLLIDED
                have_ack = False
            elif p_e > 0.0 and np.random.random() < p_e:
                res = RES_PHY
                have_ack = False
            elif ack_loss > 0.0 and np.random.random() < ack_loss:
                res = RES_ACKLOST
                have_ack = True
            else:
                res = RES_SUCCESS
                have_ack = True
            if have_ack:
                ack_s = ack_start
                ack_e = ack_end
            else:
                ack_s = -1
                ack_e = -1
            if reset_done:
                attempts += n_pass
                if res == RES_COLLIDED:
                    collided_att += n_pass
                elif res == RES_SUCCESS:
                    success_att += 1
                elif res == RES_PHY:
                    phy_lost_att += 1
            for jj in range(n_pass):
                i = passers[jj]
                phase[i] = OUTCOME
                wake[i] = ack_end
                outcome[i] = res
                head_attempts[i] += 1

    # close open accounting intervals at the horizon
    horizon_f = float(horizon)
    still_queued = 0
    for i in range(n_nodes):
        still_queued += qlen[i]
        if qlen[i] > 0:
            b0 = busy_from[i]
            if b0 < warmup_f:
                b0 = warmup_f
            if horizon_f > b0:
                nonidle += horizon_f - b0
        t0 = q_last[i]
        if t0 < warmup_f:
            t0 = warmup_f
        if horizon_f > t0:
            qarea += qlen[i] * (horizon_f - t0)

    final_state = np.empty((n_nodes, 4), np.int64)
    for i in range(n_nodes):
        final_state[i, 0] = qlen[i]
        final_state[i, 1] = stage[i]
        final_state[i, 2] = retry[i]
        final_state[i, 3] = phase[i]

    return (generated, carried, delivered, cf_disc, cr_disc, blocked, still_queued,
            accepted, attempts, collided_att, phy_lost_att, success_att,
            cca1_cnt, cca1_busy, cca2_cnt, cca2_busy, nonidle,
            svc_sum, svc_cnt, soj_sum, soj_cnt, qarea,
            b_del, b_cf, b_cr, b_blk, b_svc, b_svc_n, final_state)


def _batch_ci(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    se = values.std(ddof=1) / math.sqrt(values.size)
    return float(sps.t.ppf(0.975, values.size - 1) * se)


_PHASE_NAMES = {IDLE: "idle", CCA1: "cca1", CCA2: "cca2", OUTCOME: "ack_wait"}


def run(scenario: Scenario, horizon_slots: int, seed: int,
        warmup_frac: float = 0.1, n_batches: int = 10,
        ack_loss_prob: float = 0.0) -> SimStats:
    """Simulate the star network for horizon_slots slots; reproducible per seed.

    Per-node Poisson arrivals feed finite queues; backoff, the two clear-channel
    assessments, collisions, i.i.d. Bernoulli(P_e) link loss and retry limits
    follow the MAC parameters.  Sub-slot timings (turnaround, IFS) occupy whole
    slots on the grid but service-time statistics are corrected back to seconds.
    """
    if horizon_slots < 1000:
        raise ValueError(f"horizon too short: {horizon_slots}")
    mac = scenario.mac
    frame = derive_frame(mac)
    slot = frame.slot_duration_s
    turn_slots = max(1, seconds_to_slots(mac.turnaround_s, slot))
    ifs_slots = max(1, seconds_to_slots(mac.ifs_s, slot))
    attempt_excess = (turn_slots - mac.turnaround_s / slot) + (ifs_slots - mac.ifs_s / slot)
    warmup = int(horizon_slots * warmup_frac)
    inv_rate = 1.0 / (scenario.lam * slot)

    out = _run_core(
        mac.n_nodes, mac.queue_capacity, mac.m_max_csma_backoffs, mac.n_max_retries,
        mac.mac_min_be, mac.mac_max_be, mac.w0, frame.l_slots, frame.l_ack_slots,
        turn_slots, ifs_slots, inv_rate, scenario.phy_pe, ack_loss_prob,
        horizon_slots, warmup, seed, n_batches, attempt_excess)

    (generated, carried, delivered, cf_disc, cr_disc, blocked, still_queued,
     accepted, attempts, collided_att, phy_lost_att, success_att,
     cca1_cnt, cca1_busy, cca2_cnt, cca2_busy, nonidle,
     svc_sum, svc_cnt, soj_sum, soj_cnt, qarea,
     b_del, b_cf, b_cr, b_blk, b_svc, b_svc_n, final_state) = out

    exits = delivered + cf_disc + cr_disc + blocked
    rel = delivered / exits if exits else 0.0
    mean_service_s = svc_sum / svc_cnt * slot if svc_cnt else 0.0
    mean_sojourn_s = soj_sum / soj_cnt * slot if soj_cnt else 0.0
    span = horizon_slots - warmup
    mean_occupancy = qarea / span if span else 0.0

    b_exits = b_del + b_cf + b_cr + b_blk
    used = b_exits > 0
    rel_hw = _batch_ci(b_del[used] / b_exits[used]) if used.sum() >= 2 else 0.0
    svc_used = b_svc_n > 0
    svc_hw = (_batch_ci(b_svc[svc_used] / b_svc_n[svc_used]) * slot
              if svc_used.sum() >= 2 else 0.0)
    ci = {"reliability": rel_hw, "mean_service_s": svc_hw}
    unstable = (exits == 0 or (rel > 0 and rel_hw > 0.2 * rel)
                or (mean_service_s > 0 and svc_hw > 0.2 * mean_service_s))

    nodes = tuple(
        NodeState(queue_len=int(row[0]), backoff_stage=int(row[1]),
                  retry_count=int(row[2]), phase=_PHASE_NAMES[int(row[3])])
        for row in final_state)

    return SimStats(
        generated=int(generated), carried=int(carried), delivered=int(delivered),
        collided=int(collided_att), phy_lost=int(phy_lost_att),
        cf_discarded=int(cf_disc), cr_discarded=int(cr_disc), blocked=int(blocked),
        still_queued=int(still_queued), attempts=int(attempts), accepted=int(accepted),
        reliability=rel, mean_service_s=mean_service_s, mean_sojourn_s=mean_sojourn_s,
        mean_occupancy=mean_occupancy,
        tau_hat=cca1_cnt / nonidle if nonidle > 0 else 0.0,
        alpha_hat=cca1_busy / cca1_cnt if cca1_cnt else 0.0,
        beta_hat=cca2_busy / cca2_cnt if cca2_cnt else 0.0,
        nonidle_slots=float(nonidle), ci_halfwidths=ci, unstable=unstable,
        nodes=nodes, horizon_slots=horizon_slots, seed=seed)
