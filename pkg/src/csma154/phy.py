"""Link-loss model: log-normal path loss, SNR, BER and frame reception averaged over range and asymmetry."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .params import PhyParams


@dataclass(frozen=True)
class LinkSample:
    """One deterministic link draw (asymmetry-perturbed powers, fixed shadowing)."""

    distance_m: float
    tx_power_dbm: float
    noise_floor_dbm: float
    shadowing_db: float = 0.0

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ValueError(f"distance_m must be positive, got {self.distance_m}")


@dataclass(frozen=True)
class PeEstimate:
    """Averaged frame-loss probability with Monte Carlo uncertainty."""

    p_e: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if not 0.0 <= self.p_e <= 1.0:
            raise ValueError(f"p_e out of range: {self.p_e}")
        if self.std_error < 0:
            raise ValueError(f"std_error negative: {self.std_error}")


def noise_floor_dbm(phy: PhyParams) -> float:
    """Thermal noise floor: -174 dBm/Hz + 10*log10(bandwidth) + noise figure."""
    return -174.0 + 10.0 * math.log10(phy.bandwidth_hz) + phy.noise_figure_db


def path_loss_db(d, phy: PhyParams):
    """Mean path loss at distance d; shadowing is added by callers as a Gaussian term."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = phy.ref_loss_db + 10.0 * phy.path_loss_exp * np.log10(d / phy.ref_distance_m)
    return float(out) if out.ndim == 0 else out


def snr_db(sample: LinkSample, phy: PhyParams) -> float:
    """Received SNR for one link draw."""
    return (sample.tx_power_dbm - path_loss_db(sample.distance_m, phy)
            - sample.shadowing_db - sample.noise_floor_dbm)


def _ber_ncfsk(gamma_lin, phy: PhyParams):
    # non-coherent FSK with noise-bandwidth ratio B/R
    return 0.5 * np.exp(-0.5 * gamma_lin * phy.bandwidth_hz / phy.data_rate_bps)


RADIO_PROFILES = {"ncfsk": _ber_ncfsk}


def bit_error_prob(snr_db, phy: PhyParams, profile: str = "ncfsk"):
    """Bit error probability at the given SNR; strictly decreasing, range (0, 0.5]."""
    gamma = np.power(10.0, np.asarray(snr_db, dtype=float) / 10.0)
    out = RADIO_PROFILES[profile](gamma, phy)
    return float(out) if out.ndim == 0 else out


def effective_frame_bits(phy: PhyParams) -> float:
    """Bits that must all decode: raw preamble plus encoded payload."""
    return phy.preamble_bits + phy.encoding_factor * (phy.frame_bits - phy.preamble_bits)


def packet_reception_rate(snr_db, phy: PhyParams, profile: str = "ncfsk"):
    """Probability a whole frame decodes: (1 - Pb)^preamble * (1 - Pb)^(enc * payload bits)."""
    pb = bit_error_prob(snr_db, phy, profile)
    out = np.power(1.0 - pb, effective_frame_bits(phy))
    return float(out) if np.ndim(out) == 0 else out


def _distance_quadrature(phy: PhyParams, panels: int, order: int):
    # composite Gauss-Legendre over [d_min, d_max]
    base_x, base_w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(phy.d_min_m, phy.d_max_m, panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * base_x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * base_w)
    return np.concatenate(nodes), np.concatenate(weights)


def expected_pe(phy: PhyParams, n_samples: int = 20000, seed: int = 0,
                quad_panels: int = 8, quad_order: int = 16,
                profile: str = "ncfsk", cache_path=None) -> PeEstimate:
    """Average frame-loss probability over distance, shadowing and hardware asymmetry.

    The distance dimension is integrated by composite Gauss-Legendre quadrature
    (uniform distance distribution on [d_min, d_max]); the Gaussian dimensions
    (shadowing, transmit power, noise floor) are Monte Carlo sampled with a
    reported standard error.  Fully deterministic given the seed.
    """
    randomized = (phy.shadowing_std_db > 0 or phy.tx_power_std_db > 0
                  or phy.noise_param_db > 0)
    if randomized and n_samples < 10_000:
        raise ValueError(f"n_samples must be >= 10000 for Monte Carlo averaging, got {n_samples}")
    if not randomized:
        n_samples = 1

    nodes, weights = _distance_quadrature(phy, quad_panels, quad_order)
    pl = path_loss_db(nodes, phy)
    floor = noise_floor_dbm(phy)

    rng = np.random.default_rng(seed)
    if randomized:
        shadow = rng.normal(0.0, phy.shadowing_std_db, n_samples)
        txp = rng.normal(phy.tx_power_dbm, phy.tx_power_std_db, n_samples)
        noise = rng.normal(floor, phy.noise_param_db, n_samples)
    else:
        shadow = np.zeros(1)
        txp = np.full(1, phy.tx_power_dbm)
        noise = np.full(1, floor)

    snr = txp[:, None] - pl[None, :] - shadow[:, None] - noise[:, None]
    prr = packet_reception_rate(snr, phy, profile)
    if not np.all(np.isfinite(prr)):
        raise FloatingPointError("non-finite packet reception rate in averaging")
    prr_mean = prr @ weights / (phy.d_max_m - phy.d_min_m)
    pe_samples = 1.0 - prr_mean
    p_e = float(np.clip(np.mean(pe_samples), 0.0, 1.0))
    std_error = float(np.std(pe_samples, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0

    if cache_path is not None:
        new = not os.path.exists(cache_path)
        with open(cache_path, "a") as fh:
            if new:
                fh.write("seed,n_samples,p_e,std_error\n")
            fh.write(f"{seed},{n_samples},{p_e:.12g},{std_error:.12g}\n")
    return PeEstimate(p_e, std_error, n_samples)
