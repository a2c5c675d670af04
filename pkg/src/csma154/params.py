"""Scenario constants: radio/channel, CSMA/CA and traffic parameters plus derived frame sizes."""
from __future__ import annotations

import math
import os
from collections.abc import Mapping
from dataclasses import dataclass, fields


class ConfigError(ValueError):
    """Malformed config document or parameter invariant violation."""


def _require(cond, key, value):
    if not cond:
        raise ConfigError(f"invariant violation: {key}={value!r}")


@dataclass(frozen=True)
class PhyParams:
    """Radio and channel constants for the link-loss model."""

    tx_power_dbm: float = 0.0
    tx_power_std_db: float = 5.0       # hardware asymmetry on output power
    noise_figure_db: float = 23.0
    noise_param_db: float = 15.0       # noise-floor asymmetry std (see README)
    bandwidth_hz: float = 30e3
    path_loss_exp: float = 4.0
    shadowing_std_db: float = 4.0
    ref_distance_m: float = 1.0
    ref_loss_db: float = 55.0          # PL(d0); no standard default, override per deployment
    d_min_m: float = 1.0
    d_max_m: float = 20.0
    preamble_bits: int = 40
    frame_bits: int = 888              # preamble + payload + MAC overhead on air
    data_rate_bps: float = 19200.0
    encoding_factor: float = 1.0       # 1 = NRZ, 2 = Manchester

    def __post_init__(self):
        _require(self.d_min_m > 0, "d_min_m", self.d_min_m)
        _require(self.d_max_m > self.d_min_m, "d_max_m", self.d_max_m)
        _require(self.shadowing_std_db >= 0, "shadowing_std_db", self.shadowing_std_db)
        _require(self.tx_power_std_db >= 0, "tx_power_std_db", self.tx_power_std_db)
        _require(self.noise_param_db >= 0, "noise_param_db", self.noise_param_db)
        _require(self.bandwidth_hz > 0, "bandwidth_hz", self.bandwidth_hz)
        _require(self.data_rate_bps > 0, "data_rate_bps", self.data_rate_bps)
        _require(self.encoding_factor >= 1, "encoding_factor", self.encoding_factor)
        _require(self.ref_distance_m > 0, "ref_distance_m", self.ref_distance_m)
        _require(self.preamble_bits >= 0, "preamble_bits", self.preamble_bits)
        _require(self.frame_bits > 0, "frame_bits", self.frame_bits)


@dataclass(frozen=True)
class MacParams:
    """Slotted CSMA/CA and frame constants."""

    n_nodes: int = 10
    mac_min_be: int = 3
    mac_max_be: int = 5
    m_max_csma_backoffs: int = 4       # max extra backoff stages before access failure
    n_max_retries: int = 3
    w0: int = 8                        # smallest backoff window, must equal 2^mac_min_be
    frame_payload_bits: int = 800
    mac_overhead_bits: int = 48
    ack_bits: int = 88
    slot_bits: int = 80
    data_rate_bps: float = 19200.0
    queue_capacity: int = 51           # frames in system, including the one in service
    ifs_s: float = 640e-6
    turnaround_s: float = 192e-6

    def __post_init__(self):
        _require(self.n_nodes >= 1, "n_nodes", self.n_nodes)
        _require(self.w0 == 2 ** self.mac_min_be, "w0", self.w0)
        _require(self.mac_max_be >= self.mac_min_be, "mac_max_be", self.mac_max_be)
        _require(self.m_max_csma_backoffs >= 0, "m_max_csma_backoffs", self.m_max_csma_backoffs)
        _require(self.n_max_retries >= 0, "n_max_retries", self.n_max_retries)
        _require(self.queue_capacity >= 1, "queue_capacity", self.queue_capacity)
        _require(self.slot_bits > 0, "slot_bits", self.slot_bits)
        _require(self.data_rate_bps > 0, "data_rate_bps", self.data_rate_bps)
        _require(self.frame_payload_bits > 0, "frame_payload_bits", self.frame_payload_bits)
        _require(self.mac_overhead_bits >= 0, "mac_overhead_bits", self.mac_overhead_bits)
        _require(self.ack_bits > 0, "ack_bits", self.ack_bits)
        _require(self.ifs_s >= 0, "ifs_s", self.ifs_s)
        _require(self.turnaround_s >= 0, "turnaround_s", self.turnaround_s)


@dataclass(frozen=True)
class TrafficSpec:
    """Offered-load sweep definition."""

    lambda_start: float = 0.5
    lambda_end: float = 25.0
    lambda_step: float = 0.5
    node_counts: tuple = (5, 10, 50)

    def __post_init__(self):
        _require(self.lambda_step > 0, "lambda_step", self.lambda_step)
        _require(self.lambda_start <= self.lambda_end, "lambda_start", self.lambda_start)
        _require(len(self.node_counts) > 0, "node_counts", self.node_counts)

    def lambda_grid(self):
        """Offered-load values from start to end inclusive."""
        count = int(round((self.lambda_end - self.lambda_start) / self.lambda_step)) + 1
        return [self.lambda_start + i * self.lambda_step for i in range(count)]


@dataclass(frozen=True)
class DerivedFrame:
    """On-air frame lengths in whole slots and the slot duration."""

    l_slots: int
    l_ack_slots: int
    slot_duration_s: float


def derive_frame(mac: MacParams) -> DerivedFrame:
    """Convert frame/ACK bit lengths into slot counts (a partial slot occupies a full slot)."""
    l_slots = -(-(mac.frame_payload_bits + mac.mac_overhead_bits) // mac.slot_bits)
    l_ack_slots = -(-mac.ack_bits // mac.slot_bits)
    return DerivedFrame(l_slots, l_ack_slots, mac.slot_bits / mac.data_rate_bps)


def seconds_to_slots(seconds: float, slot_duration_s: float) -> int:
    """Whole-slot channel occupancy of a sub-slot duration (rounded up)."""
    return int(math.ceil(seconds / slot_duration_s - 1e-12))


_PHY_FIELDS = {f.name: f for f in fields(PhyParams)}
_MAC_FIELDS = {f.name: f for f in fields(MacParams)}
_TRAFFIC_FIELDS = {f.name: f for f in fields(TrafficSpec)}


def parse_config_text(text: str) -> dict:
    """Parse a flat ``key = value`` document with ``#`` comments into a dict of strings."""
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        data[key] = value
    return data


def _coerce(key, value, ftype):
    if isinstance(value, str):
        try:
            if ftype is int:
                return int(value)
            if ftype is float:
                return float(value)
            if ftype is tuple:
                return tuple(int(v) for v in value.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if ftype is tuple and isinstance(value, (list, tuple)):
        return tuple(value)
    if ftype is int and isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def load_config(source=None):
    """Build ``(PhyParams, MacParams, TrafficSpec)`` from a document, path or mapping.

    Missing keys fall back to the defaults above.  The shared ``data_rate_bps``
    key sets both the PHY and MAC parameter sets.
    """
    if source is None:
        data = {}
    elif isinstance(source, Mapping):
        data = dict(source)
    else:
        text = str(source)
        if os.path.exists(text):
            with open(text) as fh:
                text = fh.read()
        elif "=" not in text:
            raise ConfigError(f"config file not found: {source!r}")
        data = parse_config_text(text)

    phy_kwargs, mac_kwargs, traffic_kwargs = {}, {}, {}
    for key, value in data.items():
        known = False
        if key in _PHY_FIELDS:
            phy_kwargs[key] = _coerce(key, value, type(getattr(PhyParams, key)))
            known = True
        if key in _MAC_FIELDS:
            mac_kwargs[key] = _coerce(key, value, type(getattr(MacParams, key)))
            known = True
        if key in _TRAFFIC_FIELDS:
            traffic_kwargs[key] = _coerce(key, value, type(getattr(TrafficSpec, key)))
            known = True
        if not known:
            raise ConfigError(f"unknown config key: {key}")
    return PhyParams(**phy_kwargs), MacParams(**mac_kwargs), TrafficSpec(**traffic_kwargs)


def dump_config(phy: PhyParams, mac: MacParams, traffic: TrafficSpec) -> str:
    """Serialize parameter sets to the flat key-value format accepted by load_config."""
    if phy.data_rate_bps != mac.data_rate_bps:
        raise ConfigError("PHY and MAC data_rate_bps differ; the config format shares one key")
    lines = ["# csma154 scenario configuration", "", "# PHY layer"]
    for f in fields(PhyParams):
        lines.append(f"{f.name} = {getattr(phy, f.name)}")
    lines.append("")
    lines.append("# MAC layer")
    for f in fields(MacParams):
        if f.name == "data_rate_bps":
            continue
        lines.append(f"{f.name} = {getattr(mac, f.name)}")
    lines.append("")
    lines.append("# traffic sweep")
    for f in fields(TrafficSpec):
        value = getattr(traffic, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
