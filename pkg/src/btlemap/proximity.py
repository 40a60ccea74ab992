"""RSSI-based relative ranging and radar layout.

Distance comes from the log-distance path-loss model
``d = 10^((tx_power - rssi) / (10 n))`` with a configurable exponent; the
result is relative, not calibrated.  Angles are not measurable with plain
RSSI hardware, so each device gets a stable pseudo-random angle derived from
its id: the map stays readable and identical across processes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from btlemap.store import DeviceFilter, DeviceStore

RSSI_MIN = -127
RSSI_MAX = 20


@dataclass(frozen=True)
class PathLossConfig:
    exponent_n: float = 2.0
    default_tx_power_dbm: float = -59.0
    ewma_alpha: float = 0.3
    max_display_distance_m: float = 50.0

    def __post_init__(self) -> None:
        if self.exponent_n <= 0:
            raise ValueError(f"exponent_n must be positive: {self.exponent_n}")
        if not 0 < self.ewma_alpha <= 1:
            raise ValueError(f"ewma_alpha must be in (0, 1]: {self.ewma_alpha}")
        if self.max_display_distance_m <= 0:
            raise ValueError("max_display_distance_m must be positive")


@dataclass(frozen=True)
class ProximityEntry:
    device_id: str
    distance_m: float
    angle_rad: float
    smoothed_rssi: float
    stale: bool
    clamped: bool

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "device_id": self.device_id,
            "distance_m": self.distance_m,
            "angle_rad": self.angle_rad,
            "smoothed_rssi": self.smoothed_rssi,
            "stale": self.stale,
            "clamped": self.clamped,
        }


def estimate_distance(
    rssi: float, tx_power: float, config: PathLossConfig | None = None
) -> float:
    """Relative distance in meters; exactly 1.0 when rssi equals tx_power."""
    n = config.exponent_n if config is not None else 2.0
    return 10.0 ** ((tx_power - rssi) / (10.0 * n))


def smooth_rssi(previous: float | None, sample: float, alpha: float) -> float:
    """Exponentially weighted moving average, seeded by the first sample.

    Fused update form: algebraically alpha*sample + (1-alpha)*previous, but
    exact at fixed points where the expanded form drifts by an ulp.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1]: {alpha}")
    if previous is None:
        return float(sample)
    return previous + alpha * (sample - previous)


def assign_angle(device_id: str) -> float:
    """Stable pseudo-random angle in [0, 2π) for one device id."""
    digest = hashlib.sha256(device_id.encode("utf-8")).digest()
    fraction = int.from_bytes(digest[:8], "big") / 2**64
    return fraction * math.tau


def proximity_snapshot(
    store: "DeviceStore",
    config: PathLossConfig | None = None,
    now_us: int | None = None,
    device_filter: "DeviceFilter | None" = None,
) -> list[ProximityEntry]:
    """One radar entry per device passing the filter.

    Distances beyond the display limit clamp to the rim with ``clamped`` set;
    devices with no recent advertisement are flagged stale rather than
    dropped.
    """
    if config is None:
        config = PathLossConfig()
    if now_us is None:
        now_us = store.now_us()
    entries: list[ProximityEntry] = []
    recent = store.recent_devices(now_us=now_us)
    for summary in store.query(device_filter, now_us=now_us):
        smoothed = summary["smoothed_rssi"]
        if smoothed is None:
            continue
        tx = summary["tx_power"]
        tx_power = float(tx) if tx is not None else config.default_tx_power_dbm
        distance = estimate_distance(smoothed, tx_power, config)
        clamped = distance > config.max_display_distance_m
        entries.append(
            ProximityEntry(
                device_id=summary["device_id"],
                distance_m=min(distance, config.max_display_distance_m),
                angle_rad=assign_angle(summary["device_id"]),
                smoothed_rssi=smoothed,
                stale=summary["device_id"] not in recent,
                clamped=clamped,
            )
        )
    return entries
