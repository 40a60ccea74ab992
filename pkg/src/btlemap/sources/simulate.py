"""Deterministic scenario-driven advertisement generator.

A scenario file describes devices walking along piecewise-linear distance
paths while advertising on a fixed interval.  Generation is a pure function
of the scenario: the same file always yields byte-identical streams, which
makes captures reproducible and lets tests pin exact expected values.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from btlemap.gatt import GattService
from btlemap.store import (
    RSSI_MAX,
    RSSI_MIN,
    AddressType,
    PduType,
    RawAdvertisement,
    parse_mac,
)

SCENARIO_VERSION = 1
SOURCE_ID = "sim"

_ADV_CHANNEL_CYCLE = (37, 38, 39)

# Random-static addresses have the two most significant bits set.
_RANDOM_STATIC_PREFIX = 0xC0


class InvalidScenario(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioDevice:
    """One simulated transmitter.

    ``path`` maps elapsed seconds to distance in meters; between waypoints
    the distance is linearly interpolated, outside them it is clamped to
    the nearest waypoint.
    """

    name: str
    initial_mac: bytes
    adv_interval_ms: float
    payload_template: bytes
    tx_power_dbm: float
    path: tuple[tuple[float, float], ...]
    mac_rotation_period_s: float | None = None
    address_type: AddressType = AddressType.RANDOM
    gatt_services: tuple[GattService, ...] = ()

    def distance_at(self, t_s: float) -> float:
        points = self.path
        if t_s <= points[0][0]:
            return points[0][1]
        if t_s >= points[-1][0]:
            return points[-1][1]
        for (t0, d0), (t1, d1) in zip(points, points[1:]):
            if t0 <= t_s <= t1:
                if t1 == t0:
                    return d1
                return d0 + (d1 - d0) * (t_s - t0) / (t1 - t0)
        raise AssertionError("unreachable: path covers the queried time")


@dataclass(frozen=True)
class Scenario:
    seed: int
    duration_s: float
    devices: tuple[ScenarioDevice, ...]
    noise_sigma_db: float = 0.0
    exponent_n: float = 2.0


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidScenario(message)


def _parse_device(index: int, raw: object) -> ScenarioDevice:
    _require(isinstance(raw, dict), f"devices[{index}] must be an object")
    assert isinstance(raw, dict)
    where = f"devices[{index}]"
    for key in ("name", "initial_mac", "adv_interval_ms", "payload_template",
                "tx_power_dbm", "path"):
        _require(key in raw, f"{where} missing {key!r}")
    try:
        mac = parse_mac(raw["initial_mac"])
    except ValueError as exc:
        raise InvalidScenario(f"{where}.initial_mac: {exc}") from exc
    try:
        payload = bytes.fromhex(raw["payload_template"])
    except (ValueError, TypeError) as exc:
        raise InvalidScenario(f"{where}.payload_template: {exc}") from exc
    _require(len(payload) <= 31, f"{where}.payload_template exceeds 31 bytes")
    interval = float(raw["adv_interval_ms"])
    _require(interval > 0, f"{where}.adv_interval_ms must be positive")

    path_raw = raw["path"]
    _require(
        isinstance(path_raw, list) and len(path_raw) >= 1,
        f"{where}.path needs at least one [time_s, distance_m] waypoint",
    )
    path: list[tuple[float, float]] = []
    for j, point in enumerate(path_raw):
        _require(
            isinstance(point, list) and len(point) == 2,
            f"{where}.path[{j}] must be [time_s, distance_m]",
        )
        t_s, d_m = float(point[0]), float(point[1])
        _require(d_m > 0, f"{where}.path[{j}] distance must be positive")
        if path:
            _require(t_s > path[-1][0], f"{where}.path times must increase")
        path.append((t_s, d_m))

    rotation = raw.get("mac_rotation_period_s")
    if rotation is not None:
        rotation = float(rotation)
        _require(rotation > 0, f"{where}.mac_rotation_period_s must be positive")
    address_type_raw = raw.get("address_type", "random")
    try:
        address_type = AddressType(address_type_raw)
    except ValueError as exc:
        raise InvalidScenario(f"{where}.address_type: {address_type_raw!r}") from exc

    services: list[GattService] = []
    for j, svc in enumerate(raw.get("gatt_services", [])):
        try:
            services.append(GattService.from_json_dict(svc))
        except (ValueError, KeyError, TypeError) as exc:
            raise InvalidScenario(f"{where}.gatt_services[{j}]: {exc}") from exc

    return ScenarioDevice(
        name=str(raw["name"]),
        initial_mac=mac,
        adv_interval_ms=interval,
        payload_template=payload,
        tx_power_dbm=float(raw["tx_power_dbm"]),
        path=tuple(path),
        mac_rotation_period_s=rotation,
        address_type=address_type,
        gatt_services=tuple(services),
    )


def load_scenario(source: str | Path | dict) -> Scenario:
    """Load and validate a scenario from a JSON file or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidScenario(f"cannot load scenario: {exc}") from exc
    else:
        raw = source
    _require(isinstance(raw, dict), "scenario must be a JSON object")
    _require(
        raw.get("version") == SCENARIO_VERSION,
        f"unsupported scenario version {raw.get('version')!r}",
    )
    for key in ("seed", "duration_s", "devices"):
        _require(key in raw, f"scenario missing {key!r}")
    duration = float(raw["duration_s"])
    _require(duration > 0, "duration_s must be positive")
    sigma = float(raw.get("noise_sigma_db", 0.0))
    _require(sigma >= 0, "noise_sigma_db must be non-negative")
    exponent = float(raw.get("exponent_n", 2.0))
    _require(exponent > 0, "exponent_n must be positive")
    devices_raw = raw["devices"]
    _require(
        isinstance(devices_raw, list) and len(devices_raw) >= 1,
        "devices must be a non-empty list",
    )
    devices = tuple(_parse_device(i, d) for i, d in enumerate(devices_raw))
    return Scenario(
        seed=int(raw["seed"]),
        duration_s=duration,
        devices=devices,
        noise_sigma_db=sigma,
        exponent_n=exponent,
    )


def _rotated_macs(device: ScenarioDevice, rng: random.Random,
                  duration_s: float) -> list[bytes]:
    """MAC per rotation epoch; epoch r covers [r*period, (r+1)*period)."""
    if device.mac_rotation_period_s is None:
        return [device.initial_mac]
    epochs = math.floor(duration_s / device.mac_rotation_period_s) + 1
    macs = [device.initial_mac]
    for _ in range(1, epochs):
        first = _RANDOM_STATIC_PREFIX | (rng.randrange(256) & 0x3F)
        macs.append(bytes([first]) + rng.randbytes(5))
    return macs


def device_macs(scenario: Scenario, index: int) -> list[bytes]:
    """All MACs a device will use over the scenario, in rotation order."""
    rng = random.Random(f"{scenario.seed}/{index}")
    return _rotated_macs(scenario.devices[index], rng, scenario.duration_s)


def generate_events(
    scenario: Scenario, start_timestamp_us: int = 0
) -> list[RawAdvertisement]:
    """All advertisements for a scenario, sorted by (timestamp, device index).

    Pure: depends only on the scenario contents and the start timestamp.
    """
    events: list[tuple[int, int, RawAdvertisement]] = []
    for index, device in enumerate(scenario.devices):
        rng = random.Random(f"{scenario.seed}/{index}")
        macs = _rotated_macs(device, rng, scenario.duration_s)
        interval_s = device.adv_interval_ms / 1000.0
        k = 0
        while (t_s := k * interval_s) < scenario.duration_s:
            distance = device.distance_at(t_s)
            rssi_f = device.tx_power_dbm - 10.0 * scenario.exponent_n * math.log10(
                distance
            )
            if scenario.noise_sigma_db > 0:
                rssi_f += rng.gauss(0.0, scenario.noise_sigma_db)
            rssi = max(RSSI_MIN, min(RSSI_MAX, round(rssi_f)))
            if device.mac_rotation_period_s is None:
                mac = macs[0]
            else:
                mac = macs[math.floor(t_s / device.mac_rotation_period_s)]
            adv = RawAdvertisement(
                timestamp_us=start_timestamp_us + round(t_s * 1e6),
                source_id=SOURCE_ID,
                mac=mac,
                address_type=device.address_type,
                pdu_type=PduType.ADV_IND,
                rssi=rssi,
                payload=device.payload_template,
                channel=_ADV_CHANNEL_CYCLE[k % 3],
            )
            events.append((adv.timestamp_us, index, adv))
            k += 1
    events.sort(key=lambda item: (item[0], item[1]))
    return [adv for _, _, adv in events]


def simulate(
    scenario: Scenario,
    sink: Callable[[RawAdvertisement], None],
    start_timestamp_us: int = 0,
) -> int:
    """Generate a scenario's advertisements and feed them to sink in order."""
    events = generate_events(scenario, start_timestamp_us)
    for adv in events:
        sink(adv)
    return len(events)
