"""Scenario simulator tests.

Expected counts and RSSI values are hand-derived from the path-loss formula;
inverse-consistency checks use waypoint distances of the form 10^(k/20) so
the noiseless RSSI lands exactly on an integer dBm value.
"""

import hashlib
import json
import math
from pathlib import Path

import pytest

from btlemap.proximity import estimate_distance
from btlemap.sources.simulate import (
    InvalidScenario,
    Scenario,
    device_macs,
    generate_events,
    load_scenario,
    simulate,
)
from btlemap.store import AddressType, PduType, RawAdvertisement


def scenario_dict(**overrides: object) -> dict:
    base: dict = {
        "version": 1,
        "seed": 42,
        "duration_s": 10.0,
        "noise_sigma_db": 0.0,
        "devices": [
            {
                "name": "beacon",
                "initial_mac": "c0:11:22:33:44:55",
                "adv_interval_ms": 1000,
                "payload_template": "020106",
                "tx_power_dbm": -59.0,
                "path": [[0.0, 1.0]],
            }
        ],
    }
    base.update(overrides)
    return base


def stream_hash(events: list[RawAdvertisement]) -> str:
    digest = hashlib.sha256()
    for event in events:
        digest.update(json.dumps(event.to_json_dict(), sort_keys=True).encode())
    return digest.hexdigest()


class TestLoading:
    def test_dict_and_file_load_identically(self, tmp_path: Path) -> None:
        raw = scenario_dict()
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(raw))
        assert load_scenario(path) == load_scenario(raw)

    def test_defaults(self) -> None:
        scenario = load_scenario(scenario_dict())
        assert scenario.exponent_n == 2.0
        assert scenario.devices[0].mac_rotation_period_s is None
        assert scenario.devices[0].address_type is AddressType.RANDOM

    @pytest.mark.parametrize(
        "mutate",
        [
            {"version": 2},
            {"version": None},
            {"duration_s": 0},
            {"duration_s": -5},
            {"noise_sigma_db": -1},
            {"exponent_n": 0},
            {"devices": []},
            {"devices": "nope"},
        ],
    )
    def test_scenario_level_validation(self, mutate: dict) -> None:
        with pytest.raises(InvalidScenario):
            load_scenario(scenario_dict(**mutate))

    @pytest.mark.parametrize(
        "mutate",
        [
            {"initial_mac": "zz:11:22:33:44:55"},
            {"initial_mac": "c011223344"},
            {"adv_interval_ms": 0},
            {"payload_template": "0h"},
            {"payload_template": "00" * 32},
            {"path": []},
            {"path": [[0, 1.0], [0, 2.0]]},
            {"path": [[1.0, 2.0], [0.5, 1.0]]},
            {"path": [[0, 0.0]]},
            {"path": [[0, -1.0]]},
            {"mac_rotation_period_s": 0},
            {"address_type": "static"},
        ],
    )
    def test_device_level_validation(self, mutate: dict) -> None:
        raw = scenario_dict()
        raw["devices"][0].update(mutate)
        with pytest.raises(InvalidScenario):
            load_scenario(raw)

    def test_missing_device_field_names_the_field(self) -> None:
        raw = scenario_dict()
        del raw["devices"][0]["tx_power_dbm"]
        with pytest.raises(InvalidScenario, match="tx_power_dbm"):
            load_scenario(raw)

    def test_unreadable_file(self, tmp_path: Path) -> None:
        with pytest.raises(InvalidScenario):
            load_scenario(tmp_path / "absent.json")


class TestPathInterpolation:
    def path_device(self) -> Scenario:
        raw = scenario_dict()
        raw["devices"][0]["path"] = [[2.0, 1.0], [4.0, 5.0]]
        return load_scenario(raw)

    def test_linear_midpoint(self) -> None:
        device = self.path_device().devices[0]
        assert device.distance_at(3.0) == pytest.approx(3.0)

    def test_clamped_before_first_waypoint(self) -> None:
        device = self.path_device().devices[0]
        assert device.distance_at(0.0) == 1.0

    def test_clamped_after_last_waypoint(self) -> None:
        device = self.path_device().devices[0]
        assert device.distance_at(100.0) == 5.0

    def test_exact_at_waypoints(self) -> None:
        device = self.path_device().devices[0]
        assert device.distance_at(2.0) == 1.0
        assert device.distance_at(4.0) == 5.0


class TestGeneration:
    def test_fixed_one_meter_yields_tx_power(self) -> None:
        events = generate_events(load_scenario(scenario_dict()))
        assert events, "no events generated"
        assert all(event.rssi == -59 for event in events)

    def test_grid_count_ten_seconds_at_one_hertz(self) -> None:
        events = generate_events(load_scenario(scenario_dict()))
        assert len(events) == 10

    def test_timestamps_on_exact_interval_grid(self) -> None:
        events = generate_events(load_scenario(scenario_dict()), start_timestamp_us=500)
        assert [e.timestamp_us for e in events] == [
            500 + k * 1_000_000 for k in range(10)
        ]

    def test_channels_cycle_through_advertising_set(self) -> None:
        events = generate_events(load_scenario(scenario_dict()))
        assert [e.channel for e in events] == [37, 38, 39, 37, 38, 39, 37, 38, 39, 37]

    def test_determinism_hash(self) -> None:
        raw = scenario_dict(noise_sigma_db=4.0, seed=99)
        first = generate_events(load_scenario(raw))
        second = generate_events(load_scenario(raw))
        assert stream_hash(first) == stream_hash(second)
        assert first == second

    def test_different_seeds_differ_under_noise(self) -> None:
        a = generate_events(load_scenario(scenario_dict(noise_sigma_db=4.0, seed=1)))
        b = generate_events(load_scenario(scenario_dict(noise_sigma_db=4.0, seed=2)))
        assert [e.rssi for e in a] != [e.rssi for e in b]

    def test_noise_perturbs_rssi(self) -> None:
        events = generate_events(load_scenario(scenario_dict(noise_sigma_db=6.0)))
        assert len({event.rssi for event in events}) > 1

    def test_rssi_clamped_to_valid_range(self) -> None:
        raw = scenario_dict()
        raw["devices"][0]["path"] = [[0.0, 4000.0]]  # far beyond -127 dBm
        events = generate_events(load_scenario(raw))
        assert all(event.rssi == -127 for event in events)

    def test_merged_streams_sorted_by_time_then_device(self) -> None:
        raw = scenario_dict()
        raw["devices"].append(
            dict(raw["devices"][0], name="second", initial_mac="c0:00:00:00:00:02")
        )
        events = generate_events(load_scenario(raw))
        keys = [(e.timestamp_us, e.mac) for e in events]
        assert keys == sorted(keys, key=lambda pair: (pair[0], pair[1] != bytes.fromhex("c01122334455")))

    def test_payload_and_pdu_fields(self) -> None:
        event = generate_events(load_scenario(scenario_dict()))[0]
        assert event.payload == bytes.fromhex("020106")
        assert event.pdu_type is PduType.ADV_IND
        assert event.source_id == "sim"

    def test_simulate_feeds_sink_in_order(self) -> None:
        seen: list[RawAdvertisement] = []
        scenario = load_scenario(scenario_dict())
        count = simulate(scenario, seen.append)
        assert count == 10
        assert seen == generate_events(scenario)


class TestMacRotation:
    def rotating(self, period: float = 3.0, duration: float = 10.0) -> Scenario:
        raw = scenario_dict(duration_s=duration)
        raw["devices"][0]["mac_rotation_period_s"] = period
        return load_scenario(raw)

    def test_epoch_count(self) -> None:
        scenario = self.rotating()
        macs = device_macs(scenario, 0)
        assert len(macs) == math.floor(10.0 / 3.0) + 1

    def test_initial_mac_used_first(self) -> None:
        scenario = self.rotating()
        events = generate_events(scenario)
        assert events[0].mac == bytes.fromhex("c01122334455")

    def test_events_use_epoch_mac(self) -> None:
        scenario = self.rotating()
        macs = device_macs(scenario, 0)
        for event in generate_events(scenario):
            epoch = math.floor((event.timestamp_us / 1e6) / 3.0)
            assert event.mac == macs[epoch]

    def test_rotated_macs_are_random_static(self) -> None:
        for mac in device_macs(self.rotating(), 0)[1:]:
            assert mac[0] & 0xC0 == 0xC0

    def test_rotated_macs_distinct(self) -> None:
        macs = device_macs(self.rotating(period=1.0, duration=30.0), 0)
        assert len(set(macs)) == len(macs)

    def test_no_rotation_keeps_single_mac(self) -> None:
        scenario = load_scenario(scenario_dict())
        assert device_macs(scenario, 0) == [bytes.fromhex("c01122334455")]

    def test_rotation_deterministic_per_seed(self) -> None:
        assert device_macs(self.rotating(), 0) == device_macs(self.rotating(), 0)


class TestInverseConsistency:
    def test_waypoint_distances_recovered_noiselessly(self) -> None:
        # Distances of the form 10^(k/20) make tx - 20*log10(d) an integer,
        # so integer RSSI quantization introduces no error at the waypoints.
        steps = [0, 3, 7, 12, 20]
        raw = scenario_dict(duration_s=float(len(steps)))
        raw["devices"][0]["path"] = [
            [float(i), 10 ** (k / 20)] for i, k in enumerate(steps)
        ]
        events = generate_events(load_scenario(raw))
        assert len(events) == len(steps)
        for event, k in zip(events, steps):
            expected = 10 ** (k / 20)
            recovered = estimate_distance(event.rssi, -59.0)
            assert abs(recovered - expected) / expected < 1e-9
