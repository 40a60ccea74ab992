"""GATT model, rule-based fingerprinting, and enumeration coordination.

Evidence soundness is checked by re-evaluating every fired rule's conditions
against the record, independent of the fingerprint function's own walk.
"""

import time

import pytest

from btlemap.dissect import lookup_company
from btlemap.gatt import (
    BASE_UUID_SUFFIX,
    EnumerationCoordinator,
    Fingerprint,
    GattCharacteristic,
    GattService,
    NoAgentOnline,
    UnknownDevice,
    canonical_uuid,
    device_name_from_services,
    fingerprint,
    load_rules,
)
from btlemap.store import (
    AddressType,
    DeviceStore,
    PduType,
    RawAdvertisement,
    StoreConfig,
)

MAC_A = bytes.fromhex("C0A1B2C3D4E5")
FLAGS = bytes([2, 0x01, 0x06])
# Proximity Pairing message for AirPods (model id 0x0220 at its fixed spot).
AIRPODS = bytes.fromhex("0EFF4C000709010220AABBCCDDEE55")
NEARBY = bytes.fromhex("08FF4C0010030120AA")
GENERIC_MSD = bytes.fromhex("07FFFFFF11223344")


def adv(timestamp_us: int, payload: bytes,
        mac: bytes = MAC_A) -> RawAdvertisement:
    return RawAdvertisement(
        timestamp_us=timestamp_us,
        source_id="test",
        mac=mac,
        address_type=AddressType.RANDOM,
        pdu_type=PduType.ADV_IND,
        rssi=-50,
        payload=payload,
        channel=37,
    )


def name_service(name: str) -> GattService:
    return GattService(
        uuid="1800",
        characteristics=(
            GattCharacteristic(
                uuid="2a00",
                properties=frozenset({"read"}),
                value=name.encode(),
            ),
        ),
    )


class TestCanonicalUuid:
    def test_sixteen_bit_forms_agree(self) -> None:
        expected = "0000180f" + BASE_UUID_SUFFIX
        assert canonical_uuid(0x180F) == expected
        assert canonical_uuid("180F") == expected
        assert canonical_uuid("0x180f") == expected
        assert canonical_uuid(expected) == expected

    def test_thirty_two_bit(self) -> None:
        assert canonical_uuid(0x12345678) == (
            "12345678" + BASE_UUID_SUFFIX
        )
        assert canonical_uuid("12345678") == "12345678" + BASE_UUID_SUFFIX

    def test_full_uuid_passthrough_lowercases(self) -> None:
        mixed = "6E400001-B5A3-F393-E0A9-E50E24DCCA9E"
        assert canonical_uuid(mixed) == mixed.lower()

    def test_rejects_garbage(self) -> None:
        for bad in ("xyz", "12", "0x123", -1, 0x1_0000_0000):
            with pytest.raises(ValueError):
                canonical_uuid(bad)


class TestGattTypes:
    def test_characteristic_rejects_unknown_property(self) -> None:
        with pytest.raises(ValueError):
            GattCharacteristic(uuid="2a00",
                               properties=frozenset({"levitate"}))

    def test_service_json_round_trip(self) -> None:
        service = name_service("Kitchen Speaker")
        restored = GattService.from_json_dict(service.to_json_dict())
        assert restored == service

    def test_device_name_extraction(self) -> None:
        assert device_name_from_services(
            (name_service("Kitchen Speaker"),)
        ) == "Kitchen Speaker"
        assert device_name_from_services(()) is None
        unreadable = GattService(
            uuid="1800",
            characteristics=(GattCharacteristic(uuid="2a00"),),
        )
        assert device_name_from_services((unreadable,)) is None

    def test_fingerprint_requires_evidence_for_fields(self) -> None:
        with pytest.raises(ValueError):
            Fingerprint(manufacturer="Acme", evidence=())
        Fingerprint(manufacturer="Acme", evidence=("some-rule",))
        Fingerprint()


def record_with(store: DeviceStore, *advs: RawAdvertisement):
    device_id = None
    for a in advs:
        device_id, _ = store.ingest(a)
    return store, device_id


class TestFingerprint:
    def test_airpods_rule_fires(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, AIRPODS))
        summary = store.device_summary(device_id)
        fp = summary["fingerprint"]
        assert fp["manufacturer"] == "Apple, Inc."
        assert fp["device_type"] == "earphones"
        assert "apple-earphones" in fp["evidence"]

    def test_empty_record_has_no_fields(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        fp = store.device_summary(device_id)["fingerprint"]
        assert fp["manufacturer"] is None
        assert fp["device_type"] is None
        assert fp["model"] is None
        assert fp["evidence"] == []

    def test_name_only_record(self) -> None:
        payload = FLAGS + bytes([4, 0x09]) + b"ABC"
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, payload))
        summary = store.device_summary(device_id)
        assert summary["name"] == "ABC"
        assert summary["fingerprint"]["manufacturer"] is None

    def test_known_company_sets_manufacturer(self) -> None:
        # Company 0x0006 is Microsoft in the shipped registry.
        payload = bytes.fromhex("07FF060011223344")
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, payload))
        fp = store.device_summary(device_id)["fingerprint"]
        assert fp["manufacturer"] == lookup_company(0x0006)
        assert "known-company" in fp["evidence"]

    def test_service_rules_fire_after_enumeration(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        store.store_gatt_result(
            device_id,
            (GattService(uuid="180d"), GattService(uuid="180f")),
        )
        fp = store.device_summary(device_id)["fingerprint"]
        assert fp["device_type"] == "heart rate monitor"
        assert "battery-service" in fp["evidence"]

    def test_renamed_device_flagged(self) -> None:
        advertised = FLAGS + bytes([8, 0x09]) + b"Speaker"
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, advertised))
        store.store_gatt_result(device_id, (name_service("Jana's Phone"),))
        detail = store.device_detail(device_id)
        assert detail["advertised_name"] == "Speaker"
        assert detail["gatt_name"] == "Jana's Phone"
        assert "renamed-device" in detail["fingerprint"]["evidence"]

    def test_identical_names_not_flagged(self) -> None:
        advertised = FLAGS + bytes([8, 0x09]) + b"Speaker"
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, advertised))
        store.store_gatt_result(device_id, (name_service("Speaker"),))
        fp = store.device_summary(device_id)["fingerprint"]
        assert "renamed-device" not in fp["evidence"]

    def test_deterministic_for_same_record(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, AIRPODS))
        record = store._devices[device_id]
        assert fingerprint(record) == fingerprint(record)

    def test_evidence_soundness_by_re_evaluation(self) -> None:
        """Every fired rule must hold on the record, and every set field must
        be assigned by some fired rule."""
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, AIRPODS + NEARBY))
        store.store_gatt_result(device_id, (GattService(uuid="180f"),))
        record = store._devices[device_id]
        fp = record.fingerprint
        assert fp is not None and fp.evidence

        rules_by_name = {rule.name: rule for rule in load_rules()}
        service_uuids = {s.uuid for s in record.gatt_services}
        for name in fp.evidence:
            rule = rules_by_name[name]
            for key, want in rule.conditions.items():
                if key == "company_id":
                    assert int(want, 16) in record.company_ids
                elif key == "company_id_known":
                    assert bool(want) == any(
                        lookup_company(c) for c in record.company_ids
                    )
                elif key == "continuity_type":
                    assert int(want, 16) in record.continuity_types
                elif key == "service_uuid":
                    assert canonical_uuid(want) in service_uuids
                elif key == "name_substring":
                    assert want.lower() in (record.display_name or "").lower()
                elif key == "gatt_name_differs_from_adv_name":
                    differs = (
                        record.gatt_name is not None
                        and record.advertised_name is not None
                        and record.gatt_name != record.advertised_name
                    )
                    assert differs == bool(want)
                else:
                    raise AssertionError(f"unchecked condition key {key}")

        fired_sets = [
            rules_by_name[name].sets for name in fp.evidence
        ]
        for field in ("manufacturer", "device_type", "model"):
            if getattr(fp, field) is not None:
                assert any(field in sets for sets in fired_sets)


class TestStoreGattResults:
    def test_second_result_replaces_first(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        store.store_gatt_result(device_id, (GattService(uuid="180d"),))
        store.store_gatt_result(device_id, (GattService(uuid="1812"),))
        services = store.device_detail(device_id)["gatt_services"]
        assert [s["uuid"] for s in services] == [canonical_uuid(0x1812)]

    def test_name_applied_from_device_name_characteristic(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        store.store_gatt_result(device_id, (name_service("Kitchen Speaker"),))
        assert store.device_summary(device_id)["name"] == "Kitchen Speaker"

    def test_result_clears_failure_mark(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        store.mark_enumeration_failed(device_id, at_us=5)
        assert store.device_detail(device_id)["enumeration_failed_at_us"] == 5
        store.store_gatt_result(device_id, ())
        assert store.device_detail(device_id)[
            "enumeration_failed_at_us"
        ] is None

    def test_unknown_device_raises(self) -> None:
        store = DeviceStore(StoreConfig())
        with pytest.raises(UnknownDevice):
            store.store_gatt_result("ghost", ())
        with pytest.raises(UnknownDevice):
            store.current_mac("ghost")


class TestEnumerationCoordinator:
    def test_no_agent_online_propagates_immediately(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))

        def refuse(mac: bytes) -> None:
            raise NoAgentOnline("nobody")

        coordinator = EnumerationCoordinator(store, refuse)
        with pytest.raises(NoAgentOnline):
            coordinator.request(device_id)
        # A refused dispatch leaves nothing pending.
        assert coordinator.pending_devices() == set()
        coordinator.shutdown()

    def test_unknown_device_propagates(self) -> None:
        store = DeviceStore(StoreConfig())
        coordinator = EnumerationCoordinator(store, lambda mac: None)
        with pytest.raises(UnknownDevice):
            coordinator.request("ghost")
        coordinator.shutdown()

    def test_pending_requests_coalesce(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        sent: list[bytes] = []
        coordinator = EnumerationCoordinator(store, sent.append,
                                             timeout_s=60)
        assert coordinator.request(device_id) is True
        assert coordinator.request(device_id) is False
        assert sent == [MAC_A]
        coordinator.shutdown()

    def test_result_resolves_request(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        coordinator = EnumerationCoordinator(store, lambda mac: None,
                                             timeout_s=60)
        coordinator.request(device_id)
        resolved = coordinator.on_result(
            MAC_A, (name_service("Kitchen Speaker"),)
        )
        assert resolved == device_id
        assert coordinator.pending_devices() == set()
        assert store.device_summary(device_id)["name"] == "Kitchen Speaker"
        # A second request is allowed once the first resolved.
        assert coordinator.request(device_id) is True
        coordinator.shutdown()

    def test_result_for_unknown_mac_returns_none(self) -> None:
        store = DeviceStore(StoreConfig())
        coordinator = EnumerationCoordinator(store, lambda mac: None)
        assert coordinator.on_result(bytes(6), ()) is None
        coordinator.shutdown()

    def test_timeout_marks_device_failed(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        coordinator = EnumerationCoordinator(store, lambda mac: None,
                                             timeout_s=0.05)
        coordinator.request(device_id)
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:
            if store.device_detail(device_id)["enumeration_failed_at_us"]:
                break
            time.sleep(0.01)
        assert store.device_detail(device_id)[
            "enumeration_failed_at_us"
        ] is not None
        assert coordinator.pending_devices() == set()
        coordinator.shutdown()

    def test_unsolicited_result_still_stored(self) -> None:
        store = DeviceStore(StoreConfig())
        device_id, _ = store.ingest(adv(0, FLAGS))
        coordinator = EnumerationCoordinator(store, lambda mac: None)
        assert coordinator.on_result(MAC_A, (GattService(uuid="180f"),)) == (
            device_id
        )
        services = store.device_detail(device_id)["gatt_services"]
        assert len(services) == 1
        coordinator.shutdown()
