"""Central device store.

Attributes every advertisement to one stable device record across MAC
rotations, keeps ring-buffered history, answers filtered queries, exports
RSSI history as CSV, and fans events out to subscribers.

Concurrency: single-writer semantics via one lock around all mutation;
queries copy data out under the lock so readers never observe torn state.
Event delivery is synchronous with ingest — a subscriber that drains its
queue after an ingest returns sees every event that ingest produced.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import queue
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from btlemap import gatt as gatt_mod
from btlemap.gatt import UnknownDevice
from btlemap import proximity
from btlemap.dissect import (
    APPLE_COMPANY_ID,
    AdStructure,
    DissectionNode,
    dissect,
    dissect_apple,
    extract_tx_power,
    lookup_company,
    parse_ad_structures,
)
from btlemap.dissect.continuity import MSG_PROXIMITY_PAIRING, message_name
from btlemap.dissect.gap import (
    AD_MANUFACTURER_DATA,
    AD_NAME_COMPLETE,
    AD_NAME_SHORT,
    MAX_PAYLOAD_LEN,
    ad_type_name,
)

RSSI_MIN = -127
RSSI_MAX = 20
ADV_CHANNELS = frozenset({37, 38, 39})

EVENT_DEVICE_APPEARED = "device_appeared"
EVENT_DEVICE_UPDATED = "device_updated"
EVENT_RSSI_SAMPLE = "rssi_sample"
EVENT_GATT_RESULT = "gatt_result"
EVENT_AGENT_STATUS = "agent_status"


class InvalidAdvertisement(ValueError):
    """Advertisement violates a field invariant; nothing is stored."""


class AddressType(str, enum.Enum):
    PUBLIC = "public"
    RANDOM = "random"


class PduType(str, enum.Enum):
    ADV_IND = "ADV_IND"
    ADV_DIRECT_IND = "ADV_DIRECT_IND"
    ADV_NONCONN_IND = "ADV_NONCONN_IND"
    ADV_SCAN_IND = "ADV_SCAN_IND"
    SCAN_RSP = "SCAN_RSP"


def mac_str(mac: bytes) -> str:
    return ":".join(f"{b:02x}" for b in mac)


def parse_mac(text: str) -> bytes:
    parts = text.split(":")
    if len(parts) != 6:
        raise ValueError(f"not a MAC address: {text!r}")
    return bytes(int(p, 16) for p in parts)


@dataclass(frozen=True)
class RawAdvertisement:
    timestamp_us: int
    source_id: str
    mac: bytes
    address_type: AddressType
    pdu_type: PduType
    rssi: int
    payload: bytes
    channel: int | None = None

    def __post_init__(self) -> None:
        if len(self.mac) != 6:
            raise InvalidAdvertisement(f"mac must be 6 bytes, got {len(self.mac)}")
        if not RSSI_MIN <= self.rssi <= RSSI_MAX:
            raise InvalidAdvertisement(f"rssi out of range: {self.rssi}")
        if len(self.payload) > MAX_PAYLOAD_LEN:
            raise InvalidAdvertisement(f"payload too long: {len(self.payload)} bytes")
        if self.channel is not None and self.channel not in ADV_CHANNELS:
            raise InvalidAdvertisement(f"not an advertising channel: {self.channel}")
        if not isinstance(self.address_type, AddressType):
            raise InvalidAdvertisement(f"bad address_type: {self.address_type!r}")
        if not isinstance(self.pdu_type, PduType):
            raise InvalidAdvertisement(f"bad pdu_type: {self.pdu_type!r}")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "timestamp_us": self.timestamp_us,
            "source_id": self.source_id,
            "mac": mac_str(self.mac),
            "address_type": self.address_type.value,
            "pdu_type": self.pdu_type.value,
            "rssi": self.rssi,
            "payload_hex": self.payload.hex(),
            "channel": self.channel,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "RawAdvertisement":
        try:
            return cls(
                timestamp_us=int(data["timestamp_us"]),
                source_id=str(data["source_id"]),
                mac=parse_mac(data["mac"]),
                address_type=AddressType(data["address_type"]),
                pdu_type=PduType(data["pdu_type"]),
                rssi=int(data["rssi"]),
                payload=bytes.fromhex(data["payload_hex"]),
                channel=data.get("channel"),
            )
        except InvalidAdvertisement:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidAdvertisement(str(exc)) from exc


@dataclass
class MacSighting:
    mac: bytes
    first_seen_us: int
    last_seen_us: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "mac": mac_str(self.mac),
            "first_seen_us": self.first_seen_us,
            "last_seen_us": self.last_seen_us,
        }


@dataclass(frozen=True)
class RssiSample:
    device_id: str
    timestamp_us: int
    rssi: int
    source_id: str

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "device_id": self.device_id,
            "timestamp_us": self.timestamp_us,
            "rssi": self.rssi,
            "source_id": self.source_id,
        }


@dataclass(frozen=True)
class TrackabilityFinding:
    field_descriptor: str
    constant_value: bytes
    distinct_macs_observed: int
    first_seen_us: int
    last_seen_us: int

    def __post_init__(self) -> None:
        if self.distinct_macs_observed < 2:
            raise ValueError("a trackable field needs at least 2 distinct MACs")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "field_descriptor": self.field_descriptor,
            "constant_value_hex": self.constant_value.hex(),
            "distinct_macs_observed": self.distinct_macs_observed,
            "first_seen_us": self.first_seen_us,
            "last_seen_us": self.last_seen_us,
        }


@dataclass(frozen=True)
class DeviceFilter:
    manufacturer: str | None = None
    min_rssi: int | None = None
    active_within_s: float | None = None
    name_substring: str | None = None


@dataclass(frozen=True)
class StoreConfig:
    mac_ttl_s: float = 15 * 60.0
    link_window_s: float = 60.0
    ring_capacity: int = 10_000
    recent_window_s: float = 10.0
    ewma_alpha: float = 0.3  # matches PathLossConfig.ewma_alpha

    def __post_init__(self) -> None:
        if self.ring_capacity <= 0:
            raise ValueError("ring_capacity must be positive")
        if not 0 < self.ewma_alpha <= 1:
            raise ValueError("ewma_alpha must be in (0, 1]")


@dataclass(frozen=True)
class StoredAdvertisement:
    """Advertisement plus everything derived from it exactly once."""

    adv: RawAdvertisement
    seq: int
    tree: DissectionNode
    fields: dict[str, bytes]


@dataclass
class DeviceRecord:
    device_id: str
    macs: list[MacSighting] = field(default_factory=list)
    advertisements: deque[StoredAdvertisement] = field(default_factory=deque)
    rssi_samples: deque[RssiSample] = field(default_factory=deque)
    advertised_name: str | None = None
    advertised_name_complete: bool = False
    gatt_name: str | None = None
    manufacturer: str | None = None
    company_ids: set[int] = field(default_factory=set)
    continuity_types: set[int] = field(default_factory=set)
    continuity_model: str | None = None
    tx_power: int | None = None
    last_rssi: int | None = None
    smoothed_rssi: float | None = None
    gatt_services: tuple[gatt_mod.GattService, ...] = ()
    fingerprint: gatt_mod.Fingerprint | None = None
    enumeration_failed_at_us: int | None = None

    @property
    def display_name(self) -> str | None:
        return self.gatt_name or self.advertised_name

    @property
    def first_seen_us(self) -> int:
        return min(m.first_seen_us for m in self.macs)

    @property
    def last_seen_us(self) -> int:
        return max(m.last_seen_us for m in self.macs)

    @property
    def current_mac(self) -> bytes:
        return max(self.macs, key=lambda m: m.last_seen_us).mac


class SubscriptionLagged(Exception):
    """The subscriber fell more than a full buffer behind and was cut off."""


class Subscription:
    """Ordered per-subscriber event buffer with a hard capacity.

    Overflow marks the subscription lagged; the next poll raises instead of
    silently skipping events, so consumers know to resynchronize.
    """

    def __init__(self, store: "DeviceStore", capacity: int = 1000) -> None:
        self._store = store
        self._queue: queue.Queue[StoreEvent] = queue.Queue(maxsize=capacity)
        self._lagged = threading.Event()

    def _offer(self, event: "StoreEvent") -> None:
        if self._lagged.is_set():
            return
        try:
            self._queue.put_nowait(event)
        except queue.Full:
            self._lagged.set()

    def poll(self, timeout: float | None = None) -> "StoreEvent | None":
        """Next event, or None on timeout; raises SubscriptionLagged after
        overflow."""
        if self._lagged.is_set():
            raise SubscriptionLagged
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            if self._lagged.is_set():
                raise SubscriptionLagged from None
            return None

    def close(self) -> None:
        self._store.unsubscribe(self)


@dataclass(frozen=True)
class StoreEvent:
    kind: str
    body: dict[str, Any]


class DeviceStore:
    def __init__(
        self,
        config: StoreConfig | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.config = config or StoreConfig()
        self._clock = clock
        self._lock = threading.RLock()
        self._devices: dict[str, DeviceRecord] = {}
        self._mac_owner: dict[bytes, tuple[str, int]] = {}  # mac -> (device, last ts)
        self._next_index = 0
        self._next_seq = 0
        self._subscribers: list[Subscription] = []
        self.total_ingested = 0

    def now_us(self) -> int:
        return int(self._clock() * 1_000_000)

    # -- event fan-out ----------------------------------------------------

    def subscribe(self, capacity: int = 1000) -> Subscription:
        sub = Subscription(self, capacity)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def _publish(self, events: Iterable[StoreEvent]) -> None:
        for event in events:
            for sub in self._subscribers:
                sub._offer(event)

    # -- ingest -----------------------------------------------------------

    def ingest(self, adv: RawAdvertisement) -> tuple[str, list[StoreEvent]]:
        if not isinstance(adv, RawAdvertisement):
            raise InvalidAdvertisement(f"not an advertisement: {type(adv).__name__}")
        with self._lock:
            device_id = self.match_device(adv)
            created = device_id is None
            if created:
                device_id = f"dev-{self._next_index}"
                self._next_index += 1
                record = DeviceRecord(device_id=device_id)
                record.advertisements = deque(maxlen=self.config.ring_capacity)
                record.rssi_samples = deque(maxlen=self.config.ring_capacity)
                self._devices[device_id] = record
            else:
                record = self._devices[device_id]

            self._apply_advertisement(record, adv)
            self.total_ingested += 1

            sample = RssiSample(
                device_id=device_id,
                timestamp_us=adv.timestamp_us,
                rssi=adv.rssi,
                source_id=adv.source_id,
            )
            record.rssi_samples.append(sample)

            events = [
                StoreEvent(
                    EVENT_DEVICE_APPEARED if created else EVENT_DEVICE_UPDATED,
                    self._summary(record),
                ),
                StoreEvent(EVENT_RSSI_SAMPLE, sample.to_json_dict()),
            ]
            self._publish(events)
            return device_id, events

    def match_device(self, adv: RawAdvertisement) -> str | None:
        """Attribution precedence: exact MAC within the TTL, then identical
        recent manufacturer-data payload, then nothing."""
        with self._lock:
            owner = self._mac_owner.get(adv.mac)
            if owner is not None:
                device_id, last_seen = owner
                if adv.timestamp_us - last_seen <= self.config.mac_ttl_s * 1e6:
                    return device_id

            adv_msd = self._msd_values(adv.payload)
            if not adv_msd:
                return None
            window_us = self.config.link_window_s * 1e6
            best: tuple[int, str] | None = None
            for device_id, record in self._devices.items():
                if not record.advertisements:
                    continue
                last = record.advertisements[-1]
                if adv.timestamp_us - last.adv.timestamp_us > window_us:
                    continue
                last_msd = self._msd_values(last.adv.payload)
                linkable = {v for v in adv_msd & last_msd if len(v) >= 4}
                if not linkable:
                    continue
                key = (last.adv.timestamp_us, device_id)
                if best is None or key > best:
                    best = key
            return best[1] if best else None

    @staticmethod
    def _msd_values(payload: bytes) -> set[bytes]:
        structures, _ = parse_ad_structures(payload)
        return {s.value for s in structures if s.ad_type == AD_MANUFACTURER_DATA}

    def _apply_advertisement(self, record: DeviceRecord, adv: RawAdvertisement) -> None:
        for sighting in record.macs:
            if sighting.mac == adv.mac:
                sighting.last_seen_us = max(sighting.last_seen_us, adv.timestamp_us)
                break
        else:
            record.macs.append(
                MacSighting(adv.mac, adv.timestamp_us, adv.timestamp_us)
            )
        self._mac_owner[adv.mac] = (record.device_id, adv.timestamp_us)

        structures, _trailing = parse_ad_structures(adv.payload)
        stored = StoredAdvertisement(
            adv=adv,
            seq=self._next_seq,
            tree=dissect(adv.payload),
            fields=extract_trackable_fields(adv.payload),
        )
        self._next_seq += 1
        record.advertisements.append(stored)

        self._absorb_structures(record, structures)
        record.last_rssi = adv.rssi
        record.smoothed_rssi = proximity.smooth_rssi(
            record.smoothed_rssi, adv.rssi, self.config.ewma_alpha
        )
        record.fingerprint = gatt_mod.fingerprint(record)
        if record.fingerprint.manufacturer and not record.manufacturer:
            record.manufacturer = record.fingerprint.manufacturer

    def _absorb_structures(
        self, record: DeviceRecord, structures: list[AdStructure]
    ) -> None:
        for s in structures:
            if s.ad_type == AD_NAME_COMPLETE:
                record.advertised_name = s.value.decode("utf-8", errors="replace")
                record.advertised_name_complete = True
            elif s.ad_type == AD_NAME_SHORT and not record.advertised_name_complete:
                record.advertised_name = s.value.decode("utf-8", errors="replace")
            elif s.ad_type == AD_MANUFACTURER_DATA and len(s.value) >= 2:
                cid = int.from_bytes(s.value[:2], "little")
                record.company_ids.add(cid)
                name = lookup_company(cid)
                if name:
                    record.manufacturer = name
                if cid == APPLE_COMPANY_ID:
                    for msg in dissect_apple(s.value[2:]):
                        if msg.truncated:
                            continue
                        record.continuity_types.add(msg.message_type)
                        if msg.message_type == MSG_PROXIMITY_PAIRING:
                            model = msg.decoded_fields.get("model")
                            if model:
                                record.continuity_model = model
        tx = extract_tx_power(structures)
        if tx is not None:
            record.tx_power = tx

    # -- trackability -----------------------------------------------------

    def detect_trackable(self, device_id: str) -> list[TrackabilityFinding]:
        """Fields whose bytes stayed constant across ≥ 2 distinct MACs."""
        with self._lock:
            record = self._record(device_id)
            per_field: dict[str, tuple[set[bytes], set[bytes], int, int]] = {}
            for stored in record.advertisements:
                for descriptor, value in stored.fields.items():
                    if descriptor not in per_field:
                        per_field[descriptor] = (
                            {value},
                            {stored.adv.mac},
                            stored.adv.timestamp_us,
                            stored.adv.timestamp_us,
                        )
                    else:
                        values, macs, first, last = per_field[descriptor]
                        values.add(value)
                        macs.add(stored.adv.mac)
                        per_field[descriptor] = (
                            values,
                            macs,
                            min(first, stored.adv.timestamp_us),
                            max(last, stored.adv.timestamp_us),
                        )
            findings = [
                TrackabilityFinding(
                    field_descriptor=descriptor,
                    constant_value=next(iter(values)),
                    distinct_macs_observed=len(macs),
                    first_seen_us=first,
                    last_seen_us=last,
                )
                for descriptor, (values, macs, first, last) in per_field.items()
                if len(values) == 1 and len(macs) >= 2
            ]
            findings.sort(key=lambda f: (-f.distinct_macs_observed, f.field_descriptor))
            return findings

    # -- queries ----------------------------------------------------------

    def _record(self, device_id: str) -> DeviceRecord:
        try:
            return self._devices[device_id]
        except KeyError:
            raise UnknownDevice(device_id) from None

    def device_ids(self) -> list[str]:
        with self._lock:
            return list(self._devices)

    def device_count(self) -> int:
        with self._lock:
            return len(self._devices)

    def query(
        self,
        device_filter: DeviceFilter | None = None,
        now_us: int | None = None,
    ) -> list[dict[str, Any]]:
        """Summaries of matching devices, most recently active first."""
        f = device_filter or DeviceFilter()
        if now_us is None:
            now_us = self.now_us()
        with self._lock:
            matches = [
                self._summary(r)
                for r in self._devices.values()
                if self._matches(r, f, now_us)
            ]
        matches.sort(key=lambda s: -s["last_seen_us"])
        return matches

    def _matches(self, record: DeviceRecord, f: DeviceFilter, now_us: int) -> bool:
        if f.manufacturer is not None and record.manufacturer != f.manufacturer:
            return False
        if f.min_rssi is not None and (
            record.last_rssi is None or record.last_rssi < f.min_rssi
        ):
            return False
        if f.active_within_s is not None and (
            now_us - record.last_seen_us > f.active_within_s * 1e6
        ):
            return False
        if f.name_substring is not None:
            name = record.display_name or ""
            if f.name_substring.lower() not in name.lower():
                return False
        return True

    def _summary(self, record: DeviceRecord) -> dict[str, Any]:
        return {
            "device_id": record.device_id,
            "name": record.display_name,
            "manufacturer": record.manufacturer,
            "fingerprint": (
                record.fingerprint.to_json_dict() if record.fingerprint else None
            ),
            "current_mac": mac_str(record.current_mac),
            "mac_count": len(record.macs),
            "first_seen_us": record.first_seen_us,
            "last_seen_us": record.last_seen_us,
            "last_rssi": record.last_rssi,
            "smoothed_rssi": record.smoothed_rssi,
            "tx_power": record.tx_power,
            "adv_count": len(record.advertisements),
            "gatt_service_count": len(record.gatt_services),
        }

    def device_summary(self, device_id: str) -> dict[str, Any]:
        with self._lock:
            return self._summary(self._record(device_id))

    def device_detail(self, device_id: str, adv_limit: int = 50) -> dict[str, Any]:
        """Full record view; advertisement history capped at adv_limit entries
        (newest last) to bound response size."""
        with self._lock:
            record = self._record(device_id)
            detail = self._summary(record)
            recent = list(record.advertisements)[-adv_limit:] if adv_limit else []
            detail.update(
                {
                    "macs": [m.to_json_dict() for m in record.macs],
                    "gatt_services": [s.to_json_dict() for s in record.gatt_services],
                    "advertised_name": record.advertised_name,
                    "gatt_name": record.gatt_name,
                    "enumeration_failed_at_us": record.enumeration_failed_at_us,
                    "trackable_fields": [
                        f.to_json_dict() for f in self.detect_trackable(device_id)
                    ],
                    "advertisements": [
                        dict(sa.adv.to_json_dict(), tree=sa.tree.to_dict())
                        for sa in recent
                    ],
                }
            )
            return detail

    def recent_devices(
        self, now_us: int | None = None, window_s: float | None = None
    ) -> set[str]:
        if now_us is None:
            now_us = self.now_us()
        if window_s is None:
            window_s = self.config.recent_window_s
        if window_s <= 0:
            raise ValueError("window must be positive")
        cutoff = now_us - window_s * 1e6
        with self._lock:
            return {
                device_id
                for device_id, r in self._devices.items()
                if r.macs and r.last_seen_us >= cutoff
            }

    def find_device_by_mac(self, mac: bytes) -> str | None:
        with self._lock:
            owner = self._mac_owner.get(mac)
            return owner[0] if owner else None

    def current_mac(self, device_id: str) -> bytes:
        with self._lock:
            return self._record(device_id).current_mac

    # -- GATT results -----------------------------------------------------

    def store_gatt_result(
        self, device_id: str, services: tuple[gatt_mod.GattService, ...]
    ) -> None:
        """Replace (not append) the device's service list and refresh the
        fingerprint and GATT-sourced name."""
        with self._lock:
            record = self._record(device_id)
            record.gatt_services = tuple(services)
            record.enumeration_failed_at_us = None
            name = gatt_mod.device_name_from_services(record.gatt_services)
            if name is not None:
                record.gatt_name = name
            record.fingerprint = gatt_mod.fingerprint(record)
            if record.fingerprint.manufacturer and not record.manufacturer:
                record.manufacturer = record.fingerprint.manufacturer
            events = [
                StoreEvent(
                    EVENT_GATT_RESULT,
                    {
                        "device_id": device_id,
                        "services": [s.to_json_dict() for s in record.gatt_services],
                    },
                ),
                StoreEvent(EVENT_DEVICE_UPDATED, self._summary(record)),
            ]
            self._publish(events)

    def mark_enumeration_failed(self, device_id: str, at_us: int | None = None) -> None:
        with self._lock:
            record = self._record(device_id)
            record.enumeration_failed_at_us = (
                at_us if at_us is not None else self.now_us()
            )
            self._publish([StoreEvent(EVENT_DEVICE_UPDATED, self._summary(record))])

    def emit_agent_status(
        self, agent: str, online: bool, reason: str | None = None
    ) -> None:
        body: dict[str, Any] = {"agent": agent, "online": online}
        if reason:
            body["reason"] = reason
        with self._lock:
            self._publish([StoreEvent(EVENT_AGENT_STATUS, body)])

    # -- exports ----------------------------------------------------------

    def export_rssi_csv(
        self,
        device_ids: set[str] | None = None,
        time_range: tuple[int, int] | None = None,
    ) -> bytes:
        """RSSI history as RFC-4180 CSV (UTF-8, LF), ordered by timestamp
        then device id; time_range bounds are inclusive."""
        with self._lock:
            samples = [
                s
                for r in self._devices.values()
                for s in r.rssi_samples
                if (device_ids is None or s.device_id in device_ids)
                and (
                    time_range is None
                    or time_range[0] <= s.timestamp_us <= time_range[1]
                )
            ]
        samples.sort(key=lambda s: (s.timestamp_us, s.device_id))
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["device_id", "timestamp_us", "rssi_dbm", "source_id"])
        for s in samples:
            writer.writerow([s.device_id, s.timestamp_us, s.rssi, s.source_id])
        return out.getvalue().encode("utf-8")

    def all_advertisements(self) -> list[RawAdvertisement]:
        """Every stored advertisement in timestamp order (ingest order as the
        tie-break)."""
        with self._lock:
            stored = [
                sa for r in self._devices.values() for sa in r.advertisements
            ]
        stored.sort(key=lambda sa: (sa.adv.timestamp_us, sa.seq))
        return [sa.adv for sa in stored]

    def partition_hash(self) -> str:
        """Digest of the advertisement-to-device partition.

        Covers device identity plus each advertisement's timing, MAC, RSSI,
        channel, and payload — but not source names, so the same capture
        ingested from different sources hashes identically.
        """
        h = hashlib.sha256()
        with self._lock:
            for device_id, record in self._devices.items():
                h.update(device_id.encode())
                for sa in record.advertisements:
                    adv = sa.adv
                    h.update(struct.pack("<q", adv.timestamp_us))
                    h.update(adv.mac)
                    h.update(struct.pack("<b", adv.rssi))
                    h.update(bytes([adv.channel or 0]))
                    h.update(bytes([len(adv.payload)]))
                    h.update(adv.payload)
        return h.hexdigest()


def extract_trackable_fields(payload: bytes) -> dict[str, bytes]:
    """Byte fields a device exposes for cross-MAC comparison.

    One entry per AD structure, except that an Apple manufacturer structure
    is replaced by its individual vendor messages: each complete message
    contributes its payload under the message name, which is what stays
    constant when only the MAC rotates.  Duplicate descriptors get ordinal
    suffixes so repeated structure types stay distinguishable.
    """
    structures, _ = parse_ad_structures(payload)
    fields: dict[str, bytes] = {}

    def put(base: str, value: bytes) -> None:
        key = base
        ordinal = 2
        while key in fields:
            key = f"{base} #{ordinal}"
            ordinal += 1
        fields[key] = value

    for s in structures:
        if (
            s.ad_type == AD_MANUFACTURER_DATA
            and len(s.value) >= 2
            and int.from_bytes(s.value[:2], "little") == APPLE_COMPANY_ID
        ):
            messages = dissect_apple(s.value[2:])
            complete = [m for m in messages if not m.truncated]
            if complete:
                for msg in complete:
                    put(
                        f"Continuity 0x{msg.message_type:02X}"
                        f" ({message_name(msg.message_type)})",
                        msg.payload,
                    )
                continue
        put(f"AD 0x{s.ad_type:02X} ({ad_type_name(s.ad_type)})", s.value)
    return fields
