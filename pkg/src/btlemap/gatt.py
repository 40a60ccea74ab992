"""GATT result model, rule-based fingerprinting, and enumeration control.

Enumeration itself happens on an agent (or a simulated backend); this module
owns the result types, the canonical UUID form used for comparisons, the
fingerprint rule engine, and the coordinator that tracks outstanding
enumeration requests with a timeout.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from typing import TYPE_CHECKING, Any, Callable

from btlemap.dissect.company import lookup_company

if TYPE_CHECKING:
    from btlemap.store import DeviceRecord, DeviceStore

# All 16- and 32-bit UUIDs expand onto the Bluetooth base UUID.
BASE_UUID_SUFFIX = "-0000-1000-8000-00805f9b34fb"

CHARACTERISTIC_PROPERTIES = frozenset({"read", "write", "notify", "indicate"})

_UUID128_RE = re.compile(
    r"^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$"
)


def canonical_uuid(uuid: int | str) -> str:
    """Expand any accepted UUID form to lowercase 128-bit text.

    Accepts an integer (16 or 32 bit), short hex text like ``180F`` or
    ``0x180F``, 8-digit hex, or full 128-bit text.
    """
    if isinstance(uuid, int):
        if not 0 <= uuid <= 0xFFFFFFFF:
            raise ValueError(f"uuid out of range: {uuid:#x}")
        return f"{uuid:08x}{BASE_UUID_SUFFIX}"
    text = uuid.strip().lower()
    if text.startswith("0x"):
        text = text[2:]
    if _UUID128_RE.fullmatch(text):
        return text
    if re.fullmatch(r"[0-9a-f]{4}([0-9a-f]{4})?", text):
        return f"{int(text, 16):08x}{BASE_UUID_SUFFIX}"
    raise ValueError(f"unrecognized uuid form: {uuid!r}")


DEVICE_NAME_CHARACTERISTIC = canonical_uuid(0x2A00)
BATTERY_SERVICE = canonical_uuid(0x180F)


@dataclass(frozen=True)
class GattCharacteristic:
    uuid: str
    properties: frozenset[str] = frozenset()
    value: bytes | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "uuid", canonical_uuid(self.uuid))
        props = frozenset(self.properties)
        unknown = props - CHARACTERISTIC_PROPERTIES
        if unknown:
            raise ValueError(f"unknown characteristic properties: {sorted(unknown)}")
        object.__setattr__(self, "properties", props)

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"uuid": self.uuid, "properties": sorted(self.properties)}
        if self.value is not None:
            out["value_hex"] = self.value.hex()
        return out

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "GattCharacteristic":
        value = data.get("value_hex")
        return cls(
            uuid=data["uuid"],
            properties=frozenset(data.get("properties", ())),
            value=bytes.fromhex(value) if value is not None else None,
        )


@dataclass(frozen=True)
class GattService:
    uuid: str
    characteristics: tuple[GattCharacteristic, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "uuid", canonical_uuid(self.uuid))
        object.__setattr__(self, "characteristics", tuple(self.characteristics))

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "uuid": self.uuid,
            "characteristics": [c.to_json_dict() for c in self.characteristics],
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "GattService":
        return cls(
            uuid=data["uuid"],
            characteristics=tuple(
                GattCharacteristic.from_json_dict(c)
                for c in data.get("characteristics", ())
            ),
        )


def device_name_from_services(services: tuple[GattService, ...]) -> str | None:
    """Value of the Device Name characteristic (0x2A00), if readable."""
    for service in services:
        for char in service.characteristics:
            if char.uuid == DEVICE_NAME_CHARACTERISTIC and char.value is not None:
                return char.value.decode("utf-8", errors="replace")
    return None


@dataclass(frozen=True)
class Fingerprint:
    manufacturer: str | None = None
    device_type: str | None = None
    model: str | None = None
    evidence: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if (
            any((self.manufacturer, self.device_type, self.model))
            and not self.evidence
        ):
            raise ValueError("fingerprint fields require evidence")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "manufacturer": self.manufacturer,
            "device_type": self.device_type,
            "model": self.model,
            "evidence": list(self.evidence),
        }


@dataclass(frozen=True)
class FingerprintRule:
    name: str
    conditions: dict[str, Any]
    sets: dict[str, str] = field(default_factory=dict)


_SETTABLE_FIELDS = ("manufacturer", "device_type", "model")
_CONDITION_KEYS = frozenset(
    {
        "company_id",
        "company_id_known",
        "continuity_type",
        "service_uuid",
        "name_substring",
        "gatt_name_differs_from_adv_name",
    }
)


def load_rules(path: str | None = None) -> list[FingerprintRule]:
    """Rule table from a JSON file; the shipped table when no path given."""
    if path is None:
        ref = resources.files("btlemap.data").joinpath("fingerprint_rules.json")
        raw = json.loads(ref.read_text(encoding="utf-8"))
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    if raw.get("version") != 1:
        raise ValueError(f"unsupported rule file version: {raw.get('version')!r}")
    rules = []
    for entry in raw["rules"]:
        unknown = set(entry["conditions"]) - _CONDITION_KEYS
        if unknown:
            raise ValueError(f"rule {entry['name']}: unknown conditions {sorted(unknown)}")
        bad_sets = set(entry.get("sets", {})) - set(_SETTABLE_FIELDS)
        if bad_sets:
            raise ValueError(f"rule {entry['name']}: unknown fields {sorted(bad_sets)}")
        rules.append(
            FingerprintRule(
                name=entry["name"],
                conditions=entry["conditions"],
                sets=entry.get("sets", {}),
            )
        )
    return rules


_default_rules: list[FingerprintRule] | None = None


def default_rules() -> list[FingerprintRule]:
    global _default_rules
    if _default_rules is None:
        _default_rules = load_rules()
    return _default_rules


def _rule_matches(rule: FingerprintRule, record: "DeviceRecord") -> bool:
    service_uuids = {s.uuid for s in record.gatt_services}
    for key, want in rule.conditions.items():
        if key == "company_id":
            if int(want, 16) not in record.company_ids:
                return False
        elif key == "company_id_known":
            known = any(lookup_company(cid) for cid in record.company_ids)
            if known != bool(want):
                return False
        elif key == "continuity_type":
            if int(want, 16) not in record.continuity_types:
                return False
        elif key == "service_uuid":
            if canonical_uuid(want) not in service_uuids:
                return False
        elif key == "name_substring":
            name = record.display_name or ""
            if want.lower() not in name.lower():
                return False
        elif key == "gatt_name_differs_from_adv_name":
            differs = (
                record.gatt_name is not None
                and record.advertised_name is not None
                and record.gatt_name != record.advertised_name
            )
            if differs != bool(want):
                return False
    return True


def _template_context(rule: FingerprintRule, record: "DeviceRecord") -> dict[str, str]:
    company_name = ""
    if "company_id" in rule.conditions:
        cid = int(rule.conditions["company_id"], 16)
        company_name = lookup_company(cid) or f"0x{cid:04X}"
    else:
        for cid in sorted(record.company_ids):
            name = lookup_company(cid)
            if name:
                company_name = name
                break
    return {
        "company_name": company_name,
        "continuity_model": record.continuity_model or "",
    }


def fingerprint(
    record: "DeviceRecord", rules: list[FingerprintRule] | None = None
) -> Fingerprint:
    """Evaluate the ordered rule table; first match per field wins.

    Every rule whose conditions hold lands in evidence, even when its field
    assignments were pre-empted by an earlier rule or it assigns nothing.
    """
    if rules is None:
        rules = default_rules()
    fields: dict[str, str | None] = {f: None for f in _SETTABLE_FIELDS}
    evidence: list[str] = []
    for rule in rules:
        if not _rule_matches(rule, record):
            continue
        evidence.append(rule.name)
        context = _template_context(rule, record)
        for field_name, template in rule.sets.items():
            if fields[field_name] is not None:
                continue
            value = template.format_map(context)
            if value:
                fields[field_name] = value
    return Fingerprint(
        manufacturer=fields["manufacturer"],
        device_type=fields["device_type"],
        model=fields["model"],
        evidence=tuple(evidence),
    )


class NoAgentOnline(RuntimeError):
    """Enumeration requested while no agent is connected."""


class UnknownDevice(KeyError):
    """Device id or MAC matches no stored record."""


class EnumerationCoordinator:
    """Tracks outstanding enumeration requests, one per device at most.

    ``send_request`` dispatches an EnumerateRequest for a MAC and raises
    NoAgentOnline when it cannot.  Results arrive via :meth:`on_result`,
    correlated by MAC; a device that stays silent past the timeout is marked
    failed on its record.
    """

    def __init__(
        self,
        store: "DeviceStore",
        send_request: Callable[[bytes], None],
        timeout_s: float = 30.0,
    ) -> None:
        self._store = store
        self._send = send_request
        self._timeout_s = timeout_s
        self._lock = threading.Lock()
        self._pending: dict[str, tuple[bytes, threading.Timer]] = {}

    def request(self, device_id: str) -> bool:
        """Dispatch an enumeration; False when one is already outstanding."""
        with self._lock:
            if device_id in self._pending:
                return False
            mac = self._store.current_mac(device_id)  # raises UnknownDevice
            self._send(mac)
            timer = threading.Timer(self._timeout_s, self._on_timeout, (device_id,))
            timer.daemon = True
            self._pending[device_id] = (mac, timer)
            timer.start()
            return True

    def pending_devices(self) -> set[str]:
        with self._lock:
            return set(self._pending)

    def on_result(self, mac: bytes, services: tuple[GattService, ...]) -> str | None:
        """Store an arrived result; returns the device id, or None when the
        MAC matches no known device."""
        device_id = self._store.find_device_by_mac(mac)
        if device_id is None:
            return None
        with self._lock:
            pending = self._pending.pop(device_id, None)
            if pending is not None:
                pending[1].cancel()
        self._store.store_gatt_result(device_id, services)
        return device_id

    def _on_timeout(self, device_id: str) -> None:
        with self._lock:
            if device_id not in self._pending:
                return
            del self._pending[device_id]
        self._store.mark_enumeration_failed(device_id)

    def shutdown(self) -> None:
        with self._lock:
            for _, timer in self._pending.values():
                timer.cancel()
            self._pending.clear()
