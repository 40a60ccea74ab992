"""Byte-ranged dissection trees.

Every node names a contiguous byte range of the payload; children nest
inside their parent without overlapping each other, and the top level covers
the payload completely (structures plus padding/garbage markers).  The tree
serializes to ``{label, offset, length, decoded?, children[]}`` for the CLI
renderer and the UI.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

from btlemap.dissect import continuity
from btlemap.dissect.company import APPLE_COMPANY_ID, lookup_company
from btlemap.dissect.gap import (
    AD_FLAGS,
    AD_MANUFACTURER_DATA,
    AD_NAME_COMPLETE,
    AD_NAME_SHORT,
    AD_SERVICE_DATA,
    AD_TX_POWER,
    AD_UUID16_COMPLETE,
    AD_UUID16_INCOMPLETE,
    AD_UUID32_COMPLETE,
    AD_UUID32_INCOMPLETE,
    AD_UUID128_COMPLETE,
    AD_UUID128_INCOMPLETE,
    AdStructure,
    _signed_byte,
    parse_ad_structures,
)

UNDECODED_LABEL = "undecoded"

FLAG_BIT_NAMES = (
    "LE Limited Discoverable Mode",
    "LE General Discoverable Mode",
    "BR/EDR Not Supported",
    "Simultaneous LE and BR/EDR (Controller)",
    "Simultaneous LE and BR/EDR (Host)",
)

# 16-bit service UUIDs worth naming in decode output.
SERVICE_UUID16_NAMES = {
    0x1800: "Generic Access",
    0x1801: "Generic Attribute",
    0x180A: "Device Information",
    0x180D: "Heart Rate",
    0x180F: "Battery Service",
    0x1812: "Human Interface Device",
    0x181A: "Environmental Sensing",
    0xFD6F: "Exposure Notification",
    0xFE9F: "Google",
    0xFEAA: "Eddystone",
}


@dataclass
class DissectionNode:
    """Labelled byte range with optional display text and nested children."""

    label: str
    offset: int
    length: int
    decoded: str | None = None
    children: list["DissectionNode"] = field(default_factory=list)

    @property
    def end(self) -> int:
        return self.offset + self.length

    def add(self, child: "DissectionNode") -> "DissectionNode":
        self.children.append(child)
        return child

    def walk(self) -> Iterator["DissectionNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def validate(self) -> None:
        """Check containment and sibling non-overlap for the whole subtree."""
        if self.length < 0:
            raise ValueError(f"{self.label}: negative length")
        prev_end = self.offset
        for child in self.children:
            if child.offset < self.offset or child.end > self.end:
                raise ValueError(
                    f"{child.label} [{child.offset},{child.end}) escapes "
                    f"{self.label} [{self.offset},{self.end})"
                )
            if child.offset < prev_end:
                raise ValueError(
                    f"{child.label} overlaps previous sibling at {child.offset}"
                )
            prev_end = child.end
            child.validate()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "label": self.label,
            "offset": self.offset,
            "length": self.length,
            "children": [c.to_dict() for c in self.children],
        }
        if self.decoded is not None:
            out["decoded"] = self.decoded
        return out

    def render_text(self, indent: int = 0) -> str:
        pad = "  " * indent
        head = f"{pad}{self.label} [{self.offset}:{self.end}]"
        if self.decoded is not None:
            head += f": {self.decoded}"
        lines = [head]
        lines.extend(c.render_text(indent + 1) for c in self.children)
        return "\n".join(lines)


def dissect(payload: bytes) -> DissectionNode:
    """Build the dissection tree for one advertising payload.

    Total: never raises for payloads within the length limit; anything the
    dissector cannot interpret becomes an ``undecoded`` leaf.
    """
    root = DissectionNode("Advertisement Data", 0, len(payload))
    structures, trailing = parse_ad_structures(payload)
    for struct in structures:
        root.add(_structure_node(struct, payload))
    if trailing is not None:
        if trailing.kind == "padding":
            root.add(
                DissectionNode(
                    "Padding",
                    trailing.offset,
                    trailing.length,
                    decoded=f"{trailing.length} zero-terminated bytes",
                )
            )
        else:
            root.add(
                DissectionNode(
                    UNDECODED_LABEL,
                    trailing.offset,
                    trailing.length,
                    decoded=_hex(trailing.data),
                )
            )
    return root


def _structure_node(struct: AdStructure, payload: bytes) -> DissectionNode:
    node = DissectionNode(struct.type_name, struct.offset, struct.wire_length)
    node.add(
        DissectionNode("Length", struct.offset, 1, decoded=str(1 + len(struct.value)))
    )
    node.add(
        DissectionNode("Type", struct.offset + 1, 1, decoded=f"0x{struct.ad_type:02X}")
    )
    value_off = struct.offset + 2
    builder = _VALUE_BUILDERS.get(struct.ad_type, _build_generic)
    node.decoded = builder(node, struct.value, value_off)
    return node


# Each builder appends value children to `node` and returns the summary text
# for the structure node (None for no summary).


def _build_generic(node: DissectionNode, value: bytes, off: int) -> str | None:
    if value:
        node.add(DissectionNode("Value", off, len(value), decoded=_hex(value)))
    return _hex(value) if value else None


def _build_flags(node: DissectionNode, value: bytes, off: int) -> str | None:
    if not value:
        return None
    names = [
        name for bit, name in enumerate(FLAG_BIT_NAMES) if value[0] & (1 << bit)
    ]
    text = f"0x{value[0]:02X}"
    if names:
        text += ": " + ", ".join(names)
    node.add(DissectionNode("Value", off, len(value), decoded=text))
    return text


def _uuid_list_builder(width: int):
    def build(node: DissectionNode, value: bytes, off: int) -> str | None:
        labels = []
        pos = 0
        while pos + width <= len(value):
            chunk = value[pos : pos + width]
            text = _uuid_text(chunk)
            node.add(DissectionNode("UUID", off + pos, width, decoded=text))
            labels.append(text)
            pos += width
        if pos < len(value):
            node.add(
                DissectionNode(
                    UNDECODED_LABEL, off + pos, len(value) - pos, decoded=_hex(value[pos:])
                )
            )
        return ", ".join(labels) if labels else None

    return build


def _build_name(node: DissectionNode, value: bytes, off: int) -> str | None:
    if not value:
        return None
    text = value.decode("utf-8", errors="replace")
    node.add(DissectionNode("Name", off, len(value), decoded=text))
    return text


def _build_tx_power(node: DissectionNode, value: bytes, off: int) -> str | None:
    if len(value) != 1:
        if value:
            node.add(
                DissectionNode(UNDECODED_LABEL, off, len(value), decoded=_hex(value))
            )
        return None
    text = f"{_signed_byte(value[0])} dBm"
    node.add(DissectionNode("Value", off, 1, decoded=text))
    return text


def _build_service_data(node: DissectionNode, value: bytes, off: int) -> str | None:
    if len(value) < 2:
        return _build_generic(node, value, off)
    uuid = int.from_bytes(value[:2], "little")
    node.add(DissectionNode("Service UUID", off, 2, decoded=_uuid16_text(uuid)))
    if len(value) > 2:
        node.add(
            DissectionNode("Data", off + 2, len(value) - 2, decoded=_hex(value[2:]))
        )
    return f"{_uuid16_text(uuid)}, {len(value) - 2} data bytes"


def _build_manufacturer(node: DissectionNode, value: bytes, off: int) -> str | None:
    if len(value) < 2:
        return _build_generic(node, value, off)
    company_id = int.from_bytes(value[:2], "little")
    company = lookup_company(company_id)
    company_text = (
        f"{company} (0x{company_id:04X})" if company else f"0x{company_id:04X}"
    )
    node.add(DissectionNode("Company ID", off, 2, decoded=company_text))

    if company_id != APPLE_COMPANY_ID:
        if len(value) > 2:
            node.add(
                DissectionNode("Data", off + 2, len(value) - 2, decoded=_hex(value[2:]))
            )
        return company_text

    remainder = value[2:]
    messages = continuity.dissect_apple(remainder)
    for msg in messages:
        node.add(_continuity_node(msg, off + 2, len(remainder)))
    if messages:
        summary = ", ".join(m.name for m in messages)
        return f"{company_text}: {summary}"
    return company_text


_VALUE_BUILDERS = {
    AD_FLAGS: _build_flags,
    AD_UUID16_INCOMPLETE: _uuid_list_builder(2),
    AD_UUID16_COMPLETE: _uuid_list_builder(2),
    AD_UUID32_INCOMPLETE: _uuid_list_builder(4),
    AD_UUID32_COMPLETE: _uuid_list_builder(4),
    AD_UUID128_INCOMPLETE: _uuid_list_builder(16),
    AD_UUID128_COMPLETE: _uuid_list_builder(16),
    AD_NAME_SHORT: _build_name,
    AD_NAME_COMPLETE: _build_name,
    AD_TX_POWER: _build_tx_power,
    AD_SERVICE_DATA: _build_service_data,
    AD_MANUFACTURER_DATA: _build_manufacturer,
}


def _continuity_node(
    msg: continuity.AppleContinuityMessage, value_off: int, value_len: int
) -> DissectionNode:
    """Subtree for one Apple message; offsets shift from value-relative to
    payload-relative."""
    start = value_off + msg.offset
    if msg.truncated:
        # A truncated message always runs to the end of the value; it may
        # have lost its length byte along with the payload.
        total = value_len - msg.offset
    else:
        total = 2 + len(msg.payload)
    has_length_byte = total >= 2
    header_len = 2 if has_length_byte else 1
    label = msg.name + (" (truncated)" if msg.truncated else "")
    node = DissectionNode(label, start, total)
    node.add(DissectionNode("Type", start, 1, decoded=f"0x{msg.message_type:02X}"))
    if has_length_byte:
        node.add(DissectionNode("Length", start + 1, 1))
    payload_off = start + header_len
    if msg.truncated:
        if msg.payload:
            node.add(
                DissectionNode(
                    UNDECODED_LABEL, payload_off, len(msg.payload), decoded=_hex(msg.payload)
                )
            )
        node.decoded = "declared length overruns the payload"
        return node

    consumed = _continuity_field_nodes(node, msg, payload_off)
    if consumed < len(msg.payload):
        node.add(
            DissectionNode(
                UNDECODED_LABEL,
                payload_off + consumed,
                len(msg.payload) - consumed,
                decoded=_hex(msg.payload[consumed:]),
            )
        )
    if msg.decoded_fields:
        node.decoded = ", ".join(f"{k}={v}" for k, v in msg.decoded_fields.items())
    elif msg.payload:
        node.decoded = _hex(msg.payload)
    return node


# (label, payload_offset, width, field_key) rows per message type; a row is
# emitted only when the payload reaches past its end.
_CONTINUITY_FIELD_LAYOUT: dict[int, list[tuple[str, int, int, str | None]]] = {
    continuity.MSG_PROXIMITY_PAIRING: [
        ("Prefix", 0, 1, None),
        ("Model", 1, 2, "model"),
        ("Status", 3, 1, None),
        ("Bud Batteries", 4, 1, None),
        ("Case Battery / Charging", 5, 1, None),
        ("Lid Open Count", 6, 1, "lid_open_count"),
        ("Color", 7, 1, "color"),
    ],
    continuity.MSG_AIRDROP: [
        ("Reserved", 0, 8, None),
        ("Version", 8, 1, "version"),
        ("Contact Hash 1", 9, 2, "contact_hash_1"),
        ("Contact Hash 2", 11, 2, "contact_hash_2"),
        ("Contact Hash 3", 13, 2, "contact_hash_3"),
        ("Contact Hash 4", 15, 2, "contact_hash_4"),
    ],
    continuity.MSG_HANDOFF: [
        ("Clipboard Status", 0, 1, "clipboard_status"),
        ("Sequence Number", 1, 2, "sequence_number"),
        ("Auth Tag", 3, 1, "auth_tag"),
    ],
    continuity.MSG_NEARBY: [
        ("Status / Action", 0, 1, None),
        ("Data Flags", 1, 1, "data_flags"),
    ],
}


def _continuity_field_nodes(
    node: DissectionNode, msg: continuity.AppleContinuityMessage, payload_off: int
) -> int:
    layout = _CONTINUITY_FIELD_LAYOUT.get(msg.message_type)
    if layout is None:
        return 0
    if msg.message_type == continuity.MSG_NEARBY and len(msg.payload) < 2:
        return 0  # too short to commit to field meanings
    consumed = 0
    for label, rel_off, width, key in layout:
        if rel_off + width > len(msg.payload):
            break
        decoded = msg.decoded_fields.get(key) if key else None
        if decoded is None:
            decoded = _hex(msg.payload[rel_off : rel_off + width])
        node.add(DissectionNode(label, payload_off + rel_off, width, decoded=decoded))
        consumed = rel_off + width
    return consumed


def _uuid_text(chunk: bytes) -> str:
    if len(chunk) == 2:
        return _uuid16_text(int.from_bytes(chunk, "little"))
    if len(chunk) == 4:
        return f"0x{int.from_bytes(chunk, 'little'):08X}"
    rev = chunk[::-1].hex()
    return f"{rev[0:8]}-{rev[8:12]}-{rev[12:16]}-{rev[16:20]}-{rev[20:32]}"


def _uuid16_text(uuid: int) -> str:
    name = SERVICE_UUID16_NAMES.get(uuid)
    return f"0x{uuid:04X} ({name})" if name else f"0x{uuid:04X}"


def _hex(data: bytes) -> str:
    return data.hex(" ")
