"""GAP AD structure parsing.

An advertising payload is a sequence of length-type-value units: one length
byte ``L`` (covering the type byte plus value), one AD type byte, and
``L - 1`` value bytes.  A payload carries at most 31 bytes total.
"""

from __future__ import annotations

from dataclasses import dataclass

MAX_PAYLOAD_LEN = 31
MAX_VALUE_LEN = 29  # length byte + type byte + value must fit in 31

# GAP assigned AD type codes (the subset this tool labels by name; anything
# else renders as "AD Type 0xNN").
AD_FLAGS = 0x01
AD_UUID16_INCOMPLETE = 0x02
AD_UUID16_COMPLETE = 0x03
AD_UUID32_INCOMPLETE = 0x04
AD_UUID32_COMPLETE = 0x05
AD_UUID128_INCOMPLETE = 0x06
AD_UUID128_COMPLETE = 0x07
AD_NAME_SHORT = 0x08
AD_NAME_COMPLETE = 0x09
AD_TX_POWER = 0x0A
AD_SERVICE_DATA = 0x16
AD_APPEARANCE = 0x19
AD_MANUFACTURER_DATA = 0xFF

AD_TYPE_NAMES: dict[int, str] = {
    AD_FLAGS: "Flags",
    AD_UUID16_INCOMPLETE: "Incomplete 16-bit Service UUIDs",
    AD_UUID16_COMPLETE: "16-bit Service UUIDs",
    AD_UUID32_INCOMPLETE: "Incomplete 32-bit Service UUIDs",
    AD_UUID32_COMPLETE: "32-bit Service UUIDs",
    AD_UUID128_INCOMPLETE: "Incomplete 128-bit Service UUIDs",
    AD_UUID128_COMPLETE: "128-bit Service UUIDs",
    AD_NAME_SHORT: "Shortened Local Name",
    AD_NAME_COMPLETE: "Complete Local Name",
    AD_TX_POWER: "TX Power Level",
    0x10: "Device ID",
    0x12: "Peripheral Connection Interval Range",
    0x14: "16-bit Solicitation UUIDs",
    0x15: "128-bit Solicitation UUIDs",
    AD_SERVICE_DATA: "Service Data",
    0x17: "Public Target Address",
    0x18: "Random Target Address",
    AD_APPEARANCE: "Appearance",
    0x1A: "Advertising Interval",
    0x20: "32-bit Service Data",
    0x21: "128-bit Service Data",
    0x24: "URI",
    AD_MANUFACTURER_DATA: "Manufacturer Specific Data",
}


class PayloadTooLong(ValueError):
    """Advertising payload exceeds the 31-byte maximum."""


def ad_type_name(ad_type: int) -> str:
    return AD_TYPE_NAMES.get(ad_type, f"AD Type 0x{ad_type:02X}")


@dataclass(frozen=True)
class AdStructure:
    """One length-type-value unit at a known position in the payload.

    ``offset`` points at the length byte.
    """

    ad_type: int
    value: bytes
    offset: int

    def __post_init__(self) -> None:
        if not 0 <= self.ad_type <= 0xFF:
            raise ValueError(f"ad_type out of range: {self.ad_type}")
        if len(self.value) > MAX_VALUE_LEN:
            raise ValueError(f"value too long: {len(self.value)} bytes")
        if self.offset < 0:
            raise ValueError(f"negative offset: {self.offset}")

    @property
    def type_name(self) -> str:
        return ad_type_name(self.ad_type)

    @property
    def wire_length(self) -> int:
        """Total bytes this unit occupies on the wire."""
        return 2 + len(self.value)

    def serialize(self) -> bytes:
        return bytes([1 + len(self.value), self.ad_type]) + self.value


@dataclass(frozen=True)
class TrailingBytes:
    """Bytes after the last complete AD structure.

    ``kind`` is ``"padding"`` when a zero length byte ended the parse (the
    zero byte and everything after it), or ``"garbage"`` when the final
    unit's declared length overran the payload.
    """

    kind: str
    offset: int
    data: bytes

    @property
    def length(self) -> int:
        return len(self.data)


def parse_ad_structures(
    payload: bytes,
) -> tuple[list[AdStructure], TrailingBytes | None]:
    """Split a payload into AD structures plus any unparsable tail.

    A truncated final unit is not an error: it comes back as a ``garbage``
    trailer so malformed captures stay visible.  Raises :class:`PayloadTooLong`
    for payloads over 31 bytes.
    """
    if len(payload) > MAX_PAYLOAD_LEN:
        raise PayloadTooLong(f"{len(payload)} bytes (max {MAX_PAYLOAD_LEN})")

    structures: list[AdStructure] = []
    offset = 0
    while offset < len(payload):
        length = payload[offset]
        if length == 0:
            # Early-termination padding: report the zero byte and the rest.
            return structures, TrailingBytes("padding", offset, payload[offset:])
        end = offset + 1 + length
        if end > len(payload):
            return structures, TrailingBytes("garbage", offset, payload[offset:])
        structures.append(
            AdStructure(
                ad_type=payload[offset + 1],
                value=payload[offset + 2 : end],
                offset=offset,
            )
        )
        offset = end
    return structures, None


def serialize_ad_structures(
    structures: list[AdStructure], trailing: TrailingBytes | None = None
) -> bytes:
    """Inverse of :func:`parse_ad_structures`, byte-exact."""
    out = b"".join(s.serialize() for s in structures)
    if trailing is not None:
        out += trailing.data
    return out


def extract_tx_power(structures: list[AdStructure]) -> int | None:
    """Advertised TX power in dBm: first well-formed 0x0A unit wins.

    A 0x0A unit whose value is not exactly one byte is malformed and skipped;
    the next candidate is used instead.
    """
    for s in structures:
        if s.ad_type != AD_TX_POWER:
            continue
        if len(s.value) != 1:
            continue
        return _signed_byte(s.value[0])
    return None


def _signed_byte(b: int) -> int:
    return b - 256 if b >= 128 else b
