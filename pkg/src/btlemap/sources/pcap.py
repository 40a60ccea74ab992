"""pcap import and export, BLE link layer with per-packet radio header.

File layout (linktype 256): each record holds a 10-byte pseudo-header
(rf_channel, signal dBm, noise dBm, access-address offenses, reference
access address, flags), then the packet itself: 4-byte access address,
2-byte PDU header, PDU body, 3-byte CRC.  The pseudo-header is always
little-endian regardless of the file's magic.

Advertising PDU bodies start with the 6-byte AdvA in over-the-air order
(reversed relative to display order); ADV_DIRECT_IND carries a TargetA next,
which this model does not keep — it reads back as zeros.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

from btlemap.store import AddressType, PduType, RawAdvertisement

LINKTYPE_BLE_LL_WITH_PHDR = 256
ADVERTISING_ACCESS_ADDRESS = 0x8E89BED6
ADVERTISING_CRC_INIT = 0x555555

MAGIC_MICRO = 0xA1B2C3D4
MAGIC_MICRO_SWAPPED = 0xD4C3B2A1
MAGIC_NANO = 0xA1B23C4D
MAGIC_NANO_SWAPPED = 0x4D3CB2A1

# (byte order, timestamp fraction divisor to reach microseconds)
_MAGICS = {
    MAGIC_MICRO: ("<", 1),
    MAGIC_MICRO_SWAPPED: (">", 1),
    MAGIC_NANO: ("<", 1000),
    MAGIC_NANO_SWAPPED: (">", 1000),
}

_PHDR = struct.Struct("<BbbBIH")

FLAG_DEWHITENED = 0x0001
FLAG_SIGNAL_VALID = 0x0002
FLAG_NOISE_VALID = 0x0004
FLAG_REF_AA_VALID = 0x0010
FLAG_CRC_CHECKED = 0x0400
FLAG_CRC_VALID = 0x0800

_WRITER_FLAGS = (
    FLAG_DEWHITENED | FLAG_SIGNAL_VALID | FLAG_REF_AA_VALID
    | FLAG_CRC_CHECKED | FLAG_CRC_VALID
)

NOISE_UNKNOWN_DBM = -128

RF_TO_ADV_CHANNEL = {0: 37, 12: 38, 39: 39}
ADV_TO_RF_CHANNEL = {37: 0, 38: 12, 39: 39}

PDU_TYPE_CODES: dict[PduType, int] = {
    PduType.ADV_IND: 0,
    PduType.ADV_DIRECT_IND: 1,
    PduType.ADV_NONCONN_IND: 2,
    PduType.SCAN_RSP: 4,
    PduType.ADV_SCAN_IND: 6,
}
CODE_TO_PDU_TYPE = {code: t for t, code in PDU_TYPE_CODES.items()}

TXADD_MASK = 0x40

# Reasonableness cap on record length; real BLE LL records are tiny.
_MAX_RECORD_BYTES = 0x10000

# x^24 + x^10 + x^9 + x^6 + x^4 + x^3 + x + 1, reflected for LSB-first input.
_CRC24_POLY_REFLECTED = 0xDA6000


class BadMagic(ValueError):
    """Stream does not start with a recognized pcap magic."""


class UnsupportedLinktype(ValueError):
    def __init__(self, linktype: int) -> None:
        super().__init__(f"linktype {linktype} (need {LINKTYPE_BLE_LL_WITH_PHDR})")
        self.linktype = linktype


class TruncatedRecord(ValueError):
    """A record header or body ended prematurely."""


class StreamWriteError(OSError):
    pass


def _reflect24(value: int) -> int:
    out = 0
    for _ in range(24):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out


def crc24(data: bytes, init: int = ADVERTISING_CRC_INIT) -> int:
    """BLE link-layer CRC; bytes fed least significant bit first.

    ``init`` uses the conventional preset notation (0x555555 for advertising
    channels); it is bit-reflected internally to match the LSB-first loop.
    crc24(b"123456789") == 0xC25A56.
    """
    state = _reflect24(init)
    for byte in data:
        state ^= byte
        for _ in range(8):
            if state & 1:
                state = (state >> 1) ^ _CRC24_POLY_REFLECTED
            else:
                state >>= 1
    return state


@dataclass
class PcapReadResult:
    """Parsed advertisements plus per-file bookkeeping.

    ``error`` holds a TruncatedRecord when parsing stopped early; the
    advertisements read up to that point are still returned.
    """

    advertisements: list[RawAdvertisement] = field(default_factory=list)
    skipped_non_advertising: int = 0
    malformed_records: int = 0
    crc_mismatches: int = 0
    error: TruncatedRecord | None = None

    def __iter__(self) -> Iterator[RawAdvertisement]:
        return iter(self.advertisements)

    def __len__(self) -> int:
        return len(self.advertisements)


def read_pcap(stream: BinaryIO, source_id: str = "pcap") -> PcapReadResult:
    """Parse a linktype-256 capture into advertisements.

    Raises BadMagic or UnsupportedLinktype on a wrong file; mid-file damage
    does not raise — parsing stops and the result carries the error text.
    """
    header = stream.read(24)
    if len(header) < 24:
        raise BadMagic("stream shorter than a pcap global header")
    magic = struct.unpack("<I", header[:4])[0]
    if magic not in _MAGICS:
        raise BadMagic(f"unrecognized magic 0x{magic:08X}")
    order, frac_divisor = _MAGICS[magic]
    _vmaj, _vmin, _zone, _sigfigs, _snaplen, linktype = struct.unpack(
        order + "HHiIII", header[4:]
    )
    if linktype != LINKTYPE_BLE_LL_WITH_PHDR:
        raise UnsupportedLinktype(linktype)

    result = PcapReadResult()
    record_header = struct.Struct(order + "IIII")
    while True:
        head = stream.read(16)
        if not head:
            return result
        if len(head) < 16:
            result.error = TruncatedRecord("truncated record header")
            return result
        ts_sec, ts_frac, incl_len, _orig_len = record_header.unpack(head)
        if incl_len > _MAX_RECORD_BYTES:
            result.error = TruncatedRecord(f"implausible record length {incl_len}")
            return result
        data = stream.read(incl_len)
        if len(data) < incl_len:
            result.error = TruncatedRecord("truncated record body")
            return result
        timestamp_us = ts_sec * 1_000_000 + ts_frac // frac_divisor
        adv = _parse_record(data, timestamp_us, source_id, result)
        if adv is not None:
            result.advertisements.append(adv)


def _parse_record(
    data: bytes, timestamp_us: int, source_id: str, result: PcapReadResult
) -> RawAdvertisement | None:
    if len(data) < _PHDR.size + 4 + 2:
        result.malformed_records += 1
        return None
    rf_channel, signal_dbm, _noise, _offenses, _ref_aa, _flags = _PHDR.unpack_from(
        data
    )
    offset = _PHDR.size
    access_address = struct.unpack_from("<I", data, offset)[0]
    offset += 4
    if access_address != ADVERTISING_ACCESS_ADDRESS:
        result.skipped_non_advertising += 1
        return None
    h0, body_len = data[offset], data[offset + 1]
    offset += 2
    pdu_type = CODE_TO_PDU_TYPE.get(h0 & 0x0F)
    if pdu_type is None:
        result.skipped_non_advertising += 1
        return None
    body_and_crc = data[offset:]
    if len(body_and_crc) < body_len + 3 or body_len < 6:
        result.malformed_records += 1
        return None
    body = body_and_crc[:body_len]
    crc_bytes = body_and_crc[body_len : body_len + 3]
    if crc24(data[offset - 2 : offset + body_len]) != int.from_bytes(crc_bytes, "big"):
        result.crc_mismatches += 1  # informational; common in synthetic files

    mac = body[:6][::-1]
    payload_start = 12 if pdu_type is PduType.ADV_DIRECT_IND else 6
    payload = body[payload_start:]
    if len(payload) > 31 or (pdu_type is PduType.ADV_DIRECT_IND and body_len < 12):
        result.malformed_records += 1
        return None
    return RawAdvertisement(
        timestamp_us=timestamp_us,
        source_id=source_id,
        mac=mac,
        address_type=(
            AddressType.RANDOM if h0 & TXADD_MASK else AddressType.PUBLIC
        ),
        pdu_type=pdu_type,
        rssi=max(-127, min(20, signal_dbm)),
        payload=payload,
        channel=RF_TO_ADV_CHANNEL.get(rf_channel),
    )


def write_pcap(advs: Iterable[RawAdvertisement], stream: BinaryIO) -> int:
    """Write advertisements as a little-endian microsecond capture.

    The CRC field holds the computed link-layer CRC over the PDU (header
    and body) with the advertising-channel init value.
    """
    count = 0
    try:
        stream.write(
            struct.pack(
                "<IHHiIII", MAGIC_MICRO, 2, 4, 0, 0, 0xFFFF,
                LINKTYPE_BLE_LL_WITH_PHDR,
            )
        )
        for adv in advs:
            stream.write(_build_record(adv))
            count += 1
    except OSError as exc:
        raise StreamWriteError(str(exc)) from exc
    return count


def _build_record(adv: RawAdvertisement) -> bytes:
    body = adv.mac[::-1]
    if adv.pdu_type is PduType.ADV_DIRECT_IND:
        body += bytes(6)  # TargetA is not modeled; see module docstring
    body += adv.payload
    h0 = PDU_TYPE_CODES[adv.pdu_type]
    if adv.address_type is AddressType.RANDOM:
        h0 |= TXADD_MASK
    pdu = bytes([h0, len(body)]) + body
    crc = crc24(pdu).to_bytes(3, "big")

    phdr = _PHDR.pack(
        ADV_TO_RF_CHANNEL.get(adv.channel or 37, 0),
        adv.rssi,
        NOISE_UNKNOWN_DBM,
        0,
        ADVERTISING_ACCESS_ADDRESS,
        _WRITER_FLAGS,
    )
    packet = phdr + struct.pack("<I", ADVERTISING_ACCESS_ADDRESS) + pdu + crc
    ts_sec, ts_us = divmod(adv.timestamp_us, 1_000_000)
    return struct.pack("<IIII", ts_sec, ts_us, len(packet), len(packet)) + packet
