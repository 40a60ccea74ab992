"""Apple vendor advertisement messages.

Apple packs one or more ``[type][length][payload]`` messages after its
company identifier inside Manufacturer Specific Data.  The field layouts
decoded here are this module's own documented convention (see
``docs/continuity-layouts.md``); byte offsets below refer to that table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MSG_AIRDROP = 0x05
MSG_PROXIMITY_PAIRING = 0x07
MSG_HANDOFF = 0x0C
MSG_NEARBY = 0x10

MESSAGE_NAMES: dict[int, str] = {
    0x02: "iBeacon",
    MSG_AIRDROP: "AirDrop",
    0x06: "HomeKit",
    MSG_PROXIMITY_PAIRING: "Proximity Pairing",
    0x08: "Hey Siri",
    0x09: "AirPlay Target",
    0x0A: "AirPlay Source",
    0x0B: "Magic Switch",
    MSG_HANDOFF: "Handoff",
    0x0D: "Tethering Target",
    0x0E: "Tethering Source",
    0x0F: "Nearby Action",
    MSG_NEARBY: "Nearby Info",
    0x12: "Find My",
}

# Earphone model identifiers, 16-bit big-endian at payload offset 1 of a
# Proximity Pairing message.
EARPHONE_MODELS: dict[int, str] = {
    0x0220: "AirPods",
    0x0F20: "AirPods (2nd generation)",
    0x1320: "AirPods Max",
    0x1420: "AirPods (3rd generation)",
    0x0E20: "AirPods Pro",
    0x2420: "AirPods Pro (2nd generation)",
    0x0320: "Powerbeats3",
    0x0520: "BeatsX",
    0x0620: "Beats Solo3",
}

BATTERY_UNKNOWN_NIBBLE = 0xF


def message_name(message_type: int) -> str:
    return MESSAGE_NAMES.get(message_type, f"Type 0x{message_type:02X}")


@dataclass(frozen=True)
class AppleContinuityMessage:
    """One type/length/payload message from an Apple manufacturer value.

    ``offset`` locates the type byte within the parsed remainder (the bytes
    after the company identifier).  ``truncated`` marks a final message whose
    declared length overran the available bytes; its payload holds whatever
    bytes remained.
    """

    message_type: int
    payload: bytes
    offset: int
    truncated: bool = False
    decoded_fields: dict[str, str] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return message_name(self.message_type)


def dissect_apple(remainder: bytes) -> list[AppleContinuityMessage]:
    """Parse concatenated Apple messages.

    Takes the Manufacturer Specific Data value with the leading ``4C 00``
    company bytes already stripped; checking the company identifier is the
    caller's job.  A length overrun in the final message yields a message
    flagged ``truncated`` instead of an exception, so the parsed prefix is
    never lost.
    """
    messages: list[AppleContinuityMessage] = []
    offset = 0
    data = remainder
    while offset < len(data):
        msg_type = data[offset]
        if offset + 1 >= len(data):
            # Type byte with no length byte.
            messages.append(
                AppleContinuityMessage(msg_type, b"", offset, truncated=True)
            )
            break
        length = data[offset + 1]
        end = offset + 2 + length
        if end > len(data):
            messages.append(
                AppleContinuityMessage(
                    msg_type, data[offset + 2 :], offset, truncated=True
                )
            )
            break
        payload = data[offset + 2 : end]
        messages.append(
            AppleContinuityMessage(
                msg_type,
                payload,
                offset,
                decoded_fields=_decode_fields(msg_type, payload),
            )
        )
        offset = end
    return messages


def _decode_fields(msg_type: int, payload: bytes) -> dict[str, str]:
    decoder = _FIELD_DECODERS.get(msg_type)
    return decoder(payload) if decoder else {}


def _decode_proximity_pairing(payload: bytes) -> dict[str, str]:
    fields: dict[str, str] = {}
    if len(payload) >= 3:
        model = int.from_bytes(payload[1:3], "big")
        name = EARPHONE_MODELS.get(model)
        fields["model"] = f"0x{model:04X} ({name})" if name else f"0x{model:04X}"
    if len(payload) >= 5:
        fields["left_battery"] = _battery(payload[4] >> 4)
        fields["right_battery"] = _battery(payload[4] & 0x0F)
    if len(payload) >= 6:
        fields["case_battery"] = _battery(payload[5] & 0x0F)
        fields["charging"] = _charging(payload[5] >> 4)
    if len(payload) >= 7:
        fields["lid_open_count"] = str(payload[6])
    if len(payload) >= 8:
        fields["color"] = f"0x{payload[7]:02X}"
    return fields


def _decode_airdrop(payload: bytes) -> dict[str, str]:
    fields: dict[str, str] = {}
    if len(payload) >= 9:
        fields["version"] = str(payload[8])
    if len(payload) >= 17:
        for i in range(4):
            start = 9 + 2 * i
            fields[f"contact_hash_{i + 1}"] = payload[start : start + 2].hex()
    return fields


def _decode_handoff(payload: bytes) -> dict[str, str]:
    fields: dict[str, str] = {}
    if len(payload) >= 1:
        fields["clipboard_status"] = f"0x{payload[0]:02X}"
    if len(payload) >= 3:
        fields["sequence_number"] = str(int.from_bytes(payload[1:3], "little"))
    if len(payload) >= 4:
        fields["auth_tag"] = f"0x{payload[3]:02X}"
    return fields


def _decode_nearby(payload: bytes) -> dict[str, str]:
    # One lone byte carries too little structure to commit to; present raw.
    if len(payload) < 2:
        return {}
    return {
        "status_flags": f"0x{payload[0] >> 4:X}",
        "action_code": f"0x{payload[0] & 0x0F:X}",
        "data_flags": f"0x{payload[1]:02X}",
    }


_FIELD_DECODERS = {
    MSG_PROXIMITY_PAIRING: _decode_proximity_pairing,
    MSG_AIRDROP: _decode_airdrop,
    MSG_HANDOFF: _decode_handoff,
    MSG_NEARBY: _decode_nearby,
}


def _battery(nibble: int) -> str:
    if nibble == BATTERY_UNKNOWN_NIBBLE or nibble > 10:
        return "unknown"
    return f"{nibble * 10}%"


def _charging(flags: int) -> str:
    parts = [
        name
        for bit, name in ((0x02, "left"), (0x01, "right"), (0x04, "case"))
        if flags & bit
    ]
    return ", ".join(parts) if parts else "none"
