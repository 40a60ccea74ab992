"""Line-delimited JSON wire protocol between scanner agents and the server.

Every message is one UTF-8 JSON object on one LF-terminated line, at most
64 KiB including the terminator.  A "type" field discriminates the message;
unknown types and structurally wrong bodies are protocol errors the caller
counts and reports without dropping the connection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

from btlemap.gatt import GattService
from btlemap.store import InvalidAdvertisement, RawAdvertisement

PROTO_VERSION = 1
MAX_LINE_BYTES = 64 * 1024

HEARTBEAT_INTERVAL_S = 5.0
HEARTBEAT_MISS_LIMIT = 3

ERROR_EXPECTED_HELLO = "expected_hello"
ERROR_BAD_MESSAGE = "bad_message"
ERROR_UNSUPPORTED = "unsupported"


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class Hello:
    agent: str
    proto_version: int = PROTO_VERSION
    capabilities: tuple[str, ...] = ()


@dataclass(frozen=True)
class AdvMessage:
    adv: RawAdvertisement


@dataclass(frozen=True)
class GattResultMessage:
    mac: bytes
    services: tuple[GattService, ...]


@dataclass(frozen=True)
class EnumerateRequest:
    mac: bytes


@dataclass(frozen=True)
class Heartbeat:
    ts_us: int


@dataclass(frozen=True)
class ErrorMessage:
    code: str
    message: str = ""


WireMessage = Union[
    Hello, AdvMessage, GattResultMessage, EnumerateRequest, Heartbeat, ErrorMessage
]


def _mac_to_text(mac: bytes) -> str:
    return ":".join(f"{b:02X}" for b in mac)


def _mac_from_text(raw: object) -> bytes:
    if not isinstance(raw, str):
        raise ProtocolError(f"mac must be a string, got {type(raw).__name__}")
    cleaned = raw.replace(":", "").replace("-", "")
    try:
        mac = bytes.fromhex(cleaned)
    except ValueError as exc:
        raise ProtocolError(f"bad mac {raw!r}") from exc
    if len(mac) != 6:
        raise ProtocolError(f"mac must be 6 bytes, got {len(mac)}")
    return mac


def encode_message(message: WireMessage) -> bytes:
    """One LF-terminated JSON line; raises ProtocolError above 64 KiB."""
    body: dict
    if isinstance(message, Hello):
        body = {
            "type": "hello",
            "agent": message.agent,
            "proto_version": message.proto_version,
            "capabilities": list(message.capabilities),
        }
    elif isinstance(message, AdvMessage):
        body = {"type": "adv", **message.adv.to_json_dict()}
    elif isinstance(message, GattResultMessage):
        body = {
            "type": "gatt_result",
            "mac": _mac_to_text(message.mac),
            "services": [service.to_json_dict() for service in message.services],
        }
    elif isinstance(message, EnumerateRequest):
        body = {"type": "enumerate_request", "mac": _mac_to_text(message.mac)}
    elif isinstance(message, Heartbeat):
        body = {"type": "heartbeat", "ts_us": message.ts_us}
    elif isinstance(message, ErrorMessage):
        body = {"type": "error", "code": message.code, "message": message.message}
    else:
        raise ProtocolError(f"not a wire message: {type(message).__name__}")
    line = json.dumps(body, separators=(",", ":")).encode() + b"\n"
    if len(line) > MAX_LINE_BYTES:
        raise ProtocolError(f"encoded message is {len(line)} bytes, limit {MAX_LINE_BYTES}")
    return line


def _require_str(body: dict, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str):
        raise ProtocolError(f"{key} must be a string")
    return value


def decode_message(line: bytes) -> WireMessage:
    """Strict parse of one line (trailing LF optional); ProtocolError on any
    structural problem.  The size limit counts the terminator, mirroring
    encode_message."""
    if line.endswith(b"\n"):
        line = line[:-1]
    if len(line) + 1 > MAX_LINE_BYTES:
        raise ProtocolError(f"line is {len(line) + 1} bytes, limit {MAX_LINE_BYTES}")
    try:
        body = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ProtocolError(f"message must be an object, got {type(body).__name__}")
    kind = body.get("type")

    if kind == "hello":
        agent = _require_str(body, "agent")
        if not agent:
            raise ProtocolError("agent name must be non-empty")
        version = body.get("proto_version")
        if not isinstance(version, int) or isinstance(version, bool):
            raise ProtocolError("proto_version must be an integer")
        capabilities = body.get("capabilities", [])
        if not (
            isinstance(capabilities, list)
            and all(isinstance(c, str) for c in capabilities)
        ):
            raise ProtocolError("capabilities must be a list of strings")
        return Hello(agent=agent, proto_version=version,
                     capabilities=tuple(capabilities))

    if kind == "adv":
        payload = dict(body)
        payload.pop("type")
        try:
            return AdvMessage(adv=RawAdvertisement.from_json_dict(payload))
        except (InvalidAdvertisement, ValueError, TypeError, KeyError) as exc:
            raise ProtocolError(f"bad advertisement: {exc}") from exc

    if kind == "gatt_result":
        mac = _mac_from_text(body.get("mac"))
        services_raw = body.get("services")
        if not isinstance(services_raw, list):
            raise ProtocolError("services must be a list")
        try:
            services = tuple(GattService.from_json_dict(s) for s in services_raw)
        except (ValueError, TypeError, KeyError) as exc:
            raise ProtocolError(f"bad service: {exc}") from exc
        return GattResultMessage(mac=mac, services=services)

    if kind == "enumerate_request":
        return EnumerateRequest(mac=_mac_from_text(body.get("mac")))

    if kind == "heartbeat":
        ts_us = body.get("ts_us")
        if not isinstance(ts_us, int) or isinstance(ts_us, bool):
            raise ProtocolError("ts_us must be an integer")
        return Heartbeat(ts_us=ts_us)

    if kind == "error":
        return ErrorMessage(
            code=_require_str(body, "code"), message=str(body.get("message", ""))
        )

    raise ProtocolError(f"unknown message type {kind!r}")
