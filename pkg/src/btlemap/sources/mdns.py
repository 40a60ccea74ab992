"""Minimal multicast-DNS service discovery.

Implements just enough DNS-SD to announce the agent server on the local
link and to browse for it: PTR + SRV + TXT + A records, UDP multicast on
224.0.0.251:5353.  The writer emits uncompressed names; the parser follows
compression pointers so answers from standard responders also parse.

Instance and host labels must not contain dots; they are encoded as single
DNS labels.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

log = logging.getLogger("btlemap.mdns")

SERVICE_TYPE = "_btlemap._tcp.local."
MDNS_GROUP = "224.0.0.251"
MDNS_PORT = 5353
DEFAULT_TTL_S = 120

TYPE_A = 1
TYPE_PTR = 12
TYPE_TXT = 16
TYPE_SRV = 33
TYPE_ANY = 255
CLASS_IN = 1
# mDNS cache-flush bit on record class in responses.
CACHE_FLUSH = 0x8000

_RESPONSE_FLAGS = 0x8400  # QR | AA

_MAX_POINTER_JUMPS = 32


class MulticastUnavailable(OSError):
    pass


@dataclass
class ServiceInstance:
    instance: str
    host: str
    address: str
    port: int
    txt: dict[str, str] = field(default_factory=dict)
    ttl: int = DEFAULT_TTL_S


def encode_name(name: str) -> bytes:
    out = b""
    for label in name.rstrip(".").split("."):
        raw = label.encode("utf-8")
        if not 0 < len(raw) < 64:
            raise ValueError(f"bad DNS label {label!r}")
        out += bytes([len(raw)]) + raw
    return out + b"\x00"


def parse_name(data: bytes, pos: int) -> tuple[str, int]:
    """Decompressed name and the offset just past its in-place encoding."""
    labels: list[str] = []
    end: int | None = None
    jumps = 0
    while True:
        if pos >= len(data):
            raise ValueError("name runs past the packet")
        length = data[pos]
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(data):
                raise ValueError("dangling compression pointer")
            if end is None:
                end = pos + 2
            pos = ((length & 0x3F) << 8) | data[pos + 1]
            jumps += 1
            if jumps > _MAX_POINTER_JUMPS:
                raise ValueError("compression pointer loop")
        elif length == 0:
            if end is None:
                end = pos + 1
            return ".".join(labels) + ".", end
        else:
            label = data[pos + 1 : pos + 1 + length]
            if len(label) < length:
                raise ValueError("label runs past the packet")
            labels.append(label.decode("utf-8", "replace"))
            pos += 1 + length


def _encode_txt(txt: dict[str, str]) -> bytes:
    if not txt:
        return b"\x00"
    out = b""
    for key, value in txt.items():
        entry = f"{key}={value}".encode()
        if len(entry) > 255:
            raise ValueError(f"TXT entry too long: {key}")
        out += bytes([len(entry)]) + entry
    return out


def _parse_txt(rdata: bytes) -> dict[str, str]:
    txt: dict[str, str] = {}
    pos = 0
    while pos < len(rdata):
        length = rdata[pos]
        entry = rdata[pos + 1 : pos + 1 + length]
        pos += 1 + length
        if b"=" in entry:
            key, _, value = entry.partition(b"=")
            txt[key.decode("utf-8", "replace")] = value.decode("utf-8", "replace")
        elif entry:
            txt[entry.decode("utf-8", "replace")] = ""
    return txt


def _record(name: str, rtype: int, ttl: int, rdata: bytes,
            cache_flush: bool = False) -> bytes:
    rclass = CLASS_IN | (CACHE_FLUSH if cache_flush else 0)
    return (
        encode_name(name)
        + struct.pack(">HHIH", rtype, rclass, ttl, len(rdata))
        + rdata
    )


def build_announcement(
    instance: str, host: str, address: str, port: int,
    txt: dict[str, str], ttl: int = DEFAULT_TTL_S,
) -> bytes:
    """Unsolicited response carrying the full record set in the answer
    section (PTR, SRV, TXT, A)."""
    instance_name = f"{instance}.{SERVICE_TYPE}"
    target = f"{host}.local."
    answers = (
        _record(SERVICE_TYPE, TYPE_PTR, ttl, encode_name(instance_name))
        + _record(
            instance_name, TYPE_SRV, ttl,
            struct.pack(">HHH", 0, 0, port) + encode_name(target),
            cache_flush=True,
        )
        + _record(instance_name, TYPE_TXT, ttl, _encode_txt(txt),
                  cache_flush=True)
        + _record(target, TYPE_A, ttl, socket.inet_aton(address),
                  cache_flush=True)
    )
    header = struct.pack(">HHHHHH", 0, _RESPONSE_FLAGS, 0, 4, 0, 0)
    return header + answers


def build_query(name: str = SERVICE_TYPE, qtype: int = TYPE_PTR) -> bytes:
    header = struct.pack(">HHHHHH", 0, 0, 1, 0, 0, 0)
    return header + encode_name(name) + struct.pack(">HH", qtype, CLASS_IN)


@dataclass
class _ParsedRecord:
    name: str
    rtype: int
    ttl: int
    rdata: bytes
    rdata_offset: int


def _parse_records(data: bytes) -> tuple[list[tuple[str, int]], list[_ParsedRecord]]:
    """(questions, records); records concatenate answer/authority/additional."""
    if len(data) < 12:
        raise ValueError("short DNS packet")
    _tid, _flags, qd, an, ns, ar = struct.unpack(">HHHHHH", data[:12])
    pos = 12
    questions: list[tuple[str, int]] = []
    for _ in range(qd):
        name, pos = parse_name(data, pos)
        qtype, _qclass = struct.unpack_from(">HH", data, pos)
        pos += 4
        questions.append((name, qtype))
    records: list[_ParsedRecord] = []
    for _ in range(an + ns + ar):
        name, pos = parse_name(data, pos)
        rtype, _rclass, ttl, rdlen = struct.unpack_from(">HHIH", data, pos)
        pos += 10
        rdata = data[pos : pos + rdlen]
        if len(rdata) < rdlen:
            raise ValueError("record data runs past the packet")
        records.append(_ParsedRecord(name, rtype, ttl, rdata, pos))
        pos += rdlen
    return questions, records


def is_query(data: bytes) -> bool:
    return len(data) >= 12 and (struct.unpack(">H", data[2:4])[0] & 0x8000) == 0


def _open_multicast_socket(interface_ip: str) -> socket.socket:
    try:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM,
                             socket.IPPROTO_UDP)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        if hasattr(socket, "SO_REUSEPORT"):
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
        sock.bind(("", MDNS_PORT))
        membership = socket.inet_aton(MDNS_GROUP) + socket.inet_aton(interface_ip)
        sock.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, membership)
        sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_IF,
                        socket.inet_aton(interface_ip))
        sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, 255)
        sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1)
        return sock
    except OSError as exc:
        raise MulticastUnavailable(str(exc)) from exc


class MdnsAnnouncer:
    """Publishes one service instance and answers queries for it.

    Multicast being unavailable is non-fatal: the announcer enters degraded
    mode (discoverable by nothing, but the program keeps running).
    """

    def __init__(
        self,
        instance: str,
        port: int,
        *,
        txt: dict[str, str] | None = None,
        host: str | None = None,
        address: str = "127.0.0.1",
        interface_ip: str = "127.0.0.1",
        ttl: int = DEFAULT_TTL_S,
    ) -> None:
        if "." in instance:
            raise ValueError("instance must be a single DNS label")
        self.instance = instance
        self.port = port
        self.txt = dict(txt) if txt is not None else {"proto": "1"}
        self.host = host if host is not None else f"{instance}-host"
        self.address = address
        self._interface_ip = interface_ip
        self._ttl = ttl
        self._sock: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.degraded = False

    def start(self) -> None:
        try:
            self._sock = _open_multicast_socket(self._interface_ip)
        except MulticastUnavailable as exc:
            self.degraded = True
            log.warning("multicast unavailable, announcements disabled: %s", exc)
            return
        self._send_announcement(self._ttl)
        self._send_announcement(self._ttl)
        self._thread = threading.Thread(
            target=self._responder_loop, name=f"mdns-{self.instance}", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._sock is not None:
            self._send_announcement(0)  # goodbye
            self._send_announcement(0)
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def _send_announcement(self, ttl: int) -> None:
        assert self._sock is not None
        packet = build_announcement(
            self.instance, self.host, self.address, self.port, self.txt, ttl
        )
        try:
            self._sock.sendto(packet, (MDNS_GROUP, MDNS_PORT))
        except OSError as exc:
            log.warning("announcement send failed: %s", exc)

    def _answers_question(self, name: str, qtype: int) -> bool:
        instance_name = f"{self.instance}.{SERVICE_TYPE}".lower()
        target = f"{self.host}.local.".lower()
        name = name.lower()
        if name == SERVICE_TYPE and qtype in (TYPE_PTR, TYPE_ANY):
            return True
        if name == instance_name and qtype in (TYPE_SRV, TYPE_TXT, TYPE_ANY):
            return True
        return name == target and qtype in (TYPE_A, TYPE_ANY)

    def _responder_loop(self) -> None:
        assert self._sock is not None
        self._sock.settimeout(0.5)
        while not self._stop.is_set():
            try:
                data, _addr = self._sock.recvfrom(9000)
            except socket.timeout:
                continue
            except OSError:
                return
            if not is_query(data):
                continue
            try:
                questions, _records = _parse_records(data)
            except ValueError:
                continue
            if any(self._answers_question(n, t) for n, t in questions):
                self._send_announcement(self._ttl)


def browse(
    timeout_s: float = 2.0,
    *,
    service_type: str = SERVICE_TYPE,
    interface_ip: str = "127.0.0.1",
) -> list[ServiceInstance]:
    """One-shot query for instances of a service type on the local link.

    Raises MulticastUnavailable when the multicast socket cannot be opened.
    """
    sock = _open_multicast_socket(interface_ip)
    try:
        sock.settimeout(0.2)
        sock.sendto(build_query(service_type), (MDNS_GROUP, MDNS_PORT))
        found: dict[str, ServiceInstance] = {}
        hosts: dict[str, str] = {}
        gone: set[str] = set()
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            try:
                data, _addr = sock.recvfrom(9000)
            except socket.timeout:
                continue
            except OSError:
                break
            if is_query(data):
                continue
            try:
                _questions, records = _parse_records(data)
            except ValueError:
                continue
            _merge_records(data, records, service_type, found, hosts, gone)
        for instance in found.values():
            if instance.host in hosts:
                instance.address = hosts[instance.host]
        return [
            inst for name, inst in sorted(found.items()) if name not in gone
        ]
    finally:
        sock.close()


def _merge_records(
    data: bytes,
    records: list[_ParsedRecord],
    service_type: str,
    found: dict[str, ServiceInstance],
    hosts: dict[str, str],
    gone: set[str],
) -> None:
    suffix = "." + service_type.lower()

    def instance_for(name: str) -> ServiceInstance | None:
        lowered = name.lower()
        if not lowered.endswith(suffix):
            return None
        label = name[: len(name) - len(suffix)]
        if name.lower() not in found:
            found[name.lower()] = ServiceInstance(
                instance=label, host="", address="", port=0
            )
        return found[name.lower()]

    for record in records:
        if record.rtype == TYPE_PTR and record.name.lower() == service_type.lower():
            target, _ = parse_name(data, record.rdata_offset)
            instance = instance_for(target)
            if instance is not None:
                instance.ttl = record.ttl
                if record.ttl == 0:
                    gone.add(target.lower())
                else:
                    gone.discard(target.lower())
        elif record.rtype == TYPE_SRV:
            instance = instance_for(record.name)
            if instance is not None and len(record.rdata) >= 6:
                _prio, _weight, port = struct.unpack_from(">HHH", record.rdata)
                instance.port = port
                target, _ = parse_name(data, record.rdata_offset + 6)
                instance.host = target.lower()
        elif record.rtype == TYPE_TXT:
            instance = instance_for(record.name)
            if instance is not None:
                instance.txt = _parse_txt(record.rdata)
        elif record.rtype == TYPE_A and len(record.rdata) == 4:
            hosts[record.name.lower()] = socket.inet_ntoa(record.rdata)
