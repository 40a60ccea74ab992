"""Shared assertions and strategies used by both unit tests and the
acceptance suite."""

from __future__ import annotations

import socket
import time
from typing import Callable

from hypothesis import strategies as st

from btlemap.dissect import DissectionNode
from btlemap.store import AddressType, PduType, RawAdvertisement

# ts_sec is a 32-bit field in the record header.
MAX_PCAP_TIMESTAMP_US = 0xFFFFFFFF * 1_000_000 + 999_999


@st.composite
def advertisements(
    draw: st.DrawFn,
    source_id: str | None = None,
    with_channel: bool = True,
) -> RawAdvertisement:
    """A structurally valid advertisement; fix source_id for round-trips
    through formats that do not store it."""
    return RawAdvertisement(
        timestamp_us=draw(st.integers(min_value=0, max_value=MAX_PCAP_TIMESTAMP_US)),
        source_id=(
            source_id
            if source_id is not None
            else draw(st.sampled_from(["pcap", "sim", "agent-1"]))
        ),
        mac=draw(st.binary(min_size=6, max_size=6)),
        address_type=draw(st.sampled_from(list(AddressType))),
        pdu_type=draw(st.sampled_from(list(PduType))),
        rssi=draw(st.integers(min_value=-127, max_value=20)),
        payload=draw(st.binary(min_size=0, max_size=31)),
        channel=draw(st.sampled_from([37, 38, 39])) if with_channel else None,
    )


class RawClient:
    """Line-oriented TCP client speaking the agent wire format directly."""

    def __init__(self, host: str, port: int) -> None:
        self.sock = socket.create_connection((host, port), timeout=5)
        self.sock.settimeout(5)
        self._buffer = b""

    def send(self, data: bytes) -> None:
        self.sock.sendall(data)

    def read_line(self, timeout: float = 5.0) -> bytes | None:
        self.sock.settimeout(timeout)
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buffer:
            if time.monotonic() > deadline:
                return None
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                return None
            if not chunk:
                return None
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line

    def closed_by_peer(self, timeout: float = 5.0) -> bool:
        self.sock.settimeout(timeout)
        try:
            while True:
                if not self.sock.recv(65536):
                    return True
        except socket.timeout:
            return False
        except ConnectionError:
            return True

    def close(self) -> None:
        self.sock.close()


def wait_until(predicate: Callable[[], bool], timeout: float = 5.0,
               interval: float = 0.01) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()


def assert_tree_well_formed(root: DissectionNode) -> None:
    """Containment and sibling non-overlap, checked independently of the
    node's own validate()."""
    stack = [root]
    while stack:
        node = stack.pop()
        assert node.length >= 0, f"{node.label}: negative length"
        prev_end = node.offset
        for child in node.children:
            assert child.offset >= node.offset and (
                child.offset + child.length <= node.offset + node.length
            ), f"{child.label} escapes {node.label}"
            assert child.offset >= prev_end, f"{child.label} overlaps a sibling"
            prev_end = child.offset + child.length
            stack.append(child)


def assert_tree_covers(root: DissectionNode, payload_len: int) -> None:
    """Top-level children (structures plus padding/garbage markers) tile the
    payload exactly."""
    assert root.offset == 0 and root.length == payload_len
    pos = 0
    for child in root.children:
        assert child.offset == pos, (
            f"gap before {child.label}: expected offset {pos}, got {child.offset}"
        )
        pos = child.offset + child.length
    assert pos == payload_len, f"coverage stops at {pos} of {payload_len}"
