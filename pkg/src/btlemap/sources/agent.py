"""Scanner agent: streams a backend's advertisements to a server.

The agent dials the server (explicit address or mDNS discovery), opens with
Hello, streams every advertisement its backend produced, heartbeats on a
fixed interval, and answers enumeration requests from the backend's GATT
definitions.  On disconnect it reconnects with exponential backoff and
resumes from the first unsent advertisement.
"""

from __future__ import annotations

import asyncio
import functools
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Awaitable, Callable

from btlemap.gatt import GattService
from btlemap.sources import mdns
from btlemap.sources.pcap import read_pcap
from btlemap.sources.protocol import (
    AdvMessage,
    EnumerateRequest,
    ErrorMessage,
    GattResultMessage,
    Heartbeat,
    Hello,
    ProtocolError,
    WireMessage,
    decode_message,
    encode_message,
)
from btlemap.sources.simulate import device_macs, generate_events, load_scenario
from btlemap.store import RawAdvertisement


class UnsupportedBackend(Exception):
    pass


class NoServerFound(Exception):
    pass


BACKEND_PCAP = "pcap"
BACKEND_SIM = "sim"
BACKEND_RADIO = "radio"


@dataclass(frozen=True)
class AgentConfig:
    name: str
    backend: str
    path: str | Path | None = None
    server_addr: tuple[str, int] | None = None
    heartbeat_interval_s: float = 5.0
    stream_delay_s: float = 0.0
    reconnect_base_s: float = 1.0
    reconnect_max_s: float = 60.0
    # None keeps dialing until stopped.
    connect_attempts: int | None = None
    browse_timeout_s: float = 2.0


def load_backend(
    config: AgentConfig,
) -> tuple[list[RawAdvertisement], dict[bytes, tuple[GattService, ...]]]:
    """(advertisements to stream, MAC -> services for enumeration answers)."""
    if config.backend == BACKEND_RADIO:
        raise UnsupportedBackend(
            "OS radio capture is not implemented; use a pcap file or scenario"
        )
    if config.backend == BACKEND_PCAP:
        if config.path is None:
            raise UnsupportedBackend("pcap backend needs a file path")
        with open(config.path, "rb") as stream:
            result = read_pcap(stream, source_id=config.name)
        return list(result.advertisements), {}
    if config.backend == BACKEND_SIM:
        if config.path is None:
            raise UnsupportedBackend("sim backend needs a scenario path")
        scenario = load_scenario(config.path)
        gatt_map: dict[bytes, tuple[GattService, ...]] = {}
        for index, device in enumerate(scenario.devices):
            for mac in device_macs(scenario, index):
                gatt_map[mac] = device.gatt_services
        return generate_events(scenario), gatt_map
    raise UnsupportedBackend(config.backend)


class Agent:
    """Thread-hosted agent around its own asyncio loop.

    ``pre_send`` is an optional async hook awaited with the advertisement
    index before each send; tests use it to gate delivery deterministically.
    """

    def __init__(
        self,
        config: AgentConfig,
        *,
        pre_send: Callable[[int], Awaitable[None]] | None = None,
    ) -> None:
        self.config = config
        self.advertisements, self.gatt_map = load_backend(config)
        self._pre_send = pre_send
        self.connected = threading.Event()
        self.finished = threading.Event()
        self.error: BaseException | None = None
        self.server_errors: list[ErrorMessage] = []
        self._sent = 0
        self._stop_flag = threading.Event()
        self._stop_async: asyncio.Event | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None

    @property
    def sent_count(self) -> int:
        return self._sent

    def start(self) -> None:
        if self._thread is not None:
            raise RuntimeError("agent already started")
        self._thread = threading.Thread(
            target=self._run, name=f"agent-{self.config.name}", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._stop_flag.set()
        loop, stop_async = self._loop, self._stop_async
        if loop is not None and stop_async is not None and loop.is_running():
            loop.call_soon_threadsafe(stop_async.set)
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None

    def join(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    def _run(self) -> None:
        try:
            asyncio.run(self._main())
        except BaseException as exc:  # surfaced to the controlling thread
            self.error = exc

    def _stopping(self) -> bool:
        return self._stop_flag.is_set()

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop_async = asyncio.Event()
        if self._stop_flag.is_set():
            self._stop_async.set()
        backoff = self.config.reconnect_base_s
        attempts = 0
        while not self._stopping():
            addr = await self._resolve_addr()
            connection = None
            if addr is not None:
                try:
                    connection = await asyncio.open_connection(*addr)
                except OSError:
                    connection = None
            if connection is None:
                attempts += 1
                if (
                    self.config.connect_attempts is not None
                    and attempts >= self.config.connect_attempts
                ):
                    self.error = NoServerFound(
                        f"no server after {attempts} attempts"
                    )
                    return
                await self._wait_or_stop(backoff)
                backoff = min(backoff * 2, self.config.reconnect_max_s)
                continue
            attempts = 0
            backoff = self.config.reconnect_base_s
            await self._run_connection(*connection)

    async def _resolve_addr(self) -> tuple[str, int] | None:
        if self.config.server_addr is not None:
            return self.config.server_addr
        loop = asyncio.get_running_loop()
        try:
            instances = await loop.run_in_executor(
                None,
                functools.partial(mdns.browse, self.config.browse_timeout_s),
            )
        except mdns.MulticastUnavailable:
            return None
        for instance in instances:
            if instance.txt.get("proto") == "1" and instance.port:
                return (instance.address or "127.0.0.1", instance.port)
        return None

    async def _wait_or_stop(self, seconds: float) -> None:
        assert self._stop_async is not None
        try:
            await asyncio.wait_for(self._stop_async.wait(), timeout=seconds)
        except asyncio.TimeoutError:
            pass

    async def _run_connection(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        dead = asyncio.Event()
        try:
            await self._send(writer, self._hello(), dead)
        except (ConnectionError, OSError):
            writer.close()
            return
        self.connected.set()
        reader_task = asyncio.create_task(self._read_loop(reader, writer, dead))
        beat_task = asyncio.create_task(self._heartbeat_loop(writer, dead))
        stream_task = asyncio.create_task(self._stream(writer, dead))
        assert self._stop_async is not None
        stop_wait = asyncio.create_task(self._stop_async.wait())
        dead_wait = asyncio.create_task(dead.wait())
        try:
            await asyncio.wait(
                [stop_wait, dead_wait], return_when=asyncio.FIRST_COMPLETED
            )
        finally:
            self.connected.clear()
            for task in (reader_task, beat_task, stream_task, stop_wait, dead_wait):
                task.cancel()
            await asyncio.gather(
                reader_task, beat_task, stream_task, stop_wait, dead_wait,
                return_exceptions=True,
            )
            writer.close()

    def _hello(self) -> Hello:
        capabilities = ["adv"]
        if self.config.backend == BACKEND_SIM:
            capabilities.append("gatt")
        return Hello(agent=self.config.name, capabilities=tuple(capabilities))

    async def _send(
        self, writer: asyncio.StreamWriter, message: WireMessage,
        dead: asyncio.Event,
    ) -> bool:
        try:
            writer.write(encode_message(message))
            await writer.drain()
            return True
        except (ConnectionError, OSError):
            dead.set()
            return False

    async def _stream(
        self, writer: asyncio.StreamWriter, dead: asyncio.Event
    ) -> None:
        while self._sent < len(self.advertisements):
            index = self._sent
            if self._pre_send is not None:
                await self._pre_send(index)
            if dead.is_set() or self._stopping():
                return
            if not await self._send(
                writer, AdvMessage(adv=self.advertisements[index]), dead
            ):
                return
            self._sent = index + 1
            if self.config.stream_delay_s > 0:
                await asyncio.sleep(self.config.stream_delay_s)
        self.finished.set()

    async def _heartbeat_loop(
        self, writer: asyncio.StreamWriter, dead: asyncio.Event
    ) -> None:
        while not dead.is_set():
            if not await self._send(
                writer, Heartbeat(ts_us=time.time_ns() // 1000), dead
            ):
                return
            await asyncio.sleep(self.config.heartbeat_interval_s)

    async def _read_loop(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        dead: asyncio.Event,
    ) -> None:
        while True:
            try:
                line = await reader.readline()
            except (ConnectionError, OSError, ValueError):
                break
            if not line:
                break
            try:
                message = decode_message(line)
            except ProtocolError:
                continue  # tolerate junk from the server side
            if isinstance(message, EnumerateRequest):
                await self._answer_enumerate(writer, message.mac, dead)
            elif isinstance(message, ErrorMessage):
                self.server_errors.append(message)
                del self.server_errors[:-100]
        dead.set()

    async def _answer_enumerate(
        self, writer: asyncio.StreamWriter, mac: bytes, dead: asyncio.Event
    ) -> None:
        if self.config.backend != BACKEND_SIM:
            await self._send(
                writer,
                ErrorMessage("unsupported", "backend cannot enumerate"),
                dead,
            )
            return
        services = self.gatt_map.get(mac)
        if services is None:
            await self._send(
                writer, ErrorMessage("unknown_device", mac.hex(":")), dead
            )
        else:
            await self._send(
                writer, GattResultMessage(mac=mac, services=services), dead
            )
