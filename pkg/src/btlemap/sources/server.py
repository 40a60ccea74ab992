"""TCP server side of the agent link.

Runs its own asyncio loop in a dedicated thread so the rest of the system
stays synchronous.  Each connection must open with Hello (protocol version
1); afterwards advertisements flow into the store under the agent's name,
heartbeats keep the agent marked online, and enumeration requests travel the
other way.  Malformed lines are counted and answered with an Error message
without dropping the connection.
"""

from __future__ import annotations

import asyncio
import contextlib
import dataclasses
import threading
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

from btlemap.gatt import GattService, NoAgentOnline
from btlemap.sources.protocol import (
    ERROR_BAD_MESSAGE,
    ERROR_EXPECTED_HELLO,
    ERROR_UNSUPPORTED,
    HEARTBEAT_INTERVAL_S,
    HEARTBEAT_MISS_LIMIT,
    MAX_LINE_BYTES,
    PROTO_VERSION,
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
from btlemap.store import InvalidAdvertisement

if TYPE_CHECKING:
    from btlemap.store import DeviceStore


class BindFailed(OSError):
    pass


@dataclass
class AgentInfo:
    """Point-in-time snapshot of one connection, for listings."""

    name: str
    online: bool
    capabilities: tuple[str, ...]
    advertisements: int
    malformed_lines: int
    connected_at_us: int

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self) | {"capabilities": list(self.capabilities)}


class _Connection:
    def __init__(self, writer: asyncio.StreamWriter, connected_at_us: int,
                 last_seen: float) -> None:
        self.writer = writer
        self.name: str | None = None
        self.capabilities: tuple[str, ...] = ()
        self.connected_at_us = connected_at_us
        self.last_seen = last_seen
        self.online = False
        self.advertisements = 0
        self.malformed_lines = 0


class AgentServer:
    """Accepts scanner agents and feeds their advertisements into a store.

    start() binds and returns the bound (host, port); stop() shuts the loop
    down.  All public methods are callable from any thread.
    """

    def __init__(
        self,
        store: "DeviceStore",
        host: str = "127.0.0.1",
        port: int = 0,
        *,
        on_gatt_result: Callable[[bytes, tuple[GattService, ...]], None] | None = None,
        heartbeat_interval_s: float = HEARTBEAT_INTERVAL_S,
        heartbeat_miss_limit: int = HEARTBEAT_MISS_LIMIT,
        clock: Callable[[], float] = time.monotonic,
        watchdog_poll_s: float = 1.0,
    ) -> None:
        self._store = store
        self._host = host
        self._port = port
        self._on_gatt_result = on_gatt_result
        self._offline_after_s = heartbeat_interval_s * heartbeat_miss_limit
        self._clock = clock
        self._watchdog_poll_s = watchdog_poll_s
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._server: asyncio.Server | None = None
        self._connections: set[_Connection] = set()
        self._lock = threading.Lock()
        self._malformed_total = 0
        self._started = threading.Event()
        self._bound_addr: tuple[str, int] | None = None
        self._bind_error: BaseException | None = None

    def set_gatt_result_handler(
        self, handler: Callable[[bytes, tuple[GattService, ...]], None]
    ) -> None:
        """Late wiring for callers that construct the server first."""
        self._on_gatt_result = handler

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> tuple[str, int]:
        if self._thread is not None:
            raise RuntimeError("server already started")
        self._thread = threading.Thread(
            target=self._run_loop, name="agent-server", daemon=True
        )
        self._thread.start()
        self._started.wait()
        if self._bind_error is not None:
            self._thread.join()
            self._thread = None
            raise BindFailed(str(self._bind_error)) from self._bind_error
        assert self._bound_addr is not None
        return self._bound_addr

    def stop(self) -> None:
        loop = self._loop
        if loop is None or self._thread is None:
            return
        loop.call_soon_threadsafe(self._begin_shutdown)
        self._thread.join(timeout=10)
        self._thread = None
        self._loop = None

    def _run_loop(self) -> None:
        loop = asyncio.new_event_loop()
        self._loop = loop
        try:
            try:
                self._server = loop.run_until_complete(
                    asyncio.start_server(self._handle_connection, self._host,
                                         self._port)
                )
            except OSError as exc:
                self._bind_error = exc
                return
            sock = self._server.sockets[0].getsockname()
            self._bound_addr = (sock[0], sock[1])
            self._watchdog = loop.create_task(self._watchdog_loop())
            self._started.set()
            loop.run_forever()
        finally:
            self._started.set()
            with contextlib.suppress(Exception):
                loop.run_until_complete(loop.shutdown_asyncgens())
            loop.close()

    def _begin_shutdown(self) -> None:
        assert self._loop is not None
        if self._server is not None:
            self._server.close()
        for task in asyncio.all_tasks(self._loop):
            task.cancel()
        self._loop.call_soon(self._loop.stop)

    # -- introspection -----------------------------------------------------

    @property
    def malformed_line_count(self) -> int:
        with self._lock:
            return self._malformed_total

    def agents(self) -> list[AgentInfo]:
        with self._lock:
            return [
                AgentInfo(
                    name=conn.name,
                    online=conn.online,
                    capabilities=conn.capabilities,
                    advertisements=conn.advertisements,
                    malformed_lines=conn.malformed_lines,
                    connected_at_us=conn.connected_at_us,
                )
                for conn in self._connections
                if conn.name is not None
            ]

    # -- commands ----------------------------------------------------------

    def request_enumeration(self, mac: bytes, agent: str | None = None) -> str:
        """Send an EnumerateRequest to one online agent; returns its name."""
        with self._lock:
            candidates = [
                conn
                for conn in self._connections
                if conn.online and (agent is None or conn.name == agent)
            ]
        if not candidates:
            raise NoAgentOnline(agent or "no agent connected")
        target = candidates[0]
        self._send_threadsafe(target, EnumerateRequest(mac=mac))
        assert target.name is not None
        return target.name

    def _send_threadsafe(self, conn: _Connection, message: WireMessage) -> None:
        loop = self._loop
        if loop is None:
            raise NoAgentOnline("server not running")
        asyncio.run_coroutine_threadsafe(
            self._send(conn, message), loop
        ).result(timeout=10)

    # -- connection handling ----------------------------------------------

    async def _send(self, conn: _Connection, message: WireMessage) -> None:
        try:
            conn.writer.write(encode_message(message))
            await conn.writer.drain()
        except (ConnectionError, OSError):
            pass  # reader side will notice and clean up

    async def _handle_connection(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        conn = _Connection(writer, self._store.now_us(), self._clock())
        with self._lock:
            self._connections.add(conn)
        try:
            await self._read_lines(conn, reader)
        except (asyncio.CancelledError, ConnectionError, OSError):
            pass
        finally:
            self._drop_connection(conn)
            with contextlib.suppress(Exception):
                writer.close()

    def _drop_connection(self, conn: _Connection) -> None:
        with self._lock:
            self._connections.discard(conn)
            was_online = conn.online
            conn.online = False
        if was_online and conn.name is not None:
            self._store.emit_agent_status(conn.name, online=False,
                                          reason="disconnected")

    async def _read_lines(self, conn: _Connection,
                          reader: asyncio.StreamReader) -> None:
        buffer = bytearray()
        discarding = False
        while True:
            chunk = await reader.read(65536)
            if not chunk:
                return
            buffer += chunk
            while (idx := buffer.find(b"\n")) >= 0:
                line = bytes(buffer[:idx])
                del buffer[: idx + 1]
                if discarding:
                    discarding = False  # tail of the oversize line; drop it
                    continue
                if not await self._handle_line(conn, line):
                    return
            if discarding:
                buffer.clear()
            elif len(buffer) + 1 > MAX_LINE_BYTES:
                await self._count_malformed(
                    conn, f"line exceeds {MAX_LINE_BYTES} bytes"
                )
                if conn.name is None:
                    await self._send(conn, ErrorMessage(ERROR_EXPECTED_HELLO,
                                                        "oversize first line"))
                    return
                buffer.clear()
                discarding = True

    async def _count_malformed(self, conn: _Connection, reason: str) -> None:
        with self._lock:
            conn.malformed_lines += 1
            self._malformed_total += 1
        if conn.name is not None:
            await self._send(conn, ErrorMessage(ERROR_BAD_MESSAGE, reason))

    async def _handle_line(self, conn: _Connection, line: bytes) -> bool:
        """Process one complete line; False closes the connection."""
        try:
            message = decode_message(line)
        except ProtocolError as exc:
            if conn.name is None:
                await self._send(conn, ErrorMessage(ERROR_EXPECTED_HELLO, str(exc)))
                return False
            await self._count_malformed(conn, str(exc))
            return True

        if conn.name is None:
            return await self._handle_hello(conn, message)

        conn.last_seen = self._clock()
        if not conn.online:
            conn.online = True
            self._store.emit_agent_status(conn.name, online=True,
                                          reason="heartbeat_resumed")

        if isinstance(message, AdvMessage):
            adv = dataclasses.replace(message.adv, source_id=conn.name)
            try:
                self._store.ingest(adv)
            except InvalidAdvertisement as exc:
                await self._count_malformed(conn, f"bad advertisement: {exc}")
            else:
                conn.advertisements += 1
        elif isinstance(message, Heartbeat):
            pass  # aliveness already recorded above
        elif isinstance(message, GattResultMessage):
            if self._on_gatt_result is not None:
                self._on_gatt_result(message.mac, message.services)
        elif isinstance(message, ErrorMessage):
            pass  # informational; agents report non-fatal conditions
        else:
            await self._count_malformed(
                conn, f"unexpected {type(message).__name__} from agent"
            )
        return True

    async def _handle_hello(self, conn: _Connection, message: WireMessage) -> bool:
        if not isinstance(message, Hello):
            await self._send(
                conn,
                ErrorMessage(ERROR_EXPECTED_HELLO,
                             "first message must be hello"),
            )
            return False
        if message.proto_version != PROTO_VERSION:
            await self._send(
                conn,
                ErrorMessage(
                    ERROR_UNSUPPORTED,
                    f"proto_version {message.proto_version} unsupported",
                ),
            )
            return False
        conn.name = message.agent
        conn.capabilities = message.capabilities
        conn.last_seen = self._clock()
        conn.online = True
        self._store.emit_agent_status(message.agent, online=True,
                                      reason="connected")
        return True

    async def _watchdog_loop(self) -> None:
        while True:
            await asyncio.sleep(self._watchdog_poll_s)
            now = self._clock()
            stale: list[_Connection] = []
            with self._lock:
                for conn in self._connections:
                    if (
                        conn.online
                        and conn.name is not None
                        and now - conn.last_seen > self._offline_after_s
                    ):
                        conn.online = False
                        stale.append(conn)
            for conn in stale:
                assert conn.name is not None
                self._store.emit_agent_status(conn.name, online=False,
                                              reason="heartbeat_timeout")
