"""HTTP + WebSocket API over a device store.

REST endpoints expose queries, detail views, proximity snapshots, exports,
and enumeration commands; ``/api/events`` streams a snapshot frame followed
by live store events.  Slow WebSocket consumers are disconnected when their
buffer overflows rather than allowed to stall ingest.
"""

from __future__ import annotations

import asyncio
import contextlib
import io
import json
from typing import Any

from fastapi import FastAPI, HTTPException, Response, WebSocket
from fastapi.staticfiles import StaticFiles

from btlemap.gatt import EnumerationCoordinator, NoAgentOnline, UnknownDevice
from btlemap.proximity import PathLossConfig, proximity_snapshot
from btlemap.sources.pcap import write_pcap
from btlemap.sources.server import AgentServer, BindFailed
from btlemap.store import DeviceFilter, DeviceStore, SubscriptionLagged

__all__ = ["create_app", "run_service", "BindFailed"]

SNAPSHOT_KIND = "snapshot"
EVENT_BUFFER_CAPACITY = 1000
CLOSE_CODE_LAGGED = 1013
CLOSE_REASON_LAGGED = "lagged"
_POLL_INTERVAL_S = 0.1

PCAP_MEDIA_TYPE = "application/vnd.tcpdump.pcap"
CSV_MEDIA_TYPE = "text/csv; charset=utf-8"


def create_app(
    store: DeviceStore,
    *,
    agent_server: AgentServer | None = None,
    coordinator: EnumerationCoordinator | None = None,
    path_loss: PathLossConfig | None = None,
    static_dir: str | None = None,
    event_buffer_capacity: int = EVENT_BUFFER_CAPACITY,
) -> FastAPI:
    """Wire the API around an already-running store.

    ``agent_server`` backs /api/agents and, via ``coordinator``, the
    enumerate command; both are optional so file-replay sessions can serve
    the same API without a listener.
    """
    app = FastAPI(title="btlemap", docs_url=None, redoc_url=None)

    @app.get("/api/devices")
    def list_devices(
        manufacturer: str | None = None,
        min_rssi: int | None = None,
        active_within_s: float | None = None,
        name: str | None = None,
    ) -> list[dict[str, Any]]:
        device_filter = DeviceFilter(
            manufacturer=manufacturer,
            min_rssi=min_rssi,
            active_within_s=active_within_s,
            name_substring=name,
        )
        return store.query(device_filter)

    @app.get("/api/devices/{device_id}")
    def device_detail(device_id: str) -> dict[str, Any]:
        try:
            return store.device_detail(device_id)
        except UnknownDevice:
            raise HTTPException(status_code=404, detail="unknown device")

    @app.get("/api/proximity")
    def proximity() -> list[dict[str, Any]]:
        entries = proximity_snapshot(store, path_loss)
        return [entry.to_json_dict() for entry in entries]

    @app.post("/api/devices/{device_id}/enumerate", status_code=202)
    def enumerate_device(device_id: str) -> dict[str, Any]:
        if coordinator is None:
            raise HTTPException(
                status_code=503, detail="enumeration unavailable: no listener"
            )
        try:
            accepted = coordinator.request(device_id)
        except UnknownDevice:
            raise HTTPException(status_code=404, detail="unknown device")
        except NoAgentOnline:
            raise HTTPException(status_code=503, detail="no agent online")
        if not accepted:
            raise HTTPException(
                status_code=409, detail="enumeration already pending"
            )
        return {"device_id": device_id, "status": "requested"}

    @app.get("/api/export/rssi.csv")
    def export_rssi() -> Response:
        return Response(
            content=store.export_rssi_csv(), media_type=CSV_MEDIA_TYPE
        )

    @app.get("/api/export/capture.pcap")
    def export_pcap() -> Response:
        buffer = io.BytesIO()
        write_pcap(store.all_advertisements(), buffer)
        return Response(content=buffer.getvalue(), media_type=PCAP_MEDIA_TYPE)

    @app.get("/api/agents")
    def list_agents() -> list[dict[str, Any]]:
        if agent_server is None:
            return []
        return [info.to_json_dict() for info in agent_server.agents()]

    @app.websocket("/api/events")
    async def event_stream(websocket: WebSocket) -> None:
        await websocket.accept()
        # Subscribe before snapshotting: an event raced between the two is
        # then re-delivered as a delta instead of silently lost.
        subscription = store.subscribe(capacity=event_buffer_capacity)
        try:
            snapshot_body = {
                "devices": store.query(),
                "agents": [
                    info.to_json_dict()
                    for info in (agent_server.agents() if agent_server else [])
                ],
            }
            await websocket.send_text(
                _envelope(0, SNAPSHOT_KIND, snapshot_body)
            )
            disconnect = asyncio.ensure_future(_client_gone(websocket))
            seq = 1
            try:
                while not disconnect.done():
                    try:
                        event = await asyncio.to_thread(
                            subscription.poll, _POLL_INTERVAL_S
                        )
                    except SubscriptionLagged:
                        await websocket.close(
                            code=CLOSE_CODE_LAGGED, reason=CLOSE_REASON_LAGGED
                        )
                        return
                    if event is None or disconnect.done():
                        continue
                    await websocket.send_text(
                        _envelope(seq, event.kind, event.body)
                    )
                    seq += 1
            finally:
                disconnect.cancel()
                with contextlib.suppress(asyncio.CancelledError):
                    await disconnect
        except Exception:
            pass  # peer went away mid-send; nothing to salvage
        finally:
            subscription.close()

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")

    return app


def _envelope(seq: int, kind: str, body: Any) -> str:
    return json.dumps(
        {"seq": seq, "kind": kind, "body": body}, separators=(",", ":")
    )


async def _client_gone(websocket: WebSocket) -> None:
    while True:
        message = await websocket.receive()
        if message["type"] == "websocket.disconnect":
            return


def run_service(
    app: FastAPI, host: str = "127.0.0.1", port: int = 8374
) -> None:
    """Serve until interrupted; raises BindFailed when the port is taken."""
    import socket

    import uvicorn

    # Bind before handing off: uvicorn turns bind errors into sys.exit.
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise BindFailed(f"cannot bind {host}:{port}: {exc}") from exc
    config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)
    try:
        server.run(sockets=[sock])
    finally:
        sock.close()
