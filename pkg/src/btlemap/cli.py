"""Operator command line: dissect, replay, simulate, listen, serve, export,
agent.

Source commands (`replay`, `simulate`, `listen`) feed an in-process store and
then serve the HTTP/WS API, or with --headless write the session capture file
and print a one-line summary instead.  `export` rebuilds a store from the
session file, so headless runs compose across processes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import threading
import time
from pathlib import Path
from typing import Any, Callable

from btlemap.dissect import MAX_PAYLOAD_LEN, dissect
from btlemap.gatt import EnumerationCoordinator
from btlemap.proximity import PathLossConfig
from btlemap.sources.agent import (
    Agent,
    AgentConfig,
    BACKEND_PCAP,
    BACKEND_SIM,
)
from btlemap.sources.mdns import MdnsAnnouncer
from btlemap.sources.pcap import read_pcap, write_pcap
from btlemap.sources.replay import replay
from btlemap.sources.server import AgentServer
from btlemap.sources.simulate import load_scenario, simulate
from btlemap.store import DeviceStore, StoreConfig, mac_str

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

DEFAULT_HTTP_ADDR = "127.0.0.1:8374"
DEFAULT_AGENT_PORT = 8373
SESSION_FILE_DEFAULT = "btlemap-session.pcap"
ADDR_ENV = "BTLEMAP_ADDR"
SESSION_ENV = "BTLEMAP_SESSION"

_HEX_RE = re.compile(r"[0-9a-fA-F]*")


class UsageError(Exception):
    """Bad arguments beyond what argparse can detect; exits with code 2."""


def session_path() -> Path:
    return Path(os.environ.get(SESSION_ENV, SESSION_FILE_DEFAULT))


def http_addr_default() -> str:
    return os.environ.get(ADDR_ENV, DEFAULT_HTTP_ADDR)


def parse_addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise UsageError(f"address must be host:port, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise UsageError(f"bad port in address {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="btlemap",
        description="BLE environment auditing: dissection, tracking, "
        "proximity, enumeration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dissect = sub.add_parser(
        "dissect", help="print dissection trees for a hex payload or pcap"
    )
    p_dissect.add_argument("input", help="hex string or pcap file path")
    p_dissect.add_argument("--json", action="store_true", dest="as_json")

    for name, helptext in (
        ("replay", "feed a capture file into the store"),
        ("simulate", "feed a scenario's generated traffic into the store"),
        ("listen", "accept remote agents and feed their traffic"),
    ):
        p = sub.add_parser(name, help=helptext)
        if name == "replay":
            p.add_argument("pcap", help="capture file to replay")
            p.add_argument("--speed", default="1.0",
                           help="rate multiplier, or 'max'")
        elif name == "simulate":
            p.add_argument("scenario", help="scenario JSON path")
            p.add_argument("--duration", type=float, default=None,
                           help="override scenario duration in seconds")
        else:
            p.add_argument("--port", type=int, default=DEFAULT_AGENT_PORT)
            p.add_argument("--duration", type=float, default=None,
                           help="headless: stop after this many seconds")
            p.add_argument("--name", default="btlemap",
                           help="mDNS instance name")
            p.add_argument("--no-mdns", action="store_true")
        p.add_argument("--headless", action="store_true",
                       help="skip the HTTP API; write session file, print "
                       "summary")
        p.add_argument("--addr", default=None,
                       help=f"HTTP bind host:port (default {ADDR_ENV} or "
                       f"{DEFAULT_HTTP_ADDR})")

    p_serve = sub.add_parser("serve", help="serve the HTTP/WS API and UI")
    p_serve.add_argument("--addr", default=None)
    p_serve.add_argument("--ui-dir", default=None,
                         help="built UI assets directory")

    p_export = sub.add_parser("export",
                              help="export the session's RSSI log or capture")
    p_export.add_argument("kind", choices=["rssi", "pcap"])
    p_export.add_argument("path", help="output file, or - for stdout")

    p_agent = sub.add_parser("agent", help="run a scanner agent")
    p_agent.add_argument("--backend", required=True,
                         choices=[BACKEND_PCAP, BACKEND_SIM])
    p_agent.add_argument("--path", required=True,
                         help="pcap file or scenario JSON for the backend")
    p_agent.add_argument("--server", default=None,
                         help="host:port; discovered via mDNS when omitted")
    p_agent.add_argument("--name", default="agent")
    p_agent.add_argument("--exit-when-done", action="store_true",
                         help="exit once the backend is fully streamed")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler: Callable[[argparse.Namespace], int] = {
        "dissect": cmd_dissect,
        "replay": cmd_replay,
        "simulate": cmd_simulate,
        "listen": cmd_listen,
        "serve": cmd_serve,
        "export": cmd_export,
        "agent": cmd_agent,
    }[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


# -- dissect ---------------------------------------------------------------


def _payload_from_hex(text: str) -> bytes:
    cleaned = text.replace(":", "").replace(" ", "")
    if _HEX_RE.fullmatch(cleaned) is None:
        if "/" in text or "." in text:
            raise FileNotFoundError(f"no such file: {text}")
        raise UsageError(f"not a hex string: {text!r}")
    if len(cleaned) % 2:
        raise UsageError("hex string has odd length")
    payload = bytes.fromhex(cleaned)
    if len(payload) > MAX_PAYLOAD_LEN:
        raise UsageError(
            f"payload is {len(payload)} bytes; advertising data is at most "
            f"{MAX_PAYLOAD_LEN}"
        )
    return payload


def cmd_dissect(args: argparse.Namespace) -> int:
    path = Path(args.input)
    if args.input and path.is_file():
        with open(path, "rb") as stream:
            result = read_pcap(stream)
        entries = [
            {
                "timestamp_us": adv.timestamp_us,
                "mac": mac_str(adv.mac),
                "rssi": adv.rssi,
                "channel": adv.channel,
                "tree": dissect(adv.payload).to_dict(),
            }
            for adv in result.advertisements
        ]
        if args.as_json:
            print(json.dumps(entries, indent=2))
        else:
            for entry, adv in zip(entries, result.advertisements):
                print(f"# {entry['mac']} rssi={entry['rssi']} "
                      f"t={entry['timestamp_us']}us ch={entry['channel']}")
                print(dissect(adv.payload).render_text())
                print()
        if result.error is not None:
            print(f"warning: {result.error}", file=sys.stderr)
        return EXIT_OK

    payload = _payload_from_hex(args.input)
    tree = dissect(payload)
    if args.as_json:
        print(json.dumps(tree.to_dict(), indent=2))
    else:
        print(tree.render_text())
    return EXIT_OK


# -- source commands -------------------------------------------------------


def _finish_headless(store: DeviceStore) -> int:
    with open(session_path(), "wb") as stream:
        write_pcap(store.all_advertisements(), stream)
    print(
        f"devices={len(store.query())} "
        f"advertisements={store.total_ingested} "
        f"partition={store.partition_hash()}"
    )
    return EXIT_OK


def _serve_store(
    store: DeviceStore,
    addr_arg: str | None,
    *,
    agent_server: AgentServer | None = None,
    coordinator: EnumerationCoordinator | None = None,
    ui_dir: str | None = None,
) -> int:
    from btlemap.service import create_app, run_service

    host, port = parse_addr(addr_arg or http_addr_default())
    static_dir = _find_ui_dir(ui_dir)
    app = create_app(
        store,
        agent_server=agent_server,
        coordinator=coordinator,
        path_loss=PathLossConfig(),
        static_dir=static_dir,
    )
    print(f"serving http://{host}:{port}/ "
          f"(ui={'yes' if static_dir else 'no'})", file=sys.stderr)
    run_service(app, host, port)
    return EXIT_OK


def _find_ui_dir(explicit: str | None) -> str | None:
    if explicit is not None:
        if not Path(explicit).is_dir():
            raise UsageError(f"not a directory: {explicit}")
        return explicit
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return str(candidate) if candidate.is_dir() else None


def _parse_speed(text: str) -> float:
    if text == "max":
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"bad speed {text!r}") from None


def cmd_replay(args: argparse.Namespace) -> int:
    speed = _parse_speed(args.speed)
    with open(args.pcap, "rb") as stream:
        result = read_pcap(stream)
    if result.error is not None:
        print(f"warning: {result.error}", file=sys.stderr)
    store = DeviceStore(StoreConfig())
    if args.headless:
        replay(result.advertisements, store.ingest, speed=speed)
        return _finish_headless(store)
    feeder = threading.Thread(
        target=replay, args=(result.advertisements, store.ingest),
        kwargs={"speed": speed}, daemon=True,
    )
    feeder.start()
    return _serve_store(store, args.addr)


def cmd_simulate(args: argparse.Namespace) -> int:
    import dataclasses

    scenario = load_scenario(args.scenario)
    if args.duration is not None:
        scenario = dataclasses.replace(scenario, duration_s=args.duration)
    store = DeviceStore(StoreConfig())
    if args.headless:
        simulate(scenario, store.ingest)
        return _finish_headless(store)
    from btlemap.sources.simulate import generate_events

    events = generate_events(scenario)
    feeder = threading.Thread(
        target=replay, args=(events, store.ingest), daemon=True
    )
    feeder.start()
    return _serve_store(store, args.addr)


def cmd_listen(args: argparse.Namespace) -> int:
    store = DeviceStore(StoreConfig())
    agent_server = AgentServer(store, port=args.port)
    host, port = agent_server.start()
    coordinator = EnumerationCoordinator(
        store, send_request=agent_server.request_enumeration
    )
    agent_server.set_gatt_result_handler(coordinator.on_result)
    announcer = None
    if not args.no_mdns:
        announcer = MdnsAnnouncer(args.name, port)
        announcer.start()
        if announcer.degraded:
            print("warning: mDNS unavailable; agents need --server",
                  file=sys.stderr)
    print(f"listening for agents on {host}:{port}", file=sys.stderr)
    try:
        if args.headless:
            if args.duration is not None:
                time.sleep(args.duration)
            else:
                while True:
                    time.sleep(3600)
            return _finish_headless(store)
        return _serve_store(
            store, args.addr, agent_server=agent_server,
            coordinator=coordinator,
        )
    except KeyboardInterrupt:
        if args.headless:
            return _finish_headless(store)
        return EXIT_OK
    finally:
        coordinator.shutdown()
        if announcer is not None:
            announcer.stop()
        agent_server.stop()


def cmd_serve(args: argparse.Namespace) -> int:
    store = DeviceStore(StoreConfig())
    session = session_path()
    if session.exists():
        with open(session, "rb") as stream:
            result = read_pcap(stream)
        for adv in result.advertisements:
            store.ingest(adv)
        print(f"loaded {store.total_ingested} advertisements from {session}",
              file=sys.stderr)
    return _serve_store(store, args.addr, ui_dir=args.ui_dir)


# -- export ----------------------------------------------------------------


def _rebuild_session_store() -> DeviceStore:
    session = session_path()
    if not session.exists():
        raise FileNotFoundError(
            f"no session capture at {session}; run a source command with "
            "--headless first"
        )
    store = DeviceStore(StoreConfig())
    with open(session, "rb") as stream:
        result = read_pcap(stream)
    for adv in result.advertisements:
        store.ingest(adv)
    return store


def cmd_export(args: argparse.Namespace) -> int:
    store = _rebuild_session_store()
    if args.kind == "rssi":
        body = store.export_rssi_csv()
    else:
        import io

        buffer = io.BytesIO()
        write_pcap(store.all_advertisements(), buffer)
        body = buffer.getvalue()
    if args.path == "-":
        sys.stdout.buffer.write(body)
    else:
        with open(args.path, "wb") as stream:
            stream.write(body)
        print(f"wrote {len(body)} bytes to {args.path}", file=sys.stderr)
    return EXIT_OK


# -- agent -----------------------------------------------------------------


def cmd_agent(args: argparse.Namespace) -> int:
    server_addr = parse_addr(args.server) if args.server else None
    config = AgentConfig(
        name=args.name,
        backend=args.backend,
        path=args.path,
        server_addr=server_addr,
    )
    agent = Agent(config)
    agent.start()
    print(f"agent {args.name}: streaming {len(agent.advertisements)} "
          f"advertisements", file=sys.stderr)
    try:
        if args.exit_when_done:
            while not agent.finished.wait(0.2):
                if agent.error is not None:
                    break
        else:
            while agent.error is None:
                time.sleep(0.2)
    except KeyboardInterrupt:
        pass
    finally:
        agent.stop()
    if agent.error is not None:
        print(f"error: {agent.error}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
