#!/usr/bin/env python3
"""Full-stack demo on loopback: agent server + mDNS announcement + a
simulated scanner agent that finds the server via DNS-SD, all feeding the
HTTP/WebSocket service.  Ctrl-C stops everything."""

import argparse
import sys
import threading
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from btlemap.gatt import EnumerationCoordinator
from btlemap.service import create_app, run_service
from btlemap.sources.agent import Agent, AgentConfig
from btlemap.sources.mdns import MdnsAnnouncer
from btlemap.sources.server import AgentServer
from btlemap.store import DeviceStore, StoreConfig

REPO_ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", type=Path,
                        default=REPO_ROOT / "scenarios" / "office.json")
    parser.add_argument("--http-port", type=int, default=8374)
    parser.add_argument("--agent-port", type=int, default=8373)
    parser.add_argument("--ui-dir", type=Path,
                        default=REPO_ROOT / "frontend" / "dist")
    args = parser.parse_args()

    store = DeviceStore(StoreConfig())
    agent_server = AgentServer(store, port=args.agent_port)
    host, port = agent_server.start()
    coordinator = EnumerationCoordinator(
        store, agent_server.request_enumeration
    )
    agent_server.set_gatt_result_handler(coordinator.on_result)
    announcer = MdnsAnnouncer("btlemap-demo", port)
    announcer.start()
    print(f"agent server on {host}:{port}"
          f" ({'degraded, no mDNS' if announcer.degraded else 'announced'})")

    # No server_addr: the agent proves the mDNS path by browsing for one.
    agent = Agent(AgentConfig(
        name="sim-scanner",
        backend="sim",
        path=args.scenario,
        stream_delay_s=0.1,
    ))
    agent.start()

    static_dir = args.ui_dir if args.ui_dir.is_dir() else None
    if static_dir is None:
        print("frontend/dist not built; serving API only", file=sys.stderr)
    app = create_app(store, agent_server=agent_server,
                     coordinator=coordinator, static_dir=static_dir)
    print(f"http://127.0.0.1:{args.http_port}/  (Ctrl-C to stop)")
    try:
        run_service(app, "127.0.0.1", args.http_port)
    except KeyboardInterrupt:
        pass
    finally:
        agent.stop()
        coordinator.shutdown()
        announcer.stop()
        agent_server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
