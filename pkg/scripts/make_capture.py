#!/usr/bin/env python3
"""Render a scenario to a shareable pcap capture (linktype 256)."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from btlemap.sources.pcap import write_pcap
from btlemap.sources.simulate import generate_events, load_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", type=Path)
    parser.add_argument("output", type=Path)
    args = parser.parse_args()

    events = generate_events(load_scenario(args.scenario))
    with open(args.output, "wb") as stream:
        written = write_pcap(events, stream)
    print(f"{written} advertisements -> {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
