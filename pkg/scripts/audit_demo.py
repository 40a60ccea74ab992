#!/usr/bin/env python3
"""Offline audit report: inventory, fingerprints, and trackability findings
for a scenario file or a pcap capture."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from btlemap.sources.pcap import read_pcap
from btlemap.sources.simulate import generate_events, load_scenario
from btlemap.store import DeviceStore, StoreConfig


def load_advertisements(path: Path):
    if path.suffix == ".json":
        return generate_events(load_scenario(path))
    with open(path, "rb") as stream:
        result = read_pcap(stream)
    if result.error:
        print(f"warning: {result.error}", file=sys.stderr)
    return result.advertisements


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("input", type=Path,
                        help="scenario .json or capture .pcap")
    args = parser.parse_args()

    store = DeviceStore(StoreConfig())
    advs = load_advertisements(args.input)
    for adv in advs:
        store.ingest(adv)

    print(f"{len(advs)} advertisements -> {store.device_count()} devices")
    print(f"partition {store.partition_hash()[:16]}…")
    print()
    for device_id in store.device_ids():
        summary = store.device_summary(device_id)
        detail = store.device_detail(device_id)
        fp = summary["fingerprint"]
        name = summary["name"] or "(unnamed)"
        manufacturer = fp["manufacturer"] or "unknown vendor"
        kind = fp["device_type"] or "unclassified"
        print(f"{device_id}  {name}")
        print(f"    {manufacturer} / {kind}"
              f"  rssi {summary['last_rssi']} dBm"
              f"  {summary['adv_count']} advs"
              f"  {len(detail['macs'])} MAC(s)")
        for finding in store.detect_trackable(device_id):
            print(f"    TRACKABLE {finding.field_descriptor}"
                  f" = {finding.constant_value.hex()}"
                  f" across {finding.distinct_macs_observed} MACs")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
