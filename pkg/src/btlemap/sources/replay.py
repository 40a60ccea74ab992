"""Timed re-delivery of recorded advertisements."""

from __future__ import annotations

import math
import threading
import time
from typing import Callable, Iterable

from btlemap.store import RawAdvertisement

# Sleep in short slices so a cancel request is honored promptly.
_SLEEP_SLICE_S = 0.05


class ReplayCancelled(Exception):
    pass


def replay(
    advertisements: Iterable[RawAdvertisement],
    sink: Callable[[RawAdvertisement], None],
    speed: float = 1.0,
    *,
    cancel: threading.Event | None = None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> int:
    """Deliver advertisements to sink, pacing by their recorded timestamps.

    Inter-advertisement gaps are divided by ``speed``; ``math.inf`` delivers
    everything immediately.  Returns the number delivered.  Raises
    ReplayCancelled if the cancel event is set mid-run.
    """
    if not (speed > 0):
        raise ValueError(f"speed must be positive, got {speed}")
    ordered = sorted(advertisements, key=lambda a: a.timestamp_us)
    if not ordered:
        return 0

    start = clock()
    first_ts = ordered[0].timestamp_us
    delivered = 0
    for adv in ordered:
        if speed != math.inf:
            target = start + (adv.timestamp_us - first_ts) / 1e6 / speed
            while True:
                if cancel is not None and cancel.is_set():
                    raise ReplayCancelled(f"after {delivered} advertisements")
                remaining = target - clock()
                if remaining <= 0:
                    break
                sleep(min(remaining, _SLEEP_SLICE_S))
        elif cancel is not None and cancel.is_set():
            raise ReplayCancelled(f"after {delivered} advertisements")
        sink(adv)
        delivered += 1
    return delivered
