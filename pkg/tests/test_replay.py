"""Timed replay tests.

The pacing contract is checked twice: once against the wall clock at the
documented ±50 ms tolerance, and once against an injected clock for exact
arithmetic without real sleeping.
"""

import math
import threading
import time

import pytest

from btlemap.sources.replay import ReplayCancelled, replay
from btlemap.store import AddressType, PduType, RawAdvertisement


def adv_at(timestamp_us: int, tag: int = 0) -> RawAdvertisement:
    return RawAdvertisement(
        timestamp_us=timestamp_us,
        source_id="pcap",
        mac=bytes([0xC0, 0, 0, 0, 0, tag]),
        address_type=AddressType.RANDOM,
        pdu_type=PduType.ADV_IND,
        rssi=-50,
        payload=b"\x02\x01\x06",
    )


class FakeTime:
    """Clock that only advances when slept on."""

    def __init__(self) -> None:
        self.now = 0.0

    def clock(self) -> float:
        return self.now

    def sleep(self, seconds: float) -> None:
        assert seconds >= 0
        self.now += seconds


class TestPacing:
    def test_one_second_gap_at_double_speed_wall_clock(self) -> None:
        advs = [adv_at(0), adv_at(1_000_000)]
        deliveries: list[float] = []
        replay(advs, lambda a: deliveries.append(time.monotonic()), speed=2.0)
        gap = deliveries[1] - deliveries[0]
        assert 0.45 <= gap <= 0.55, f"gap {gap:.3f}s outside 0.5s ±50ms"

    def test_gap_scaling_exact_with_fake_clock(self) -> None:
        fake = FakeTime()
        advs = [adv_at(0), adv_at(3_000_000), adv_at(4_500_000)]
        deliveries: list[float] = []
        replay(
            advs,
            lambda a: deliveries.append(fake.now),
            speed=3.0,
            clock=fake.clock,
            sleep=fake.sleep,
        )
        assert deliveries == pytest.approx([0.0, 1.0, 1.5])

    def test_slowdown_speeds_below_one(self) -> None:
        fake = FakeTime()
        deliveries: list[float] = []
        replay(
            [adv_at(0), adv_at(1_000_000)],
            lambda a: deliveries.append(fake.now),
            speed=0.5,
            clock=fake.clock,
            sleep=fake.sleep,
        )
        assert deliveries[1] == pytest.approx(2.0)


class TestOrderingAndCompletion:
    def test_empty_sequence_completes_immediately(self) -> None:
        assert replay([], lambda a: pytest.fail("sink called")) == 0

    def test_infinite_speed_delivers_all_in_order(self) -> None:
        advs = [adv_at(i * 1_000_000, tag=i) for i in range(50)]
        seen: list[RawAdvertisement] = []
        count = replay(advs, seen.append, speed=math.inf)
        assert count == 50
        assert seen == advs

    def test_unsorted_input_delivered_in_timestamp_order(self) -> None:
        advs = [adv_at(3_000_000, 3), adv_at(1_000_000, 1), adv_at(2_000_000, 2)]
        seen: list[int] = []
        replay(advs, lambda a: seen.append(a.timestamp_us), speed=math.inf)
        assert seen == [1_000_000, 2_000_000, 3_000_000]

    def test_identical_timestamps_keep_stable_order(self) -> None:
        advs = [adv_at(1_000_000, tag=i) for i in range(5)]
        seen: list[int] = []
        replay(advs, lambda a: seen.append(a.mac[5]), speed=math.inf)
        assert seen == [0, 1, 2, 3, 4]

    def test_invalid_speed_rejected(self) -> None:
        for bad in (0.0, -1.0, math.nan):
            with pytest.raises(ValueError):
                replay([adv_at(0)], lambda a: None, speed=bad)


class TestCancellation:
    def test_cancel_between_deliveries(self) -> None:
        fake = FakeTime()
        cancel = threading.Event()
        delivered: list[int] = []

        def sink(adv: RawAdvertisement) -> None:
            delivered.append(adv.timestamp_us)
            cancel.set()

        with pytest.raises(ReplayCancelled):
            replay(
                [adv_at(0), adv_at(5_000_000)],
                sink,
                cancel=cancel,
                clock=fake.clock,
                sleep=fake.sleep,
            )
        assert delivered == [0]

    def test_cancel_before_start_delivers_nothing(self) -> None:
        cancel = threading.Event()
        cancel.set()
        with pytest.raises(ReplayCancelled):
            replay(
                [adv_at(0), adv_at(1_000_000)],
                lambda a: pytest.fail("sink called"),
                cancel=cancel,
                clock=FakeTime().clock,
                sleep=FakeTime().sleep,
            )

    def test_cancel_honored_at_infinite_speed(self) -> None:
        cancel = threading.Event()
        cancel.set()
        with pytest.raises(ReplayCancelled):
            replay([adv_at(0)], lambda a: None, speed=math.inf, cancel=cancel)

    def test_cancel_checked_within_a_sleep_slice(self) -> None:
        # A long gap must not delay cancellation by the whole gap.
        cancel = threading.Event()
        start = time.monotonic()

        def trip() -> None:
            time.sleep(0.08)
            cancel.set()

        thread = threading.Thread(target=trip)
        thread.start()
        with pytest.raises(ReplayCancelled):
            replay([adv_at(0), adv_at(60_000_000)], lambda a: None, cancel=cancel)
        thread.join()
        assert time.monotonic() - start < 5.0
