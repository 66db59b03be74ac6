"""Deterministic discrete-event engine and link models.

Links are overhead-augmented rate servers: a packet occupies the medium for
(wire bytes x 8) / data_rate, waits in a bounded buffer behind earlier
traffic, and spends a fixed pipelined processing delay after leaving the
wire. No carrier-sense or PHY contention is modeled; rates, buffers, and
processing rates drive every metric. Arrivals that would overflow the
buffer are dropped and counted, never raised.

The short-range WLAN is one shared medium carrying both directions. The
long-range link is served per direction at its sustained rate with
real-time flows (video, case reports) strictly prioritized over best
effort, which keeps the reserved-rate guarantee trivially true; at a
sustained-rate server the shaped token bucket never becomes the binding
constraint, so it is not simulated separately.

All timestamps are integer microseconds. Runs with the same seed and
configuration produce identical event traces.
"""
from __future__ import annotations

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .protocol import HEADER_LEN, VideoCallSpec, fragment_payload

logger = logging.getLogger(__name__)

CONTROL = "control"
VIDEO = "video"
BEST_EFFORT = "best_effort"
EDCA_ORDER = (CONTROL, VIDEO, BEST_EFFORT)
WIMAX_ORDER = ("rt", "be")


class NetSimError(ValueError):
    """Invalid simulation operation."""


class SchedulingError(NetSimError):
    """Event scheduled into the past."""


class MetricsError(NetSimError):
    """Metrics requested from an unstarted run."""


def tx_time_us(bits: int, rate_bps: int) -> int:
    """Wire occupancy of a packet, rounded to the nearest microsecond."""
    if rate_bps <= 0:
        raise NetSimError("data rate must be positive")
    return (bits * 1_000_000 + rate_bps // 2) // rate_bps


class EventQueue:
    """Timestamped callbacks dequeued in (time, insertion order)."""

    def __init__(self):
        self.now = 0
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._tie = 0

    def schedule(self, t: int, fn: Callable[[], None]) -> None:
        if t < self.now:
            raise SchedulingError(f"cannot schedule at {t} before now={self.now}")
        heapq.heappush(self._heap, (t, self._tie, fn))
        self._tie += 1

    def _step(self) -> None:
        t, _, fn = heapq.heappop(self._heap)
        self.now = t
        fn()

    def run_until(self, t_end: int) -> int:
        """Process every event with timestamp <= t_end; now ends at t_end."""
        count = 0
        while self._heap and self._heap[0][0] <= t_end:
            self._step()
            count += 1
        self.now = max(self.now, t_end)
        return count

    def run_all(self) -> int:
        """Drain the queue completely."""
        count = 0
        while self._heap:
            self._step()
            count += 1
        return count


@dataclass(frozen=True)
class Packet:
    created_at: int
    size_bytes: int          # header + payload, before link overhead
    access_class: str = CONTROL
    flow: str = "misc"
    src: int = 0
    dst: int = 0


@dataclass(frozen=True)
class WlanParams:
    data_rate_bps: int = 54_000_000
    buffer_bits: int = 1_000_000
    proc_rate_pps: int = 10_000
    overhead_bytes: int = 90     # MAC + LLC + IPv6 + UDP
    edca: bool = False
    mtu: int = 1500

    def __post_init__(self):
        if min(self.data_rate_bps, self.buffer_bits, self.proc_rate_pps) <= 0:
            raise NetSimError("rates and buffer must be positive")


@dataclass(frozen=True)
class WimaxParams:
    max_sustained_bps: int = 10_000_000
    min_reserved_bps: int = 5_000_000
    buffer_bits: int = 1_000_000
    overhead_bytes: int = 54
    mtu: int = 1500
    # shaping bucket depth (0.1 s at the sustained rate), kept for the record
    bucket_depth_bits: int = 1_000_000

    def __post_init__(self):
        if self.max_sustained_bps <= 0 or self.min_reserved_bps < 0:
            raise NetSimError("rates must be positive")
        if self.min_reserved_bps > self.max_sustained_bps:
            raise NetSimError("reserved rate cannot exceed the sustained rate")


def _percentile(sorted_samples: list[int], q: float) -> int:
    idx = max(0, math.ceil(q / 100.0 * len(sorted_samples)) - 1)
    return sorted_samples[idx]


class _Counter:
    __slots__ = ("offered_pkts", "offered_bits", "delivered_pkts",
                 "delivered_bits", "dropped_pkts", "dropped_bits")

    def __init__(self):
        self.offered_pkts = 0
        self.offered_bits = 0
        self.delivered_pkts = 0
        self.delivered_bits = 0
        self.dropped_pkts = 0
        self.dropped_bits = 0


class Metrics:
    """Per-link, per-class, and per-flow accounting.

    Packets created before ``measure_from_us`` are invisible to every
    counter, which keeps windowed conservation exact.
    """

    def __init__(self, measure_from_us: int = 0):
        self.measure_from_us = measure_from_us
        self.links: dict[str, _Counter] = {}
        self.by_class: dict[tuple[str, str], _Counter] = {}
        self.by_flow: dict[tuple[str, str], _Counter] = {}
        self.offered_bits_by_src: dict[tuple[str, str, int], int] = {}
        self.latencies: dict[tuple[str, str], list[int]] = {}
        self.started = False

    def _counted(self, pkt: Packet) -> bool:
        return pkt.created_at >= self.measure_from_us

    def _slots(self, link: str, pkt: Packet) -> list[_Counter]:
        return [
            self.links.setdefault(link, _Counter()),
            self.by_class.setdefault((link, pkt.access_class), _Counter()),
            self.by_flow.setdefault((link, pkt.flow), _Counter()),
        ]

    def offered(self, link: str, pkt: Packet, wire_bits: int) -> None:
        self.started = True
        if not self._counted(pkt):
            return
        for c in self._slots(link, pkt):
            c.offered_pkts += 1
            c.offered_bits += wire_bits
        key = (link, pkt.flow, pkt.src)
        self.offered_bits_by_src[key] = self.offered_bits_by_src.get(key, 0) + wire_bits

    def dropped(self, link: str, pkt: Packet, wire_bits: int) -> None:
        if not self._counted(pkt):
            return
        for c in self._slots(link, pkt):
            c.dropped_pkts += 1
            c.dropped_bits += wire_bits

    def delivered(self, link: str, pkt: Packet, wire_bits: int, latency_us: int) -> None:
        if not self._counted(pkt):
            return
        for c in self._slots(link, pkt):
            c.delivered_pkts += 1
            c.delivered_bits += wire_bits
        self.latencies.setdefault((link, pkt.access_class), []).append(latency_us)


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean_us: float
    p50_us: int
    p95_us: int
    p99_us: int
    max_us: int

    @staticmethod
    def of(samples: list[int]) -> "LatencyStats":
        s = sorted(samples)
        return LatencyStats(
            count=len(s),
            mean_us=sum(s) / len(s),
            p50_us=_percentile(s, 50),
            p95_us=_percentile(s, 95),
            p99_us=_percentile(s, 99),
            max_us=s[-1],
        )


@dataclass(frozen=True)
class MetricsRecord:
    window_us: int
    links: dict
    by_class: dict
    by_flow: dict
    latency: dict            # (link, class) -> LatencyStats
    offered_bits_by_src: dict
    recovery_times_us: tuple = ()

    def loss_ratio(self, link: str) -> float:
        c = self.links[link]
        return c["dropped_pkts"] / c["offered_pkts"] if c["offered_pkts"] else 0.0

    def throughput_bps(self, link: str) -> float:
        if self.window_us <= 0:
            return 0.0
        return self.links[link]["delivered_bits"] * 1e6 / self.window_us


def _counter_dict(c: _Counter) -> dict:
    return {k: getattr(c, k) for k in _Counter.__slots__}


def metrics_snapshot(metrics: Metrics, now_us: int,
                     recovery_times_us: tuple = ()) -> MetricsRecord:
    """Freeze counters into a record; valid only once traffic has flowed."""
    if not metrics.started:
        raise MetricsError("metrics snapshot of an unstarted run")
    for link, c in metrics.links.items():
        queued_p = c.offered_pkts - c.delivered_pkts - c.dropped_pkts
        if queued_p:
            raise MetricsError(
                f"link {link}: {queued_p} packets still queued; drain before snapshot"
            )
    return MetricsRecord(
        window_us=max(0, now_us - metrics.measure_from_us),
        links={k: _counter_dict(c) for k, c in sorted(metrics.links.items())},
        by_class={k: _counter_dict(c) for k, c in sorted(metrics.by_class.items())},
        by_flow={k: _counter_dict(c) for k, c in sorted(metrics.by_flow.items())},
        latency={k: LatencyStats.of(v) for k, v in sorted(metrics.latencies.items())},
        offered_bits_by_src=dict(sorted(metrics.offered_bits_by_src.items())),
        recovery_times_us=tuple(recovery_times_us),
    )


class Link:
    """Bounded-buffer rate server with optional strict-priority classes."""

    def __init__(
        self,
        queue: EventQueue,
        name: str,
        rate_bps: int,
        buffer_bits: int,
        overhead_bytes: int,
        metrics: Metrics,
        proc_delay_us: int = 0,
        mtu: int = 1500,
        class_order: tuple[str, ...] | None = None,
        class_key: Callable[[Packet], str] | None = None,
    ):
        self.queue = queue
        self.name = name
        self.rate_bps = rate_bps
        self.buffer_bits = buffer_bits
        self.overhead_bytes = overhead_bytes
        self.metrics = metrics
        self.proc_delay_us = proc_delay_us
        self.mtu = mtu
        self.class_order = class_order
        self.class_key = class_key or (lambda p: p.access_class)
        if class_order:
            self._queues = {cls: deque() for cls in class_order}
        else:
            self._queues = {"fifo": deque()}
        self._buffered_bits = 0
        self._busy = False

    def wire_bits(self, pkt: Packet) -> int:
        return (pkt.size_bytes + self.overhead_bytes) * 8

    def send(self, pkt: Packet, on_deliver: Callable[[Packet], None] | None = None) -> bool:
        """Offer a packet at the current simulation time.

        Returns False when the buffer is full (counted as a drop).
        """
        if pkt.size_bytes > self.mtu:
            raise NetSimError(
                f"{pkt.size_bytes}-byte packet exceeds MTU {self.mtu}; fragment first"
            )
        wire = self.wire_bits(pkt)
        self.metrics.offered(self.name, pkt, wire)
        if self._buffered_bits + wire > self.buffer_bits:
            self.metrics.dropped(self.name, pkt, wire)
            return False
        self._buffered_bits += wire
        if self.class_order:
            cls = self.class_key(pkt)
            if cls not in self._queues:
                cls = self.class_order[-1]
            self._queues[cls].append((pkt, wire, on_deliver))
        else:
            self._queues["fifo"].append((pkt, wire, on_deliver))
        if not self._busy:
            self._serve_next()
        return True

    def _pick(self):
        if self.class_order:
            for cls in self.class_order:
                if self._queues[cls]:
                    return self._queues[cls].popleft()
            return None
        q = self._queues["fifo"]
        return q.popleft() if q else None

    def _serve_next(self) -> None:
        item = self._pick()
        if item is None:
            self._busy = False
            return
        self._busy = True
        pkt, wire, cb = item
        finish = self.queue.now + tx_time_us(wire, self.rate_bps)
        self.queue.schedule(finish, lambda: self._finish(pkt, wire, cb))

    def _finish(self, pkt: Packet, wire: int, cb) -> None:
        self._buffered_bits -= wire
        deliver_at = self.queue.now + self.proc_delay_us
        self.metrics.delivered(self.name, pkt, wire, deliver_at - pkt.created_at)
        if cb is not None:
            self.queue.schedule(deliver_at, lambda: cb(pkt))
        self._serve_next()


def build_wlan_link(queue: EventQueue, params: WlanParams, metrics: Metrics,
                    name: str = "wlan") -> Link:
    return Link(
        queue, name,
        rate_bps=params.data_rate_bps,
        buffer_bits=params.buffer_bits,
        overhead_bytes=params.overhead_bytes,
        metrics=metrics,
        proc_delay_us=1_000_000 // params.proc_rate_pps,
        mtu=params.mtu,
        class_order=EDCA_ORDER if params.edca else None,
    )


def _wimax_class(pkt: Packet) -> str:
    # real-time service covers video and escalation reports
    return "rt" if pkt.access_class == VIDEO or pkt.flow == "case_report" else "be"


def build_wimax_link(queue: EventQueue, params: WimaxParams, metrics: Metrics,
                     name: str = "wimax") -> Link:
    return Link(
        queue, name,
        rate_bps=params.max_sustained_bps,
        buffer_bits=params.buffer_bits,
        overhead_bytes=params.overhead_bytes,
        metrics=metrics,
        proc_delay_us=0,
        mtu=params.mtu,
        class_order=WIMAX_ORDER,
        class_key=_wimax_class,
    )


def wlan_transmit(link: Link, pkt: Packet,
                  on_deliver: Callable[[Packet], None] | None = None) -> bool:
    return link.send(pkt, on_deliver)


def wimax_transmit(link: Link, pkt: Packet,
                   on_deliver: Callable[[Packet], None] | None = None) -> bool:
    return link.send(pkt, on_deliver)


def _per_call_wire_bps(call: VideoCallSpec, overhead_bytes: int, mtu: int) -> float:
    """One direction's offered load including fragment headers and overhead."""
    frags = fragment_payload(call.frame_len, mtu)
    wire_bytes = call.frame_len + len(frags) * (HEADER_LEN + overhead_bytes)
    return wire_bytes * 8 * call.frame_rate


def max_simultaneous_calls(wlan: WlanParams, wimax: WimaxParams,
                           call: VideoCallSpec) -> int:
    """Admission limit for concurrent video calls.

    The binding figure is the shared WLAN medium's radio bandwidth against
    the raw bidirectional call rate (each call loads the medium in both
    directions). Header-aware and long-range-link bounds are computed for
    diagnosis and logged when they are tighter, because the long-range hop
    saturates long before the WLAN under full video load.
    """
    bw = int(call.bandwidth_bps)
    radio_bound = int(wlan.data_rate_bps // (2 * bw))
    wlan_hdr_bps = _per_call_wire_bps(call, wlan.overhead_bytes, wlan.mtu)
    wlan_hdr_bound = int(wlan.data_rate_bps // (2 * wlan_hdr_bps))
    wimax_bps = _per_call_wire_bps(call, wimax.overhead_bytes, wimax.mtu)
    wimax_bound = int(wimax.max_sustained_bps // wimax_bps)
    if min(wlan_hdr_bound, wimax_bound) < radio_bound:
        logger.warning(
            "admitting %d calls at %.0f Mbps by WLAN radio bandwidth; "
            "header-aware WLAN bound is %d and the long-range link sustains "
            "only %d per direction -- expect loss beyond the tighter bound",
            radio_bound, bw / 1e6, wlan_hdr_bound, wimax_bound,
        )
    return radio_bound
