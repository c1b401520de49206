"""Clocks and loop executors.

Experiments run on a virtual clock with a deterministic event scheduler:
events fire in (time, priority, insertion) order, so a seeded run is exactly
reproducible. Real-time deployments (teleoperation, the non-blocking bridge
checks) use wall-clock threads instead; the loops themselves only ever see a
`now` value and do not care which executor drives them.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time


class WallClock:
    def now(self) -> float:
        return time.monotonic()


class VirtualClock:
    def __init__(self, t0: float = 0.0):
        self.t = t0

    def now(self) -> float:
        return self.t


class Scheduler:
    """Deterministic single-threaded event scheduler over a VirtualClock."""

    def __init__(self, clock: VirtualClock | None = None):
        self.clock = clock or VirtualClock()
        self._heap = []
        self._counter = itertools.count()

    def call_at(self, t: float, fn, priority: int = 0):
        heapq.heappush(self._heap, (t, priority, next(self._counter), fn, None))

    def every(self, period: float, fn, priority: int = 0, start: float | None = None):
        t0 = self.clock.t + period if start is None else start
        heapq.heappush(self._heap, (t0, priority, next(self._counter), fn, period))

    def run_until(self, t_end: float):
        """Run all events with time <= t_end; the clock lands on t_end."""
        while self._heap and self._heap[0][0] <= t_end:
            t, priority, _, fn, period = heapq.heappop(self._heap)
            self.clock.t = t
            fn(t)
            if period is not None:
                heapq.heappush(self._heap, (t + period, priority, next(self._counter), fn, period))
        self.clock.t = t_end

    def run_for(self, duration: float):
        self.run_until(self.clock.t + duration)


class ThreadedLoop:
    """Fixed-rate wall-clock loop in its own thread (drift-compensated)."""

    def __init__(self, period: float, fn, name: str = "loop"):
        self.period = period
        self.fn = fn
        self.name = name
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name=name, daemon=True)
        self.tick_times: list[float] = []

    def start(self):
        self._thread.start()
        return self

    def _run(self):
        next_t = time.monotonic()
        while not self._stop.is_set():
            now = time.monotonic()
            self.tick_times.append(now)
            self.fn(now)
            next_t += self.period
            delay = next_t - time.monotonic()
            if delay > 0:
                self._stop.wait(delay)
            else:
                next_t = time.monotonic()  # fell behind; do not burst

    def stop(self, join_timeout: float = 5.0):
        self._stop.set()
        self._thread.join(join_timeout)

    def periods(self):
        return [b - a for a, b in zip(self.tick_times, self.tick_times[1:])]
