"""Time sources and the single-threaded timer loop the autonomy core runs on.

All stateful subsystems share one Timeline. Callbacks run on the timeline
thread only; other threads interact exclusively through ``submit``, which is
how the network service funnels operator commands into the core. Simulated
clocks let week-long deployments replay in seconds with the same code paths
as wall time.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from queue import Empty, SimpleQueue


class SimClock:
    """Virtual time that only moves when asked to; sleeping is free."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def sleep_until(self, target: float, wake: threading.Event | None = None) -> bool:
        if target > self._now:
            self._now = target
        return False

    def park(self, wake: threading.Event) -> None:
        wake.wait()


class WallClock:
    """Real time; sleeps are interruptible so submitted commands run promptly."""

    def now(self) -> float:
        return time.time()

    def sleep_until(self, target: float, wake: threading.Event | None = None) -> bool:
        remaining = target - self.now()
        if remaining <= 0.0:
            return False
        if wake is None:
            time.sleep(remaining)
            return False
        return wake.wait(remaining)

    def park(self, wake: threading.Event) -> None:
        wake.wait()


class PacedSimClock:
    """Simulated time advancing at ``rate`` times wall speed.

    Keeps long soaks interactive: rate 60 runs a minute per wall second.
    Timer ordering is identical to SimClock; only real waiting differs.
    """

    def __init__(self, start: float = 0.0, rate: float = 1.0):
        if rate <= 0.0:
            raise ValueError("rate must be positive")
        self._start = float(start)
        self._rate = float(rate)
        self._wall0 = time.monotonic()
        self._floor = float(start)

    def now(self) -> float:
        paced = self._start + (time.monotonic() - self._wall0) * self._rate
        return max(paced, self._floor)

    def sleep_until(self, target: float, wake: threading.Event | None = None) -> bool:
        remaining = (target - self.now()) / self._rate
        if remaining <= 0.0:
            return False
        if wake is None:
            time.sleep(remaining)
            interrupted = False
        else:
            interrupted = wake.wait(remaining)
        if not interrupted:
            # guard against monotonic jitter leaving now() shy of the target
            self._floor = max(self._floor, target)
        return bool(interrupted)

    def park(self, wake: threading.Event) -> None:
        wake.wait()


class Timer:
    """Handle for a scheduled callback; cancellation is a flag the heap skips."""

    __slots__ = ("at", "fn", "interval", "cancelled")

    def __init__(self, at: float, fn, interval: float | None):
        self.at = at
        self.fn = fn
        self.interval = interval
        self.cancelled = False


class Timeline:
    """Discrete-event loop: a timer heap over a Clock plus a command pump.

    Callbacks may re-enter the timeline through ``advance_by`` to model work
    that takes time (a traverse, a sensor action). Nested advances dispatch
    any timers that come due along the way, so periodic monitors keep
    sampling while a mission is walking. A periodic timer is out of the heap
    while its own callback runs and reschedules from the later of its due
    instant and the time the callback finished, so it never stacks on
    itself and never replays missed ticks in a burst.
    """

    def __init__(self, clock):
        self.clock = clock
        self._heap: list[tuple[float, int, Timer]] = []
        self._seq = itertools.count()
        self._commands: SimpleQueue = SimpleQueue()
        self._wake = threading.Event()
        self._stopped = False
        self._running = False
        self.on_error = None  # callable(exc) for callback failures; default re-raise

    def now(self) -> float:
        return self.clock.now()

    # -- scheduling ---------------------------------------------------------

    def schedule_at(self, at: float, fn) -> Timer:
        timer = Timer(float(at), fn, None)
        heapq.heappush(self._heap, (timer.at, next(self._seq), timer))
        return timer

    def schedule_in(self, delay: float, fn) -> Timer:
        return self.schedule_at(self.now() + delay, fn)

    def call_every(self, interval: float, fn, first_at: float | None = None) -> Timer:
        if interval <= 0.0:
            raise ValueError("interval must be positive")
        at = self.now() + interval if first_at is None else float(first_at)
        timer = Timer(at, fn, float(interval))
        heapq.heappush(self._heap, (timer.at, next(self._seq), timer))
        return timer

    def cancel(self, timer: Timer) -> None:
        timer.cancelled = True

    def submit(self, fn) -> None:
        """Thread-safe: queue a callable to run on the timeline thread."""
        self._commands.put(fn)
        self._wake.set()

    def stop(self) -> None:
        self._stopped = True
        self._wake.set()

    # -- dispatch -----------------------------------------------------------

    def _pump(self) -> None:
        self._wake.clear()
        while True:
            try:
                fn = self._commands.get_nowait()
            except Empty:
                return
            self._run_callback(fn)

    def _run_callback(self, fn) -> None:
        try:
            fn()
        except Exception as exc:
            if self.on_error is None:
                raise
            self.on_error(exc)

    def _peek(self) -> Timer | None:
        while self._heap:
            _, _, timer = self._heap[0]
            if timer.cancelled:
                heapq.heappop(self._heap)
                continue
            return timer
        return None

    def _fire(self, timer: Timer) -> None:
        heapq.heappop(self._heap)
        self._run_callback(timer.fn)
        if timer.interval is not None and not timer.cancelled:
            timer.at = max(timer.at + timer.interval, self.now())
            heapq.heappush(self._heap, (timer.at, next(self._seq), timer))

    def advance_by(self, duration: float) -> float:
        """Move time forward, firing everything due on the way. Reentrant."""
        return self.advance_to(self.now() + duration)

    def advance_to(self, target: float) -> float:
        self._pump()
        while True:
            timer = self._peek()
            if timer is None or timer.at > target:
                break
            self.clock.sleep_until(timer.at, None)
            self._fire(timer)
            self._pump()
        self.clock.sleep_until(target, None)
        self._pump()
        return self.now()

    def run_until(self, t_end: float) -> float:
        """Drive the loop up to a simulated instant, then stop there."""
        self._running = True
        try:
            return self.advance_to(t_end)
        finally:
            self._running = False

    def run(self) -> None:
        """Serve loop: dispatch timers and commands until ``stop`` is called.

        Unlike ``advance_to`` this blocks on the clock between timers, so
        wall and paced clocks consume no CPU while idle.
        """
        self._running = True
        try:
            while not self._stopped:
                self._pump()
                if self._stopped:
                    return
                timer = self._peek()
                if timer is None:
                    self.clock.park(self._wake)
                    continue
                if self.clock.sleep_until(timer.at, self._wake):
                    continue  # woken early: commands are waiting
                self._fire(timer)
        finally:
            self._running = False
