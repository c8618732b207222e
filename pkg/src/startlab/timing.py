"""Session clocks, foreperiod sampling, latency compensation, official rounding.

Unit conventions used across the package:

* timestamps are integer milliseconds since the session epoch (``*_ms``),
  matching the 1 ms grid of the measurement apparatus
* sub-millisecond quantities (actuation latency, compensated reaction
  times) are integer microseconds (``*_us``) so arithmetic like
  "minus 8.7 ms" stays exact
* official recorded race times are ``decimal.Decimal`` seconds; binary
  floats are rejected because the rounding rule must be bit-exact
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from decimal import ROUND_CEILING, Decimal

from .errors import InvalidRangeError, NegativeCompensationError

US_PER_MS = 1000

#: Maximum start-system delay allowed by the automatic-timing rule, and the
#: requirement that the delay be a declared constant.
START_SYSTEM_DELAY_LIMIT_US = 1000


def ms_to_us(ms: float | int) -> int:
    """Convert milliseconds to integer microseconds (round half away handled
    by round-half-even; inputs are expected to be exact at 0.1 ms grain)."""
    return round(ms * US_PER_MS)


def us_to_ms(us: int) -> float:
    return us / US_PER_MS


@dataclass(frozen=True)
class ForeperiodRange:
    """Inclusive bounds for the randomized arming-to-signal delay."""

    min_ms: int = 2000
    max_ms: int = 3000

    def __post_init__(self) -> None:
        if self.min_ms < 0 or self.max_ms < 0:
            raise InvalidRangeError("foreperiod bounds must be non-negative")
        if self.min_ms >= self.max_ms:
            raise InvalidRangeError(
                f"foreperiod min {self.min_ms} must be < max {self.max_ms}"
            )


def sample_foreperiod(rng: random.Random, fp_range: ForeperiodRange) -> int:
    """Draw one foreperiod, uniform over the integer milliseconds of the
    range, both endpoints included. Same seed, same draw."""
    return rng.randint(fp_range.min_ms, fp_range.max_ms)


def compensate_latency_us(measured_rt_us: int, device_latency_us: int) -> int:
    """Remove the declared actuation latency from a measured reaction time.

    Raises NegativeCompensationError when the latency exceeds the
    measurement, which signals a mis-configured device rather than a
    legitimate negative reaction.
    """
    if device_latency_us < 0:
        raise NegativeCompensationError("device latency must be non-negative")
    if device_latency_us > measured_rt_us:
        raise NegativeCompensationError(
            f"latency {device_latency_us} us exceeds measurement {measured_rt_us} us"
        )
    return measured_rt_us - device_latency_us


def round_photo_finish(time_s: Decimal | str | int) -> Decimal:
    """Round a race time UP to the next 0.01 s unless it is already exact.

    Implements the photo-finish recording rule for hand-timed conversion:
    1577.533 -> 1577.54, while 10.80 stays 10.80. Exact decimal arithmetic
    only; passing a binary float raises TypeError.
    """
    if isinstance(time_s, float):
        raise TypeError("round_photo_finish requires Decimal/str/int, not float")
    value = Decimal(time_s)
    if value <= 0:
        raise ValueError("race time must be positive")
    return value.quantize(Decimal("0.01"), rounding=ROUND_CEILING)


@dataclass(frozen=True)
class DelayCompliance:
    """Verdict on whether a start channel obeys the <= 1 ms constant-delay rule."""

    compliant: bool
    margin_us: int
    constant: bool
    mean_us: int


def check_start_system_delay(mean_us: int, *, constant: bool = True) -> DelayCompliance:
    """Check a start channel's delay against the timing rule.

    Compliant only when the delay is declared constant AND its mean is at
    most 1 ms. The margin is how much headroom remains (negative when the
    channel is too slow; a solenoid at 8.7 ms yields -7.7 ms).
    """
    margin = START_SYSTEM_DELAY_LIMIT_US - mean_us
    return DelayCompliance(
        compliant=constant and mean_us <= START_SYSTEM_DELAY_LIMIT_US,
        margin_us=margin,
        constant=constant,
        mean_us=mean_us,
    )


class SimulatedClock:
    """Discrete session clock that advances only by explicit steps.

    Confined to one session executor; never consults wall time, so replays
    with the same seed reproduce identical timelines.
    """

    def __init__(self, start_ms: int = 0) -> None:
        if start_ms < 0:
            raise ValueError("clock cannot start before the session epoch")
        self._now_ms = start_ms

    @property
    def kind(self) -> str:
        return "simulated"

    def now_ms(self) -> int:
        return self._now_ms

    def advance(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("simulated clock cannot move backwards")
        self._now_ms += delta_ms
        return self._now_ms

    def advance_to(self, t_ms: int) -> int:
        if t_ms < self._now_ms:
            raise ValueError(
                f"cannot rewind clock from {self._now_ms} to {t_ms}"
            )
        self._now_ms = t_ms
        return self._now_ms


class MonotonicClock:
    """Millisecond wall-independent clock for live operation."""

    def __init__(self) -> None:
        self._epoch_ns = time.monotonic_ns()

    @property
    def kind(self) -> str:
        return "real"

    def now_ms(self) -> int:
        return (time.monotonic_ns() - self._epoch_ns) // 1_000_000
