"""Stimulus output channels and reaction input sensors, real or simulated.

A device pairs a modality with an actuation-latency model and, for haptic
channels, the contact-interface geometry. Firing a device separates the
software command instant (millisecond grid) from the physical onset
(microsecond grid, command plus sampled latency).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .errors import (
    DuplicateDeviceError,
    NoOnsetError,
    PressBeforeStartError,
    TraceTooShortError,
    UnknownDeviceError,
)
from .timing import US_PER_MS

#: Push-solenoid actuation delay, mean of the measured start-up time.
SOLENOID_STARTUP_US = 8700

#: Plate travel of the redesigned push actuator.
PUSH_STROKE_MM = 3.0

ALLOWED_GAPS_MM = (0.0, 2.0, 4.0)


class StimulusModality(str, Enum):
    AUDITORY = "auditory"
    VISUAL_LED = "visual-led"
    HAPTIC_PUSH = "haptic-push"
    HAPTIC_VIBRATION = "haptic-vibration"

    @property
    def is_haptic(self) -> bool:
        return self in (StimulusModality.HAPTIC_PUSH, StimulusModality.HAPTIC_VIBRATION)

    @property
    def is_visual(self) -> bool:
        return self is StimulusModality.VISUAL_LED


class ContactPoint(str, Enum):
    FINGER_PAD = "finger-pad"
    FIRST_JOINT = "first-joint"


@dataclass(frozen=True)
class ContactInterfaceSpec:
    """Geometry of the two-stage plate interface and how it is held.

    Carried as experiment metadata only; plate dynamics are not simulated.
    """

    stages: int = 2
    gap_mm: float = 2.0
    stroke_mm: float = PUSH_STROKE_MM
    contact_point: Optional[ContactPoint] = None

    def __post_init__(self) -> None:
        if self.stages not in (1, 2):
            raise ValueError("interface stages must be 1 or 2")
        if self.gap_mm not in ALLOWED_GAPS_MM:
            raise ValueError(f"gap_mm must be one of {ALLOWED_GAPS_MM}")
        if self.stroke_mm <= 0:
            raise ValueError("stroke_mm must be positive")


@dataclass(frozen=True)
class LatencyModel:
    """Actuation delay between command and physical onset.

    jitter "constant" always returns the mean; "normal" draws a gaussian
    clamped at zero (a sampled latency can never be negative).
    """

    mean_us: int = 0
    jitter: str = "constant"
    sd_us: int = 0

    def __post_init__(self) -> None:
        if self.mean_us < 0:
            raise ValueError("latency mean must be non-negative")
        if self.jitter not in ("constant", "normal"):
            raise ValueError("jitter must be 'constant' or 'normal'")
        if self.jitter == "constant" and self.sd_us != 0:
            raise ValueError("constant latency cannot carry sd_us")
        if self.sd_us < 0:
            raise ValueError("sd_us must be non-negative")

    @property
    def is_constant(self) -> bool:
        return self.jitter == "constant"

    def sample_us(self, rng: random.Random) -> int:
        if self.jitter == "constant":
            return self.mean_us
        return max(0, round(rng.gauss(self.mean_us, self.sd_us)))


@dataclass(frozen=True)
class StimulusDevice:
    id: str
    modality: StimulusModality
    latency: LatencyModel = field(default_factory=LatencyModel)
    interface: Optional[ContactInterfaceSpec] = None
    color_role: Optional[str] = None  # red | yellow | start, visual only

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("device id must be non-empty")
        if self.color_role is not None:
            if self.modality is not StimulusModality.VISUAL_LED:
                raise ValueError("color_role is only valid on visual-led devices")
            if self.color_role not in ("red", "yellow", "start"):
                raise ValueError("color_role must be red, yellow or start")
        if self.modality.is_haptic:
            if self.interface is None or self.interface.contact_point is None:
                raise ValueError("haptic devices require an interface with a contact point")


@dataclass(frozen=True)
class StimulusEvent:
    """One commanded actuation of a stimulus channel."""

    device_id: str
    commanded_at_ms: int
    latency_us: int

    def __post_init__(self) -> None:
        if self.latency_us < 0:
            raise ValueError("sampled latency cannot be negative")

    @property
    def physical_onset_us(self) -> int:
        return self.commanded_at_ms * US_PER_MS + self.latency_us


def fire_stimulus(device: StimulusDevice, t_ms: int, rng: random.Random) -> StimulusEvent:
    """Command a device at t_ms; the physical onset lags by a latency draw."""
    if t_ms < 0:
        raise ValueError("cannot fire before the session epoch")
    return StimulusEvent(
        device_id=device.id,
        commanded_at_ms=t_ms,
        latency_us=device.latency.sample_us(rng),
    )


class DeviceRegistry:
    """Session-scoped device lookup. One registry per session."""

    def __init__(self, devices: Sequence[StimulusDevice] = ()) -> None:
        self._devices: dict[str, StimulusDevice] = {}
        for device in devices:
            self.register(device)

    def register(self, device: StimulusDevice) -> None:
        if device.id in self._devices:
            raise DuplicateDeviceError(f"device id {device.id!r} already registered")
        self._devices[device.id] = device

    def get(self, device_id: str) -> StimulusDevice:
        try:
            return self._devices[device_id]
        except KeyError:
            raise UnknownDeviceError(f"unknown device {device_id!r}") from None

    def __contains__(self, device_id: str) -> bool:
        return device_id in self._devices

    def __iter__(self):
        return iter(self._devices.values())

    def fire(self, device_id: str, t_ms: int, rng: random.Random) -> StimulusEvent:
        return fire_stimulus(self.get(device_id), t_ms, rng)


def detect_button_press(press_time_ms: int, start_event: StimulusEvent) -> int:
    """Raw reaction time in microseconds, measured from the start command.

    Latency compensation happens downstream; a press before the command is
    anticipation and invalidates the trial.
    """
    if press_time_ms < start_event.commanded_at_ms:
        raise PressBeforeStartError(
            f"press at {press_time_ms} precedes start command at {start_event.commanded_at_ms}"
        )
    return (press_time_ms - start_event.commanded_at_ms) * US_PER_MS


@dataclass(frozen=True)
class ForceTrace:
    """Load-cell force samples on a fixed 1 ms period starting at t0_ms."""

    t0_ms: int
    samples: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(float(v) for v in self.samples))
        for v in self.samples:
            if not math.isfinite(v):
                raise ValueError("force samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)


def detect_force_onset(
    trace: ForceTrace,
    baseline_window_ms: int = 500,
    k_sigma: float = 5.0,
    min_rise_n: int = 3,
) -> int:
    """First timestamp where force rises clear of the baseline.

    Baseline mean and sd come from the leading window; the onset is the
    first sample after that window exceeding mean + k_sigma * sd for
    min_rise_n consecutive samples. Thresholding is baseline-relative, so a
    constant force offset does not move the onset.
    """
    if baseline_window_ms < 1 or min_rise_n < 1:
        raise ValueError("baseline_window_ms and min_rise_n must be >= 1")
    n = len(trace.samples)
    if n <= baseline_window_ms:
        raise TraceTooShortError(
            f"trace has {n} samples, need more than baseline window {baseline_window_ms}"
        )
    baseline = trace.samples[:baseline_window_ms]
    mean = sum(baseline) / len(baseline)
    var = sum((v - mean) ** 2 for v in baseline) / len(baseline)
    threshold = mean + k_sigma * math.sqrt(var)

    run = 0
    for i in range(baseline_window_ms, n):
        if trace.samples[i] > threshold:
            run += 1
            if run >= min_rise_n:
                return trace.t0_ms + (i - run + 1)
        else:
            run = 0
    raise NoOnsetError("no threshold crossing found")
