"""Simulated human reactor.

Reaction delay is a truncated-normal base draw (the auditory-referenced
reaction) plus a deterministic per-modality offset (visual +30 ms, haptic
+5 ms relative to auditory by default) plus optional per-modality
perception jitter. Visual stimuli can additionally land inside an eyeblink
blackout, in which case perception is deferred to the end of the blackout.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional, Sequence

from .devices import StimulusModality
from .timing import US_PER_MS, round_photo_finish


@dataclass(frozen=True)
class BlinkModel:
    """Poisson eyeblink process; each blink blacks out vision for blackout_ms."""

    rate_hz: float = 0.0
    blackout_ms: int = 100

    def __post_init__(self) -> None:
        if self.rate_hz < 0:
            raise ValueError("blink rate cannot be negative")
        if self.blackout_ms <= 0:
            raise ValueError("blackout must be positive")


def generate_blink_schedule(
    rng: random.Random, rate_hz: float, start: int, horizon: int
) -> list[int]:
    """Poisson blink-start times in [start, start + horizon), sorted.

    Times are in milliseconds with rate_hz in blinks per second. Callers
    working on another grid scale the rate instead (rate / 1000 makes the
    same function produce microsecond times).
    """
    if rate_hz < 0:
        raise ValueError("blink rate cannot be negative")
    if rate_hz == 0 or horizon <= 0:
        return []
    out = []
    t = float(start)
    end = start + horizon
    mean_gap = 1000.0 / rate_hz
    while True:
        t += rng.expovariate(1.0 / mean_gap)
        if t >= end:
            return out
        out.append(round(t))


def apply_blink(onset: int, blink_starts: Sequence[int], blackout: int) -> int:
    """Defer a stimulus onset that lands inside a blink blackout.

    The blackout window is half-open: onset in [b, b + blackout) is deferred
    to b + blackout, an onset exactly at b + blackout is perceived on time.
    Never returns a value earlier than its input.
    """
    if not blink_starts:
        return onset
    i = bisect_right(blink_starts, onset)
    if i == 0:
        return onset
    b = blink_starts[i - 1]
    if onset < b + blackout:
        return b + blackout
    return onset


@dataclass(frozen=True)
class AthleteProfile:
    """Per-athlete reaction parameters.

    Defaults are config placeholders, not measured ground truth. The
    modality offsets are the tested quantities; jitter_sd_* add
    perception noise for one modality only (visual perception is noisier
    than a direct push in the whole-body configs).
    """

    base_mean_ms: float = 140.0
    base_sd_ms: float = 20.0
    offset_auditory_ms: float = 0.0
    offset_visual_ms: float = 30.0
    offset_haptic_ms: float = 5.0
    jitter_sd_auditory_ms: float = 0.0
    jitter_sd_visual_ms: float = 0.0
    jitter_sd_haptic_ms: float = 0.0
    blink: BlinkModel = field(default_factory=BlinkModel)
    run_time_s: Optional[Decimal] = None

    def __post_init__(self) -> None:
        if self.base_sd_ms < 0:
            raise ValueError("base sd cannot be negative")
        for name in (
            "offset_auditory_ms",
            "offset_visual_ms",
            "offset_haptic_ms",
            "jitter_sd_auditory_ms",
            "jitter_sd_visual_ms",
            "jitter_sd_haptic_ms",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} cannot be negative")

    def offset_ms(self, modality: StimulusModality) -> float:
        if modality is StimulusModality.AUDITORY:
            return self.offset_auditory_ms
        if modality is StimulusModality.VISUAL_LED:
            return self.offset_visual_ms
        return self.offset_haptic_ms

    def jitter_sd_ms(self, modality: StimulusModality) -> float:
        if modality is StimulusModality.AUDITORY:
            return self.jitter_sd_auditory_ms
        if modality is StimulusModality.VISUAL_LED:
            return self.jitter_sd_visual_ms
        return self.jitter_sd_haptic_ms


@dataclass(frozen=True)
class ReactionSample:
    """One simulated reaction, microsecond timestamps."""

    modality: StimulusModality
    stimulus_onset_us: int
    perceived_onset_us: int
    react_at_us: int
    blink_delayed: bool

    def __post_init__(self) -> None:
        if not (
            self.react_at_us >= self.perceived_onset_us >= self.stimulus_onset_us
        ):
            raise ValueError("reaction must follow perception must follow onset")


def _draw_delay_ms(profile: AthleteProfile, modality: StimulusModality, rng: random.Random) -> float:
    base = rng.gauss(profile.base_mean_ms, profile.base_sd_ms) if profile.base_sd_ms > 0 else profile.base_mean_ms
    base = max(0.0, base)
    delay = base + profile.offset_ms(modality)
    jitter_sd = profile.jitter_sd_ms(modality)
    if jitter_sd > 0:
        delay += rng.gauss(0.0, jitter_sd)
    return max(0.0, delay)


def sample_reaction(
    profile: AthleteProfile,
    modality: StimulusModality,
    onset_us: int,
    rng: random.Random,
    blink_schedule_us: Sequence[int] = (),
) -> ReactionSample:
    """Sample when the athlete reacts to a physical stimulus onset.

    Visual onsets pass through the blink model first; other modalities are
    perceived at the physical onset.
    """
    if modality.is_visual and blink_schedule_us:
        perceived = apply_blink(
            onset_us, blink_schedule_us, profile.blink.blackout_ms * US_PER_MS
        )
    else:
        perceived = onset_us
    delay_ms = _draw_delay_ms(profile, modality, rng)
    return ReactionSample(
        modality=modality,
        stimulus_onset_us=onset_us,
        perceived_onset_us=perceived,
        react_at_us=perceived + round(delay_ms * US_PER_MS),
        blink_delayed=perceived != onset_us,
    )


def sample_blink_delay_us(rng: random.Random, blink: BlinkModel) -> int:
    """Extra perception delay caused by an in-progress blink, in microseconds.

    Generates the blink process over the blackout window preceding the
    stimulus; a blink starting at b <= 0 with b + blackout > 0 defers
    perception to b + blackout.
    """
    if blink.rate_hz == 0:
        return 0
    blackout_us = blink.blackout_ms * US_PER_MS
    starts = generate_blink_schedule(
        rng, blink.rate_hz / US_PER_MS, -blackout_us, blackout_us + 1
    )
    covering = [b for b in starts if b <= 0]
    if not covering:
        return 0
    return covering[-1] + blackout_us


@dataclass(frozen=True)
class RecordGapResult:
    """Empirical distribution of officially recorded race times."""

    modality: StimulusModality
    samples: tuple[Decimal, ...]
    counts: dict[Decimal, int]

    @property
    def n(self) -> int:
        return len(self.samples)

    def most_common(self) -> Decimal:
        return max(self.counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]


def simulate_record_gap(
    profile: AthleteProfile,
    modality: StimulusModality,
    n: int,
    rng: random.Random,
) -> RecordGapResult:
    """Monte-Carlo of the recorded 100 m time for a given start modality.

    Each sample is the athlete's fixed run time plus the reaction delta of
    the modality relative to an auditory start in the same race (the base
    reaction cancels), passed through photo-finish rounding. With a
    zero-variance profile the result is deterministic: a 10.80 runner
    records 10.83 with a +30 ms visual start and 10.81 with a +5 ms haptic
    start.
    """
    if profile.run_time_s is None:
        raise ValueError("profile.run_time_s must be set for the fairness simulation")
    if n <= 0:
        raise ValueError("need at least one sample")
    samples = []
    counts: dict[Decimal, int] = {}
    offset_delta_ms = profile.offset_ms(modality) - profile.offset_auditory_ms
    for _ in range(n):
        if modality is StimulusModality.AUDITORY:
            delta_us = 0  # vs itself, the same race
        else:
            delta_ms = offset_delta_ms
            jitter_sd = profile.jitter_sd_ms(modality)
            if jitter_sd > 0:
                delta_ms += rng.gauss(0.0, jitter_sd)
            aud_jitter_sd = profile.jitter_sd_ms(StimulusModality.AUDITORY)
            if aud_jitter_sd > 0:
                delta_ms -= rng.gauss(0.0, aud_jitter_sd)
            delta_us = round(delta_ms * US_PER_MS)
            if modality.is_visual:
                delta_us += sample_blink_delay_us(rng, profile.blink)
            delta_us = max(0, delta_us)
        recorded = round_photo_finish(
            profile.run_time_s + Decimal(delta_us) / Decimal(1_000_000)
        )
        samples.append(recorded)
        counts[recorded] = counts.get(recorded, 0) + 1
    return RecordGapResult(modality=modality, samples=tuple(samples), counts=counts)
