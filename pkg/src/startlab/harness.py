"""Experimental designs and trial execution.

Study 1: seven conditions (three plate gaps x two contact points, plus the
LED channel), ten trials per condition per block, four blocks. Study 2: two
conditions (the chosen push interface and the LED), five trials per
condition per block, sixteen blocks. Orders are seeded and counterbalanced;
consecutive haptic presentations alternate contact points.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .athlete import AthleteProfile, generate_blink_schedule, sample_reaction
from .devices import ContactPoint, DeviceRegistry, StimulusDevice, StimulusModality
from .errors import IllegalTransitionError
from .sequencer import StartCommand, StartPhase, StartSequencer, judge_false_start
from .timing import US_PER_MS, ForeperiodRange, compensate_latency_us, sample_foreperiod

VALID = "valid"
FALSE_START = "false_start"
RETRY = "retry"
EXCLUDED_OUTLIER = "excluded_outlier"
OUTCOMES = (VALID, FALSE_START, RETRY, EXCLUDED_OUTLIER)

#: Outcomes whose records must carry reaction-time fields.
RT_OUTCOMES = (VALID, EXCLUDED_OUTLIER)


@dataclass(frozen=True)
class Participant:
    id: str
    age: Optional[int] = None
    hearing_level_db: Optional[dict] = None  # {"left": .., "right": ..}, values may be [lo, hi]
    athletics_history_years: Optional[float] = None
    events: tuple[str, ...] = ()
    personal_bests: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("participant id must be non-empty")
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "personal_bests", tuple(self.personal_bests))


@dataclass(frozen=True)
class Condition:
    """One experimental stimulus condition: a device, held a given way."""

    device_id: str
    contact_point: Optional[ContactPoint] = None

    @property
    def label(self) -> str:
        return self.device_id

    @classmethod
    def for_device(cls, device: StimulusDevice) -> "Condition":
        point = device.interface.contact_point if device.interface else None
        return cls(device_id=device.id, contact_point=point)


@dataclass(frozen=True)
class PlannedTrial:
    participant_id: str
    condition: Condition
    block_index: int  # 1-based
    trial_index: int  # 1-based within the condition sub-block
    practice: bool = False


@dataclass(frozen=True)
class SessionPlan:
    study: int
    participant_ids: tuple[str, ...]
    conditions: tuple[Condition, ...]
    trials_per_condition_per_block: int
    blocks: int
    trials: tuple[PlannedTrial, ...]

    def total_trials(self, include_practice: bool = False) -> int:
        return sum(1 for t in self.trials if include_practice or not t.practice)

    def count_for(self, participant_id: str, condition_label: str) -> int:
        return sum(
            1
            for t in self.trials
            if not t.practice
            and t.participant_id == participant_id
            and t.condition.label == condition_label
        )


def counterbalance_order(
    n_conditions: int, participant_index: int, block_index: int, seed: int
) -> list[int]:
    """Seeded condition order for one participant-block.

    A per-block base permutation is rotated by participant index, which
    forms a Latin square across any k consecutive participants and balances
    the leading condition. Deterministic in (seed, participant, block).
    """
    if n_conditions < 1:
        raise ValueError("need at least one condition")
    base = list(range(n_conditions))
    random.Random(f"{seed}:order-base:{block_index}").shuffle(base)
    r = participant_index % n_conditions
    return base[r:] + base[:r]


def _study1_block_order(
    conditions: Sequence[Condition], participant_index: int, block_index: int, seed: int
) -> list[Condition]:
    """Per-block condition order with strict contact-point alternation.

    Haptic conditions alternate finger pad / first joint; which point leads
    is fixed per participant (alternating across participants) so the
    alternation continues unbroken across blocks. The LED slot rotates
    through all positions across participants and blocks.
    """
    haptic = [c for c in conditions if c.contact_point is not None]
    others = [c for c in conditions if c.contact_point is None]
    rng = random.Random(f"{seed}:study1-order:{participant_index}:{block_index}")
    pads = [c for c in haptic if c.contact_point is ContactPoint.FINGER_PAD]
    joints = [c for c in haptic if c.contact_point is ContactPoint.FIRST_JOINT]
    rng.shuffle(pads)
    rng.shuffle(joints)
    first, second = (pads, joints) if participant_index % 2 == 0 else (joints, pads)
    interleaved: list[Condition] = []
    for a, b in zip(first, second):
        interleaved.extend((a, b))
    # leftovers only occur on unbalanced condition sets
    longer = first if len(first) > len(second) else second
    interleaved.extend(longer[min(len(first), len(second)):])
    order = list(interleaved)
    for i, extra in enumerate(others):
        pos = (participant_index + block_index + i) % (len(order) + 1)
        order.insert(pos, extra)
    return order


def _expand_plan(
    study: int,
    participants: Sequence[Participant],
    conditions: Sequence[Condition],
    trials_per: int,
    blocks: int,
    seed: int,
    practice_trials: int,
    order_fn,
) -> SessionPlan:
    planned: list[PlannedTrial] = []
    for p_idx, participant in enumerate(participants):
        for block in range(1, blocks + 1):
            order = order_fn(p_idx, block)
            if block == 1 and practice_trials > 0:
                for t in range(1, practice_trials + 1):
                    planned.append(
                        PlannedTrial(
                            participant_id=participant.id,
                            condition=order[0],
                            block_index=block,
                            trial_index=t,
                            practice=True,
                        )
                    )
            for condition in order:
                for t in range(1, trials_per + 1):
                    planned.append(
                        PlannedTrial(
                            participant_id=participant.id,
                            condition=condition,
                            block_index=block,
                            trial_index=t,
                        )
                    )
    return SessionPlan(
        study=study,
        participant_ids=tuple(p.id for p in participants),
        conditions=tuple(conditions),
        trials_per_condition_per_block=trials_per,
        blocks=blocks,
        trials=tuple(planned),
    )


def build_study1_plan(
    participants: Sequence[Participant],
    conditions: Sequence[Condition],
    seed: int,
    trials_per_condition_per_block: int = 10,
    blocks: int = 4,
    practice_trials: int = 0,
) -> SessionPlan:
    """Button-press design: every condition 10 times per block, 4 blocks.

    Six participants over seven conditions plan 1680 trials, 40 per
    condition per participant.
    """
    if not participants:
        raise ValueError("need at least one participant")
    if not conditions:
        raise ValueError("need at least one condition")
    return _expand_plan(
        study=1,
        participants=participants,
        conditions=conditions,
        trials_per=trials_per_condition_per_block,
        blocks=blocks,
        seed=seed,
        practice_trials=practice_trials,
        order_fn=lambda p, b: _study1_block_order(conditions, p, b, seed),
    )


def build_study2_plan(
    participants: Sequence[Participant],
    conditions: Sequence[Condition],
    seed: int,
    trials_per_condition_per_block: int = 5,
    blocks: int = 16,
    practice_trials: int = 0,
) -> SessionPlan:
    """Crouch-start design: each stimulus 5 times per block, 16 blocks.

    Six participants over two stimuli plan 960 trials, 480 per stimulus.
    """
    if not participants:
        raise ValueError("need at least one participant")
    if not conditions:
        raise ValueError("need at least one condition")

    def order_fn(p_idx: int, block: int) -> list[Condition]:
        perm = counterbalance_order(len(conditions), p_idx, block, seed)
        return [conditions[i] for i in perm]

    return _expand_plan(
        study=2,
        participants=participants,
        conditions=conditions,
        trials_per=trials_per_condition_per_block,
        blocks=blocks,
        seed=seed,
        practice_trials=practice_trials,
        order_fn=order_fn,
    )


@dataclass
class TrialRecord:
    """One executed trial with full provenance.

    Reaction-time fields are integer microseconds and present only on
    outcomes that measured a reaction; phase timestamps are always present.
    """

    participant_id: str
    condition_label: str
    device_id: str
    contact_point: Optional[str]
    modality: str
    block_index: int
    trial_index: int
    attempt: int = 1
    practice: bool = False
    foreperiod_ms: Optional[int] = None
    marks_at_ms: Optional[int] = None
    set_at_ms: Optional[int] = None
    start_at_ms: Optional[int] = None
    physical_onset_us: Optional[int] = None
    react_at_us: Optional[int] = None
    rt_raw_us: Optional[int] = None
    rt_compensated_us: Optional[int] = None
    blink_delayed: bool = False
    outcome: str = VALID

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    @property
    def rt_raw_ms(self) -> Optional[float]:
        return None if self.rt_raw_us is None else self.rt_raw_us / US_PER_MS

    @property
    def rt_compensated_ms(self) -> Optional[float]:
        return None if self.rt_compensated_us is None else self.rt_compensated_us / US_PER_MS

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "condition_label": self.condition_label,
            "device_id": self.device_id,
            "contact_point": self.contact_point,
            "modality": self.modality,
            "block_index": self.block_index,
            "trial_index": self.trial_index,
            "attempt": self.attempt,
            "practice": self.practice,
            "foreperiod_ms": self.foreperiod_ms,
            "marks_at_ms": self.marks_at_ms,
            "set_at_ms": self.set_at_ms,
            "start_at_ms": self.start_at_ms,
            "physical_onset_us": self.physical_onset_us,
            "react_at_us": self.react_at_us,
            "rt_raw_us": self.rt_raw_us,
            "rt_compensated_us": self.rt_compensated_us,
            "blink_delayed": self.blink_delayed,
            "outcome": self.outcome,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrialRecord":
        return cls(**data)


class SimulatedReactor:
    """Adapter giving the harness a reaction for each fired stimulus."""

    def __init__(self, profile: AthleteProfile) -> None:
        self.profile = profile

    def react(
        self,
        event,
        modality: StimulusModality,
        rng: random.Random,
        blink_schedule_us: Sequence[int] = (),
    ):
        return sample_reaction(
            self.profile, modality, event.physical_onset_us, rng, blink_schedule_us
        )


def trial_blink_schedule_us(
    profile: AthleteProfile, seed: int, trial_key: str, window_start_ms: int, window_ms: int
) -> list[int]:
    """Blink-start times (microseconds) for one trial window, keyed by trial.

    Keyed substreams keep every trial's blinks independent of execution
    order, so retries and replays never shift other trials' draws.
    """
    if profile.blink.rate_hz == 0:
        return []
    rng = random.Random(f"{seed}:blink:{trial_key}")
    schedule_ms = generate_blink_schedule(
        rng, profile.blink.rate_hz, window_start_ms, window_ms
    )
    return [b * US_PER_MS for b in schedule_ms]


def run_trial(
    planned: PlannedTrial,
    reactor: SimulatedReactor,
    sequencer: StartSequencer,
    clock,
    registry: DeviceRegistry,
    foreperiod_range: ForeperiodRange,
    seed: int,
    attempt: int = 1,
    marks_to_set_ms: int = 1000,
) -> TrialRecord:
    """Execute one planned trial through the full phase sequence.

    Uses per-trial keyed random substreams: the foreperiod, the stimulus
    latency draw and the reaction draw each derive from the session seed
    and the trial identity.
    """
    if sequencer.phase is not StartPhase.IDLE:
        raise IllegalTransitionError("sequencer must be idle before a trial")
    condition = planned.condition
    device = registry.get(condition.device_id)
    trial_key = (
        f"{planned.participant_id}:{planned.block_index}:{condition.label}:"
        f"{planned.trial_index}:{attempt}{':practice' if planned.practice else ''}"
    )
    rng_fp = random.Random(f"{seed}:foreperiod:{trial_key}")
    rng_react = random.Random(f"{seed}:reaction:{trial_key}")
    sequencer.rng = random.Random(f"{seed}:latency:{trial_key}")

    marks_at = clock.now_ms()
    sequencer.advance(StartCommand.ON_YOUR_MARKS)
    clock.advance(marks_to_set_ms)
    set_at = clock.now_ms()
    sequencer.advance(StartCommand.SET)

    foreperiod = sample_foreperiod(rng_fp, foreperiod_range)
    clock.advance(foreperiod)
    start_at = clock.now_ms()
    sequencer.advance(StartCommand.START)
    event = next(e for e in sequencer.last_start_events if e.device_id == device.id)

    blink_schedule = trial_blink_schedule_us(
        reactor.profile, seed, trial_key, set_at, foreperiod + 2000
    )
    sample = reactor.react(event, device.modality, rng_react, blink_schedule)
    rt_raw_us = sample.react_at_us - start_at * US_PER_MS
    rt_compensated_us = compensate_latency_us(rt_raw_us, device.latency.mean_us)
    false_start = judge_false_start(rt_raw_us, sequencer.config.false_start_threshold_ms)
    sequencer.finish_trial(false_start)
    sequencer.advance(StartCommand.RESET)

    record = TrialRecord(
        participant_id=planned.participant_id,
        condition_label=condition.label,
        device_id=device.id,
        contact_point=condition.contact_point.value if condition.contact_point else None,
        modality=device.modality.value,
        block_index=planned.block_index,
        trial_index=planned.trial_index,
        attempt=attempt,
        practice=planned.practice,
        foreperiod_ms=foreperiod,
        marks_at_ms=marks_at,
        set_at_ms=set_at,
        start_at_ms=start_at,
        physical_onset_us=event.physical_onset_us,
        blink_delayed=sample.blink_delayed,
        outcome=FALSE_START if false_start else VALID,
    )
    if not false_start:
        record.react_at_us = sample.react_at_us
        record.rt_raw_us = rt_raw_us
        record.rt_compensated_us = rt_compensated_us
    return record


def mark_record_retry(record: TrialRecord) -> TrialRecord:
    """Clone of a record relabelled as a retried (invalid) attempt."""
    clone = replace(record)
    clone.outcome = RETRY
    clone.react_at_us = None
    clone.rt_raw_us = None
    clone.rt_compensated_us = None
    return clone


def audit_counts(records: Sequence[TrialRecord]) -> dict:
    """Trial accounting: retries add attempts, they never consume plan slots."""
    counts = {outcome: 0 for outcome in OUTCOMES}
    practice = 0
    for r in records:
        if r.practice:
            practice += 1
            continue
        counts[r.outcome] += 1
    executed = sum(counts.values())
    return {
        "executed": executed,
        "practice": practice,
        "completed_plan_slots": executed - counts[RETRY],
        **counts,
    }
