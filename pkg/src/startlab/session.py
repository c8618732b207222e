"""Session runtime: one experiment session from config to closed log.

The runtime is command-driven. The headless runner and the live operator
console both step trials through the same ``issue_command`` path, so a
simulated session replayed from its seed reproduces the identical log. All
stochastic draws are keyed substreams of the session seed and the trial
identity; execution order cannot shift them.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import (
    IllegalTransitionError,
    LikertRangeError,
    RetryRejectedError,
    SessionClosedError,
)
from .harness import (
    FALSE_START,
    RETRY,
    VALID,
    PlannedTrial,
    SessionPlan,
    SimulatedReactor,
    TrialRecord,
    audit_counts,
    build_study1_plan,
    build_study2_plan,
    mark_record_retry,
    trial_blink_schedule_us,
)
from .persistence import LikertEntry, SessionConfig, SessionLogWriter
from .sequencer import SequenceConfig, StartCommand, StartPhase, StartSequencer
from .stats import RunningStats
from .devices import DeviceRegistry
from .timing import (
    US_PER_MS,
    MonotonicClock,
    SimulatedClock,
    compensate_latency_us,
    sample_foreperiod,
)

EVENT_KINDS = (
    "phase_changed",
    "stimulus_fired",
    "rt_recorded",
    "false_start",
    "trial_retry",
    "block_complete",
    "session_summary",
)


@dataclass
class _CurrentTrial:
    planned: PlannedTrial
    attempt: int
    trial_key: str
    marks_at_ms: Optional[int] = None
    set_at_ms: Optional[int] = None
    foreperiod_ms: Optional[int] = None


def build_plan(config: SessionConfig) -> SessionPlan:
    builder = build_study1_plan if config.study == 1 else build_study2_plan
    return builder(
        participants=config.participants,
        conditions=config.conditions,
        seed=config.seed if config.seed is not None else 0,
        trials_per_condition_per_block=config.trials_per_condition_per_block,
        blocks=config.blocks,
        practice_trials=config.practice_trials,
    )


class SessionRuntime:
    """Executes one session plan against simulated reactors.

    Events carry gapless 1-based sequence numbers and are retained for the
    whole session, so a subscriber can replay from any cursor.
    """

    def __init__(
        self,
        config: SessionConfig,
        log_writer: Optional[SessionLogWriter] = None,
        event_sink: Optional[Callable[[dict], None]] = None,
    ) -> None:
        self.config = config
        self.registry = DeviceRegistry(config.devices)
        self.clock = SimulatedClock() if config.clock == "simulated" else MonotonicClock()
        self.plan = build_plan(config)
        self.log = log_writer
        self._event_sink = event_sink
        self.events: list[dict] = []
        self._event_seq = 0
        self.records: list[TrialRecord] = []
        self._record_seqs: list[int] = []
        self._cursor = 0
        self._retry_queue: deque[tuple[PlannedTrial, int]] = deque()
        self._attempts: dict[tuple, int] = {}
        self._current: Optional[_CurrentTrial] = None
        self._recalls: dict[tuple, int] = {}
        self._armed_foreperiod: Optional[int] = None
        self._last_record_seq: Optional[int] = None
        self._retry_marked: set[int] = set()
        self.closed = False
        self.sequencer = StartSequencer(
            registry=self.registry,
            config=SequenceConfig(
                marks_device_ids=config.marks_device_ids,
                set_device_ids=config.set_device_ids,
                start_device_ids=(),
                false_start_threshold_ms=config.false_start_threshold_ms,
                min_set_hold_ms=config.min_set_hold_ms,
            ),
            clock=self.clock,
            rng=random.Random(config.seed),
            observer=self._on_sequencer_event,
        )
        self._reactors = {
            pid: SimulatedReactor(profile) for pid, profile in config.profiles.items()
        }

    # -- events -------------------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> dict:
        assert kind in EVENT_KINDS, kind
        self._event_seq += 1
        event = {
            "seq": self._event_seq,
            "kind": kind,
            "t_ms": self.clock.now_ms(),
            "payload": payload,
        }
        self.events.append(event)
        if self._event_sink is not None:
            self._event_sink(event)
        return event

    def _on_sequencer_event(self, kind: str, payload: dict) -> None:
        self._emit(kind, payload)

    def events_since(self, from_seq: int) -> list[dict]:
        if from_seq <= 0:
            return list(self.events)
        return [e for e in self.events if e["seq"] >= from_seq]

    # -- planning cursor ----------------------------------------------------

    def _next_planned(self) -> Optional[tuple[PlannedTrial, int]]:
        if self._retry_queue:
            return self._retry_queue[0]
        if self._cursor < len(self.plan.trials):
            return self.plan.trials[self._cursor], 1
        return None

    def _consume_planned(self) -> None:
        if self._retry_queue:
            self._retry_queue.popleft()
        else:
            self._cursor += 1

    @property
    def remaining_trials(self) -> int:
        return len(self.plan.trials) - self._cursor + len(self._retry_queue)

    # -- command surface ----------------------------------------------------

    def issue_command(self, command: str | StartCommand) -> dict:
        """Apply one starter command and run the trial lifecycle around it."""
        if self.closed:
            raise SessionClosedError("session already completed")
        command = StartCommand(command)

        if command is StartCommand.ON_YOUR_MARKS:
            if self.sequencer.phase is not StartPhase.IDLE:
                raise IllegalTransitionError(
                    f"command 'on_your_marks' not allowed in phase {self.sequencer.phase.value!r}"
                )
            nxt = self._next_planned()
            if nxt is None:
                raise SessionClosedError("no trials remain in the plan")
            planned, attempt = nxt
            key = self._trial_key(planned, attempt)
            self.sequencer.rng = random.Random(f"{self.config.seed}:latency:{key}")
            self.sequencer.config.start_device_ids = (planned.condition.device_id,)
            self._current = _CurrentTrial(planned=planned, attempt=attempt, trial_key=key)
            self._current.marks_at_ms = self.clock.now_ms()
            phase = self.sequencer.advance(command)
            return {"phase": phase.value}

        if command is StartCommand.SET:
            if self._current is None or self.sequencer.phase is not StartPhase.ON_YOUR_MARKS:
                raise IllegalTransitionError(
                    f"command 'set' not allowed in phase {self.sequencer.phase.value!r}"
                )
            if isinstance(self.clock, SimulatedClock):
                self.clock.advance(self.config.marks_to_set_ms)
            self._current.set_at_ms = self.clock.now_ms()
            phase = self.sequencer.advance(command)
            return {"phase": phase.value}

        if command is StartCommand.START:
            if self._current is None or self.sequencer.phase is not StartPhase.SET:
                raise IllegalTransitionError(
                    f"command 'start' not allowed in phase {self.sequencer.phase.value!r}"
                )
            if self._armed_foreperiod is not None:
                raise IllegalTransitionError("start already armed")
            rng_fp = random.Random(f"{self.config.seed}:foreperiod:{self._current.trial_key}")
            foreperiod = sample_foreperiod(rng_fp, self.config.foreperiod)
            self._current.foreperiod_ms = foreperiod
            if isinstance(self.clock, SimulatedClock):
                self.clock.advance(foreperiod)
                return self.fire_armed_start()
            self._armed_foreperiod = foreperiod
            return {
                "phase": self.sequencer.phase.value,
                "armed": True,
                "foreperiod_ms": foreperiod,
            }

        if command is StartCommand.RECALL:
            phase = self.sequencer.advance(command)
            self._armed_foreperiod = None
            if self._current is not None:
                # the aborted trial re-arms with fresh draws
                planned = self._current.planned
                key = (
                    planned.participant_id,
                    planned.block_index,
                    planned.condition.label,
                    planned.trial_index,
                )
                self._recalls[key] = self._recalls.get(key, 0) + 1
            return {"phase": phase.value}

        # RESET
        phase = self.sequencer.advance(command)
        self._current = None
        if isinstance(self.clock, SimulatedClock):
            self.clock.advance(self.config.intertrial_ms)
        return {"phase": phase.value}

    def fire_armed_start(self) -> dict:
        """Fire the start channels now and capture the simulated reaction.

        With a real clock the server calls this after actually waiting out
        the foreperiod; with a simulated clock it runs inside the start
        command.
        """
        if self._current is None:
            raise IllegalTransitionError("no trial armed")
        self._armed_foreperiod = None
        current = self._current
        planned = current.planned
        start_at = self.clock.now_ms()
        self.sequencer.advance(StartCommand.START)
        device = self.registry.get(planned.condition.device_id)
        event = next(
            e for e in self.sequencer.last_start_events if e.device_id == device.id
        )

        reactor = self._reactors[planned.participant_id]
        blink_schedule = trial_blink_schedule_us(
            reactor.profile,
            self.config.seed if self.config.seed is not None else 0,
            current.trial_key,
            current.set_at_ms if current.set_at_ms is not None else start_at,
            (current.foreperiod_ms or 0) + 2000,
        )
        rng_react = random.Random(f"{self.config.seed}:reaction:{current.trial_key}")
        sample = reactor.react(event, device.modality, rng_react, blink_schedule)
        rt_raw_us = sample.react_at_us - start_at * US_PER_MS
        rt_compensated_us = compensate_latency_us(rt_raw_us, device.latency.mean_us)
        false_start = rt_raw_us < self.config.false_start_threshold_ms * US_PER_MS
        self.sequencer.finish_trial(false_start)

        record = TrialRecord(
            participant_id=planned.participant_id,
            condition_label=planned.condition.label,
            device_id=device.id,
            contact_point=(
                planned.condition.contact_point.value if planned.condition.contact_point else None
            ),
            modality=device.modality.value,
            block_index=planned.block_index,
            trial_index=planned.trial_index,
            attempt=current.attempt,
            practice=planned.practice,
            foreperiod_ms=current.foreperiod_ms,
            marks_at_ms=current.marks_at_ms,
            set_at_ms=current.set_at_ms,
            start_at_ms=start_at,
            physical_onset_us=event.physical_onset_us,
            blink_delayed=sample.blink_delayed,
            outcome=FALSE_START if false_start else VALID,
        )
        if not false_start:
            record.react_at_us = sample.react_at_us
            record.rt_raw_us = rt_raw_us
            record.rt_compensated_us = rt_compensated_us

        record_seq = self._store_record(record)
        payload = {
            "participant_id": record.participant_id,
            "condition": record.condition_label,
            "block_index": record.block_index,
            "trial_index": record.trial_index,
            "attempt": record.attempt,
            "record_seq": record_seq,
        }
        if false_start:
            self._emit("false_start", payload)
        else:
            self._emit(
                "rt_recorded",
                {
                    **payload,
                    "rt_raw_us": record.rt_raw_us,
                    "rt_raw_ms": record.rt_raw_ms,
                    "rt_compensated_us": record.rt_compensated_us,
                    "rt_compensated_ms": record.rt_compensated_ms,
                    "blink_delayed": record.blink_delayed,
                },
            )
        self._finish_plan_slot(planned, current)
        return {"phase": self.sequencer.phase.value, "record_seq": record_seq}

    def _store_record(self, record: TrialRecord) -> int:
        self.records.append(record)
        if self.log is not None:
            seq = self.log.write_trial(record)
        else:
            seq = len(self.records)
        self._record_seqs.append(seq)
        self._last_record_seq = seq
        return seq

    def _trial_key(self, planned: PlannedTrial, attempt: int) -> str:
        key = (
            f"{planned.participant_id}:{planned.block_index}:{planned.condition.label}:"
            f"{planned.trial_index}:{attempt}{':practice' if planned.practice else ''}"
        )
        recalls = self._recalls.get(
            (
                planned.participant_id,
                planned.block_index,
                planned.condition.label,
                planned.trial_index,
            ),
            0,
        )
        return f"{key}:r{recalls}" if recalls else key

    def _finish_plan_slot(self, planned: PlannedTrial, current: _CurrentTrial) -> None:
        self._consume_planned()

        # simulated self-report: the participant rejects the crouch start
        if not planned.practice and self.config.retry_rate > 0:
            rng_retry = random.Random(f"{self.config.seed}:retry:{current.trial_key}")
            if rng_retry.random() < self.config.retry_rate:
                self._apply_retry(self._last_record_seq, reason="self_report")

        if not self._retry_queue:
            nxt = self.plan.trials[self._cursor] if self._cursor < len(self.plan.trials) else None
            boundary = nxt is None or (
                nxt.participant_id != planned.participant_id
                or nxt.block_index != planned.block_index
            )
            if boundary and not planned.practice:
                self._emit(
                    "block_complete",
                    {
                        "participant_id": planned.participant_id,
                        "block_index": planned.block_index,
                        "likert_due": planned.block_index in self.config.likert_blocks,
                    },
                )
            if nxt is None:
                self._close_session()

    def _apply_retry(self, record_seq: Optional[int], reason: str) -> None:
        if record_seq is None or record_seq not in self._record_seqs:
            raise RetryRejectedError(f"no trial record with seq {record_seq}")
        if record_seq in self._retry_marked:
            raise RetryRejectedError(f"record {record_seq} already marked for retry")
        idx = self._record_seqs.index(record_seq)
        record = self.records[idx]
        if record.outcome == RETRY:
            raise RetryRejectedError(f"record {record_seq} already a retry")
        self._retry_marked.add(record_seq)
        self.records[idx] = mark_record_retry(record)
        if self.log is not None:
            self.log.write_retry_mark(record_seq, reason=reason)
        key = (
            record.participant_id,
            record.block_index,
            record.condition_label,
            record.trial_index,
        )
        attempt = self._attempts.get(key, record.attempt) + 1
        self._attempts[key] = attempt
        planned = PlannedTrial(
            participant_id=record.participant_id,
            condition=next(
                c for c in self.plan.conditions if c.label == record.condition_label
            ),
            block_index=record.block_index,
            trial_index=record.trial_index,
            practice=record.practice,
        )
        self._retry_queue.append((planned, attempt))
        self._emit(
            "trial_retry",
            {
                "record_seq": record_seq,
                "participant_id": record.participant_id,
                "condition": record.condition_label,
                "block_index": record.block_index,
                "trial_index": record.trial_index,
                "next_attempt": attempt,
                "reason": reason,
            },
        )

    def mark_retry(self, record_seq: Optional[int] = None) -> dict:
        """Operator marks a completed trial as not satisfying the protocol."""
        if self.closed:
            raise SessionClosedError("session already completed")
        if self._current is not None and self.sequencer.phase not in (
            StartPhase.IDLE,
            StartPhase.COMPLETED,
            StartPhase.FALSE_START,
            StartPhase.RECALLED,
        ):
            raise RetryRejectedError("cannot mark a retry while a trial is in progress")
        target = record_seq if record_seq is not None else self._last_record_seq
        self._apply_retry(target, reason="operator")
        return {"record_seq": target, "queued_attempts": len(self._retry_queue)}

    def submit_likert(self, participant_id: str, block_index: int, answers: dict) -> dict:
        if not answers:
            raise LikertRangeError("questionnaire submission is empty")
        for question, value in answers.items():
            if question not in self.config.likert_questions:
                raise LikertRangeError(f"unknown question {question!r}")
            if not isinstance(value, int) or isinstance(value, bool) or not (1 <= value <= 7):
                raise LikertRangeError(f"answer {question}={value!r} outside 1..7")
        if participant_id not in self.plan.participant_ids:
            raise LikertRangeError(f"unknown participant {participant_id!r}")
        entry = LikertEntry(
            participant_id=participant_id, block_index=block_index, answers=dict(answers)
        )
        seq = self.log.write_likert(entry) if self.log is not None else -1
        return {"record_seq": seq}

    def _close_session(self) -> None:
        self.closed = True
        self._emit("session_summary", self.summary())

    # -- headless driver ------------------------------------------------------

    def run_all(self) -> dict:
        """Execute the full plan through the command path."""
        while not self.closed:
            self.issue_command(StartCommand.ON_YOUR_MARKS)
            self.issue_command(StartCommand.SET)
            self.issue_command(StartCommand.START)
            if not self.closed:
                self.issue_command(StartCommand.RESET)
        return self.summary()

    # -- summaries ------------------------------------------------------------

    def summary(self) -> dict:
        per_condition: dict[str, RunningStats] = {}
        last_rt = None
        for record in self.records:
            if record.practice or record.outcome != VALID:
                continue
            stats = per_condition.setdefault(record.condition_label, RunningStats())
            stats.add(record.rt_raw_ms)
            last_rt = {
                "condition": record.condition_label,
                "rt_raw_ms": record.rt_raw_ms,
                "rt_compensated_ms": record.rt_compensated_ms,
            }
        counts = audit_counts(self.records)
        return {
            "study": self.config.study,
            "closed": self.closed,
            "planned": self.plan.total_trials(),
            "progress": counts,
            "per_condition": {
                label: stats.as_dict() for label, stats in sorted(per_condition.items())
            },
            "last_rt": last_rt,
        }
