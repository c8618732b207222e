"""Race-start phase machine and simultaneous start dispatch.

Phases move Idle -> OnYourMarks -> Set -> Fired; a recall is legal from any
armed or fired phase, and Reset returns a terminal phase to Idle. Every
transition can fire the stimulus channels mapped to the phase it enters.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

from .devices import DeviceRegistry, StimulusEvent, fire_stimulus
from .errors import IllegalTransitionError, NoStartChannelError


class StartPhase(str, Enum):
    IDLE = "idle"
    ON_YOUR_MARKS = "on_your_marks"
    SET = "set"
    FIRED = "fired"
    COMPLETED = "completed"
    FALSE_START = "false_start"
    RECALLED = "recalled"


class StartCommand(str, Enum):
    ON_YOUR_MARKS = "on_your_marks"
    SET = "set"
    START = "start"
    RECALL = "recall"
    RESET = "reset"


TERMINAL_PHASES = frozenset(
    {StartPhase.COMPLETED, StartPhase.FALSE_START, StartPhase.RECALLED}
)

#: The legal transition graph. Anything absent raises IllegalTransitionError.
TRANSITIONS: dict[tuple[StartPhase, StartCommand], StartPhase] = {
    (StartPhase.IDLE, StartCommand.ON_YOUR_MARKS): StartPhase.ON_YOUR_MARKS,
    (StartPhase.ON_YOUR_MARKS, StartCommand.SET): StartPhase.SET,
    (StartPhase.SET, StartCommand.START): StartPhase.FIRED,
    (StartPhase.ON_YOUR_MARKS, StartCommand.RECALL): StartPhase.RECALLED,
    (StartPhase.SET, StartCommand.RECALL): StartPhase.RECALLED,
    (StartPhase.FIRED, StartCommand.RECALL): StartPhase.RECALLED,
    (StartPhase.COMPLETED, StartCommand.RESET): StartPhase.IDLE,
    (StartPhase.FALSE_START, StartCommand.RESET): StartPhase.IDLE,
    (StartPhase.RECALLED, StartCommand.RESET): StartPhase.IDLE,
}


@dataclass
class SequenceConfig:
    """Which channels each phase fires, plus the anticipation guard.

    The false-start threshold is an artifact of the harness (standard
    athletics value 100 ms); reactions faster than it invalidate the trial.
    min_set_hold_ms models the starter waiting for steadiness before the
    gun and defaults to no wait.
    """

    marks_device_ids: tuple[str, ...] = ()
    set_device_ids: tuple[str, ...] = ()
    start_device_ids: tuple[str, ...] = ()
    false_start_threshold_ms: int = 100
    min_set_hold_ms: int = 0

    def __post_init__(self) -> None:
        if self.false_start_threshold_ms <= 0:
            raise ValueError("false_start_threshold_ms must be positive")
        if self.min_set_hold_ms < 0:
            raise ValueError("min_set_hold_ms cannot be negative")
        self.marks_device_ids = tuple(self.marks_device_ids)
        self.set_device_ids = tuple(self.set_device_ids)
        self.start_device_ids = tuple(self.start_device_ids)


def judge_false_start(rt_raw_us: int, false_start_threshold_ms: int) -> bool:
    """True when the raw reaction beats the anticipation threshold.

    The boundary itself is a legal reaction: exactly 100 ms is valid.
    """
    return rt_raw_us < false_start_threshold_ms * 1000


def fire_start(
    registry: DeviceRegistry,
    device_ids: Sequence[str],
    t_ms: int,
    rng: random.Random,
) -> list[StimulusEvent]:
    """Command every start channel at the identical timestamp.

    Physical onsets then differ only by each channel's latency model.
    """
    if not device_ids:
        raise NoStartChannelError("start fired with no configured channel")
    return [fire_stimulus(registry.get(device_id), t_ms, rng) for device_id in device_ids]


class StartSequencer:
    """One start sequence at a time; commands apply strictly serially.

    Observers receive (kind, payload) tuples and must not block; they are
    plain callbacks invoked on the caller's thread.
    """

    def __init__(
        self,
        registry: DeviceRegistry,
        config: SequenceConfig,
        clock,
        rng: random.Random,
        observer: Optional[Callable[[str, dict], None]] = None,
    ) -> None:
        self._registry = registry
        self.config = config
        self._clock = clock
        self.rng = rng  # reassignable so trials can key their own substream
        self._observer = observer
        self._phase = StartPhase.IDLE
        self._set_entered_at_ms: Optional[int] = None
        self.last_start_events: list[StimulusEvent] = []

    @property
    def phase(self) -> StartPhase:
        return self._phase

    def _notify(self, kind: str, payload: dict) -> None:
        if self._observer is not None:
            self._observer(kind, payload)

    def _fire_all(self, device_ids: Sequence[str], t_ms: int) -> list[StimulusEvent]:
        events = []
        for device_id in device_ids:
            event = fire_stimulus(self._registry.get(device_id), t_ms, self.rng)
            events.append(event)
            self._notify(
                "stimulus_fired",
                {
                    "device_id": event.device_id,
                    "commanded_at_ms": event.commanded_at_ms,
                    "physical_onset_us": event.physical_onset_us,
                },
            )
        return events

    def advance(self, command: StartCommand) -> StartPhase:
        """Apply one starter command; illegal commands leave state unchanged."""
        command = StartCommand(command)
        key = (self._phase, command)
        if key not in TRANSITIONS:
            raise IllegalTransitionError(
                f"command {command.value!r} not allowed in phase {self._phase.value!r}"
            )
        now = self._clock.now_ms()
        if command is StartCommand.START:
            if not self.config.start_device_ids:
                raise NoStartChannelError("start fired with no configured channel")
            if (
                self._set_entered_at_ms is not None
                and now < self._set_entered_at_ms + self.config.min_set_hold_ms
            ):
                raise IllegalTransitionError(
                    f"set hold of {self.config.min_set_hold_ms} ms not yet satisfied"
                )
        next_phase = TRANSITIONS[key]
        self._phase = next_phase
        self._notify("phase_changed", {"phase": next_phase.value, "t_ms": now})

        if next_phase is StartPhase.ON_YOUR_MARKS:
            self._fire_all(self.config.marks_device_ids, now)
        elif next_phase is StartPhase.SET:
            self._set_entered_at_ms = now
            self._fire_all(self.config.set_device_ids, now)
        elif next_phase is StartPhase.FIRED:
            self.last_start_events = self._fire_all(self.config.start_device_ids, now)
        elif next_phase is StartPhase.IDLE:
            self._set_entered_at_ms = None
            self.last_start_events = []
        return next_phase

    def finish_trial(self, false_start: bool) -> StartPhase:
        """Record the trial outcome, moving Fired to a terminal phase."""
        if self._phase is not StartPhase.FIRED:
            raise IllegalTransitionError(
                f"cannot finish a trial from phase {self._phase.value!r}"
            )
        self._phase = StartPhase.FALSE_START if false_start else StartPhase.COMPLETED
        self._notify(
            "phase_changed", {"phase": self._phase.value, "t_ms": self._clock.now_ms()}
        )
        return self._phase
