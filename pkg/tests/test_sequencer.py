import itertools
import random

import pytest

from startlab.devices import (
    ContactInterfaceSpec,
    ContactPoint,
    DeviceRegistry,
    LatencyModel,
    StimulusDevice,
    StimulusModality,
)
from startlab.errors import IllegalTransitionError, NoStartChannelError
from startlab.sequencer import (
    TRANSITIONS,
    SequenceConfig,
    StartCommand,
    StartPhase,
    StartSequencer,
    fire_start,
    judge_false_start,
)
from startlab.timing import SimulatedClock

ALL_COMMANDS = list(StartCommand)


def make_registry():
    return DeviceRegistry(
        [
            StimulusDevice(id="led-red", modality=StimulusModality.VISUAL_LED, color_role="red"),
            StimulusDevice(id="led-yellow", modality=StimulusModality.VISUAL_LED, color_role="yellow"),
            StimulusDevice(id="led-start", modality=StimulusModality.VISUAL_LED, color_role="start"),
            StimulusDevice(
                id="push",
                modality=StimulusModality.HAPTIC_PUSH,
                latency=LatencyModel(mean_us=8700),
                interface=ContactInterfaceSpec(contact_point=ContactPoint.FIRST_JOINT),
            ),
        ]
    )


def make_sequencer(events=None, start_ids=("led-start", "push"), min_hold=0):
    registry = make_registry()
    config = SequenceConfig(
        marks_device_ids=("led-red",),
        set_device_ids=("led-yellow",),
        start_device_ids=tuple(start_ids),
        min_set_hold_ms=min_hold,
    )
    clock = SimulatedClock()
    observer = events.append if events is not None else None
    seq = StartSequencer(
        registry, config, clock, random.Random(1), observer=lambda k, p: observer((k, p)) if observer else None
    )
    return seq, clock


class TestTransitions:
    def test_nominal_sequence_fires_mapped_devices(self):
        events = []
        seq, clock = make_sequencer(events)
        assert seq.advance(StartCommand.ON_YOUR_MARKS) is StartPhase.ON_YOUR_MARKS
        fired = [p["device_id"] for k, p in events if k == "stimulus_fired"]
        assert fired == ["led-red"]
        clock.advance(1000)
        assert seq.advance(StartCommand.SET) is StartPhase.SET
        fired = [p["device_id"] for k, p in events if k == "stimulus_fired"]
        assert fired == ["led-red", "led-yellow"]
        clock.advance(2500)
        assert seq.advance(StartCommand.START) is StartPhase.FIRED
        assert {e.device_id for e in seq.last_start_events} == {"led-start", "push"}

    def test_start_from_idle_is_illegal(self):
        seq, _ = make_sequencer()
        with pytest.raises(IllegalTransitionError):
            seq.advance(StartCommand.START)
        assert seq.phase is StartPhase.IDLE

    def test_recall_paths(self):
        for pre in [
            [StartCommand.ON_YOUR_MARKS],
            [StartCommand.ON_YOUR_MARKS, StartCommand.SET],
            [StartCommand.ON_YOUR_MARKS, StartCommand.SET, StartCommand.START],
        ]:
            seq, clock = make_sequencer()
            for cmd in pre:
                clock.advance(1000)
                seq.advance(cmd)
            assert seq.advance(StartCommand.RECALL) is StartPhase.RECALLED
            assert seq.advance(StartCommand.RESET) is StartPhase.IDLE

    def test_finish_trial_outcomes(self):
        seq, clock = make_sequencer()
        for cmd in (StartCommand.ON_YOUR_MARKS, StartCommand.SET, StartCommand.START):
            clock.advance(1000)
            seq.advance(cmd)
        assert seq.finish_trial(False) is StartPhase.COMPLETED
        seq.advance(StartCommand.RESET)
        for cmd in (StartCommand.ON_YOUR_MARKS, StartCommand.SET, StartCommand.START):
            clock.advance(1000)
            seq.advance(cmd)
        assert seq.finish_trial(True) is StartPhase.FALSE_START

    def test_finish_requires_fired(self):
        seq, _ = make_sequencer()
        with pytest.raises(IllegalTransitionError):
            seq.finish_trial(False)

    def test_min_set_hold_blocks_early_start(self):
        seq, clock = make_sequencer(min_hold=500)
        seq.advance(StartCommand.ON_YOUR_MARKS)
        clock.advance(1000)
        seq.advance(StartCommand.SET)
        clock.advance(100)
        with pytest.raises(IllegalTransitionError):
            seq.advance(StartCommand.START)
        assert seq.phase is StartPhase.SET
        clock.advance(400)
        assert seq.advance(StartCommand.START) is StartPhase.FIRED

    def test_exhaustive_enumeration_cannot_shortcut_to_fired(self):
        # every command sequence up to length 4: reaching FIRED implies the
        # last three effective transitions were marks -> set -> start
        for length in range(1, 5):
            for commands in itertools.product(ALL_COMMANDS, repeat=length):
                seq, clock = make_sequencer()
                accepted = []
                for cmd in commands:
                    clock.advance(1000)
                    try:
                        seq.advance(cmd)
                        accepted.append(cmd)
                    except (IllegalTransitionError, NoStartChannelError):
                        pass
                if seq.phase is StartPhase.FIRED:
                    assert accepted[-3:] == [
                        StartCommand.ON_YOUR_MARKS,
                        StartCommand.SET,
                        StartCommand.START,
                    ]

    def test_transition_table_is_deterministic(self):
        for (phase, cmd), target in TRANSITIONS.items():
            seq, _ = make_sequencer()
            seq._phase = phase
            if phase is StartPhase.SET:
                seq._set_entered_at_ms = 0
            assert seq.advance(cmd) is target

    def test_console_transition_fixture_in_sync(self):
        # the operator console enables buttons from a mirrored copy of this
        # graph; the shared fixture keeps the two in lockstep
        import json
        from pathlib import Path

        fixture = json.loads(
            (Path(__file__).parent.parent / "frontend" / "test" / "transitions.json").read_text()
        )
        mirrored = {(phase, cmd) for phase, cmd in fixture["legal"]}
        ours = {(phase.value, cmd.value) for phase, cmd in TRANSITIONS}
        assert mirrored == ours


class TestFireStart:
    def test_commanded_timestamps_identical(self, rng):
        registry = make_registry()
        events = fire_start(registry, ["led-start", "push"], 7000, rng)
        assert [e.commanded_at_ms for e in events] == [7000, 7000]
        onsets = {e.device_id: e.physical_onset_us for e in events}
        assert onsets["led-start"] == 7_000_000
        assert onsets["push"] == 7_008_700

    def test_single_channel(self, rng):
        registry = make_registry()
        (event,) = fire_start(registry, ["push"], 100, rng)
        assert event.physical_onset_us == 108_700

    def test_no_channel_rejected(self, rng):
        registry = make_registry()
        with pytest.raises(NoStartChannelError):
            fire_start(registry, [], 100, rng)

    def test_randomized_configs_equal_commanded_at(self):
        rng = random.Random(2024)
        registry = make_registry()
        ids = ["led-red", "led-yellow", "led-start", "push"]
        for _ in range(500):
            chosen = rng.sample(ids, rng.randint(1, len(ids)))
            t = rng.randint(0, 10**7)
            events = fire_start(registry, chosen, t, rng)
            assert len({e.commanded_at_ms for e in events}) == 1
            assert all(e.commanded_at_ms == t for e in events)


class TestFalseStartJudgment:
    @pytest.mark.parametrize(
        "rt_ms,expected",
        [(99, True), (100, False), (180, False), (0, True)],
    )
    def test_threshold_boundary(self, rt_ms, expected):
        assert judge_false_start(rt_ms * 1000, 100) is expected

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            SequenceConfig(false_start_threshold_ms=0)
