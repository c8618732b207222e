"""startlab: race-start signal controller and reaction-time measurement lab."""

__version__ = "0.1.0"

from .athlete import AthleteProfile, BlinkModel, apply_blink, sample_reaction, simulate_record_gap
from .devices import (
    ContactInterfaceSpec,
    ContactPoint,
    DeviceRegistry,
    ForceTrace,
    LatencyModel,
    StimulusDevice,
    StimulusEvent,
    StimulusModality,
    detect_button_press,
    detect_force_onset,
    fire_stimulus,
)
from .harness import (
    Condition,
    Participant,
    SessionPlan,
    TrialRecord,
    build_study1_plan,
    build_study2_plan,
    counterbalance_order,
    run_trial,
)
from .persistence import SessionConfig, SessionLogWriter, read_log
from .sequencer import (
    SequenceConfig,
    StartCommand,
    StartPhase,
    StartSequencer,
    fire_start,
    judge_false_start,
)
from .session import SessionRuntime
from .stats import (
    ComparisonMatrix,
    SampleSet,
    TestResult,
    bonferroni_pairwise,
    descriptive,
    exclude_outliers_3sigma,
    f_test_var,
    likert_summary,
    shapiro_wilk,
    tukey_kramer,
    welch_t,
)
from .timing import (
    ForeperiodRange,
    MonotonicClock,
    SimulatedClock,
    check_start_system_delay,
    compensate_latency_us,
    round_photo_finish,
    sample_foreperiod,
)
