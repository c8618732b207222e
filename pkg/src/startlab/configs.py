"""Canonical simulated-session configs for the two study designs.

Participant reaction parameters are plausible placeholders chosen so the
simulated datasets have the published shape (pooled non-normality for the
button-press study; a 15.1 ms raw visual-haptic gap with a noisier LED
channel for the crouch-start study). They are not measured values.
"""

from __future__ import annotations

import json
from pathlib import Path

from .devices import SOLENOID_STARTUP_US

STUDY1_GAPS_MM = (0.0, 2.0, 4.0)
CONTACT_POINTS = ("finger-pad", "first-joint")

#: Base button-press reaction means/sds per participant. Two slower
#: reactors give the pooled distribution its heavy right shoulder.
_STUDY1_BASE = {
    "P1": (152.0, 16.0),
    "P2": (162.0, 18.0),
    "P3": (172.0, 22.0),
    "P4": (185.0, 26.0),
    "P5": (270.0, 34.0),
    "P6": (360.0, 44.0),
}

#: Whole-body (crouch start) parameters: slower overall, visual channel
#: noisier than the push channel.
_STUDY2_BASE = {
    "P1": (320.0, 38.0),
    "P2": (330.0, 40.0),
    "P3": (340.0, 40.0),
    "P4": (345.0, 42.0),
    "P5": (350.0, 42.0),
    "P6": (360.0, 44.0),
}

_PARTICIPANTS = [
    {
        "id": "P1",
        "age": 21,
        "hearing_level_db": {"right": 93.5, "left": 106.3},
        "athletics_history_years": 3,
        "events": ["200m", "400m"],
    },
    {
        "id": "P2",
        "age": 22,
        "hearing_level_db": {"right": 106.25, "left": 110},
        "athletics_history_years": 8,
        "events": ["100m", "400m"],
    },
    {
        "id": "P3",
        "age": 21,
        "hearing_level_db": {"right": 108, "left": 108},
        "athletics_history_years": 8,
        "events": ["100m", "triple jump"],
    },
    {
        "id": "P4",
        "age": 21,
        "hearing_level_db": {"right": [90, 100], "left": [90, 100]},
        "athletics_history_years": 6,
        "events": ["100m", "200m"],
    },
    {
        "id": "P5",
        "age": 22,
        "hearing_level_db": {"right": 80, "left": 90},
        "athletics_history_years": 3,
        "events": ["100m", "long jump"],
    },
    {
        "id": "P6",
        "age": 22,
        "hearing_level_db": {"right": 92, "left": 103},
        "athletics_history_years": 8,
        "events": ["100m", "200m", "400m"],
    },
]


def _push_device(gap_mm: float, contact_point: str) -> dict:
    return {
        "id": f"push-{gap_mm:.1f}-{contact_point}",
        "modality": "haptic-push",
        "latency": {"mean_us": SOLENOID_STARTUP_US, "jitter": "constant"},
        "interface": {
            "stages": 2,
            "gap_mm": gap_mm,
            "stroke_mm": 3.0,
            "contact_point": contact_point,
        },
    }


def _led(device_id: str, role: str) -> dict:
    return {
        "id": device_id,
        "modality": "visual-led",
        "latency": {"mean_us": 0, "jitter": "constant"},
        "color_role": role,
    }


def study1_config(seed: int = 20210) -> dict:
    """Button-press design: 6 haptic interface combinations plus the LED."""
    push_devices = [
        _push_device(gap, point) for gap in STUDY1_GAPS_MM for point in CONTACT_POINTS
    ]
    athletes = {}
    for pid, (mean, sd) in _STUDY1_BASE.items():
        athletes[pid] = {
            "base_mean_ms": mean,
            "base_sd_ms": sd,
            "offset_visual_ms": 30.0,
            "offset_haptic_ms": 5.0,
            "blink": {"rate_hz": 0.2, "blackout_ms": 100},
        }
    return {
        "schema_version": 1,
        "study": 1,
        "mode": "simulated",
        "seed": seed,
        "clock": "simulated",
        "devices": [_led("led-set", "yellow"), _led("led-start", "start")] + push_devices,
        "sequence": {
            "set_devices": ["led-set"],
            "false_start_threshold_ms": 100,
            "min_set_hold_ms": 0,
        },
        "plan": {
            "conditions": [d["id"] for d in push_devices] + ["led-start"],
            "trials_per_condition_per_block": 10,
            "blocks": 4,
            "foreperiod_ms": [2000, 3000],
            "marks_to_set_ms": 1000,
            "intertrial_ms": 2000,
            "likert_blocks": [],
        },
        "participants": _PARTICIPANTS,
        "athletes": athletes,
    }


def study2_config(seed: int = 20220) -> dict:
    """Crouch-start design: the chosen push interface against the LED.

    Offsets put the configured raw visual-haptic gap at 15.1 ms once the
    8.7 ms solenoid start-up is in the haptic channel (28.8 - 5.0 - 8.7
    compensates back to 23.8 ms); the LED channel carries extra perception
    jitter so its spread exceeds the push channel's.
    """
    push = _push_device(2.0, "first-joint")
    athletes = {}
    for pid, (mean, sd) in _STUDY2_BASE.items():
        athletes[pid] = {
            "base_mean_ms": mean,
            "base_sd_ms": sd,
            "offset_visual_ms": 28.8,
            "offset_haptic_ms": 5.0,
            "jitter_sd_visual_ms": 35.0,
            "blink": {"rate_hz": 0.0, "blackout_ms": 100},
            "run_time_s": "10.80",
        }
    return {
        "schema_version": 1,
        "study": 2,
        "mode": "simulated",
        "seed": seed,
        "clock": "simulated",
        "devices": [
            _led("led-marks", "red"),
            _led("led-set", "yellow"),
            _led("led-start", "start"),
            push,
        ],
        "sequence": {
            "marks_devices": ["led-marks"],
            "set_devices": ["led-set"],
            "false_start_threshold_ms": 100,
            "min_set_hold_ms": 0,
        },
        "plan": {
            "conditions": [push["id"], "led-start"],
            "trials_per_condition_per_block": 5,
            "blocks": 16,
            "foreperiod_ms": [2000, 3000],
            "marks_to_set_ms": 1000,
            "intertrial_ms": 2000,
            "likert_blocks": [8, 16],
        },
        "retry_rate": 0.0,
        "participants": _PARTICIPANTS,
        "athletes": athletes,
    }


def write_default_configs(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, config in (("study1-sim.json", study1_config()), ("study2-sim.json", study2_config())):
        path = directory / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(config, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(path)
    return paths
