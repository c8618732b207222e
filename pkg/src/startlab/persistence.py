"""Durable session configs, append-only trial logs, CSV exports.

The log is line-delimited JSON: a header line carrying the full config and
its hash, then one self-describing line per record (trial, retry marker or
questionnaire entry), each stamped with a short config-hash prefix and a
gapless sequence number. Lines are never rewritten.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import IO, Optional, Sequence

import jsonschema

from .athlete import AthleteProfile, BlinkModel
from .devices import (
    ContactInterfaceSpec,
    ContactPoint,
    LatencyModel,
    StimulusDevice,
    StimulusModality,
)
from .errors import CorruptLineError, InvalidConfigError, SchemaViolationError
from .harness import RT_OUTCOMES, Condition, Participant, TrialRecord
from .timing import ForeperiodRange

LOG_SCHEMA_VERSION = 1
CONFIG_SCHEMA_VERSION = 1

DEFAULT_LIKERT_QUESTIONS = (
    "ease_recognition_led",
    "ease_recognition_push",
    "easier_to_recognize",
    "easier_to_start",
    "future_potential",
)

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "study", "mode", "devices", "plan", "participants"],
    "properties": {
        "schema_version": {"const": CONFIG_SCHEMA_VERSION},
        "study": {"enum": [1, 2]},
        "mode": {"enum": ["simulated", "live"]},
        "seed": {"type": "integer"},
        "clock": {"enum": ["simulated", "real"]},
        "devices": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "modality"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "modality": {
                        "enum": ["auditory", "visual-led", "haptic-push", "haptic-vibration"]
                    },
                    "latency": {
                        "type": "object",
                        "properties": {
                            "mean_us": {"type": "integer", "minimum": 0},
                            "jitter": {"enum": ["constant", "normal"]},
                            "sd_us": {"type": "integer", "minimum": 0},
                        },
                    },
                    "interface": {
                        "type": "object",
                        "properties": {
                            "stages": {"enum": [1, 2]},
                            "gap_mm": {"enum": [0.0, 2.0, 4.0, 0, 2, 4]},
                            "stroke_mm": {"type": "number"},
                            "contact_point": {"enum": ["finger-pad", "first-joint"]},
                        },
                    },
                    "color_role": {"enum": ["red", "yellow", "start"]},
                },
            },
        },
        "sequence": {
            "type": "object",
            "properties": {
                "marks_devices": {"type": "array", "items": {"type": "string"}},
                "set_devices": {"type": "array", "items": {"type": "string"}},
                "false_start_threshold_ms": {"type": "integer", "exclusiveMinimum": 0},
                "min_set_hold_ms": {"type": "integer", "minimum": 0},
            },
        },
        "plan": {
            "type": "object",
            "required": ["conditions"],
            "properties": {
                "conditions": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                "trials_per_condition_per_block": {"type": "integer", "exclusiveMinimum": 0},
                "blocks": {"type": "integer", "exclusiveMinimum": 0},
                "foreperiod_ms": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "marks_to_set_ms": {"type": "integer", "exclusiveMinimum": 0},
                "intertrial_ms": {"type": "integer", "minimum": 0},
                "practice_trials": {"type": "integer", "minimum": 0},
                "likert_blocks": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            },
        },
        "retry_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "participants": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id"],
                "properties": {"id": {"type": "string", "minLength": 1}},
            },
        },
        "athletes": {"type": "object"},
        "likert_questions": {"type": "array", "items": {"type": "string"}},
    },
}

_STUDY_DEFAULTS = {
    1: {"trials_per_condition_per_block": 10, "blocks": 4, "likert_blocks": []},
    2: {"trials_per_condition_per_block": 5, "blocks": 16, "likert_blocks": [8, 16]},
}


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def _device_from_dict(data: dict) -> StimulusDevice:
    latency = data.get("latency", {})
    interface = data.get("interface")
    interface_spec = None
    if interface is not None:
        interface_spec = ContactInterfaceSpec(
            stages=interface.get("stages", 2),
            gap_mm=float(interface.get("gap_mm", 2.0)),
            stroke_mm=float(interface.get("stroke_mm", 3.0)),
            contact_point=(
                ContactPoint(interface["contact_point"])
                if "contact_point" in interface
                else None
            ),
        )
    return StimulusDevice(
        id=data["id"],
        modality=StimulusModality(data["modality"]),
        latency=LatencyModel(
            mean_us=latency.get("mean_us", 0),
            jitter=latency.get("jitter", "constant"),
            sd_us=latency.get("sd_us", 0),
        ),
        interface=interface_spec,
        color_role=data.get("color_role"),
    )


def _profile_from_dict(data: dict) -> AthleteProfile:
    blink = data.get("blink", {})
    run_time = data.get("run_time_s")
    return AthleteProfile(
        base_mean_ms=float(data.get("base_mean_ms", 140.0)),
        base_sd_ms=float(data.get("base_sd_ms", 20.0)),
        offset_auditory_ms=float(data.get("offset_auditory_ms", 0.0)),
        offset_visual_ms=float(data.get("offset_visual_ms", 30.0)),
        offset_haptic_ms=float(data.get("offset_haptic_ms", 5.0)),
        jitter_sd_auditory_ms=float(data.get("jitter_sd_auditory_ms", 0.0)),
        jitter_sd_visual_ms=float(data.get("jitter_sd_visual_ms", 0.0)),
        jitter_sd_haptic_ms=float(data.get("jitter_sd_haptic_ms", 0.0)),
        blink=BlinkModel(
            rate_hz=float(blink.get("rate_hz", 0.0)),
            blackout_ms=int(blink.get("blackout_ms", 100)),
        ),
        run_time_s=Decimal(str(run_time)) if run_time is not None else None,
    )


@dataclass(frozen=True)
class SessionConfig:
    """Validated, typed view of a session config document."""

    study: int
    mode: str
    seed: Optional[int]
    clock: str
    devices: tuple[StimulusDevice, ...]
    conditions: tuple[Condition, ...]
    participants: tuple[Participant, ...]
    profiles: dict
    trials_per_condition_per_block: int
    blocks: int
    foreperiod: ForeperiodRange
    marks_to_set_ms: int
    intertrial_ms: int
    practice_trials: int
    likert_blocks: tuple[int, ...]
    likert_questions: tuple[str, ...]
    marks_device_ids: tuple[str, ...]
    set_device_ids: tuple[str, ...]
    false_start_threshold_ms: int
    min_set_hold_ms: int
    retry_rate: float
    raw: dict = field(repr=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "SessionConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise InvalidConfigError(f"config schema violation: {exc.message}") from exc

        study = raw["study"]
        mode = raw["mode"]
        seed = raw.get("seed")
        if mode == "simulated" and seed is None:
            raise InvalidConfigError("simulated mode requires a seed")

        try:
            devices = tuple(_device_from_dict(d) for d in raw["devices"])
        except (ValueError, KeyError) as exc:
            raise InvalidConfigError(f"bad device definition: {exc}") from exc
        device_ids = {d.id for d in devices}
        if len(device_ids) != len(devices):
            raise InvalidConfigError("device ids must be unique")
        by_id = {d.id: d for d in devices}

        plan = raw["plan"]
        defaults = _STUDY_DEFAULTS[study]
        condition_ids = plan["conditions"]
        for cid in condition_ids:
            if cid not in device_ids:
                raise InvalidConfigError(f"plan condition references unknown device {cid!r}")
        conditions = tuple(Condition.for_device(by_id[cid]) for cid in condition_ids)

        sequence = raw.get("sequence", {})
        for key in ("marks_devices", "set_devices"):
            for did in sequence.get(key, []):
                if did not in device_ids:
                    raise InvalidConfigError(f"sequence {key} references unknown device {did!r}")

        participants = tuple(
            Participant(
                id=p["id"],
                age=p.get("age"),
                hearing_level_db=p.get("hearing_level_db"),
                athletics_history_years=p.get("athletics_history_years"),
                events=tuple(p.get("events", ())),
                personal_bests=tuple(p.get("personal_bests", ())),
            )
            for p in raw["participants"]
        )
        pids = [p.id for p in participants]
        if len(set(pids)) != len(pids):
            raise InvalidConfigError("participant ids must be unique")

        athletes = raw.get("athletes", {})
        for pid in athletes:
            if pid not in set(pids):
                raise InvalidConfigError(f"athlete profile for unknown participant {pid!r}")
        try:
            profiles = {pid: _profile_from_dict(p) for pid, p in athletes.items()}
        except ValueError as exc:
            raise InvalidConfigError(f"bad athlete profile: {exc}") from exc
        if mode == "simulated":
            for pid in pids:
                profiles.setdefault(pid, AthleteProfile())

        fp = plan.get("foreperiod_ms", [2000, 3000])
        try:
            foreperiod = ForeperiodRange(min_ms=fp[0], max_ms=fp[1])
        except Exception as exc:
            raise InvalidConfigError(f"bad foreperiod range: {exc}") from exc

        return cls(
            study=study,
            mode=mode,
            seed=seed,
            clock=raw.get("clock", "simulated"),
            devices=devices,
            conditions=conditions,
            participants=participants,
            profiles=profiles,
            trials_per_condition_per_block=plan.get(
                "trials_per_condition_per_block", defaults["trials_per_condition_per_block"]
            ),
            blocks=plan.get("blocks", defaults["blocks"]),
            foreperiod=foreperiod,
            marks_to_set_ms=plan.get("marks_to_set_ms", 1000),
            intertrial_ms=plan.get("intertrial_ms", 2000),
            practice_trials=plan.get("practice_trials", 0),
            likert_blocks=tuple(plan.get("likert_blocks", defaults["likert_blocks"])),
            likert_questions=tuple(raw.get("likert_questions", DEFAULT_LIKERT_QUESTIONS)),
            marks_device_ids=tuple(sequence.get("marks_devices", ())),
            set_device_ids=tuple(sequence.get("set_devices", ())),
            false_start_threshold_ms=sequence.get("false_start_threshold_ms", 100),
            min_set_hold_ms=sequence.get("min_set_hold_ms", 0),
            retry_rate=float(raw.get("retry_rate", 0.0)),
            raw=raw,
        )


def load_config(path: str | Path) -> SessionConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"config is not valid JSON: {exc}") from exc
    return SessionConfig.from_dict(raw)


def validate_trial_dict(data: dict) -> None:
    """Record-schema check shared by the writer and the reader."""
    required = (
        "participant_id",
        "condition_label",
        "device_id",
        "modality",
        "block_index",
        "trial_index",
        "outcome",
    )
    for key in required:
        if key not in data or data[key] is None:
            raise SchemaViolationError(f"trial record missing {key!r}")
    rt_fields = ("react_at_us", "rt_raw_us", "rt_compensated_us")
    if data["outcome"] in RT_OUTCOMES:
        for key in rt_fields:
            if data.get(key) is None:
                raise SchemaViolationError(
                    f"outcome {data['outcome']!r} requires {key!r}"
                )
    else:
        for key in rt_fields:
            if data.get(key) is not None:
                raise SchemaViolationError(
                    f"outcome {data['outcome']!r} must not carry {key!r}"
                )


@dataclass(frozen=True)
class LikertEntry:
    participant_id: str
    block_index: int
    answers: dict  # question id -> 1..7

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "block_index": self.block_index,
            "answers": self.answers,
        }


class SessionLogWriter:
    """Single writer, append-only. One header line, then sequenced records."""

    def __init__(self, path: str | Path, config: SessionConfig, created_at: Optional[str] = None):
        self.path = Path(path)
        self._config = config
        self._seq = 0
        self._hash = config.hash
        self._fh: Optional[IO[str]] = open(self.path, "w", encoding="utf-8", newline="\n")
        header = {
            "kind": "header",
            "log_schema": LOG_SCHEMA_VERSION,
            "config_hash": self._hash,
            # deterministic replays need a stable header, so simulated
            # sessions carry no wall-clock timestamp
            "created_at": created_at,
            "config": config.raw,
        }
        self._write_line(header)

    def _write_line(self, payload: dict) -> None:
        if self._fh is None:
            raise SchemaViolationError("log already closed")
        self._fh.write(canonical_json(payload) + "\n")
        self._fh.flush()

    def _append(self, kind: str, data: dict) -> int:
        self._seq += 1
        self._write_line({"kind": kind, "seq": self._seq, "cfg": self._hash[:8], "data": data})
        return self._seq

    def write_trial(self, record: TrialRecord) -> int:
        data = record.to_dict()
        validate_trial_dict(data)
        return self._append("trial", data)

    def write_retry_mark(self, target_seq: int, reason: str = "self_report") -> int:
        if not (1 <= target_seq <= self._seq):
            raise SchemaViolationError(f"retry mark targets unknown seq {target_seq}")
        return self._append("retry", {"target_seq": target_seq, "reason": reason})

    def write_likert(self, entry: LikertEntry) -> int:
        for question, value in entry.answers.items():
            if not isinstance(value, int) or not (1 <= value <= 7):
                raise SchemaViolationError(
                    f"likert answer {question}={value!r} outside 1..7"
                )
        return self._append("likert", entry.to_dict())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "SessionLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass(frozen=True)
class LogEntry:
    kind: str
    seq: int
    data: dict


@dataclass(frozen=True)
class SessionLogData:
    header: dict
    entries: tuple[LogEntry, ...]

    @property
    def config_dict(self) -> dict:
        return self.header["config"]

    @property
    def config(self) -> SessionConfig:
        return SessionConfig.from_dict(self.header["config"])

    def trials(self, include_practice: bool = False) -> list[TrialRecord]:
        """Trial records with retry markers applied.

        A later retry line supersedes its target trial's outcome; the
        superseded record keeps its identity but drops reaction fields, so
        the record invariant (rt present iff measured outcome) holds for
        what consumers see.
        """
        retried = {
            e.data["target_seq"] for e in self.entries if e.kind == "retry"
        }
        out = []
        for entry in self.entries:
            if entry.kind != "trial":
                continue
            record = TrialRecord.from_dict(entry.data)
            if entry.seq in retried:
                record.outcome = "retry"
                record.react_at_us = None
                record.rt_raw_us = None
                record.rt_compensated_us = None
            if record.practice and not include_practice:
                continue
            out.append(record)
        return out

    def likert_entries(self) -> list[LikertEntry]:
        return [
            LikertEntry(
                participant_id=e.data["participant_id"],
                block_index=e.data["block_index"],
                answers=e.data["answers"],
            )
            for e in self.entries
            if e.kind == "likert"
        ]


def read_log(path: str | Path) -> SessionLogData:
    """Parse a session log; any malformed line reports its 1-based number."""
    path = Path(path)
    header: Optional[dict] = None
    entries: list[LogEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                payload = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise CorruptLineError(line_no, f"line {line_no}: {exc}") from exc
            if line_no == 1:
                if payload.get("kind") != "header" or "config" not in payload:
                    raise CorruptLineError(line_no, "first line must be the header")
                header = payload
                continue
            kind = payload.get("kind")
            if kind not in ("trial", "retry", "likert") or "seq" not in payload:
                raise CorruptLineError(line_no, f"line {line_no}: unknown record shape")
            if kind == "trial":
                try:
                    validate_trial_dict(payload.get("data", {}))
                except SchemaViolationError as exc:
                    raise CorruptLineError(line_no, f"line {line_no}: {exc}") from exc
            entries.append(LogEntry(kind=kind, seq=payload["seq"], data=payload["data"]))
    if header is None:
        raise CorruptLineError(1, "log has no header line")
    return SessionLogData(header=header, entries=tuple(entries))


# ---------------------------------------------------------------------------
# CSV exports (RFC-4180 style, UTF-8, header row)


def export_rt_by_condition(records: Sequence[TrialRecord], path: str | Path) -> int:
    """Two-column long table of kept reaction times, one row per record."""
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "participant", "rt_raw_ms", "rt_compensated_ms"])
        for r in records:
            if r.rt_raw_us is None:
                continue
            writer.writerow(
                [r.condition_label, r.participant_id, f"{r.rt_raw_ms:.3f}", f"{r.rt_compensated_ms:.3f}"]
            )
            rows += 1
    return rows


def export_histogram(
    records: Sequence[TrialRecord], path: str | Path, bin_ms: int = 25
) -> int:
    """Binned RT counts per condition, the histogram-figure data shape."""
    if bin_ms <= 0:
        raise ValueError("bin width must be positive")
    counts: dict = {}
    for r in records:
        if r.rt_raw_us is None:
            continue
        left = int(r.rt_raw_ms // bin_ms) * bin_ms
        counts[(r.condition_label, left)] = counts.get((r.condition_label, left), 0) + 1
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "bin_left_ms", "bin_right_ms", "count"])
        for (condition, left), count in sorted(counts.items()):
            writer.writerow([condition, left, left + bin_ms, count])
            rows += 1
    return rows


def export_likert(
    entries: Sequence[LikertEntry], questions: Sequence[str], path: str | Path
) -> int:
    """Wide table, one row per participant, one column per question x block."""
    blocks = sorted({e.block_index for e in entries})
    participants = sorted({e.participant_id for e in entries})
    columns = [f"{q}@block{b}" for q in questions for b in blocks]
    by_key = {(e.participant_id, e.block_index): e.answers for e in entries}
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant"] + columns)
        for pid in participants:
            row: list = [pid]
            for q in questions:
                for b in blocks:
                    answers = by_key.get((pid, b), {})
                    row.append(answers.get(q, ""))
            writer.writerow(row)
            rows += 1
    return rows
