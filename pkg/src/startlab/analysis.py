"""Turns a session log into the structured analysis report and CSV tables.

The report covers the full chain: per-condition descriptives, a pooled
normality check, both multiple-comparison procedures (button-press study),
or the outlier screen plus Welch / F tests and per-participant trends
(crouch-start study), the modality gap before and after latency
compensation, and questionnaire summaries. The report is a pure function
of the log: same log bytes, same report bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence

from .devices import StimulusModality
from .errors import TooFewSamplesError
from .harness import EXCLUDED_OUTLIER, VALID, TrialRecord
from .persistence import (
    SessionLogData,
    export_histogram,
    export_likert,
    export_rt_by_condition,
)
from .stats import (
    ComparisonMatrix,
    SampleSet,
    TierFlags,
    bonferroni_pairwise,
    descriptive,
    exclude_outliers_3sigma,
    f_test_var,
    likert_summary,
    shapiro_wilk,
    tukey_kramer,
    welch_t,
)


def _matrix_to_dict(matrix: ComparisonMatrix) -> dict:
    return {
        "method": matrix.method,
        "labels": list(matrix.labels),
        "pairs": [
            {
                "a": p.label_a,
                "b": p.label_b,
                "mean_diff_ms": p.mean_diff,
                "adjusted_p": p.adjusted_p,
                "significance": TierFlags.from_p(p.adjusted_p).as_dict(),
            }
            for p in matrix.pairs
        ],
    }


def _condition_samples(records: Sequence[TrialRecord], use: str = "raw") -> dict[str, list[float]]:
    key = "rt_raw_ms" if use == "raw" else "rt_compensated_ms"
    samples: dict[str, list[float]] = {}
    for r in records:
        value = getattr(r, key)
        if value is None:
            continue
        samples.setdefault(r.condition_label, []).append(value)
    return samples


def _modality_gap(records: Sequence[TrialRecord]) -> Optional[dict]:
    """Mean visual minus haptic reaction, raw and latency-compensated."""
    raw: dict[str, list[float]] = {"visual": [], "haptic": []}
    comp: dict[str, list[float]] = {"visual": [], "haptic": []}
    for r in records:
        if r.rt_raw_us is None:
            continue
        modality = StimulusModality(r.modality)
        if modality.is_visual:
            raw["visual"].append(r.rt_raw_ms)
            comp["visual"].append(r.rt_compensated_ms)
        elif modality.is_haptic:
            raw["haptic"].append(r.rt_raw_ms)
            comp["haptic"].append(r.rt_compensated_ms)
    if not raw["visual"] or not raw["haptic"]:
        return None

    def mean(vals: list[float]) -> float:
        return sum(vals) / len(vals)

    return {
        "raw_gap_ms": mean(raw["visual"]) - mean(raw["haptic"]),
        "compensated_gap_ms": mean(comp["visual"]) - mean(comp["haptic"]),
        "n_visual": len(raw["visual"]),
        "n_haptic": len(raw["haptic"]),
    }


def _outlier_screen(records: Sequence[TrialRecord]) -> tuple[list[TrialRecord], dict]:
    """3-sigma screen per participant x condition; relabels excluded records."""
    groups = {}
    index_map: dict[tuple, list[int]] = {}
    for i, r in enumerate(records):
        if r.outcome != VALID or r.rt_raw_us is None:
            continue
        key = (r.participant_id, r.condition_label)
        groups.setdefault(key, []).append(r.rt_raw_ms)
        index_map.setdefault(key, []).append(i)
    sample_sets = [
        SampleSet(
            label=f"{pid}:{cond}", values=tuple(vals), participant=pid, condition=cond
        )
        for (pid, cond), vals in sorted(groups.items())
    ]
    kept_sets, report = exclude_outliers_3sigma(sample_sets)
    excluded_positions = set()
    for exc in report.excluded:
        record_idx = index_map[(exc.participant, exc.condition)][exc.index]
        excluded_positions.add(record_idx)
    kept_records = []
    for i, r in enumerate(records):
        if i in excluded_positions:
            r.outcome = EXCLUDED_OUTLIER
        elif r.outcome == VALID:
            kept_records.append(r)
    report_dict = {
        "total_excluded": report.total_excluded,
        "counts_per_condition": dict(sorted(report.counts_per_condition.items())),
        "excluded": [
            {
                "participant": e.participant,
                "condition": e.condition,
                "value_ms": e.value,
                "z_score": e.z_score,
            }
            for e in report.excluded
        ],
    }
    return kept_records, report_dict


def _likert_section(log: SessionLogData, questions: Sequence[str]) -> dict:
    entries = log.likert_entries()
    by_question_block: dict[tuple, list[int]] = {}
    for entry in entries:
        for question, value in entry.answers.items():
            by_question_block.setdefault((question, entry.block_index), []).append(value)
    out: dict = {}
    for (question, block), values in sorted(by_question_block.items()):
        out.setdefault(question, {})[f"block{block}"] = likert_summary(values)
    return out


def analyze_log(log: SessionLogData) -> dict:
    """Build the full analysis report for one session log."""
    config = log.config
    records = log.trials()
    if not any(r.rt_raw_us is not None for r in records):
        raise TooFewSamplesError("log contains no measured reaction times")

    audit = {
        "planned": config.trials_per_condition_per_block
        * config.blocks
        * len(config.conditions)
        * len(config.participants),
        "executed": len(records),
        "valid": sum(1 for r in records if r.outcome == VALID),
        "false_start": sum(1 for r in records if r.outcome == "false_start"),
        "retry": sum(1 for r in records if r.outcome == "retry"),
    }

    report: dict = {
        "report_version": 1,
        "study": config.study,
        "config_hash": log.header["config_hash"],
        "seed": config.seed,
        "audit": audit,
    }

    if config.study == 2:
        kept, outliers = _outlier_screen(records)
        report["outliers"] = outliers
    else:
        kept = [r for r in records if r.outcome == VALID]

    samples = _condition_samples(kept)
    report["descriptives"] = {
        label: descriptive(vals) for label, vals in sorted(samples.items())
    }
    gap = _modality_gap(kept)
    if gap is not None:
        report["modality_gap"] = gap

    pooled = [v for vals in samples.values() for v in vals]
    if 3 <= len(pooled) <= 5000:
        normality = shapiro_wilk(pooled)
        report["normality"] = {
            "method": normality.method,
            "W": normality.statistic,
            "p_value": normality.p_value,
        }

    ordered_labels = [c.label for c in config.conditions if c.label in samples]
    groups = [
        SampleSet(label=label, values=tuple(samples[label])) for label in ordered_labels
    ]

    if config.study == 1 and len(groups) >= 2:
        tukey = tukey_kramer(groups)
        bonf = bonferroni_pairwise(groups)
        both_significant = sorted(
            {(p.label_a, p.label_b) for p in tukey.significant_pairs(0.001)}
            & {(p.label_a, p.label_b) for p in bonf.significant_pairs(0.001)}
        )
        report["tukey_kramer"] = _matrix_to_dict(tukey)
        report["bonferroni"] = _matrix_to_dict(bonf)
        report["significant_pairs_both_p001"] = [list(pair) for pair in both_significant]

    if config.study == 2 and len(groups) == 2:
        welch = welch_t(groups[0], groups[1])
        fvar = f_test_var(groups[0], groups[1])
        report["welch_t"] = {
            "a": groups[0].label,
            "b": groups[1].label,
            "t": welch.statistic,
            "df": welch.df,
            "p_value": welch.p_value,
            "significance": TierFlags.from_p(welch.p_value).as_dict(),
        }
        report["f_test_var"] = {
            "a": groups[0].label,
            "b": groups[1].label,
            "F": fvar.statistic,
            "df": list(fvar.df),
            "p_value": fvar.p_value,
            "significance": TierFlags.from_p(fvar.p_value).as_dict(),
        }
        per_participant = {}
        for pid in config.participants:
            sub = [r for r in kept if r.participant_id == pid.id]
            sub_samples = _condition_samples(sub)
            if len(sub_samples) == 2 and all(len(v) >= 3 for v in sub_samples.values()):
                a_label, b_label = ordered_labels
                res = welch_t(sub_samples[a_label], sub_samples[b_label])
                per_participant[pid.id] = {
                    "t": res.statistic,
                    "p_value": res.p_value,
                    "significance": TierFlags.from_p(res.p_value).as_dict(),
                }
        report["welch_t_per_participant"] = per_participant

    likert = _likert_section(log, config.likert_questions)
    if likert:
        report["likert"] = likert
    return report


def write_report(report: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2, default=str))
        fh.write("\n")


def export_tables(log: SessionLogData, out_dir: str | Path) -> dict:
    """Write the plotting CSVs next to the report; returns row counts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = log.config
    records = log.trials()
    kept = [r for r in records if r.outcome == VALID]
    counts = {
        "rt_by_condition": export_rt_by_condition(kept, out / "rt_by_condition.csv"),
        "histogram": export_histogram(kept, out / "histogram.csv"),
        "likert": export_likert(
            log.likert_entries(), config.likert_questions, out / "likert.csv"
        ),
    }
    return counts


def replay_events(log: SessionLogData) -> list[dict]:
    """Reconstruct the observable event sequence from a log's records.

    Ordered, gapless sequence numbers; used by the replay command and the
    summary-consistency oracle.
    """
    events: list[dict] = []

    def emit(kind: str, t_ms, payload: dict) -> None:
        events.append({"seq": len(events) + 1, "kind": kind, "t_ms": t_ms, "payload": payload})

    previous_block: Optional[tuple] = None
    config = log.config
    for entry in log.entries:
        if entry.kind == "retry":
            emit("trial_retry", None, dict(entry.data))
            continue
        if entry.kind == "likert":
            continue
        record = TrialRecord.from_dict(entry.data)
        block_key = (record.participant_id, record.block_index)
        if previous_block is not None and block_key != previous_block:
            emit(
                "block_complete",
                record.marks_at_ms,
                {
                    "participant_id": previous_block[0],
                    "block_index": previous_block[1],
                    "likert_due": previous_block[1] in config.likert_blocks,
                },
            )
        previous_block = block_key
        emit("phase_changed", record.marks_at_ms, {"phase": "on_your_marks"})
        emit("phase_changed", record.set_at_ms, {"phase": "set"})
        emit("phase_changed", record.start_at_ms, {"phase": "fired"})
        emit(
            "stimulus_fired",
            record.start_at_ms,
            {
                "device_id": record.device_id,
                "commanded_at_ms": record.start_at_ms,
                "physical_onset_us": record.physical_onset_us,
            },
        )
        if record.outcome == "false_start":
            emit(
                "false_start",
                record.start_at_ms,
                {
                    "participant_id": record.participant_id,
                    "condition": record.condition_label,
                    "block_index": record.block_index,
                    "trial_index": record.trial_index,
                    "attempt": record.attempt,
                },
            )
        elif record.rt_raw_us is not None:
            emit(
                "rt_recorded",
                record.start_at_ms,
                {
                    "participant_id": record.participant_id,
                    "condition": record.condition_label,
                    "block_index": record.block_index,
                    "trial_index": record.trial_index,
                    "attempt": record.attempt,
                    "rt_raw_ms": record.rt_raw_ms,
                    "rt_compensated_ms": record.rt_compensated_ms,
                },
            )
    if previous_block is not None:
        emit(
            "block_complete",
            None,
            {
                "participant_id": previous_block[0],
                "block_index": previous_block[1],
                "likert_due": previous_block[1] in config.likert_blocks,
            },
        )
    return events


def replay_summary(log: SessionLogData) -> dict:
    """Per-condition running summary recomputed from the log records."""
    from .stats import RunningStats

    per_condition: dict[str, RunningStats] = {}
    for record in log.trials():
        if record.outcome != VALID or record.rt_raw_us is None:
            continue
        per_condition.setdefault(record.condition_label, RunningStats()).add(record.rt_raw_ms)
    return {
        label: stats.as_dict() for label, stats in sorted(per_condition.items())
    }
