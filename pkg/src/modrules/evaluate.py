"""Prediction with a rule model and the evaluation harness.

Prediction is deliberately simple: conditions are evaluated on the observed
values (never on chained predictions), firing rules pool their predicted
values, and the pooled value with the highest training frequency wins.
Numerical point predictions use exact arithmetic; interval and set
predictions resolve through bin frequencies.
"""
from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass

from .logs import DEFAULT_BINS, MISSING, EventLog, FrequencyTable, build_log, frequencies
from .rules import Model, Rule, condition_fires, pretty_rule, rule_term_count

FALLBACK = "fallback"


@dataclass(frozen=True)
class PredictionRecord:
    trace_id: str
    event_index: int
    variable: str
    actual: object
    predicted: object
    rule: str  # human-readable key of the contributing rule, or "fallback"


@dataclass(frozen=True)
class MetricsReport:
    """Prediction quality per variable plus model complexity.

    F1 is reported under both averagings because they answer different
    questions: macro weights every class equally, micro weights every event
    equally. Relative comparisons against the empty-model baseline use the
    micro numbers; with few rules per variable, macro is dominated by the
    classes no rule covers and barely moves even for a perfect model.
    """

    f1_per_variable: dict[str, float]
    f1_micro_per_variable: dict[str, float]
    rmse_per_variable: dict[str, float]
    median_f1: float | None
    median_f1_micro: float | None
    median_rmse: float | None
    rule_terms: int
    runtime_seconds: float | None = None

    def as_dict(self) -> dict:
        return {
            "f1_averaging": {"f1_per_variable": "macro", "f1_micro_per_variable": "micro"},
            "f1_per_variable": self.f1_per_variable,
            "f1_micro_per_variable": self.f1_micro_per_variable,
            "rmse_per_variable": self.rmse_per_variable,
            "median_f1": self.median_f1,
            "median_f1_micro": self.median_f1_micro,
            "median_rmse": self.median_rmse,
            "rule_terms": self.rule_terms,
            "runtime_seconds": self.runtime_seconds,
        }


class _TrainingStats:
    def __init__(self, log: EventLog, stats_log: EventLog):
        self.schema_by_name = log.schema_by_name()
        self.freq: FrequencyTable = frequencies(stats_log)
        self.majority: dict[str, object] = {}
        self.mean: dict[str, float] = {}
        for var in log.schema:
            counts = self.freq.of(var.name)
            if not counts:
                continue
            if var.is_numerical:
                total = 0.0
                n = 0
                for trace in stats_log.traces:
                    for event in trace.events:
                        v = event.values.get(var.name)
                        if v is not None:
                            total += float(v)
                            n += 1
                self.mean[var.name] = total / n if n else 0.0
            else:
                self.majority[var.name] = min(
                    counts.items(), key=lambda kv: (-kv[1], str(kv[0]))
                )[0]


def _rule_pool(rule: Rule, prev, schema_by_name) -> list[tuple[object, object]]:
    """Concrete (value, frequency-key) pairs one firing rule offers."""
    update = rule.update
    var = schema_by_name[update.variable]
    if update.kind == "set":
        return [(v, v) for v in update.constants]
    h = var.histogram
    if update.kind == "point":
        x = float(update.constants[0])
        return [(x, h.index(x))]
    if update.kind == "interval":
        lo, hi = (float(c) for c in update.constants)
        return [(h.representative(b), b) for b in h.overlapping(lo, hi)]
    prev_value = prev.values.get(update.variable) if prev is not None else None
    if prev_value is None:
        return []
    base = float(prev_value)
    if update.kind == "rel_point":
        x = base + float(update.constants[0])
        return [(x, h.index(x))]
    if update.kind == "rel_interval":
        lo, hi = (base + float(c) for c in update.constants)
        return [(h.representative(b), b) for b in h.overlapping(lo, hi)]
    x = float(update.constants[0]) * base
    return [(x, h.index(x))]


def predict(model: Model, log: EventLog, train: EventLog | None = None) -> list[PredictionRecord]:
    """One record per (event, variable) with a non-missing actual value.

    Among all values predicted by firing rules, the one with the highest
    training frequency wins (ties resolve by value order); without a firing
    rule the prediction falls back to the training majority or mean.
    """
    stats = _TrainingStats(log, train if train is not None else log)
    schema_by_name = log.schema_by_name()
    rules_by_var = {v.name: model.rules_for(v.name) for v in log.schema}
    records: list[PredictionRecord] = []
    for trace in log.traces:
        prev = None
        for index, event in enumerate(trace.events):
            for var in log.schema:
                actual = event.values.get(var.name)
                if actual is None or (not var.is_numerical and actual == MISSING):
                    continue
                freq = stats.freq.of(var.name)
                pooled: list[tuple[float, str, object]] = []
                contributed: dict[object, Rule] = {}
                for rule in rules_by_var[var.name]:
                    if not condition_fires(rule.condition, prev, event):
                        continue
                    for value, freq_key in _rule_pool(rule, prev, schema_by_name):
                        if value not in contributed:
                            contributed[value] = rule
                        pooled.append((freq.get(freq_key, 0), str(value), value))
                if pooled:
                    pooled.sort(key=lambda p: (-p[0], p[1]))
                    predicted = pooled[0][2]
                    source = _rule_label(contributed[predicted])
                elif var.is_numerical:
                    predicted = stats.mean.get(var.name, 0.0)
                    source = FALLBACK
                else:
                    predicted = stats.majority.get(var.name, MISSING)
                    source = FALLBACK
                records.append(
                    PredictionRecord(trace.id, index, var.name, actual, predicted, source)
                )
            prev = event
    return records


def _rule_label(rule: Rule) -> str:
    return pretty_rule(rule)


def f1_categorical(records: list[PredictionRecord]) -> float:
    """Macro-averaged F1 over the classes appearing as actual or predicted."""
    classes = sorted({str(r.actual) for r in records} | {str(r.predicted) for r in records})
    scores = []
    for cls in classes:
        tp = sum(1 for r in records if str(r.actual) == cls and str(r.predicted) == cls)
        fp = sum(1 for r in records if str(r.actual) != cls and str(r.predicted) == cls)
        fn = sum(1 for r in records if str(r.actual) == cls and str(r.predicted) != cls)
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return sum(scores) / len(scores) if scores else 0.0


def f1_micro(records: list[PredictionRecord]) -> float:
    """Event-weighted F1; for single-label prediction this equals accuracy."""
    if not records:
        return 0.0
    return sum(1 for r in records if str(r.actual) == str(r.predicted)) / len(records)


def rmse_numerical(records: list[PredictionRecord]) -> float:
    if not records:
        return 0.0
    return math.sqrt(
        sum((float(r.actual) - float(r.predicted)) ** 2 for r in records) / len(records)
    )


def metrics(
    model: Model,
    log: EventLog,
    train: EventLog | None = None,
    runtime_seconds: float | None = None,
) -> MetricsReport:
    """Per-variable prediction quality plus the model complexity."""
    records = predict(model, log, train)
    by_variable: dict[str, list[PredictionRecord]] = {}
    for record in records:
        by_variable.setdefault(record.variable, []).append(record)
    f1s: dict[str, float] = {}
    micros: dict[str, float] = {}
    rmses: dict[str, float] = {}
    for var in log.schema:
        rows = by_variable.get(var.name, [])
        if not rows:
            continue
        if var.is_numerical:
            rmses[var.name] = rmse_numerical(rows)
        else:
            f1s[var.name] = f1_categorical(rows)
            micros[var.name] = f1_micro(rows)
    return MetricsReport(
        f1_per_variable=f1s,
        f1_micro_per_variable=micros,
        rmse_per_variable=rmses,
        median_f1=statistics.median(f1s.values()) if f1s else None,
        median_f1_micro=statistics.median(micros.values()) if micros else None,
        median_rmse=statistics.median(rmses.values()) if rmses else None,
        rule_terms=rule_term_count(model),
        runtime_seconds=runtime_seconds,
    )


def subset_log(log: EventLog, trace_ids: set[str], bins: int = DEFAULT_BINS) -> EventLog:
    """A new log holding only the given traces, with statistics refit."""
    kinds = {v.name: v.kind for v in log.schema}
    traces = []
    for trace in log.traces:
        if trace.id not in trace_ids:
            continue
        events = []
        for event in trace.events:
            values = {
                k: (None if v == MISSING else v) for k, v in event.values.items()
            }
            events.append({k: v for k, v in values.items() if v is not None})
        traces.append((trace.id, events))
    return build_log(traces, kinds, bins)


def split_by_traces(
    log: EventLog, fraction: float, seed: int, bins: int = DEFAULT_BINS
) -> tuple[EventLog, EventLog]:
    """Trace-level split; the second log holds a ``fraction`` share of traces."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be strictly between 0 and 1")
    ids = [t.id for t in log.traces]
    rng = random.Random(f"{seed}:split")
    rng.shuffle(ids)
    n_test = min(max(1, round(fraction * len(ids))), len(ids) - 1)
    test_ids = set(ids[:n_test])
    train_ids = set(ids[n_test:])
    return subset_log(log, train_ids, bins), subset_log(log, test_ids, bins)


def per_rule_generalization(
    model: Model, train: EventLog, test: EventLog
) -> list[dict]:
    """Per rule: prediction quality restricted to the events it covers,
    on the training and the test split."""
    rows = []
    for rule in model.rules:
        single = Model.of([rule])
        numerical = train.schema_by_name()[rule.update.variable].is_numerical
        row: dict[str, object] = {
            "rule": _rule_label(rule),
            "target": rule.update.variable,
            "metric": "rmse" if numerical else "f1",
        }
        for split_name, split in (("train", train), ("test", test)):
            covered = [
                r
                for r in predict(single, split, train)
                if r.variable == rule.update.variable and r.rule != FALLBACK
            ]
            row[f"{split_name}_covered"] = len(covered)
            if not covered:
                row[f"{split_name}_score"] = None
            elif numerical:
                row[f"{split_name}_score"] = rmse_numerical(covered)
            else:
                row[f"{split_name}_score"] = f1_categorical(covered)
        rows.append(row)
    return rows
