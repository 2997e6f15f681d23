"""Data encoding: the three code streams and the total score L(D, M).

Encoding walks traces in log order, events in trace order, and variables in
the model's dependency order (ties broken by schema order). Per event and
variable the encoder collects the rules that fire, disambiguates them in the
rule-selection stream when needed, codes correctness in the model stream
with one adaptive counter, and codes values in the value stream: over the
predicted set when an ambiguous prediction is right, over the variable's
whole domain when the prediction is wrong or no rule fires.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .codec import (
    CodecConfig,
    PrequentialCounter,
    model_length,
    prequential_code,
    prequential_total,
    value_code,
)
from .logs import Event, EventLog, LogSkeleton, Trace, frequencies
from .rules import (
    Model,
    Rule,
    condition_fires,
    decode_order,
    predicted_values,
)


class ScoringError(ValueError):
    """Raised on encoder/decoder mismatches such as stream under- or overruns."""


@dataclass(frozen=True)
class CodeStreams:
    """The materialized streams; every entry is tagged with its variable.

    rule_selection: (variable, firing-rule count, chosen rule key)
    model_stream:   (variable, correct?)
    value_stream:   (variable, allowed values, emitted value)
    """

    rule_selection: tuple[tuple[str, int, tuple], ...]
    model_stream: tuple[tuple[str, bool], ...]
    value_stream: tuple[tuple[str, frozenset, object], ...]

    def for_variable(self, name: str):
        return (
            [e for e in self.rule_selection if e[0] == name],
            [e[1] for e in self.model_stream if e[0] == name],
            [e[2] for e in self.value_stream if e[0] == name],
        )


@dataclass(frozen=True)
class ScoreBreakdown:
    l_model: float
    l_cr: float
    l_cm: float
    l_cv: float

    @property
    def total(self) -> float:
        return self.l_model + self.l_cr + self.l_cm + self.l_cv

    def as_dict(self) -> dict[str, float]:
        return {
            "l_model": self.l_model,
            "l_cr": self.l_cr,
            "l_cm": self.l_cm,
            "l_cv": self.l_cv,
            "total": self.total,
        }


def _observed(event: Event, variable: str, schema_by_name) -> object | None:
    """The encodable value at an event: token, or bin index; None if absent."""
    value = event.values.get(variable)
    if value is None:
        return None
    var = schema_by_name[variable]
    if var.is_numerical:
        return var.histogram.index(float(value))
    return value


def _firing_rules(
    rules: tuple[Rule, ...], prev: Event | None, cur: Event, schema_by_name
) -> list[tuple[Rule, frozenset]]:
    firing = []
    for rule in rules:
        if not condition_fires(rule.condition, prev, cur):
            continue
        predicted = predicted_values(rule.update, prev, schema_by_name)
        if predicted:
            firing.append((rule, predicted))
    return firing


def _choose_rule(
    firing: list[tuple[Rule, frozenset]], actual, freq: dict
) -> tuple[Rule, frozenset]:
    """Among firing rules prefer the cheapest correct prediction, i.e. the
    correct set with the smallest total frequency; ties and all-wrong cases
    fall back to the canonically first rule."""
    best = None
    best_mass = None
    for rule, predicted in firing:
        if actual in predicted:
            mass = sum(freq.get(j, 0) for j in predicted)
            if best is None or mass < best_mass:
                best, best_mass = (rule, predicted), mass
    return best if best is not None else firing[0]


def encode(
    log: EventLog, model: Model, config: CodecConfig = CodecConfig()
) -> tuple[CodeStreams, ScoreBreakdown]:
    """Encode a log under a model; returns the streams and the score."""
    schema_by_name = log.schema_by_name()
    _validate_model(model, schema_by_name)
    freq = frequencies(log)
    order = decode_order(model, log.variable_names())
    rules_by_var = {v: model.rules_for(v) for v in order}
    domains = {v: frozenset(schema_by_name[v].domain_values()) for v in order}

    counters: dict[str, PrequentialCounter] = {}
    rsel: list[tuple[str, int, tuple]] = []
    mstream: list[tuple[str, bool]] = []
    vstream: list[tuple[str, frozenset, object]] = []
    l_cr = 0.0
    l_cm = 0.0
    l_cv = 0.0

    for _, prev, cur in log.event_pairs():
        for variable in order:
            actual = _observed(cur, variable, schema_by_name)
            if actual is None:
                continue
            var_freq = freq.of(variable)
            firing = _firing_rules(rules_by_var[variable], prev, cur, schema_by_name)
            if not firing:
                vstream.append((variable, domains[variable], actual))
                l_cv += value_code(actual, domains[variable], var_freq)
                continue
            if len(firing) > 1:
                chosen, predicted = _choose_rule(firing, actual, var_freq)
                rsel.append((variable, len(firing), chosen.key()))
                l_cr += math.log2(len(firing))
            else:
                chosen, predicted = firing[0]
            hit = actual in predicted
            scope = variable if config.per_variable_model_stream else ""
            counter = counters.get(scope, PrequentialCounter(epsilon=config.epsilon))
            bits, counters[scope] = prequential_code(counter, hit)
            mstream.append((variable, hit))
            l_cm += bits
            if hit:
                if len(predicted) > 1:
                    vstream.append((variable, predicted, actual))
                    l_cv += value_code(actual, predicted, var_freq)
            else:
                vstream.append((variable, domains[variable], actual))
                l_cv += value_code(actual, domains[variable], var_freq)

    streams = CodeStreams(tuple(rsel), tuple(mstream), tuple(vstream))
    breakdown = ScoreBreakdown(model_length(model, schema_by_name, config), l_cr, l_cm, l_cv)
    return streams, breakdown


def _validate_model(model: Model, schema_by_name) -> None:
    for rule in model.rules:
        for name in (rule.condition.variable, rule.update.variable):
            if name not in schema_by_name:
                raise ScoringError(f"rule references unknown variable {name!r}")
        cond_var = schema_by_name[rule.condition.variable]
        if rule.condition.operator in ("<=", ">=") and not cond_var.is_numerical:
            raise ScoringError(
                f"ordered comparison on categorical variable {cond_var.name!r}"
            )
        upd_var = schema_by_name[rule.update.variable]
        if rule.update.kind == "set" and upd_var.is_numerical:
            raise ScoringError(f"set update on numerical variable {upd_var.name!r}")
        if rule.update.kind != "set" and not upd_var.is_numerical:
            raise ScoringError(
                f"{rule.update.kind} update on categorical variable {upd_var.name!r}"
            )


def total_score(
    log: EventLog, model: Model, config: CodecConfig = CodecConfig()
) -> ScoreBreakdown:
    """L(D, M) = L(M) + L(C_r) + L(C_m) + L(C_v)."""
    _, breakdown = encode(log, model, config)
    return breakdown


class _StreamReader:
    def __init__(self, entries, label: str):
        self.entries = entries
        self.label = label
        self.pos = 0

    def read(self, variable: str):
        if self.pos >= len(self.entries):
            raise ScoringError(f"{self.label} stream underrun at variable {variable!r}")
        entry = self.entries[self.pos]
        if entry[0] != variable:
            raise ScoringError(
                f"{self.label} stream desync: expected {variable!r}, found {entry[0]!r}"
            )
        self.pos += 1
        return entry

    def assert_exhausted(self) -> None:
        if self.pos != len(self.entries):
            raise ScoringError(f"{self.label} stream overrun: {len(self.entries) - self.pos} left")


def decode(streams: CodeStreams, model: Model, skeleton: LogSkeleton) -> EventLog:
    """Replay the streams over a value-less skeleton to rebuild the log.

    Categorical values come back exactly; numerical values come back as the
    representative of their bin, so decoding inverts encoding on
    bin-discretized logs.
    """
    schema_by_name = {v.name: v for v in skeleton.schema}
    names = tuple(v.name for v in skeleton.schema)
    order = decode_order(model, names)
    rules_by_var = {v: model.rules_for(v) for v in order}
    domains = {v: frozenset(schema_by_name[v].domain_values()) for v in order}

    rsel = _StreamReader(streams.rule_selection, "rule selection")
    mstream = _StreamReader(streams.model_stream, "model")
    vstream = _StreamReader(streams.value_stream, "value")

    def concrete(variable: str, coded):
        var = schema_by_name[variable]
        return var.histogram.representative(coded) if var.is_numerical else coded

    traces = []
    for trace_id, present in skeleton.traces:
        events: list[Event] = []
        prev: Event | None = None
        for present_vars in present:
            values: dict[str, object] = {}
            cur = Event(values)
            for variable in order:
                if variable not in present_vars:
                    continue
                firing = _firing_rules(rules_by_var[variable], prev, cur, schema_by_name)
                if not firing:
                    _, allowed, coded = vstream.read(variable)
                    if allowed != domains[variable]:
                        raise ScoringError(f"value stream desync at {variable!r}")
                    values[variable] = concrete(variable, coded)
                    continue
                if len(firing) > 1:
                    _, count, key = rsel.read(variable)
                    if count != len(firing):
                        raise ScoringError(f"rule selection desync at {variable!r}")
                    chosen = [fp for fp in firing if fp[0].key() == key]
                    if not chosen:
                        raise ScoringError(f"unknown rule key in selection at {variable!r}")
                    predicted = chosen[0][1]
                else:
                    predicted = firing[0][1]
                _, hit = mstream.read(variable)
                if hit:
                    if len(predicted) == 1:
                        coded = next(iter(predicted))
                    else:
                        _, allowed, coded = vstream.read(variable)
                        if allowed != predicted:
                            raise ScoringError(f"value stream desync at {variable!r}")
                else:
                    _, allowed, coded = vstream.read(variable)
                    if allowed != domains[variable]:
                        raise ScoringError(f"value stream desync at {variable!r}")
                values[variable] = concrete(variable, coded)
            events.append(cur)
            prev = cur
        traces.append(Trace(trace_id, tuple(events)))

    rsel.assert_exhausted()
    mstream.assert_exhausted()
    vstream.assert_exhausted()
    return EventLog(skeleton.schema, tuple(traces))


# ---------------------------------------------------------------------------
# Fast per-variable scoring used by the search.
#
# Which rules fire at an event depends only on observed values, never on the
# model, so each variable's stream content is independent of the others given
# the rules that target it. Only the shared adaptive counter couples the
# variables, and its total is a closed-form function of the global hit/miss
# counts. The search exploits this to re-score one variable at a time.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariableStats:
    cv_bits: float
    cr_bits: float
    check_count: int
    cross_count: int


class ScoringContext:
    """Precomputed per-log tables shared by all scoring calls of a search."""

    def __init__(self, log: EventLog, config: CodecConfig = CodecConfig()):
        self.log = log
        self.config = config
        self.schema_by_name = log.schema_by_name()
        self.names = log.variable_names()
        self.freq = frequencies(log)
        self.domains = {
            v.name: frozenset(v.domain_values()) for v in log.schema
        }
        self.events: list[tuple[Event | None, Event]] = [
            (prev, cur) for _, prev, cur in log.event_pairs()
        ]
        self.n_events = len(self.events)
        # observed (coded) value per variable per event, None where missing
        self.observed: dict[str, list] = {}
        # fallback code length per variable per event
        self.fallback_bits: dict[str, list[float]] = {}
        self.mean_fallback: dict[str, float] = {}
        for var in self.names:
            freq_v = self.freq.of(var)
            total = self.freq.total(var)
            obs = []
            bits = []
            for _, cur in self.events:
                coded = _observed(cur, var, self.schema_by_name)
                obs.append(coded)
                bits.append(
                    -math.log2(freq_v[coded] / total) if coded is not None else 0.0
                )
            self.observed[var] = obs
            self.fallback_bits[var] = bits
            self.mean_fallback[var] = (
                sum(
                    count * -math.log2(count / total) for count in freq_v.values()
                )
                / total
                if total
                else 0.0
            )

    def condition_support(self, condition) -> int:
        return sum(
            1 for prev, cur in self.events if condition_fires(condition, prev, cur)
        )

    def rule_firing(self, rule: Rule) -> tuple[list[bool], list[frozenset | None]]:
        """Per-event firing flags and predicted sets for one rule; a rule
        only fires where its prediction is non-empty."""
        fires = []
        predicted: list[frozenset | None] = []
        for prev, cur in self.events:
            if condition_fires(rule.condition, prev, cur):
                p = predicted_values(rule.update, prev, self.schema_by_name)
                if p:
                    fires.append(True)
                    predicted.append(p)
                    continue
            fires.append(False)
            predicted.append(None)
        return fires, predicted

    def variable_stats(
        self, variable: str, rule_data: list[tuple[Rule, list[bool], list[frozenset | None]]]
    ) -> VariableStats:
        """Stream statistics for one variable under the given targeting rules."""
        freq_v = self.freq.of(variable)
        obs = self.observed[variable]
        fallback = self.fallback_bits[variable]
        cv = 0.0
        cr = 0.0
        checks = 0
        crosses = 0
        for e in range(self.n_events):
            actual = obs[e]
            if actual is None:
                continue
            firing = [
                (rule, pred[e]) for rule, fires, pred in rule_data if fires[e]
            ]
            if not firing:
                cv += fallback[e]
                continue
            if len(firing) > 1:
                cr += math.log2(len(firing))
                chosen, predicted = _choose_rule(firing, actual, freq_v)
            else:
                chosen, predicted = firing[0]
            if actual in predicted:
                checks += 1
                if len(predicted) > 1:
                    mass = sum(freq_v.get(j, 0) for j in predicted)
                    cv += -math.log2(freq_v[actual] / mass)
            else:
                crosses += 1
                cv += fallback[e]
        return VariableStats(cv, cr, checks, crosses)

    def combine(self, model: Model, stats: dict[str, VariableStats]) -> ScoreBreakdown:
        l_model = model_length(model, self.schema_by_name, self.config)
        l_cv = sum(s.cv_bits for s in stats.values())
        l_cr = sum(s.cr_bits for s in stats.values())
        if self.config.per_variable_model_stream:
            l_cm = sum(
                prequential_total(s.check_count, s.cross_count, self.config.epsilon)
                for s in stats.values()
            )
        else:
            checks = sum(s.check_count for s in stats.values())
            crosses = sum(s.cross_count for s in stats.values())
            l_cm = prequential_total(checks, crosses, self.config.epsilon)
        return ScoreBreakdown(l_model, l_cr, l_cm, l_cv)
