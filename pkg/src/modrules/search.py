"""Greedy rule mining: candidate generation, score estimate, search loop.

Candidates are the most frequent (variable, value) combinations per
condition operator, crossed with the most frequent update shapes observed
under each condition. A quick optimistic estimate of the score after adding
a rule orders the candidates so that exact scoring can stop early.
"""
from __future__ import annotations

import math
import time
from bisect import bisect_left, bisect_right, insort
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .codec import CodecConfig, condition_length, round_significant, update_length
from .logs import EventLog
from .rules import (
    Condition,
    Model,
    Rule,
    RuleError,
    UpdateRule,
    build_rule,
    condition_fires,
    predicted_values,
    pretty_rule,
    would_close_cycle,
)
from .scoring import ScoreBreakdown, ScoringContext, total_score

#: Largest generated category set; bigger sets rarely beat the fallback code.
MAX_SET_SIZE = 8


@dataclass(frozen=True)
class SearchConfig:
    n_conditions: int = 50
    n_updates: int = 1
    max_iterations: int | None = None
    seed: int = 0
    workers: int = 1
    use_estimate_pruning: bool = True
    codec: CodecConfig = field(default_factory=CodecConfig)


@dataclass(frozen=True)
class Candidate:
    """A candidate rule with its condition support and optimistic gain.

    ``gain`` is the estimated saving in bits from adding the rule: covered
    fallback cost minus the estimated value-stream cost minus the rule's own
    encoding cost. The estimated total after adding the rule is the current
    score minus the gain.
    """

    rule: Rule
    support: int
    gain: float

    def sort_key(self) -> tuple:
        return (-self.gain, self.rule.key())


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    variable: str
    rule: str
    total_bits: float


@dataclass(frozen=True)
class MiningResult:
    model: Model
    breakdown: ScoreBreakdown
    iterations: tuple[IterationRecord, ...]
    runtime_seconds: float


def estimate_value_stream(
    values: Iterable, freq: Mapping, support: int
) -> float:
    """Estimated value-stream bits for covering ``support`` events with a
    prediction set, filling cheap (frequent) values first.

    Walks the predicted values by increasing frequency, covering
    min(remaining, freq) events with each value's code.
    """
    values = list(values)
    total = sum(freq.get(j, 0) for j in values)
    if total <= 0 or support <= 0 or len(values) <= 1:
        return 0.0
    bits = 0.0
    remaining = support
    for j in sorted(values, key=lambda j: (freq.get(j, 0), str(j))):
        if remaining <= 0:
            break
        fj = freq.get(j, 0)
        if fj <= 0:
            continue
        step = min(remaining, fj)
        bits += -step * math.log2(fj / total)
        remaining -= step
    return bits


def _estimate_values(ctx: ScoringContext, rule: Rule, covered: list[int]) -> tuple:
    """Value collection fed to the stream estimate.

    Point-like updates predict a singleton per event and cost nothing when
    right; interval and set updates use their (first observed) predicted set.
    """
    kind = rule.update.kind
    if kind in ("point", "rel_point", "mul"):
        return ()
    if kind in ("set", "interval"):
        return tuple(predicted_values(rule.update, None, ctx.schema_by_name))
    for e in covered:
        prev, _ = ctx.events[e]
        predicted = predicted_values(rule.update, prev, ctx.schema_by_name)
        if predicted:
            return tuple(predicted)
    return ()


def candidate_gain(ctx: ScoringContext, rule: Rule, support: int, covered: list[int]) -> float:
    """Optimistic bits saved by adding ``rule`` as the only rule on its target."""
    variable = rule.update.variable
    covered_cost = support * ctx.mean_fallback[variable]
    est_values = _estimate_values(ctx, rule, covered)
    stream_cost = estimate_value_stream(est_values, ctx.freq.of(variable), support)
    rule_cost = condition_length(
        rule.condition, ctx.schema_by_name, ctx.config
    ) + update_length(rule.update, ctx.schema_by_name, ctx.config)
    return covered_cost - stream_cost - rule_cost


def estimate_total(
    log: EventLog, model: Model, rule: Rule, config: SearchConfig = SearchConfig()
) -> float:
    """Estimated L(D, M + rule): the exact current score minus the rule's
    optimistic gain; used only for ordering and early stopping."""
    ctx = ScoringContext(log, config.codec)
    covered = [
        e
        for e in range(ctx.n_events)
        if _fires_at(ctx, rule.condition, e)
    ]
    base = total_score(log, model, config.codec).total
    return base - candidate_gain(ctx, rule, len(covered), covered)


def _fires_at(ctx: ScoringContext, condition: Condition, e: int) -> bool:
    prev, cur = ctx.events[e]
    return condition_fires(condition, prev, cur)


def _rounded(value, precision: int):
    return round_significant(float(value), precision) if isinstance(value, (int, float)) else value


def generate_conditions(ctx: ScoringContext, n_c: int, precision: int = 3) -> list[Condition]:
    """Most frequent (variable, constants) combinations per operator.

    Equality-style operators rank raw values by occurrence count; ordered
    comparisons put thresholds on histogram boundaries ranked by how evenly
    they split the variable; transitions rank consecutive value pairs.
    """
    conditions: list[Condition] = []
    seen: set[tuple] = set()

    def emit(ranked: list[tuple], operator: str) -> None:
        taken = 0
        for entry in ranked:
            if taken >= n_c:
                break
            variable, constants = entry
            consts = tuple(_rounded(c, precision) for c in constants)
            key = (variable, operator, consts)
            if key in seen:
                continue
            seen.add(key)
            conditions.append(Condition(variable, operator, consts))
            taken += 1

    value_counts: Counter = Counter()
    transition_counts: Counter = Counter()
    for name in ctx.names:
        for (prev, cur) in ctx.events:
            raw = cur.values.get(name)
            if raw is not None:
                value_counts[(name, raw)] += 1
            if prev is not None:
                prev_raw = prev.values.get(name)
                if prev_raw is not None and raw is not None:
                    transition_counts[(name, (prev_raw, raw))] += 1

    by_count = sorted(
        value_counts.items(), key=lambda kv: (-kv[1], kv[0][0], str(kv[0][1]))
    )
    singles = [(name, (value,)) for (name, value), _ in by_count]
    emit(singles, "=")
    emit(singles, "!=")

    # thresholds live on histogram boundaries; a boundary is a candidate for
    # the operator whose satisfying side is the tighter (smaller) one and is
    # ranked by how many events that side holds
    low_side: list[tuple[int, str, float]] = []
    high_side: list[tuple[int, str, float]] = []
    for name in ctx.names:
        var = ctx.schema_by_name[name]
        if not var.is_numerical:
            continue
        values = sorted(
            float(cur.values[name]) for _, cur in ctx.events if name in cur.values
        )
        n = len(values)
        for boundary in var.histogram.boundaries:
            at_most = bisect_right(values, boundary)
            at_least = n - bisect_left(values, boundary)
            if 2 * at_most <= n:
                low_side.append((at_most, name, boundary))
            if 2 * at_least <= n:
                high_side.append((at_least, name, boundary))
    low_side.sort(key=lambda t: (-t[0], t[1], t[2]))
    high_side.sort(key=lambda t: (-t[0], t[1], t[2]))
    emit([(name, (b,)) for _, name, b in low_side], "<=")
    emit([(name, (b,)) for _, name, b in high_side], ">=")

    transitions = sorted(
        transition_counts.items(),
        key=lambda kv: (-kv[1], kv[0][0], str(kv[0][1][0]), str(kv[0][1][1])),
    )
    emit([(name, pair) for (name, pair), _ in transitions], "->")
    return conditions


def _trimmed(values: list[float], lo_pct: float, hi_pct: float) -> tuple[float, float]:
    ordered = sorted(values)
    n = len(ordered)
    lo = ordered[max(0, math.ceil(lo_pct * n / 100) - 1)] if lo_pct > 0 else ordered[0]
    hi = ordered[max(0, math.ceil(hi_pct * n / 100) - 1)]
    return lo, hi


def generate_updates(
    ctx: ScoringContext, condition: Condition, n_u: int, precision: int = 3
) -> list[Rule]:
    """Candidate rules for one condition: per target variable and update
    kind, the ``n_u`` most frequent value shapes among covered events."""
    covered = [e for e in range(ctx.n_events) if _fires_at(ctx, condition, e)]
    if not covered:
        raise ValueError("condition has zero support")
    rules: list[Rule] = []
    seen: set[tuple] = set()

    def emit(update: UpdateRule) -> None:
        try:
            rule = build_rule(condition, update, precision)
        except RuleError:
            return
        key = rule.key()
        if key not in seen:
            seen.add(key)
            rules.append(rule)

    for name in ctx.names:
        if name == condition.variable:
            continue
        var = ctx.schema_by_name[name]
        counts: Counter = Counter()
        raws: list[float] = []
        deltas: Counter = Counter()
        delta_values: list[float] = []
        ratios: Counter = Counter()
        for e in covered:
            prev, cur = ctx.events[e]
            raw = cur.values.get(name)
            if raw is None:
                continue
            counts[raw] += 1
            if var.is_numerical:
                raws.append(float(raw))
                prev_raw = prev.values.get(name) if prev is not None else None
                if prev_raw is not None:
                    delta = float(raw) - float(prev_raw)
                    deltas[delta] += 1
                    delta_values.append(delta)
                    if float(prev_raw) != 0.0:
                        ratios[float(raw) / float(prev_raw)] += 1
        if not counts:
            continue
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], str(kv[0])))
        if var.is_numerical:
            for value, _ in ranked[:n_u]:
                emit(UpdateRule(name, "point", (value,)))
            # the covered range is percentile-trimmed: a full min..max range
            # degenerates into a free contrapositive of whatever produced
            # the covered events and crowds out genuine structure
            lo, hi = _trimmed(raws, 5, 95)
            if lo < hi:
                emit(UpdateRule(name, "interval", (lo, hi)))
            for delta, _ in sorted(deltas.items(), key=lambda kv: (-kv[1], kv[0]))[:n_u]:
                emit(UpdateRule(name, "rel_point", (delta,)))
            if delta_values:
                lo, hi = _trimmed(delta_values, 5, 95)
                emit(UpdateRule(name, "rel_interval", (lo, hi)))
            for ratio, _ in sorted(ratios.items(), key=lambda kv: (-kv[1], kv[0]))[:n_u]:
                emit(UpdateRule(name, "mul", (ratio,)))
        else:
            for value, _ in ranked[:n_u]:
                emit(UpdateRule(name, "set", (value,)))
            prefixes = []
            for size in range(2, min(MAX_SET_SIZE, len(ranked)) + 1):
                members = tuple(v for v, _ in ranked[:size])
                prefixes.append((sum(c for _, c in ranked[:size]), size, members))
            prefixes.sort(key=lambda p: (-p[0], p[1]))
            for _, _, members in prefixes[:n_u]:
                emit(UpdateRule(name, "set", members))
    return rules


def generate_candidates(
    ctx: ScoringContext, config: SearchConfig
) -> dict[str, list[Candidate]]:
    """All candidates grouped by target variable, sorted most promising first."""
    by_var: dict[str, list[Candidate]] = {name: [] for name in ctx.names}
    seen: set[tuple] = set()
    for condition in generate_conditions(ctx, config.n_conditions, config.codec.precision):
        covered = [e for e in range(ctx.n_events) if _fires_at(ctx, condition, e)]
        if not covered:
            continue
        for rule in generate_updates(ctx, condition, config.n_updates, config.codec.precision):
            key = rule.key()
            if key in seen:
                continue
            seen.add(key)
            gain = candidate_gain(ctx, rule, len(covered), covered)
            by_var[rule.update.variable].append(Candidate(rule, len(covered), gain))
    for name in by_var:
        by_var[name].sort(key=Candidate.sort_key)
    return by_var


class _Evaluator:
    """Scores L(D, M + candidate) by re-scoring only the target variable."""

    def __init__(self, ctx: ScoringContext):
        self.ctx = ctx
        # per variable: rule data (rule, fires, predicted) kept in key order
        self.rule_data: dict[str, list] = {name: [] for name in ctx.names}
        self.stats = {
            name: ctx.variable_stats(name, []) for name in ctx.names
        }
        self.firing_cache: dict[tuple, tuple] = {}

    def score(self, model: Model) -> ScoreBreakdown:
        return self.ctx.combine(model, self.stats)

    def _entry(self, rule: Rule):
        key = rule.key()
        if key not in self.firing_cache:
            fires, predicted = self.ctx.rule_firing(rule)
            self.firing_cache[key] = (rule, fires, predicted)
        return self.firing_cache[key]

    def try_candidate(self, model: Model, candidate: Candidate):
        rule = candidate.rule
        variable = rule.update.variable
        trial_data = list(self.rule_data[variable])
        insort(trial_data, self._entry(rule), key=lambda rd: rd[0].key())
        vstats = self.ctx.variable_stats(variable, trial_data)
        trial_model = model.extend(rule)
        breakdown = self.ctx.combine(
            trial_model, {**self.stats, variable: vstats}
        )
        return breakdown, vstats

    def accept(self, rule: Rule, vstats) -> None:
        variable = rule.update.variable
        insort(self.rule_data[variable], self._entry(rule), key=lambda rd: rd[0].key())
        self.stats[variable] = vstats


def mine(log: EventLog, config: SearchConfig = SearchConfig()) -> MiningResult:
    """Greedy search for the acyclic rule model minimizing the total score.

    Starting from the empty model, repeatedly scans every target variable's
    candidate queue in order of estimated score, computes exact scores until
    the next estimate is no better than the best exact score seen, and adds
    the best rule if it strictly improves the total. Stops when a full pass
    adds nothing. Results are independent of the worker count: batches are
    evaluated in parallel but consumed in queue order.
    """
    start = time.perf_counter()
    ctx = ScoringContext(log, config.codec)
    candidates = generate_candidates(ctx, config)
    evaluator = _Evaluator(ctx)
    model = Model.empty()
    current = evaluator.score(model)
    iterations: list[IterationRecord] = []
    in_model: set[tuple] = set()
    workers = max(1, config.workers)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def evaluate(batch: list[Candidate], snapshot: Model):
        def run(cand: Candidate):
            if cand.rule.key() in in_model or would_close_cycle(
                snapshot, cand.rule.condition.variable, cand.rule.update.variable
            ):
                return None
            return evaluator.try_candidate(snapshot, cand)

        if pool is None:
            return [run(c) for c in batch]
        return list(pool.map(run, batch))

    try:
        iteration = 0
        extended = True
        while extended:
            iteration += 1
            if config.max_iterations is not None and iteration > config.max_iterations:
                break
            extended = False
            for variable in ctx.names:
                queue = candidates.get(variable, [])
                best: tuple[float, tuple] | None = None
                best_candidate = None
                best_result = None
                idx = 0
                while idx < len(queue):
                    best_total = best[0] if best is not None else current.total
                    if (
                        config.use_estimate_pruning
                        and current.total - queue[idx].gain >= best_total
                    ):
                        break
                    batch = queue[idx : idx + workers]
                    results = evaluate(batch, model)
                    stop = False
                    for cand, result in zip(batch, results):
                        best_total = best[0] if best is not None else current.total
                        if (
                            config.use_estimate_pruning
                            and current.total - cand.gain >= best_total
                        ):
                            stop = True
                            break
                        idx += 1
                        if result is None:
                            continue
                        breakdown, vstats = result
                        contender = (breakdown.total, cand.rule.key())
                        if best is None or contender < best:
                            best = contender
                            best_candidate = cand
                            best_result = (breakdown, vstats)
                    if stop:
                        break
                if best_candidate is not None and best[0] < current.total:
                    breakdown, vstats = best_result
                    model = model.extend(best_candidate.rule)
                    evaluator.accept(best_candidate.rule, vstats)
                    in_model.add(best_candidate.rule.key())
                    current = breakdown
                    extended = True
                    iterations.append(
                        IterationRecord(
                            iteration,
                            variable,
                            pretty_rule(best_candidate.rule),
                            breakdown.total,
                        )
                    )
    finally:
        if pool is not None:
            pool.shutdown()

    final = total_score(log, model, config.codec)
    return MiningResult(model, final, tuple(iterations), time.perf_counter() - start)
