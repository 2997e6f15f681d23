"""Synthetic ground-truth models, log generation, and swap noise.

The generation protocol (trace lengths, base value distributions) is fixed
here and controlled entirely by SynthConfig so experiments can be re-run
under different choices. Base categorical values follow a fixed random
multinomial per variable; base numerical values are uniform over a fixed
range. Because the numerical base is continuous, sampled ground-truth
models put equality and transition conditions on categorical variables and
ordered comparisons on numerical ones.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .logs import DEFAULT_BINS, MISSING, EventLog, Trace, Event, build_log
from .rules import (
    Condition,
    Model,
    RuleError,
    UpdateRule,
    build_rule,
    condition_fires,
    decode_order,
)

_SAMPLE_RETRIES = 200


class SynthError(ValueError):
    """Raised for infeasible generator configurations."""


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_rules: int = 5
    n_cat: int = 2
    n_num: int = 2
    n_events: int = 2000
    condition_ops: tuple[str, ...] = ("=", "<=", ">=")
    trace_len: tuple[int, int] = (5, 15)
    cat_domain_size: int = 5
    target_kind: str = "mixed"  # mixed | categorical | numerical
    num_range: tuple[float, float] = (0.0, 100.0)
    precision: int = 3

    def __post_init__(self) -> None:
        if self.n_rules < 1:
            raise SynthError("need at least one rule")
        if self.trace_len[0] < 2:
            raise SynthError("traces need at least two events for transitions")
        if self.target_kind not in ("mixed", "categorical", "numerical"):
            raise SynthError(f"unknown target kind {self.target_kind!r}")

    def cat_variables(self) -> list[str]:
        return [f"cat_{i}" for i in range(self.n_cat)]

    def num_variables(self) -> list[str]:
        return [f"num_{i}" for i in range(self.n_num)]

    def domain(self) -> list[str]:
        return [f"v{i}" for i in range(self.cat_domain_size)]


def _target_kinds(config: SynthConfig) -> list[str]:
    if config.target_kind == "categorical":
        return ["categorical"] * config.n_rules
    if config.target_kind == "numerical":
        return ["numerical"] * config.n_rules
    # alternate so mixed models exercise both kinds
    return ["categorical" if i % 2 == 0 else "numerical" for i in range(config.n_rules)]


def _sample_condition(rng: random.Random, config: SynthConfig, variables: list[str]) -> Condition:
    """Pick an operator (with a variable of the kind it makes sense on) and
    a constant from the base distribution's support.

    Ordered comparisons go on numerical variables with thresholds in the
    middle half of the range, where a frequency-ranked candidate search can
    still see them; equality, inequality and transitions go on categorical
    variables, where point masses exist.
    """
    cats = [v for v in variables if v.startswith("cat_")]
    nums = [v for v in variables if v.startswith("num_")]
    feasible = [
        op
        for op in sorted(config.condition_ops)
        if (op in ("<=", ">=") and nums) or (op in ("=", "!=", "->") and cats)
    ]
    if not feasible:
        raise SynthError("no feasible condition operator for the variable kinds")
    op = rng.choice(feasible)
    if op in ("<=", ">="):
        lo, hi = config.num_range
        span = hi - lo
        # roughly 15-27% coverage: broad enough to matter, narrow enough
        # that the base default stays the majority outside the rule regions
        if op == "<=":
            threshold = rng.uniform(lo + 0.15 * span, lo + 0.27 * span)
        else:
            threshold = rng.uniform(lo + 0.73 * span, lo + 0.85 * span)
        return Condition(rng.choice(nums), op, (threshold,))
    domain = config.domain()
    if op == "->":
        return Condition(rng.choice(cats), "->", (rng.choice(domain), rng.choice(domain)))
    # equality on the default token would cover most of the log and let the
    # condition value eclipse the default; test the informative tokens
    variable = rng.choice(cats)
    pool = [t for t in domain if t != _dominant_token(config, variable)] or domain
    return Condition(variable, op, (rng.choice(pool),))


def _dominant_token(config: SynthConfig, variable: str) -> str:
    """The default category a variable falls back to when no rule fires.

    Derived from the seed alone so model sampling and log generation agree
    on it without sharing state.
    """
    return random.Random(f"{config.seed}:dominant:{variable}").choice(config.domain())


def _sample_update(
    rng: random.Random,
    config: SynthConfig,
    variable: str,
    taken_values: set[str] | None = None,
) -> UpdateRule:
    if variable.startswith("cat_"):
        # mostly functional assignments of non-default values: a rule that
        # restates the base default carries no signal, and value sets would
        # drown the per-class prediction signal if they dominated
        size = 2 if rng.random() < 0.0625 else 1
        pool = [v for v in config.domain() if v != _dominant_token(config, variable)]
        if taken_values is not None:
            fresh = [v for v in pool if v not in taken_values]
            if len(fresh) >= size:
                pool = fresh
        if len(pool) < size:
            pool = config.domain()
        values = tuple(sorted(rng.sample(pool, size)))
        if taken_values is not None:
            taken_values.update(values)
        return UpdateRule(variable, "set", values)
    lo, hi = config.num_range
    kind = rng.choice(("point", "point", "interval", "rel_point", "rel_interval", "mul"))
    if kind == "point":
        return UpdateRule(variable, "point", (rng.uniform(lo, hi),))
    if kind == "interval":
        a, b = sorted((rng.uniform(lo, hi), rng.uniform(lo, hi)))
        return UpdateRule(variable, "interval", (a, b))
    if kind == "rel_point":
        return UpdateRule(variable, "rel_point", (rng.uniform(-20.0, 20.0),))
    if kind == "rel_interval":
        a, b = sorted((rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0)))
        return UpdateRule(variable, "rel_interval", (a, b))
    return UpdateRule(variable, "mul", (rng.choice((0.5, 1.5, 2.0, 3.0)),))


def sample_ground_truth(config: SynthConfig) -> Model:
    """Draw an acyclic model of ``n_rules`` distinct rules in the configured
    language; rejection-samples until acyclicity and distinctness hold."""
    cats, nums = config.cat_variables(), config.num_variables()
    all_vars = cats + nums
    kinds = _target_kinds(config)
    if "categorical" in kinds and not cats:
        raise SynthError("categorical targets requested but n_cat is 0")
    if "numerical" in kinds and not nums:
        raise SynthError("numerical targets requested but n_num is 0")
    if len(all_vars) < 2:
        raise SynthError("need at least two variables")
    # an acyclic dependency graph needs a source: at least one variable must
    # stay untargeted, otherwise every node has an incoming edge and a cycle
    # is unavoidable
    cat_pool, num_pool = list(cats), list(nums)
    if set(kinds) == {"categorical", "numerical"}:
        if len(nums) >= 2:
            num_pool = nums[:-1]
        elif len(cats) >= 2:
            cat_pool = cats[:-1]
        else:
            raise SynthError("mixed targets need a third variable to stay acyclic")
    elif set(kinds) == {"categorical"} and not nums:
        if len(cats) < 2:
            raise SynthError("categorical targets need a second variable to stay acyclic")
        cat_pool = cats[:-1]
    elif set(kinds) == {"numerical"} and not cats:
        if len(nums) < 2:
            raise SynthError("numerical targets need a second variable to stay acyclic")
        num_pool = nums[:-1]
    rng = random.Random(f"{config.seed}:model")
    for _ in range(_SAMPLE_RETRIES):
        try:
            rules: list = []
            edges: set[tuple[str, str]] = set()
            conditions_used: set[tuple] = set()
            values_taken: dict[str, set[str]] = {}
            counters = {"categorical": 0, "numerical": 0}
            targets = []
            for kind in kinds:
                pool = cat_pool if kind == "categorical" else num_pool
                targets.append(pool[counters[kind] % len(pool)])
                counters[kind] += 1
            # sampling order matters: the variable whose rule is drawn last
            # is the most likely to be boxed in by the accumulated edges
            rng.shuffle(targets)
            for target in targets:
                others = [v for v in all_vars if v != target]
                # reject conditions whose dependency edge would close a
                # cycle, and prefer distinct conditions so rules govern
                # distinct event regions instead of shadowing one another
                condition = None
                for attempt in range(40):
                    proposal = _sample_condition(rng, config, others)
                    if _reachable(edges, target, proposal.variable):
                        continue
                    if proposal.operator in ("<=", ">="):
                        cond_key = (proposal.variable, proposal.operator)
                    else:
                        cond_key = (proposal.variable, proposal.operator, proposal.constants)
                    if cond_key in conditions_used and attempt < 20:
                        continue
                    conditions_used.add(cond_key)
                    condition = proposal
                    break
                if condition is None:
                    raise SynthError("no acyclic condition found for a rule")
                update = _sample_update(
                    rng, config, target, values_taken.setdefault(target, set())
                )
                rules.append(build_rule(condition, update, config.precision))
                edges.add((condition.variable, target))
            return Model.of(rules)
        except (RuleError, SynthError) as exc:
            failure = exc
    raise SynthError(
        f"could not sample an acyclic model of {config.n_rules} distinct rules "
        f"(last failure: {failure})"
    )


def _reachable(edges: set[tuple[str, str]], src: str, dst: str) -> bool:
    """Whether ``dst`` is reachable from ``src`` along the given edges."""
    stack = [src]
    seen = set()
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(b for a, b in edges if a == node)
    return False


def _apply_update(rng: random.Random, update: UpdateRule, prev_value):
    kind = update.kind
    c = update.constants
    if kind == "set":
        return rng.choice(sorted(c))
    if kind == "point":
        return float(c[0])
    if kind == "interval":
        return rng.uniform(float(c[0]), float(c[1]))
    if kind == "rel_point":
        return prev_value + float(c[0])
    if kind == "rel_interval":
        return prev_value + rng.uniform(float(c[0]), float(c[1]))
    return float(c[0]) * prev_value


def generate_log(ground_truth: Model, config: SynthConfig, bins: int = DEFAULT_BINS) -> EventLog:
    """Sample traces until the event budget is reached.

    Per event, variables are filled in the model's dependency order: where a
    rule fires the target value follows the update (first firing rule in
    canonical order wins), otherwise the variable's base distribution is
    drawn. Deterministic for a given config.
    """
    rng = random.Random(f"{config.seed}:log")
    cats, nums = config.cat_variables(), config.num_variables()
    names = cats + nums
    kinds = {v: "categorical" for v in cats}
    kinds.update({v: "numerical" for v in nums})
    domain = config.domain()
    lo, hi = config.num_range
    # concentrated base: each categorical variable has a dominant default
    # token that rules override in the regions they govern
    weights = {
        v: [6.0 if token == _dominant_token(config, v) else 1.0 for token in domain]
        for v in cats
    }
    order = decode_order(ground_truth, names)
    rules_by_var = {v: ground_truth.rules_for(v) for v in names}

    traces: list[tuple[str, list[dict[str, object]]]] = []
    total = 0
    while total < config.n_events:
        length = rng.randint(*config.trace_len)
        events: list[dict[str, object]] = []
        prev: Event | None = None
        for _ in range(length):
            values: dict[str, object] = {}
            cur = Event(values)
            for variable in order:
                drawn = None
                for rule in rules_by_var[variable]:
                    if not condition_fires(rule.condition, prev, cur):
                        continue
                    if rule.update.kind in ("rel_point", "rel_interval", "mul"):
                        prev_value = prev.values.get(variable) if prev else None
                        if prev_value is None:
                            continue
                        drawn = _apply_update(rng, rule.update, float(prev_value))
                    else:
                        drawn = _apply_update(rng, rule.update, None)
                    break
                if drawn is None:
                    if variable in weights:
                        drawn = rng.choices(domain, weights[variable])[0]
                    else:
                        drawn = rng.uniform(lo, hi)
                values[variable] = drawn
            events.append(values)
            prev = cur
        traces.append((f"t{len(traces)}", events))
        total += length
    return build_log(traces, kinds, bins)


def add_swap_noise(log: EventLog, q: float, seed: int) -> EventLog:
    """Per variable, rotate the values of a random ceil(q*n) sample of event
    positions, leaving every per-variable value multiset intact."""
    if not 0.0 <= q <= 1.0:
        raise SynthError(f"noise fraction must be in [0, 1], got {q}")
    rng = random.Random(f"{seed}:noise")
    cells: list[list[dict[str, object]]] = [
        [dict(e.values) for e in t.events] for t in log.traces
    ]
    for var in log.variable_names():
        positions = [
            (ti, ei)
            for ti, trace in enumerate(cells)
            for ei, values in enumerate(trace)
            if values.get(var) is not None and values.get(var) != MISSING
        ]
        k = math.ceil(q * len(positions))
        if k < 2:
            continue
        chosen = sorted(rng.sample(range(len(positions)), k))
        offset = rng.randrange(1, k)
        originals = [cells[positions[i][0]][positions[i][1]][var] for i in chosen]
        for slot, i in enumerate(chosen):
            ti, ei = positions[i]
            cells[ti][ei][var] = originals[(slot + offset) % k]
    traces = tuple(
        Trace(t.id, tuple(Event(values) for values in cells[ti]))
        for ti, t in enumerate(log.traces)
    )
    return EventLog(log.schema, traces)
