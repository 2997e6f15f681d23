"""The rule language: conditions, update rules, acyclic rule models.

A rule is IF <condition> THEN <update>. Conditions test one variable with
one of =, !=, <=, >=, or a previous-to-current transition ->. Updates set
the target variable to a category set, a point value, an interval, a shift,
a shifted interval, or a multiple of its previous value.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

from .codec import round_significant
from .logs import Event, VariableSchema

OPERATORS = ("=", "!=", "<=", ">=", "->")
UPDATE_KINDS = ("set", "point", "interval", "rel_point", "rel_interval", "mul")

#: Update kinds whose prediction depends on the target's previous value.
RELATIVE_KINDS = ("rel_point", "rel_interval", "mul")


class RuleError(ValueError):
    """Raised on malformed rules or models."""


@dataclass(frozen=True)
class Condition:
    variable: str
    operator: str
    constants: tuple

    def __post_init__(self) -> None:
        if self.operator not in OPERATORS:
            raise RuleError(f"unknown operator {self.operator!r}")
        expected = 2 if self.operator == "->" else 1
        if len(self.constants) != expected:
            raise RuleError(
                f"operator {self.operator!r} takes {expected} constant(s), "
                f"got {len(self.constants)}"
            )


@dataclass(frozen=True)
class UpdateRule:
    variable: str
    kind: str
    constants: tuple

    def __post_init__(self) -> None:
        if self.kind not in UPDATE_KINDS:
            raise RuleError(f"unknown update kind {self.kind!r}")
        n = len(self.constants)
        if self.kind == "set":
            if n == 0:
                raise RuleError("set update needs at least one value")
            if len(set(self.constants)) != n:
                raise RuleError("set update values must be distinct")
        elif self.kind in ("interval", "rel_interval"):
            if n != 2:
                raise RuleError(f"{self.kind} update takes two constants")
            if self.constants[0] > self.constants[1]:
                raise RuleError(f"{self.kind} bounds must be ordered")
        elif n != 1:
            raise RuleError(f"{self.kind} update takes one constant")


@dataclass(frozen=True)
class Rule:
    condition: Condition
    update: UpdateRule

    def __post_init__(self) -> None:
        if self.condition.variable == self.update.variable:
            raise RuleError("a rule may not update its own condition variable")

    def key(self) -> tuple:
        """Deterministic ordering key: target, condition variable, operator,
        update kind, then all constants as strings."""
        consts = tuple(_const_str(c) for c in self.condition.constants) + tuple(
            _const_str(c) for c in self.update.constants
        )
        return (
            self.update.variable,
            self.condition.variable,
            OPERATORS.index(self.condition.operator),
            UPDATE_KINDS.index(self.update.kind),
            consts,
        )


def _const_str(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def _normalize_constant(value, precision: int):
    if isinstance(value, bool):
        raise RuleError("boolean constants are not supported")
    if isinstance(value, (int, float)):
        return round_significant(float(value), precision)
    return str(value)


def build_rule(condition: Condition, update: UpdateRule, precision: int = 3) -> Rule:
    """Normalize and assemble a rule.

    Numeric constants are rounded to ``precision`` significant digits, set
    values are sorted, and a single-value point update on a categorical
    target is canonicalized to a singleton set.
    """
    cond = Condition(
        condition.variable,
        condition.operator,
        tuple(_normalize_constant(c, precision) for c in condition.constants),
    )
    kind = update.kind
    constants = tuple(_normalize_constant(c, precision) for c in update.constants)
    if kind == "point" and constants and isinstance(constants[0], str):
        kind = "set"
    if kind == "set":
        constants = tuple(sorted(str(c) for c in constants))
    upd = UpdateRule(update.variable, kind, constants)
    return Rule(cond, upd)


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]


@dataclass(frozen=True)
class Model:
    """An unordered rule set, stored sorted by rule key for reproducibility."""

    rules: tuple[Rule, ...]

    @staticmethod
    def of(rules: Iterable[Rule]) -> "Model":
        ordered = tuple(sorted(rules, key=Rule.key))
        for a, b in zip(ordered, ordered[1:]):
            if a == b:
                raise RuleError(f"duplicate rule {pretty_rule(a)!r}")
        model = Model(ordered)
        ok, _ = is_acyclic(dependency_graph(model))
        if not ok:
            raise RuleError("model dependency graph has a cycle")
        return model

    @staticmethod
    def empty() -> "Model":
        return Model(())

    def extend(self, rule: Rule) -> "Model":
        return Model.of(self.rules + (rule,))

    def rules_for(self, variable: str) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.update.variable == variable)

    def __len__(self) -> int:
        return len(self.rules)


def condition_fires(condition: Condition, prev: Event | None, cur: Event) -> bool:
    """Whether the condition holds at an event.

    Comparisons read the current event; transitions compare the previous
    event's value to the current one and never fire on a trace's first
    event. A missing numerical value fails every test.
    """
    op = condition.operator
    value = cur.get(condition.variable)
    if op == "->":
        if prev is None:
            return False
        return (
            prev.get(condition.variable) == condition.constants[0]
            and value == condition.constants[1]
        )
    if value is None:
        return False
    alpha = condition.constants[0]
    if op == "=":
        return value == alpha
    if op == "!=":
        return value != alpha
    if not isinstance(value, (int, float)):
        raise RuleError(
            f"operator {op!r} needs a numerical value for {condition.variable!r}"
        )
    return value <= alpha if op == "<=" else value >= alpha


def predicted_values(
    update: UpdateRule,
    prev: Event | None,
    schema_by_name: Mapping[str, VariableSchema],
) -> frozenset:
    """Concrete values an update predicts: category tokens, or bin indices.

    Relative updates are anchored at the bin representative of the target's
    previous value, so a decoder working at bin granularity reproduces the
    same prediction; without a previous value they predict nothing and the
    rule cannot fire for encoding purposes.
    """
    var = schema_by_name[update.variable]
    if update.kind == "set":
        return frozenset(update.constants)
    h = var.histogram
    if update.kind == "point":
        return frozenset((h.index(float(update.constants[0])),))
    if update.kind == "interval":
        lo, hi = update.constants
        return frozenset(h.overlapping(float(lo), float(hi)))
    raw = prev.get(update.variable) if prev is not None else None
    if raw is None:
        return frozenset()
    base = h.representative(h.index(float(raw)))
    if update.kind == "rel_point":
        return frozenset((h.index(base + float(update.constants[0])),))
    if update.kind == "rel_interval":
        lo, hi = update.constants
        return frozenset(h.overlapping(base + float(lo), base + float(hi)))
    return frozenset((h.index(float(update.constants[0]) * base),))


def dependency_graph(model: Model) -> DependencyGraph:
    """Directed variable graph: one edge per distinct (condition, target) pair."""
    nodes: list[str] = []
    edges = set()
    for rule in model.rules:
        for name in (rule.condition.variable, rule.update.variable):
            if name not in nodes:
                nodes.append(name)
        edges.add((rule.condition.variable, rule.update.variable))
    return DependencyGraph(tuple(nodes), frozenset(edges))


def is_acyclic(graph: DependencyGraph) -> tuple[bool, tuple[str, ...] | None]:
    """Kahn's algorithm; on success also returns a topological node order."""
    indegree = {n: 0 for n in graph.nodes}
    outgoing: dict[str, list[str]] = {n: [] for n in graph.nodes}
    for src, dst in sorted(graph.edges):
        outgoing[src].append(dst)
        indegree[dst] += 1
    ready = sorted(n for n, d in indegree.items() if d == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in outgoing[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    if len(order) != len(graph.nodes):
        return False, None
    return True, tuple(order)


def decode_order(model: Model, variable_names: Iterable[str]) -> tuple[str, ...]:
    """All variables, topologically sorted by the model's dependencies with
    ties broken by the given schema order."""
    names = list(variable_names)
    rank = {n: i for i, n in enumerate(names)}
    edges = {
        (r.condition.variable, r.update.variable)
        for r in model.rules
        if r.condition.variable in rank and r.update.variable in rank
    }
    indegree = {n: 0 for n in names}
    outgoing: dict[str, list[str]] = {n: [] for n in names}
    for src, dst in edges:
        outgoing[src].append(dst)
        indegree[dst] += 1
    order = []
    remaining = set(names)
    while remaining:
        ready = [n for n in names if n in remaining and indegree[n] == 0]
        if not ready:
            raise RuleError("model dependency graph has a cycle")
        node = ready[0]
        remaining.remove(node)
        order.append(node)
        for nxt in outgoing[node]:
            indegree[nxt] -= 1
    return tuple(order)


def would_close_cycle(model: Model, condition_var: str, update_var: str) -> bool:
    """Whether adding an edge condition_var -> update_var creates a cycle."""
    if condition_var == update_var:
        return True
    outgoing: dict[str, set[str]] = {}
    for rule in model.rules:
        outgoing.setdefault(rule.condition.variable, set()).add(rule.update.variable)
    stack = [update_var]
    seen = set()
    while stack:
        node = stack.pop()
        if node == condition_var:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(outgoing.get(node, ()))
    return False


@lru_cache(maxsize=None)
def _dag_count(n: int, m: int) -> int:
    if n <= 1:
        return 1
    total = 0
    for i in range(1, n + 1):
        sign = -1 if i % 2 == 0 else 1
        choose_i = math.comb(n, i)
        slots = i * (n - i)
        for j in range(0, m + 1):
            if m - j > slots:
                continue
            total += sign * choose_i * math.comb(slots, m - j) * _dag_count(n - i, j)
    return total


def count_dags(nodes: int, max_edges: int) -> int:
    """Number of labeled acyclic digraphs with ``nodes`` nodes and at most
    ``max_edges`` edges, by the inclusion-exclusion recurrence over the set
    of source nodes. Exact integer arithmetic, memoized."""
    if nodes < 1:
        raise RuleError("need at least one node")
    if max_edges < 0:
        raise RuleError("edge bound must be non-negative")
    return _dag_count(nodes, max_edges)


def rule_term_count(model: Model) -> int:
    """Complexity measure: one condition literal plus one update literal per rule."""
    return 2 * len(model.rules)


def model_to_json(model: Model) -> str:
    rules = []
    for rule in model.rules:
        cond: dict[str, object] = {
            "var": rule.condition.variable,
            "op": rule.condition.operator,
            "value": rule.condition.constants[0],
        }
        if rule.condition.operator == "->":
            cond["to"] = rule.condition.constants[1]
        rules.append(
            {
                "if": cond,
                "then": {
                    "var": rule.update.variable,
                    "type": rule.update.kind,
                    "values": list(rule.update.constants),
                },
            }
        )
    return json.dumps({"rules": rules}, indent=2) + "\n"


def model_from_json(text: str, precision: int = 3) -> Model:
    doc = json.loads(text)
    rules = []
    for entry in doc["rules"]:
        cond_doc = entry["if"]
        constants = [cond_doc["value"]]
        if cond_doc["op"] == "->":
            constants.append(cond_doc["to"])
        condition = Condition(cond_doc["var"], cond_doc["op"], tuple(constants))
        then_doc = entry["then"]
        update = UpdateRule(then_doc["var"], then_doc["type"], tuple(then_doc["values"]))
        rules.append(build_rule(condition, update, precision))
    return Model.of(rules)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value) if value != int(value) else str(int(value))
    return str(value)


def pretty_condition(condition: Condition) -> str:
    if condition.operator == "->":
        alpha, beta = condition.constants
        return f"{condition.variable}: {_fmt(alpha)} -> {_fmt(beta)}"
    return f"{condition.variable} {condition.operator} {_fmt(condition.constants[0])}"


def pretty_update(update: UpdateRule) -> str:
    v = update.variable
    c = update.constants
    if update.kind == "set":
        if len(c) == 1:
            return f"{v} = {_fmt(c[0])}"
        return f"{v} in {{{', '.join(_fmt(x) for x in c)}}}"
    if update.kind == "point":
        return f"{v} = {_fmt(c[0])}"
    if update.kind == "interval":
        return f"{v} in [{_fmt(c[0])}, {_fmt(c[1])}]"
    if update.kind == "rel_point":
        return f"{v} = {v} + {_fmt(c[0])}"
    if update.kind == "rel_interval":
        return f"{v} = {v} + [{_fmt(c[0])}, {_fmt(c[1])}]"
    return f"{v} = {_fmt(c[0])} * {v}"


def pretty_rule(rule: Rule) -> str:
    return f"IF {pretty_condition(rule.condition)} THEN {pretty_update(rule.update)}"


def pretty_model(model: Model) -> str:
    if not model.rules:
        return "(empty model)"
    return "\n".join(pretty_rule(r) for r in model.rules)
