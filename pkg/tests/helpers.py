"""Shared generators for property-style tests."""
from __future__ import annotations

import random

from modrules.logs import EventLog, build_log
from modrules.rules import Condition, Model, Rule, RuleError, UpdateRule, build_rule

CATEGORIES = ("red", "green", "blue", "gold")


def random_log(rng: random.Random, n_cat=2, n_num=2, traces=6, max_len=8, bins=8) -> EventLog:
    kinds = {f"c{i}": "categorical" for i in range(n_cat)}
    kinds.update({f"n{i}": "numerical" for i in range(n_num)})
    rows = []
    for t in range(traces):
        events = []
        for _ in range(rng.randint(1, max_len)):
            values = {}
            for name, kind in kinds.items():
                if kind == "categorical":
                    values[name] = rng.choice(CATEGORIES)
                elif rng.random() < 0.9:  # sprinkle missing numericals
                    values[name] = round(rng.uniform(-5.0, 5.0), 2)
            events.append(values)
        rows.append((f"t{t}", events))
    return build_log(rows, kinds, bins)


def random_model(rng: random.Random, log: EventLog, max_rules=4) -> Model:
    by_name = log.schema_by_name()
    names = list(log.variable_names())
    rules: list[Rule] = []
    for _ in range(200):
        if len(rules) >= max_rules:
            break
        cond_var, upd_var = rng.sample(names, 2)
        cond_schema, upd_schema = by_name[cond_var], by_name[upd_var]
        if cond_schema.is_numerical:
            op = rng.choice(("=", "!=", "<=", ">=", "->"))
            consts = (
                (rng.uniform(-5, 5), rng.uniform(-5, 5))
                if op == "->"
                else (rng.uniform(-5, 5),)
            )
        else:
            op = rng.choice(("=", "!=", "->"))
            consts = (
                (rng.choice(CATEGORIES), rng.choice(CATEGORIES))
                if op == "->"
                else (rng.choice(CATEGORIES),)
            )
        condition = Condition(cond_var, op, consts)
        if upd_schema.is_numerical:
            kind = rng.choice(("point", "interval", "rel_point", "rel_interval", "mul"))
            if kind in ("interval", "rel_interval"):
                consts = tuple(sorted((rng.uniform(-6, 6), rng.uniform(-6, 6))))
            else:
                consts = (rng.uniform(-3, 3),)
            update = UpdateRule(upd_var, kind, consts)
        else:
            size = rng.randint(1, 3)
            update = UpdateRule(upd_var, "set", tuple(sorted(rng.sample(CATEGORIES, size))))
        try:
            candidate = build_rule(condition, update)
            rules = list(Model.of(rules + [candidate]).rules)
        except RuleError:
            continue
    return Model.of(rules)
