import pytest

from modrules.evaluate import (
    FALLBACK,
    PredictionRecord,
    f1_categorical,
    f1_micro,
    metrics,
    per_rule_generalization,
    predict,
    rmse_numerical,
    split_by_traces,
)
from modrules.logs import parse_csv
from modrules.rules import Condition, Model, UpdateRule, build_rule
from modrules.synth import SynthConfig, generate_log, sample_ground_truth

WORKED_CSV = """trace_id,event_index,product,amount,vendor
t1,0,bag,20,C
t1,1,bag,10,C
t1,2,pants,10,A
t1,3,pants,20,A
"""


def worked_model():
    r1 = build_rule(Condition("amount", "=", (10,)), UpdateRule("vendor", "set", ("C",)))
    r2 = build_rule(Condition("product", "=", ("bag",)), UpdateRule("vendor", "set", ("B", "C")))
    return Model.of([r1, r2])


class TestPredict:
    def test_overlapping_rules_pick_most_frequent_pooled_value(self):
        log = parse_csv(WORKED_CSV)
        records = predict(worked_model(), log)
        second_event = [
            r for r in records if r.variable == "vendor" and r.event_index == 1
        ][0]
        assert second_event.predicted == "C"
        assert second_event.rule != FALLBACK

    def test_empty_model_uses_majority_and_mean(self):
        log = parse_csv(WORKED_CSV)
        records = predict(Model.empty(), log)
        by_var = {}
        for r in records:
            by_var.setdefault(r.variable, set()).add(r.predicted)
        assert by_var["vendor"] <= {"A", "C"} and len(by_var["vendor"]) == 1
        assert by_var["amount"] == {15.0}
        assert all(r.rule == FALLBACK for r in records)

    def test_identity_shift_predicts_previous_value_exactly(self):
        text = "trace_id,event_index,flag,x\nt1,0,on,3.25\nt1,1,off,3.25\nt1,2,on,9.5\n"
        log = parse_csv(text)
        rule = build_rule(Condition("flag", "=", ("off",)), UpdateRule("x", "rel_point", (0.0,)))
        records = predict(Model.of([rule]), log)
        covered = [r for r in records if r.variable == "x" and r.rule != FALLBACK]
        assert len(covered) == 1
        assert covered[0].predicted == 3.25

    def test_determinism(self):
        log = parse_csv(WORKED_CSV)
        assert predict(worked_model(), log) == predict(worked_model(), log)


class TestF1AndRmse:
    def _records(self, pairs):
        return [
            PredictionRecord("t", i, "v", actual, predicted, FALLBACK)
            for i, (actual, predicted) in enumerate(pairs)
        ]

    def test_perfect_predictions(self):
        records = self._records([("a", "a"), ("b", "b")])
        assert f1_categorical(records) == 1.0
        assert f1_micro(records) == 1.0
        numeric = self._records([(1.0, 1.0), (2.5, 2.5)])
        assert rmse_numerical(numeric) == 0.0

    def test_majority_on_balanced_two_classes(self):
        records = self._records([("a", "a")] * 5 + [("b", "a")] * 5)
        # class a: precision .5, recall 1; class b: 0
        assert f1_categorical(records) == pytest.approx(1 / 3)
        assert f1_micro(records) == pytest.approx(0.5)

    def test_constant_offset_rmse(self):
        records = self._records([(float(x), float(x) + 2.5) for x in range(10)])
        assert rmse_numerical(records) == pytest.approx(2.5)

    def test_predicted_only_class_counts_against_macro(self):
        records = self._records([("a", "c"), ("a", "a")])
        # class a: F1 2/3; class c never occurs but was predicted: F1 0
        assert f1_categorical(records) == pytest.approx(1 / 3)


class TestMetricsReport:
    def test_empty_model_medians_match_closed_form(self):
        log = parse_csv(WORKED_CSV)
        report = metrics(Model.empty(), log)
        # vendor/product are 50/50 two-token variables: macro F1 of majority = 1/3
        assert report.median_f1 == pytest.approx(1 / 3)
        assert report.median_f1_micro == pytest.approx(0.5)
        assert report.rule_terms == 0
        assert set(report.rmse_per_variable) == {"amount"}

    def test_report_dict_names_both_averagings(self):
        log = parse_csv(WORKED_CSV)
        doc = metrics(worked_model(), log).as_dict()
        assert doc["f1_averaging"] == {
            "f1_per_variable": "macro",
            "f1_micro_per_variable": "micro",
        }
        assert doc["rule_terms"] == 4


class TestSplit:
    def _log(self, traces=10):
        rows = ["trace_id,event_index,x"]
        for t in range(traces):
            for i in range(3):
                rows.append(f"t{t},{i},a")
        return parse_csv("\n".join(rows))

    def test_fraction_and_disjointness(self):
        train, test = split_by_traces(self._log(), 0.2, seed=1)
        assert test.trace_count == 2 and train.trace_count == 8
        assert not ({t.id for t in train.traces} & {t.id for t in test.traces})

    def test_same_seed_same_split(self):
        a = split_by_traces(self._log(), 0.2, seed=7)
        b = split_by_traces(self._log(), 0.2, seed=7)
        assert [t.id for t in a[0].traces] == [t.id for t in b[0].traces]

    def test_never_produces_empty_side(self):
        train, test = split_by_traces(self._log(3), 0.01, seed=1)
        assert train.trace_count == 2 and test.trace_count == 1

    def test_rejects_degenerate_fraction(self):
        with pytest.raises(ValueError):
            split_by_traces(self._log(), 0.0, seed=1)


class TestPerRuleGeneralization:
    def test_noiseless_ground_truth_is_perfect_on_both_splits(self):
        # a single rule cannot overlap with anything, so its prediction is
        # exact wherever it fires
        config = SynthConfig(seed=12, n_events=1500, n_rules=1, target_kind="categorical")
        gt = sample_ground_truth(config)
        assert len(gt) == 1 and gt.rules[0].update.kind == "set"
        log = generate_log(gt, config)
        train, test = split_by_traces(log, 0.2, seed=12)
        (row,) = per_rule_generalization(gt, train, test)
        assert row["train_covered"] > 0 and row["test_covered"] > 0
        if len(gt.rules[0].update.constants) == 1:
            assert row["train_score"] == pytest.approx(1.0)
            assert row["test_score"] == pytest.approx(1.0)
        else:
            assert row["train_score"] > 0.3

    def test_rule_firing_nowhere_is_flagged(self):
        log = parse_csv(WORKED_CSV)
        rule = build_rule(Condition("product", "=", ("hat",)), UpdateRule("vendor", "set", ("C",)))
        rows = per_rule_generalization(Model.of([rule]), log, log)
        assert rows[0]["train_covered"] == 0
        assert rows[0]["train_score"] is None

    def test_metric_kind_follows_target(self):
        log = parse_csv(WORKED_CSV)
        cat_rule = build_rule(Condition("amount", "=", (10,)), UpdateRule("vendor", "set", ("C",)))
        num_rule = build_rule(Condition("product", "=", ("bag",)), UpdateRule("amount", "point", (20.0,)))
        rows = per_rule_generalization(Model.of([cat_rule, num_rule]), log, log)
        kinds = {row["target"]: row["metric"] for row in rows}
        assert kinds == {"vendor": "f1", "amount": "rmse"}
