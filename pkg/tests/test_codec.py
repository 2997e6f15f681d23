import math

import pytest

from modrules.codec import (
    CodecConfig,
    CodecError,
    PrequentialCounter,
    condition_length,
    model_length,
    prequential_code,
    prequential_total,
    real_code,
    round_significant,
    significand_exponent,
    universal_int,
    update_length,
    value_code,
)
from modrules.logs import build_histogram, VariableSchema
from modrules.rules import Condition, Model, UpdateRule, build_rule


def test_universal_int_base_values():
    assert universal_int(1) == pytest.approx(math.log2(2.865064))
    assert universal_int(1) == pytest.approx(1.5186, abs=1e-4)
    assert universal_int(2) == pytest.approx(math.log2(2.865064) + 1.0)
    # log2(3) + log2(log2(3)), then the next term goes non-positive
    assert universal_int(3) == pytest.approx(
        math.log2(2.865064) + math.log2(3) + math.log2(math.log2(3))
    )
    assert universal_int(3) == pytest.approx(3.768, abs=1e-3)


def test_universal_int_monotone():
    values = [universal_int(x) for x in range(1, 200)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_universal_int_rejects_nonpositive():
    with pytest.raises(CodecError):
        universal_int(0)


def test_kraft_inequality_holds():
    total = sum(2.0 ** -universal_int(x) for x in range(1, 100_000))
    assert total <= 1.0


@pytest.mark.parametrize(
    "value,precision,expected",
    [
        (0.5, 3, (5, -1)),
        (3.0, 3, (3, 0)),
        (68.77, 4, (6877, -2)),
        (68.77, 3, (687, -1)),  # truncation, not rounding
        (-0.25, 3, (-25, -2)),
        (1200.0, 3, (12, 2)),
        (0.0, 3, (0, 0)),
    ],
)
def test_significand_exponent(value, precision, expected):
    assert significand_exponent(value, precision) == expected


def test_round_significant():
    assert round_significant(68.77, 3) == pytest.approx(68.8)
    assert round_significant(-0.012345, 3) == pytest.approx(-0.0123)
    assert round_significant(0.0, 3) == 0.0


def test_real_code_half():
    # k=5, s=-1: 2 + L_N(2) + L_N(6)
    expected = 2 + universal_int(2) + universal_int(6)
    assert real_code(0.5, 3) == pytest.approx(expected)
    assert real_code(0.5, 3) == pytest.approx(10.447, abs=1e-3)


def test_real_code_zero_and_integer():
    assert real_code(0.0) == pytest.approx(2 + 2 * universal_int(1))
    assert real_code(0.0) == pytest.approx(5.037, abs=1e-3)
    assert real_code(3.0) == pytest.approx(2 + universal_int(1) + universal_int(4))


def test_real_code_rejects_non_finite():
    with pytest.raises(CodecError):
        real_code(float("inf"))


def test_prequential_first_symbols():
    counter = PrequentialCounter()
    bits, counter = prequential_code(counter, True)
    assert bits == pytest.approx(1.0)
    bits, counter = prequential_code(counter, True)
    assert bits == pytest.approx(-math.log2(1.5 / 2.0))
    fresh = PrequentialCounter()
    miss_bits, _ = prequential_code(fresh, False)
    assert miss_bits == pytest.approx(1.0)


def test_prequential_probabilities_sum_to_one():
    import random

    rng = random.Random(5)
    counter = PrequentialCounter()
    for _ in range(500):
        hit_bits, _ = prequential_code(counter, True)
        miss_bits, _ = prequential_code(counter, False)
        assert 2.0**-hit_bits + 2.0**-miss_bits == pytest.approx(1.0)
        _, counter = prequential_code(counter, rng.random() < 0.3)


def test_prequential_total_matches_sequential():
    import random

    rng = random.Random(11)
    counter = PrequentialCounter()
    sequential = 0.0
    for _ in range(300):
        bits, counter = prequential_code(counter, rng.random() < 0.7)
        sequential += bits
    closed = prequential_total(counter.check_count, counter.cross_count)
    assert closed == pytest.approx(sequential, abs=1e-9)


def test_value_code_cases():
    freq = {"B": 1, "C": 1}
    assert value_code("C", {"B", "C"}, freq) == pytest.approx(1.0)
    assert value_code("C", {"C"}, {"C": 9}) == 0.0
    assert value_code("B", {"A", "B"}, {"A": 6, "B": 4}) == pytest.approx(
        -math.log2(0.4)
    )


def test_value_code_errors():
    with pytest.raises(CodecError):
        value_code("X", {"A", "B"}, {"A": 1, "B": 1})
    with pytest.raises(CodecError):
        value_code("A", {"A"}, {"A": 0})


def _three_var_schema():
    cat = lambda name: VariableSchema(name, "categorical", categories=("a", "b", "c"))
    return {"x": cat("x"), "y": cat("y"), "z": cat("z")}


def test_condition_length_categorical():
    schema = _three_var_schema()
    cfg = CodecConfig()
    equals = Condition("x", "=", ("a",))
    assert condition_length(equals, schema, cfg) == pytest.approx(
        math.log2(5) + math.log2(3) + math.log2(3)
    )
    transition = Condition("x", "->", ("a", "b"))
    assert condition_length(transition, schema, cfg) == pytest.approx(
        math.log2(5) + math.log2(3) + 2 * math.log2(3)
    )


def test_condition_length_single_variable_costs_nothing_for_variable():
    schema = {"x": VariableSchema("x", "categorical", categories=("a", "b"))}
    bits = condition_length(Condition("x", "=", ("a",)), schema, CodecConfig())
    assert bits == pytest.approx(math.log2(5) + 0.0 + 1.0)


def test_update_length_calibrated_subset_code():
    schema = _three_var_schema()
    cfg = CodecConfig()
    single = UpdateRule("y", "set", ("a",))
    pair = UpdateRule("y", "set", ("a", "b"))
    expected = math.log2(6) + math.log2(3) + (3 + math.log2(6))
    # the subset cost is flat in the set size
    assert update_length(single, schema, cfg) == pytest.approx(expected)
    assert update_length(pair, schema, cfg) == pytest.approx(expected)


def test_update_length_literal_mode():
    schema = _three_var_schema()
    cfg = CodecConfig(literal_constant_lengths=True)
    pair = UpdateRule("y", "set", ("a", "b"))
    assert update_length(pair, schema, cfg) == pytest.approx(
        math.log2(6) + math.log2(3) + universal_int(2) + 2 * math.log2(3)
    )
    assert update_length(pair, schema, cfg) == pytest.approx(9.858, abs=1e-3)


def test_update_length_numerical_interval_pays_two_reals():
    h = build_histogram([float(x) for x in range(1, 101)], 4)
    schema = {
        "x": VariableSchema("x", "categorical", categories=("a", "b", "c")),
        "n": VariableSchema("n", "numerical", histogram=h),
    }
    cfg = CodecConfig()
    interval = UpdateRule("n", "interval", (10.0, 20.0))
    assert update_length(interval, schema, cfg) == pytest.approx(
        math.log2(6) + math.log2(2) + real_code(10.0, 3) + real_code(20.0, 3)
    )


def test_model_length_empty_and_growth():
    schema = _three_var_schema()
    cfg = CodecConfig()
    assert model_length(Model.empty(), schema, cfg) == pytest.approx(universal_int(1))

    r1 = build_rule(Condition("x", "=", ("a",)), UpdateRule("y", "set", ("b",)))
    r2 = build_rule(Condition("x", "=", ("b",)), UpdateRule("z", "set", ("c",)))
    one = model_length(Model.of([r1]), schema, cfg)
    two = model_length(Model.of([r1, r2]), schema, cfg)
    per_rule = condition_length(r1.condition, schema, cfg) + update_length(r1.update, schema, cfg)
    assert one == pytest.approx(universal_int(2) + per_rule)
    assert two > one
