from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellcert.core import (
    BOT,
    BellFunctional,
    DistributionFamily,
    Scenario,
    ScenarioMismatch,
    build_pf,
    chsh_functional,
    convex_mix,
    evaluate,
    evaluate_full,
    is_nonsignaling,
    l1_distance,
    marginals,
    mix_uniform,
    pr_box,
    uniform_distribution,
)
from conftest import PR_VARIANTS, S2222


def test_scenario_keys_and_abort():
    s = Scenario.uniform(2, 3)
    assert len(s.keys()) == 4 * 9
    sa = s.with_abort()
    assert sa.full_outputs_a == ("0", "1", "2", BOT)
    assert len(sa.keys()) == 4 * 16
    assert len(sa.keys(include_abort=False)) == 4 * 9
    assert sa.base() == s and s.compatible(sa)


def test_reserved_label_rejected():
    with pytest.raises(ValueError):
        Scenario(("0",), ("0",), ("0", BOT), ("0",))


def test_distribution_validation():
    with pytest.raises(ValueError):
        DistributionFamily(S2222, {("0", "0", "0", "0"): Fraction(1, 2)})
    with pytest.raises(KeyError):
        DistributionFamily(S2222, {("0", "7", "0", "0"): 1})
    bad = {k: Fraction(1, 2) for k in S2222.keys()}
    bad["0", "0", "0", "0"] = Fraction(-1)
    with pytest.raises(ValueError):
        DistributionFamily(S2222, bad)


def test_pr_box_is_nonsignaling_with_uniform_marginals():
    p = pr_box()
    ok, wit = is_nonsignaling(p)
    assert ok and wit is None
    ma, mb = marginals(p)
    assert all(v == Fraction(1, 2) for v in ma.values())
    assert all(v == Fraction(1, 2) for v in mb.values())


def test_signaling_family_detected():
    table = {}
    for x in "01":
        for y in "01":
            for a in "01":
                for b in "01":
                    # Alice copies Bob's input: signaling
                    table[a, b, x, y] = Fraction(1, 2) if a == y else Fraction(0)
    ok, wit = is_nonsignaling(DistributionFamily(S2222, table))
    assert not ok and wit is not None


def test_chsh_values():
    b = chsh_functional()
    assert evaluate(b, pr_box()) == 2
    assert evaluate(b, uniform_distribution(S2222)) == 0


def test_evaluate_ignores_abort_coefficients_but_full_does_not():
    s = S2222.with_abort()
    b = BellFunctional(s, {("0", "0", "0", "0"): 1, (BOT, "0", "0", "0"): 5})
    table = {k: Fraction(0) for k in s.keys()}
    for x in "01":
        for y in "01":
            table[BOT, "0", x, y] = Fraction(1)
    p = DistributionFamily(s, table)
    assert evaluate(b, p) == 0
    assert evaluate_full(b, p) == 5


def test_mismatched_scenarios():
    b = chsh_functional()
    p = uniform_distribution(Scenario.uniform(3, 2))
    with pytest.raises(ScenarioMismatch):
        evaluate(b, p)


def test_build_pf_partial_domain():
    p = build_pf({("0", "0"): 1, ("1", "1"): 0}, ["0", "1"], ["0", "1"])
    assert p["0", "1", "0", "0"] == Fraction(1, 2) and p["0", "0", "0", "0"] == 0
    assert p["0", "0", "0", "1"] == Fraction(1, 4)
    assert is_nonsignaling(p)[0]


def test_pr_box_is_the_and_variant():
    assert pr_box() == PR_VARIANTS[0]


def test_l1_distance_is_worst_block():
    u = uniform_distribution(S2222)
    assert l1_distance(pr_box(), u) == 1
    assert l1_distance(mix_uniform(pr_box(), Fraction(1, 4)), pr_box()) == Fraction(1, 4)


def test_convex_mix_validates_only_proper_weights():
    p = convex_mix([Fraction(1, 3), Fraction(2, 3)], [pr_box(), uniform_distribution(S2222)])
    assert p["0", "0", "1", "1"] == Fraction(1, 6)
    raw = convex_mix([2, -1], [pr_box(), uniform_distribution(S2222)])
    assert raw["0", "1", "1", "1"] == Fraction(3, 4)


def test_plus_constant_shifts_every_family():
    b = chsh_functional()
    shifted = b.plus_constant(Fraction(3, 2))
    for p in PR_VARIANTS + [uniform_distribution(S2222)]:
        assert evaluate(shifted, p) == evaluate(b, p) + Fraction(3, 2)


def test_functional_arithmetic():
    b = chsh_functional()
    assert evaluate(b - b, pr_box()) == 0
    assert evaluate(b + b.scale(2), pr_box()) == 6
    assert BellFunctional.zero(S2222).coeffs == {}


@st.composite
def families(draw):
    weights = draw(st.lists(st.integers(0, 6), min_size=8, max_size=8).filter(any))
    tot = sum(weights)
    return convex_mix([Fraction(w, tot) for w in weights], PR_VARIANTS)


@settings(max_examples=40, deadline=None)
@given(families(), st.fractions(0, 1))
def test_uniform_mixing_is_linear(p, d):
    b = chsh_functional()
    u = uniform_distribution(S2222)
    assert evaluate(b, mix_uniform(p, d)) == (1 - d) * evaluate(b, p) + d * evaluate(b, u)
    assert l1_distance(mix_uniform(p, d), p) == d * l1_distance(p, u)
    assert is_nonsignaling(mix_uniform(p, d))[0]
