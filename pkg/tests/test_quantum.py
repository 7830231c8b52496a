import math
from fractions import Fraction

import numpy as np
import pytest

from bellcert.bounds import check_qeff_feasible, eff_eps
from bellcert.core import BOT, DistributionFamily, chsh_functional, evaluate, is_nonsignaling, pr_box
from bellcert.io import FormatError
from bellcert.local import max_bell_over_ldet
from bellcert.quantum import (
    QuantumStrategy,
    StrategyInvalid,
    compile_violation,
    default_q_bar,
    eval_strategy,
    evaluate_float,
    noise_chain,
    noise_margin,
    product_strategy,
    relabel_abort,
    strategy_from_json,
    strategy_probabilities,
    strategy_to_json,
    tsirelson_strategy,
)

I2 = np.eye(2, dtype=complex)
ZERO = np.zeros((2, 2), dtype=complex)


def test_tsirelson_float_value():
    s = tsirelson_strategy()
    v = evaluate_float(chsh_functional(), strategy_probabilities(s))
    assert abs(v - math.sqrt(2)) <= 1e-9


def test_tsirelson_rationalized_beats_local():
    r = eval_strategy(tsirelson_strategy())
    v = evaluate(chsh_functional(), r.family)
    assert v > max_bell_over_ldet(chsh_functional()).value == 1
    assert abs(float(v) - math.sqrt(2)) < 1e-9
    assert r.residual < 1e-6
    for x, y in r.family.scenario.input_pairs():
        assert sum(r.family.block(x, y).values()) == 1


def test_product_strategy_is_deterministic():
    s = product_strategy({"0": "1", "1": "0"}, {"0": "0", "1": "1"})
    fam = eval_strategy(s).family
    assert fam["1", "0", "0", "0"] == 1
    assert fam["0", "1", "1", "1"] == 1
    assert is_nonsignaling(fam)[0]


def test_invalid_strategies():
    good = tsirelson_strategy()
    with pytest.raises(StrategyInvalid):
        QuantumStrategy(good.state * 2, (2, 2), good.measurements_a, good.measurements_b)
    with pytest.raises(StrategyInvalid):
        QuantumStrategy(good.state, (2, 2), {"0": {"0": I2, "1": I2}}, good.measurements_b)
    negative = np.diag([1.5, -0.5]).astype(complex)
    with pytest.raises(StrategyInvalid):
        QuantumStrategy(good.state, (2, 2), {"0": {"0": negative, "1": I2 - negative}}, good.measurements_b)
    with pytest.raises(StrategyInvalid):
        QuantumStrategy(good.state[:3], (2, 2), good.measurements_a, good.measurements_b)


def _aborting_strategy():
    half = I2 / 2
    ma = {"0": {"0": half, BOT: half}, "1": {"0": I2}}
    mb = {"0": {"0": I2, "1": ZERO}, "1": {"1": I2}}
    state = np.array([1, 0, 0, 0], dtype=complex)
    return QuantumStrategy(state, (2, 2), ma, mb, ("0",), ("0", "1"))


def test_abort_outcomes_and_relabel():
    s = _aborting_strategy()
    assert s.aborts and s.scenario().abort_allowed
    fam = eval_strategy(s).family
    assert fam[BOT, "0", "0", "0"] == Fraction(1, 2)
    rel = relabel_abort(fam)
    assert not rel.scenario.abort_allowed
    assert rel["A", "0", "0", "0"] == Fraction(1, 2)
    assert rel["0", "1", "1", "1"] == 1


def test_qeff_feasibility_from_an_aborting_family():
    # q aborts with probability 3/4 and otherwise reproduces p
    p = pr_box()
    scen = p.scenario.with_abort()
    table = {k: v / 4 for k, v in p.table.items()}
    for x, y in scen.input_pairs():
        table[BOT, BOT, x, y] = Fraction(3, 4)
    q = DistributionFamily(scen, table)
    check = check_qeff_feasible(p, q, Fraction(1, 4))
    assert check.feasible and check.bound == 4


def test_compile_violation_value():
    p = pr_box()
    b = eff_eps(p, 0).certificate
    cv = compile_violation(p, b, 2, 2, 2)
    assert cv.transcripts == 4
    assert cv.value == cv.base_value / 4 == Fraction(1, 2)
    assert cv.claimed == Fraction(1, 2)
    assert cv.q_bar == default_q_bar(p, 2, 2)


def test_compile_rejects_bad_inputs():
    p = pr_box()
    b = eff_eps(p, 0).certificate
    with pytest.raises(ValueError):
        compile_violation(p, b, 2, 3, 1)
    with pytest.raises(ValueError):
        compile_violation(p, b, 3, 1, 1)
    with pytest.raises(ValueError):
        compile_violation(p, chsh_functional().scale(2), 1, 1, 1)


def test_noise_chain_on_pr():
    p = pr_box()
    eps = Fraction(1, 4)
    res = eff_eps(p, eps)
    cv = compile_violation(p, res.certificate, res.beta, 2, 2)
    margin = noise_margin(p, eps, 0)
    assert margin == Fraction(1, 4)
    rows = noise_chain(cv, res.certificate, p, [margin * k / 7 for k in range(8)])
    assert all(r.holds for r in rows)
    assert rows[-1].lifted_value == cv.claimed


def test_strategy_json_round_trip():
    s = tsirelson_strategy()
    again = strategy_from_json(strategy_to_json(s))
    assert np.allclose(again.state, s.state)
    p1 = strategy_probabilities(s)
    p2 = strategy_probabilities(again)
    assert max(abs(p1[k] - p2[k]) for k in p1) == 0


def test_strategy_json_errors():
    with pytest.raises(FormatError):
        strategy_from_json({"kind": "quantum_strategy"})
