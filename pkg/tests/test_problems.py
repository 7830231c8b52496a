from fractions import Fraction

import pytest

from bellcert.core import is_nonsignaling
from bellcert.corruption import verify_rectangle_condition
from bellcert.local import is_local
from bellcert.problems import (
    InstanceTooLarge,
    bitstrings,
    disj,
    disj_function,
    inner,
    ort,
    ort_mu_tilde,
    ort_small,
    ort_value,
    padded_inner_product,
    pm_strings,
    pm_to_bit,
    toy_catalog,
    tribes,
    tribes_square_constants,
    tribes_predicate_only,
)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_disj_counts(n):
    f = disj_function(n)
    assert len(f) == 4**n
    assert sum(f.values()) == 3**n


def test_disj_small_cases():
    assert disj(1).certificate is None
    d2 = disj(2)
    assert d2.notes["g_star"] == "1/4"
    assert verify_rectangle_condition(d2.certificate).passed
    d3 = disj(3)
    assert d3.certificate.g == Fraction(1, 6)
    assert d3.notes["m"] == 1


def test_disj_mu_is_balanced_on_weight_m_strings():
    cert = disj(3).certificate
    weights = {x.count("1") for (x, _), w in cert.mu.items() if w}
    assert weights == {1}
    # mu0 on disjoint pairs of singletons: 3*2 pairs; mu1 on equal singletons: 3 pairs
    assert sum(1 for (x, y), w in cert.mu.items() if w and cert.f[x, y] == 1) == 6
    assert sum(1 for (x, y), w in cert.mu.items() if w and cert.f[x, y] == 0) == 3
    assert sum(w for k, w in cert.mu.items() if cert.f[k] == 1) == Fraction(1, 2)
    assert cert.z == 0


def test_disj_too_large():
    with pytest.raises(InstanceTooLarge):
        disj(5)


def test_tribes_single_block_is_non_disjointness():
    t = tribes(1, 3)
    for (x, y), v in t.f.items():
        assert v == 1 - disj_function(3)[x, y]


def test_tribes_2x2_table():
    t = tribes(2, 2)
    assert len(t.f) == 256
    # both blocks need a common 1: 3 intersecting patterns per 2-bit block
    assert sum(t.f.values()) == (4**2 - 3**2) ** 2
    assert t.f["1111", "1111"] == 1 and t.f["1100", "1111"] == 0


def test_tribes_constants():
    c = tribes_square_constants(2)
    assert c["n"] == 25
    assert c["beta"] == Fraction(4, 3)
    assert c["mu(U1)"] == 1 - 7 * Fraction(16, 9) / 16
    assert c["gamma"] == 3 * c["lambda"]


def test_tribes_with_measure_attaches_a_verified_certificate():
    base = tribes(1, 2)
    ones = [k for k, v in base.f.items() if v == 1]
    zeros = [k for k, v in base.f.items() if v == 0]
    mu = {k: Fraction(1, 2 * len(zeros)) for k in zeros}
    mu.update({k: Fraction(1, 2 * len(ones)) for k in ones})
    inst = tribes(1, 2, mu=mu, weights=(1, 1, Fraction(-1, 2)))
    assert inst.certificate is not None
    assert verify_rectangle_condition(inst.certificate).passed


def test_tribes_predicate_only_scale():
    t = tribes_predicate_only(5, 5)
    assert t.f is None
    x = "1" * 25
    assert t.predicate(x, x) == 1
    assert t.predicate(x, "0" * 25) == 0


def test_ort_small_thresholds():
    assert ort_small(0, 4) == -1
    assert ort_small(1, 16) == 1  # 16 * 1 >= 16
    assert ort_small(1, 64) == -1  # 64 * 1 <= 64
    assert ort_small(1, 32) is None
    assert ort_value(0, 16) == -1 and ort_value(8, 16) == 1 and ort_value(5, 16) is None


def test_ort_instances():
    o3 = ort(3, gamma=Fraction(1, 2))
    assert o3.certificate is None and "constant" in o3.notes["certificate"]
    o4 = ort(4, gamma=Fraction(1, 2))
    assert o4.certificate.g == Fraction(1, 32)
    assert pm_to_bit(1) == 0 and pm_to_bit(-1) == 1
    for (x, y), v in o4.f.items():
        assert v == pm_to_bit(ort_small(inner(x, y), 4))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("l", [0, 1, 7, 63])
def test_mu_tilde_normalized(n, l):
    assert sum(ort_mu_tilde(n, l).values()) == 1


def test_mu_tilde_without_padding_is_mu_prime():
    mt = ort_mu_tilde(2, 0)
    xs = pm_strings(2)
    assert mt == {(x, y, ""): Fraction(1, 16) for x in xs for y in xs}


def test_mu_tilde_large_positive_product_pads_with_plus():
    n, l = 2, 5
    mt = ort_mu_tilde(n, l)
    x = "++"
    assert 64 * inner(x, x) > (64 * n) ** 0.5
    assert mt[x, x, "+"] == Fraction(1, 16)
    assert (x, x, "-") not in mt


@pytest.mark.parametrize("n", [1, 2, 4])
def test_padding_preserves_ort_value_when_l_is_small(n):
    for l in range(64):
        if l * l > 64 * n:
            continue
        for (x, y, v), w in ort_mu_tilde(n, l).items():
            before = ort_value(64 * inner(x, y), 64 * n)
            after = ort_value(padded_inner_product(x, y, v, l), 64 * n + l)
            assert before == after, (x, y, v, l)


def test_toys():
    toys = {t.name: t for t in toy_catalog()}
    assert set(toys) == {"AND1", "XOR1", "EQ2", "CONST0"}
    assert not is_local(toys["AND1"].p_f()).local
    assert is_local(toys["CONST0"].p_f()).local
    assert is_nonsignaling(toys["EQ2"].p_f())[0]
    assert toys["EQ2"].f["01", "01"] == 1 and toys["EQ2"].f["01", "10"] == 0
    assert bitstrings(2) == ["00", "01", "10", "11"]
