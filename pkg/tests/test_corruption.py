import itertools
import random
from fractions import Fraction

import pytest

from bellcert import corruption
from bellcert.core import BOT, evaluate, l1_distance, random_perturbation
from bellcert.corruption import (
    CertificateInvalid,
    CorruptionCertificate,
    WeightedSet,
    build_bell,
    certificate_from_json,
    certificate_to_json,
    extreme_perturbation,
    max_rectangle_excess,
    pf_closed_form,
    robustness_bound,
    tighten_certificate,
    verify_rectangle_condition,
)
from bellcert.problems import disj


def brute_excess(cert):
    """Loop over every rectangle in plain Python."""
    w = cert.weight_matrix()
    nx, ny = len(w), len(w[0])
    best = Fraction(0)
    for ra in itertools.product((0, 1), repeat=nx):
        rows = [sum((w[i][j] for i in range(nx) if ra[i]), Fraction(0)) for j in range(ny)]
        for rb in itertools.product((0, 1), repeat=ny):
            best = max(best, sum((rows[j] for j in range(ny) if rb[j]), Fraction(0)))
    return best


def random_certificate(rng, nx=3, ny=3):
    xs = [f"x{i}" for i in range(nx)]
    ys = [f"y{j}" for j in range(ny)]
    f = {(x, y): rng.randint(0, 1) for x in xs for y in ys}
    raw = {k: rng.randint(0, 4) for k in f}
    if not any(raw.values()):
        raw[next(iter(raw))] = 1
    tot = sum(raw.values())
    mu = {k: Fraction(v, tot) for k, v in raw.items()}
    z = rng.randint(0, 1)
    U = [WeightedSet({k for k, v in f.items() if v == 1 - z}, Fraction(rng.randint(1, 3), 2))]
    V = [WeightedSet({k for k, v in f.items() if v == z}, Fraction(rng.randint(1, 3), 2))]
    return CorruptionCertificate(xs, ys, f, mu, z, U, V)


def python_local_max(b):
    """Every Alice map with abort, Bob answering best per input; plain Python."""
    s = b.scenario
    outs_a = s.outputs_a + (BOT,)
    outs_b = s.outputs_b + (BOT,)
    best = None
    for amap in itertools.product(outs_a, repeat=len(s.inputs_a)):
        total = Fraction(0)
        for y in s.inputs_b:
            total += max(sum((b[a, bb, x, y] for x, a in zip(s.inputs_a, amap)), Fraction(0)) for bb in outs_b)
        best = total if best is None else max(best, total)
    return best


@pytest.fixture(scope="module")
def disj3():
    return disj(3)


def test_disj3_certificate(disj3):
    cert = disj3.certificate
    assert cert.g == Fraction(1, 6)
    check = verify_rectangle_condition(cert)
    assert check.passed and check.certifying and check.rectangles == 65536
    assert check.slack == 0


@pytest.mark.parametrize("seed", range(12))
def test_rectangle_search_matches_brute_force(seed):
    cert = random_certificate(random.Random(seed), 3, 4)
    excess, _, _, total = max_rectangle_excess(cert)
    assert total == 2**7
    assert excess == brute_excess(cert)


@pytest.mark.parametrize("seed", range(6))
def test_best_response_mode_matches_literal(seed, monkeypatch):
    cert = random_certificate(random.Random(50 + seed), 4, 3)
    literal = max_rectangle_excess(cert)[0]
    monkeypatch.setattr(corruption, "LITERAL_LIMIT", 1)
    assert max_rectangle_excess(cert)[0] == literal


def test_sampled_mode_is_not_certifying(disj3):
    check = verify_rectangle_condition(disj3.certificate, "sampled", samples=50, seed=1)
    assert not check.certifying
    assert check.rectangles == 50
    assert check.excess <= Fraction(1, 6)


def test_tighten_gamma_grid(disj3):
    rows = tighten_certificate(disj3.certificate, [Fraction(1, 2), 1, 2])
    assert [r.g for r in rows] == [Fraction(1, 12), Fraction(1, 6), Fraction(1, 2)]


def test_build_bell_disj3(disj3):
    cb = build_bell(disj3.certificate)
    assert cb.local_max == 1
    assert cb.pf_value == cb.pf_closed_form == Fraction(3, 2)
    assert python_local_max(cb.functional) == 1


def test_build_rejects_small_g(disj3):
    with pytest.raises(CertificateInvalid):
        build_bell(disj3.certificate.with_g(Fraction(1, 7)))


def test_robustness_bound(disj3):
    cert = disj3.certificate
    cb = build_bell(cert)
    eps = Fraction(1, 10)
    bound = robustness_bound(cert, eps)
    assert bound == Fraction(6, 5)
    worst = extreme_perturbation(cert, eps)
    assert l1_distance(worst, cert.p_f()) <= eps
    assert evaluate(cb.functional, worst) == bound
    rng = random.Random(3)
    for _ in range(20):
        q = random_perturbation(cert.p_f(), eps, rng)
        assert l1_distance(q, cert.p_f()) <= eps
        assert evaluate(cb.functional, q) >= bound


@pytest.mark.parametrize("seed", range(6))
def test_random_certificates_compile(seed):
    cert = random_certificate(random.Random(200 + seed), 2, 3)
    row = tighten_certificate(cert)[0]
    if row.g <= 0:
        pytest.skip("no rectangle has positive excess")
    cb = build_bell(cert.with_g(row.g))
    assert cb.local_max <= 1
    assert cb.pf_value == pf_closed_form(cert.with_g(row.g))


def test_json_round_trip(disj3):
    cert = disj3.certificate
    again = certificate_from_json(certificate_to_json(cert))
    assert again == cert


def test_invalid_certificates():
    f = {("0", "0"): 0, ("0", "1"): 1}
    mu = {("0", "0"): Fraction(1, 2), ("0", "1"): Fraction(1, 2)}
    with pytest.raises(CertificateInvalid):
        CorruptionCertificate(["0"], ["0", "1"], f, mu, 1, [WeightedSet({("0", "1")}, 1)], [])
    with pytest.raises(CertificateInvalid):
        CorruptionCertificate(["0"], ["0", "1"], f, {("0", "0"): 1, ("0", "1"): 1}, 1, [], [])
    with pytest.raises(CertificateInvalid):
        CorruptionCertificate(["0"], ["0", "1"], f, mu, 2, [], [])
