import random
from fractions import Fraction

import pytest

from bellcert.core import BellFunctional, DistributionFamily, Scenario, convex_mix, evaluate
from bellcert.local import ldet_list, max_bell_over_ldet, strategy_to_distribution

S2222 = Scenario.uniform(2, 2)
S3322 = Scenario.uniform(3, 2)


def pr_variant(alpha: int, beta: int, gamma: int) -> DistributionFamily:
    """Nonsignaling vertex with a xor b = xy + alpha x + beta y + gamma (mod 2)."""
    table = {}
    for x in "01":
        for y in "01":
            target = (int(x) * int(y) + alpha * int(x) + beta * int(y) + gamma) % 2
            for a in "01":
                for b in "01":
                    table[a, b, x, y] = Fraction(1, 2) if (int(a) ^ int(b)) == target else Fraction(0)
    return DistributionFamily(S2222, table)


PR_VARIANTS = [pr_variant(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]


def random_weights(rng: random.Random, n: int, hi: int = 9) -> list[Fraction]:
    raw = [rng.randint(0, hi) for _ in range(n)]
    if not any(raw):
        raw[rng.randrange(n)] = 1
    tot = sum(raw)
    return [Fraction(r, tot) for r in raw]


def random_nonsignaling(rng: random.Random, scenario: Scenario = S2222, extremes: int = 4) -> DistributionFamily:
    """Random rational mixture of a few local vertices and (in 2222) PR variants."""
    pool = [strategy_to_distribution(s) for s in ldet_list(scenario)]
    if scenario == S2222:
        pool = pool + PR_VARIANTS
    picks = [rng.choice(pool) for _ in range(extremes)]
    return convex_mix(random_weights(rng, extremes), picks)


def random_functional(rng: random.Random, scenario: Scenario = S2222, lo: int = -4, hi: int = 4,
                      density: float = 0.7) -> BellFunctional:
    coeffs = {}
    for k in scenario.keys(include_abort=False):
        if rng.random() < density:
            coeffs[k] = Fraction(rng.randint(lo, hi), rng.randint(1, 3))
    if not any(coeffs.values()):
        coeffs[scenario.keys(False)[0]] = Fraction(1)
    return BellFunctional(scenario, coeffs)


def random_normalized_instance(rng: random.Random):
    """A normalized functional with a nonsignaling family reaching B(p) >= 1."""
    while True:
        b = random_functional(rng)
        top = max_bell_over_ldet(b, absolute=True).value
        if top == 0:
            continue
        b = b.scale(1 / top)
        if max_bell_over_ldet(b).value < 1:
            b = b.scale(-1)
        best = max(PR_VARIANTS, key=lambda q: evaluate(b, q))
        local = strategy_to_distribution(max_bell_over_ldet(b).strategy)
        # random mix of the best PR variant and the local maximizer; retry if B(p) < 1
        t = Fraction(rng.randint(0, 4), 4)
        p = convex_mix([t, 1 - t], [best, local])
        if evaluate(b, p) >= 1:
            return b, p


@pytest.fixture
def rng():
    return random.Random(20240611)
