"""Concrete problem instances at desk scale: DISJ, TRIBES, ORT and small toys."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from .core import DistributionFamily, build_pf
from .corruption import CorruptionCertificate, WeightedSet, tighten_certificate, verify_rectangle_condition

TABLE_LIMIT_BITS = 4  # per-party input length for full tables


class InstanceTooLarge(ValueError):
    pass


@dataclass
class ProblemInstance:
    name: str
    n: int
    inputs_a: tuple
    inputs_b: tuple
    f: Mapping | None  # (x, y) -> bit; None for predicate-only instances
    predicate: Callable | None = None
    certificate: CorruptionCertificate | None = None
    notes: dict = field(default_factory=dict)

    def p_f(self) -> DistributionFamily:
        if self.f is None:
            raise InstanceTooLarge(f"{self.name} has no table")
        return build_pf(self.f, self.inputs_a, self.inputs_b)

    def preimage(self, bit: int) -> set:
        return {k for k, v in self.f.items() if v == bit}


def bitstrings(n: int) -> list[str]:
    return ["".join(t) for t in itertools.product("01", repeat=n)]


def _weight(s: str) -> int:
    return s.count("1")


def _overlap(x: str, y: str) -> int:
    return sum(1 for a, b in zip(x, y) if a == "1" == b)


def _attach(inst: ProblemInstance, cert: CorruptionCertificate, gamma) -> ProblemInstance:
    """Tighten ``g`` for the chosen weights, verify exhaustively, then attach."""
    row = tighten_certificate(cert)[0]
    inst.notes["g_star"] = str(row.g)
    inst.notes["worst_rectangle"] = [list(row.worst_rows), list(row.worst_cols)]
    if row.g <= 0:
        inst.notes["certificate"] = "no positive slack needed; no certificate attached"
        return inst
    cert = cert.with_g(row.g)
    check = verify_rectangle_condition(cert, "exhaustive")
    if not check.passed:
        raise AssertionError("tightened certificate failed its own verification")
    inst.certificate = cert
    inst.notes["gamma"] = str(gamma)
    return inst


# ---------------------------------------------------------------- DISJ


def disj_function(n: int) -> dict:
    xs = bitstrings(n)
    return {(x, y): int(_overlap(x, y) == 0) for x in xs for y in xs}


def disj_mu(n: int) -> dict | None:
    """``(mu0 + mu1)/2``: mu0 uniform on disjoint pairs of weight m, mu1 uniform
    on weight-m pairs meeting in exactly one position.  None if mu0 is empty.
    """
    m = max(1, (n + 1) // 4)
    xs = [x for x in bitstrings(n) if _weight(x) == m]
    s0 = [(x, y) for x in xs for y in xs if _overlap(x, y) == 0]
    s1 = [(x, y) for x in xs for y in xs if _overlap(x, y) == 1]
    if not s0 or not s1:
        return None
    mu = {}
    for k in s0:
        mu[k] = mu.get(k, Fraction(0)) + Fraction(1, 2 * len(s0))
    for k in s1:
        mu[k] = mu.get(k, Fraction(0)) + Fraction(1, 2 * len(s1))
    return mu


def disj(n: int, gamma=1) -> ProblemInstance:
    """DISJ_n(x, y) = 1 iff x and y share no 1.

    The certificate puts ``u = 1`` on ``f^{-1}(1)``, ``v = gamma`` on
    ``f^{-1}(0)`` with ``z = 0`` and the smallest ``g`` valid over all rectangles.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > TABLE_LIMIT_BITS:
        raise InstanceTooLarge(f"DISJ_{n} needs a {2**n}x{2**n} table; limit is {TABLE_LIMIT_BITS} bits")
    f = disj_function(n)
    xs = tuple(bitstrings(n))
    m = max(1, (n + 1) // 4)
    inst = ProblemInstance(f"DISJ{n}", n, xs, xs, f, notes={
        "m": m,
        "asymptotic_gamma": "1/45",
        "asymptotic_g": "2^(-eps*n + log2(4/9))",
        "mapping": "z=0, U1=f^-1(1) with u=1, V1=f^-1(0) with v=gamma",
    })
    mu = disj_mu(n)
    if mu is None:
        inst.notes["certificate"] = "support of mu0 is empty at this n"
        return inst
    zero = {k for k, v in f.items() if v == 0}
    one = {k for k, v in f.items() if v == 1}
    inst.notes["mu(f^-1(0))"] = str(sum(mu.get(k, 0) for k in zero))
    inst.notes["mu(f^-1(1))"] = str(sum(mu.get(k, 0) for k in one))
    cert = CorruptionCertificate(xs, xs, f, mu, 0, [WeightedSet(one, 1)], [WeightedSet(zero, gamma)],
                                 metadata={"instance": inst.name})
    return _attach(inst, cert, gamma)


# ---------------------------------------------------------------- TRIBES


def tribes_predicate(s: int, t: int) -> Callable[[str, str], int]:
    def f(x: str, y: str) -> int:
        return int(all(any(x[i * t + j] == "1" == y[i * t + j] for j in range(t)) for i in range(s)))

    return f


def tribes_square_constants(r: int) -> dict:
    """Constants of the square case ``n = (2r+1)^2`` (exact rationals)."""
    if r < 2:
        raise ValueError("the square case needs r >= 2")
    alpha = Fraction(99, 100)
    beta = Fraction(r + 2, r + 1)
    return {
        "n": (2 * r + 1) ** 2,
        "alpha": alpha,
        "lambda": Fraction(16) / (3 * alpha**2),
        "gamma": Fraction(16) / alpha**2,
        "beta": beta,
        "mu(U1)": 1 - 7 * beta**2 / 16,
        "mu(V1)": 6 * beta**2 / 16,
        "mu(V2)": beta**2 / 16,
    }


def tribes_default_partition(s: int, t: int, f: Mapping) -> tuple[set, set]:
    """V1: every block meets in exactly one position; V2: the rest of f^{-1}(1)."""
    v1, v2 = set(), set()
    for (x, y), v in f.items():
        if v != 1:
            continue
        counts = [sum(1 for j in range(t) if x[i * t + j] == "1" == y[i * t + j]) for i in range(s)]
        (v1 if all(c == 1 for c in counts) else v2).add((x, y))
    return v1, v2


def tribes(s: int, t: int, mu: Mapping | None = None, partition=None,
           weights=None) -> ProblemInstance:
    """AND of ``s`` blocks, each an OR over ``t`` coordinates of ``x_i and y_i``.

    A certificate is attached only when ``mu`` is supplied; weights default
    to ``(u1, v1, v2) = (gamma, alpha, -lambda)`` with the square-case constants.
    """
    n = s * t
    pred = tribes_predicate(s, t)
    alpha = Fraction(99, 100)
    notes = {
        "shape": f"AND of {s} ORs of {t}",
        "asymptotic_alpha": str(alpha),
        "asymptotic_lambda": str(Fraction(16) / (3 * alpha**2)),
        "asymptotic_gamma": str(Fraction(16) / alpha**2),
    }
    if n > 2 * TABLE_LIMIT_BITS:
        raise InstanceTooLarge(f"TRIBES({s},{t}) has {n}-bit inputs; limit is {2 * TABLE_LIMIT_BITS}")
    if n > TABLE_LIMIT_BITS and mu is not None:
        raise InstanceTooLarge("certificates need full rectangle enumeration; use at most 4-bit inputs")
    xs = tuple(bitstrings(n))
    f = {(x, y): pred(x, y) for x in xs for y in xs}
    inst = ProblemInstance(f"TRIBES{s}x{t}", n, xs, xs, f, pred, notes=notes)
    if mu is None:
        return inst
    zero = {k for k, v in f.items() if v == 0}
    v1, v2 = partition if partition is not None else tribes_default_partition(s, t, f)
    if weights is None:
        weights = (Fraction(16) / alpha**2, alpha, -Fraction(16) / (3 * alpha**2))
    u1, w1, w2 = weights
    V = [WeightedSet(v1, w1), WeightedSet(v2, w2)]
    cert = CorruptionCertificate(xs, xs, f, mu, 1, [WeightedSet(zero, u1)], V,
                                 metadata={"instance": inst.name})
    return _attach(inst, cert, None)


def tribes_predicate_only(s: int, t: int) -> ProblemInstance:
    """Full-scale TRIBES without a table (pointwise evaluation only)."""
    return ProblemInstance(f"TRIBES{s}x{t}", s * t, (), (), None, tribes_predicate(s, t),
                           notes={"shape": f"AND of {s} ORs of {t}", "table": "not materialized"})


# ---------------------------------------------------------------- ORT


def pm_strings(n: int) -> list[str]:
    return ["".join(t) for t in itertools.product("+-", repeat=n)]


def inner(x: str, y: str) -> int:
    return sum(1 if a == b else -1 for a, b in zip(x, y))


def ort_value(ip: int, N: int) -> int | None:
    """ORT_N on inner product ``ip``: -1 if ``|ip| <= sqrt N``, +1 if ``|ip| >= 2 sqrt N``."""
    if ip * ip <= N:
        return -1
    if ip * ip >= 4 * N:
        return 1
    return None


def ort_small(ip: int, n: int) -> int | None:
    """The repeated predicate on n-bit words: -1 if ``|ip| <= sqrt(n)/8``, +1 if ``|ip| >= sqrt(n)/4``."""
    if 64 * ip * ip <= n:
        return -1
    if 16 * ip * ip >= n:
        return 1
    return None


def pm_to_bit(v: int) -> int:
    """+1 -> 0 and -1 -> 1."""
    return (1 - v) // 2


def ort_mu_tilde(n: int, l: int, mu_prime: Mapping | None = None) -> dict:
    """Padded measure for length ``64n + l``, kept symbolic.

    Keys are ``(x, y, v)`` standing for the pair ``(x^64 +^l, y^64 v^l)`` with
    ``v`` in ``{"+", "-"}`` (``""`` when ``l = 0``).  The default ``mu_prime``
    is uniform over all base pairs.
    """
    if not 0 <= l <= 63:
        raise ValueError("l must lie in [0, 63]")
    xs = pm_strings(n)
    if mu_prime is None:
        w = Fraction(1, len(xs) ** 2)
        mu_prime = {(x, y): w for x in xs for y in xs}
    N = 64 * n
    out = {}
    for (x, y), w in mu_prime.items():
        if not w:
            continue
        ip = 64 * inner(x, y)
        big = ip * ip > N
        if (ip < 0 and big) or (ip >= 0 and not big):
            v = "-"
        else:
            v = "+"
        key = (x, y, v if l else "")
        out[key] = out.get(key, Fraction(0)) + w
    return out


def padded_inner_product(x: str, y: str, v: str, l: int) -> int:
    return 64 * inner(x, y) + (l if v == "+" else -l if v == "-" else 0)


def ort(n: int, l: int = 0, gamma=None) -> ProblemInstance:
    """The repeated gap-orthogonality predicate on ``n`` signs per party.

    The table uses the unscaled thresholds; the padded measure for
    ``ORT_{64n+l}`` is kept in ``notes["mu_tilde"]`` symbolically.  Bits
    encode +1 as 0 and -1 as 1.  With ``gamma`` a certificate is attached
    (``z = 1``, ``U = f^{-1}(0)``, ``V = f^{-1}(1)``, ``mu`` uniform on the promise).
    """
    if n > TABLE_LIMIT_BITS:
        raise InstanceTooLarge(f"ORT tables are limited to {TABLE_LIMIT_BITS} signs")
    xs = tuple(pm_strings(n))
    f = {}
    for x in xs:
        for y in xs:
            v = ort_small(inner(x, y), n)
            if v is not None:
                f[x, y] = pm_to_bit(v)
    mt = ort_mu_tilde(n, l)
    inst = ProblemInstance(f"ORT{n}", n, xs, xs, f, notes={
        "l": l,
        "padded_length": 64 * n + l,
        "mu_tilde_total": str(sum(mt.values())),
        "asymptotic_g": "2^(-delta*n)",
    })
    inst.notes["mu_tilde"] = {f"{x},{y},{v}": str(w) for (x, y, v), w in mt.items()}
    if gamma is None:
        return inst
    dom = sorted(f)
    mu = {k: Fraction(1, len(dom)) for k in dom}
    zero = {k for k in dom if f[k] == 0}
    one = {k for k in dom if f[k] == 1}
    if not zero or not one:
        inst.notes["certificate"] = "f is constant on its promise"
        return inst
    cert = CorruptionCertificate(xs, xs, f, mu, 1, [WeightedSet(zero, 1)], [WeightedSet(one, gamma)],
                                 metadata={"instance": inst.name})
    return _attach(inst, cert, gamma)


# ---------------------------------------------------------------- toys


def toy_catalog() -> list[ProblemInstance]:
    one = ("0", "1")
    two = tuple(bitstrings(2))
    out = [
        ProblemInstance("AND1", 1, one, one, {(x, y): int(x) & int(y) for x in one for y in one}),
        ProblemInstance("XOR1", 1, one, one, {(x, y): int(x) ^ int(y) for x in one for y in one}),
        ProblemInstance("EQ2", 2, two, two, {(x, y): int(x == y) for x in two for y in two}),
        ProblemInstance("CONST0", 1, one, one, {(x, y): 0 for x in one for y in one}),
    ]
    for inst in out:
        inst.notes["source"] = "toy"
    return out


def get_toy(name: str) -> ProblemInstance:
    for inst in toy_catalog():
        if inst.name == name:
            return inst
    raise KeyError(f"no toy instance {name!r}")
