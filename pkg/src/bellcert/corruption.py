"""Corruption certificates and their compilation into Bell functionals.

A certificate is ``(mu, z, U, V, g)``: an input distribution, an output bit,
weighted disjoint subsets ``U_i`` of ``f^{-1}(1-z)`` and ``V_j`` of ``f^{-1}(z)``,
and a slack ``g > 0`` such that every rectangle ``R`` satisfies::

    sum_i u_i mu(R & U_i) >= sum_j v_j mu(R & V_j) - g

From such data :func:`build_bell` writes a functional bounded by 1 on every
deterministic strategy that may abort, with a closed-form value on ``p_f``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .core import BellFunctional, DistributionFamily, Scenario, as_fraction, build_pf, evaluate
from .io import FormatError, frac_pair, load_json, dump_json, parse_frac_pair
from .local import BudgetExceeded, _budget, max_bell_over_ldet

# literal all-rectangles matrix up to this many rectangles
LITERAL_LIMIT = 1 << 22


class CertificateInvalid(ValueError):
    pass


@dataclass(frozen=True)
class WeightedSet:
    pairs: frozenset
    weight: Fraction

    def __post_init__(self):
        object.__setattr__(self, "pairs", frozenset((str(x), str(y)) for x, y in self.pairs))
        object.__setattr__(self, "weight", as_fraction(self.weight))


@dataclass(frozen=True)
class CorruptionCertificate:
    inputs_a: tuple
    inputs_b: tuple
    f: Mapping  # (x, y) -> 0/1 on the promise
    mu: Mapping  # (x, y) -> Fraction
    z: int
    U: tuple  # of WeightedSet inside f^{-1}(1 - z)
    V: tuple  # of WeightedSet inside f^{-1}(z)
    g: Fraction | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs_a", tuple(str(x) for x in self.inputs_a))
        object.__setattr__(self, "inputs_b", tuple(str(y) for y in self.inputs_b))
        object.__setattr__(self, "f", {(str(x), str(y)): int(v) for (x, y), v in self.f.items()})
        object.__setattr__(self, "mu", {(str(x), str(y)): as_fraction(v) for (x, y), v in self.mu.items()})
        object.__setattr__(self, "U", tuple(self.U))
        object.__setattr__(self, "V", tuple(self.V))
        if self.g is not None:
            object.__setattr__(self, "g", as_fraction(self.g))
        self.validate()

    def validate(self):
        if self.z not in (0, 1):
            raise CertificateInvalid(f"z must be a bit, got {self.z}")
        ins = {(x, y) for x in self.inputs_a for y in self.inputs_b}
        for k, v in self.f.items():
            if k not in ins:
                raise CertificateInvalid(f"f is defined outside the input space at {k}")
            if v not in (0, 1):
                raise CertificateInvalid(f"f{k} = {v} is not a bit")
        for k, v in self.mu.items():
            if k not in ins:
                raise CertificateInvalid(f"mu is defined outside the input space at {k}")
            if v < 0:
                raise CertificateInvalid(f"mu{k} = {v} < 0")
            if v and k not in self.f:
                raise CertificateInvalid(f"mu puts weight on the off-promise input {k}")
        if sum(self.mu.values()) != 1:
            raise CertificateInvalid(f"mu sums to {sum(self.mu.values())}, not 1")
        for name, family, want in (("U", self.U, 1 - self.z), ("V", self.V, self.z)):
            seen = set()
            for i, ws in enumerate(family):
                for k in ws.pairs:
                    if self.f.get(k) != want:
                        raise CertificateInvalid(f"{name}[{i}] contains {k} outside f^-1({want})")
                    if k in seen:
                        raise CertificateInvalid(f"{name} subsets overlap at {k}")
                    seen.add(k)
        if self.g is not None and self.g <= 0:
            raise CertificateInvalid(f"g must be positive, got {self.g}")

    def with_g(self, g) -> "CorruptionCertificate":
        return CorruptionCertificate(self.inputs_a, self.inputs_b, self.f, self.mu, self.z,
                                     self.U, self.V, g, dict(self.metadata))

    def with_weights(self, u: Iterable, v: Iterable, g=None) -> "CorruptionCertificate":
        u, v = list(u), list(v)
        if len(u) != len(self.U) or len(v) != len(self.V):
            raise CertificateInvalid("one weight per subset is required")
        U = tuple(WeightedSet(s.pairs, w) for s, w in zip(self.U, u))
        V = tuple(WeightedSet(s.pairs, w) for s, w in zip(self.V, v))
        return CorruptionCertificate(self.inputs_a, self.inputs_b, self.f, self.mu, self.z,
                                     U, V, g, dict(self.metadata))

    def measure(self, pairs) -> Fraction:
        return sum((self.mu.get(k, Fraction(0)) for k in pairs), Fraction(0))

    def weight_matrix(self) -> list[list[Fraction]]:
        """``W[x][y] = v_j mu(x,y)`` on ``V_j``, ``-u_i mu(x,y)`` on ``U_i``, else 0.

        The rectangle condition reads ``sum_{R} W <= g``.
        """
        w = {(x, y): Fraction(0) for x in self.inputs_a for y in self.inputs_b}
        for ws in self.V:
            for k in ws.pairs:
                w[k] += ws.weight * self.mu.get(k, 0)
        for ws in self.U:
            for k in ws.pairs:
                w[k] -= ws.weight * self.mu.get(k, 0)
        return [[w[x, y] for y in self.inputs_b] for x in self.inputs_a]

    def scenario(self) -> Scenario:
        return Scenario(self.inputs_a, self.inputs_b, ("0", "1"), ("0", "1"))

    def p_f(self) -> DistributionFamily:
        return build_pf(self.f, self.inputs_a, self.inputs_b)


# ---------------------------------------------------------------- rectangles


@dataclass
class RectangleCheck:
    passed: bool
    worst_rows: tuple  # R_A labels
    worst_cols: tuple  # R_B labels
    excess: Fraction  # max over checked R of sum_R W (the smallest admissible g)
    slack: Fraction | None  # g - excess, None when g is unknown
    mode: str
    certifying: bool
    rectangles: int


def _subset(labels, mask: int) -> tuple:
    return tuple(lab for i, lab in enumerate(labels) if mask >> i & 1)


def _indicator_rows(n: int) -> np.ndarray:
    """Row ``s`` is the 0/1 indicator of subset mask ``s`` (bit i = element i)."""
    masks = np.arange(1 << n, dtype=np.int64)[:, None]
    return (masks >> np.arange(n, dtype=np.int64)[None, :]) & 1


def _int_weights(cert: CorruptionCertificate):
    w = cert.weight_matrix()
    den = 1
    for row in w:
        for v in row:
            den = math.lcm(den, v.denominator)
    ints = [[int(v * den) for v in row] for row in w]
    peak = max((abs(v) for row in ints for v in row), default=0)
    n = len(cert.inputs_a) * len(cert.inputs_b)
    dtype = np.int64 if peak * n < 2**62 else object
    return np.array(ints, dtype=dtype), den


def max_rectangle_excess(cert: CorruptionCertificate, budget=None):
    """Exact ``max_R sum_{(x,y) in R} W(x,y)`` over every rectangle.

    Up to :data:`LITERAL_LIMIT` rectangles, the full table of rectangle sums is
    computed.  Beyond it, each ``R_A`` is paired with its optimal ``R_B``
    (all columns with positive sum), which attains the same maximum.
    Returns ``(excess, rows_mask, cols_mask, rectangles_covered)``.
    """
    w, den = _int_weights(cert)
    nx, ny = w.shape
    transpose = nx > ny
    if transpose:
        w = w.T
        nx, ny = ny, nx
    explicit = 1 << nx
    budget = _budget(budget)
    if explicit > budget:
        raise BudgetExceeded(explicit, budget, "row subsets")
    total = explicit << ny
    ia = _indicator_rows(nx).astype(w.dtype)
    colsum = ia.dot(w)  # (2^nx, ny): sums of W over R_A, per column
    if total <= LITERAL_LIMIT:
        ib = _indicator_rows(ny).astype(w.dtype)
        table = colsum.dot(ib.T)  # every rectangle
        flat = int(np.argmax(table))
        ra, rb = divmod(flat, 1 << ny)
        best = table[ra, rb]
    else:
        pos = np.where(colsum > 0, colsum, 0)
        vals = pos.sum(axis=1)
        ra = int(np.argmax(vals))
        best = vals[ra]
        rb = sum(1 << j for j in range(ny) if colsum[ra, j] > 0)
    if transpose:
        ra, rb = rb, ra
    return Fraction(int(best), den), ra, rb, total


def verify_rectangle_condition(cert: CorruptionCertificate, mode: str = "exhaustive",
                               samples: int = 1000, seed: int = 0, budget=None) -> RectangleCheck:
    """Check the rectangle inequality; report the rectangle with least slack.

    ``mode="sampled"`` draws ``samples`` uniform rectangles and is never a proof.
    """
    g = cert.g
    if mode == "exhaustive":
        excess, ra, rb, count = max_rectangle_excess(cert, budget)
        certifying = True
    elif mode == "sampled":
        rng = random.Random(seed)
        w = cert.weight_matrix()
        nx, ny = len(cert.inputs_a), len(cert.inputs_b)
        excess, ra, rb = Fraction(0), 0, 0  # the empty rectangle
        for _ in range(samples):
            ma, mb = rng.getrandbits(nx), rng.getrandbits(ny)
            s = sum(
                (w[i][j] for i in range(nx) if ma >> i & 1 for j in range(ny) if mb >> j & 1),
                Fraction(0),
            )
            if s > excess:
                excess, ra, rb = s, ma, mb
        count = samples
        certifying = False
    else:
        raise ValueError(f"unknown mode {mode!r}")
    slack = None if g is None else g - excess
    passed = g is not None and slack >= 0
    return RectangleCheck(passed, _subset(cert.inputs_a, ra), _subset(cert.inputs_b, rb),
                          excess, slack, mode, certifying, count)


@dataclass
class TightenRow:
    gamma: Fraction | None
    g: Fraction  # smallest g for which the condition holds (0 means no positive slack needed)
    worst_rows: tuple
    worst_cols: tuple


def tighten_certificate(cert: CorruptionCertificate, gammas: Iterable | None = None,
                        budget=None) -> list[TightenRow]:
    """Smallest admissible ``g`` for the given weights, or for each ``gamma``.

    With ``gammas``, the certificate must have one ``U`` and one ``V`` set; the
    weights become ``u = 1`` and ``v = gamma``.
    """
    rows = []
    if gammas is None:
        excess, ra, rb, _ = max_rectangle_excess(cert, budget)
        return [TightenRow(None, excess, _subset(cert.inputs_a, ra), _subset(cert.inputs_b, rb))]
    if len(cert.U) != 1 or len(cert.V) != 1:
        raise CertificateInvalid("a gamma grid needs exactly one U set and one V set")
    for gamma in gammas:
        gamma = as_fraction(gamma)
        c = cert.with_weights([1], [gamma])
        excess, ra, rb, _ = max_rectangle_excess(c, budget)
        rows.append(TightenRow(gamma, excess, _subset(cert.inputs_a, ra), _subset(cert.inputs_b, rb)))
    return rows


# ---------------------------------------------------------------- Bell functional


@dataclass
class CompiledBell:
    functional: BellFunctional
    local_max: Fraction | None  # max B(l) over strategies that may abort
    pf_value: Fraction
    pf_closed_form: Fraction
    rectangles: RectangleCheck | None


def pf_closed_form(cert: CorruptionCertificate) -> Fraction:
    """``B(p_f) = (1/2g) sum_j v_j mu(V_j)``."""
    return sum((ws.weight * cert.measure(ws.pairs) for ws in cert.V), Fraction(0)) / (2 * cert.g)


def bell_coefficients(cert: CorruptionCertificate) -> BellFunctional:
    if cert.g is None:
        raise CertificateInvalid("g is required to build the functional")
    scen = cert.scenario()
    half_g = 2 * cert.g
    coeffs = {}
    outs = [(a, b) for a in "01" for b in "01" if int(a) ^ int(b) == cert.z]
    for ws, sign in [(s, -1) for s in cert.U] + [(s, 1) for s in cert.V]:
        for x, y in ws.pairs:
            c = sign * ws.weight * cert.mu.get((x, y), 0) / half_g
            if c:
                for a, b in outs:
                    coeffs[a, b, x, y] = c
    return BellFunctional(scen, coeffs)


def build_bell(cert: CorruptionCertificate, verify_rectangles: bool = True,
               verify_local: bool = True, budget=None) -> CompiledBell:
    """Functional with ``-u_i mu/(2g)`` on ``U_i`` and ``v_j mu/(2g)`` on ``V_j`` at ``a xor b = z``."""
    rect = None
    if verify_rectangles:
        rect = verify_rectangle_condition(cert, "exhaustive", budget=budget)
        if not rect.passed:
            raise CertificateInvalid(
                f"rectangle condition fails: R = {rect.worst_rows} x {rect.worst_cols}, "
                f"needs g >= {rect.excess}, have {cert.g}"
            )
    b = bell_coefficients(cert)
    local_max = None
    if verify_local:
        local_max = max_bell_over_ldet(b, with_abort=True, budget=budget).value
        if local_max > 1:
            raise CertificateInvalid(f"max B(l) over L_det^BOT = {local_max} > 1")
    value = evaluate(b, cert.p_f())
    closed = pf_closed_form(cert)
    if value != closed:
        raise CertificateInvalid(f"B(p_f) = {value} differs from closed form {closed}")
    return CompiledBell(b, local_max, value, closed, rect)


def robustness_bound(cert: CorruptionCertificate, eps) -> Fraction:
    """Closed-form lower bound on ``B(p')`` for every ``|p' - p_f|_1 <= eps``."""
    eps = as_fraction(eps)
    gain = sum((ws.weight * cert.measure(ws.pairs) for ws in cert.V), Fraction(0))
    mass = sum((abs(ws.weight) * cert.measure(ws.pairs) for ws in cert.V), Fraction(0))
    mass += sum((abs(ws.weight) * cert.measure(ws.pairs) for ws in cert.U), Fraction(0))
    return (gain - eps * mass) / (2 * cert.g)


def extreme_perturbation(cert: CorruptionCertificate, eps) -> DistributionFamily:
    """``p_f + Delta`` with ``Delta = -eps sign(B)`` on one ``a xor b = z`` entry per input.

    This is where the bound of :func:`robustness_bound` is attained; the table
    is unchecked since it need not be a distribution.
    """
    eps = as_fraction(eps)
    b = bell_coefficients(cert)
    pf = cert.p_f()
    table = dict(pf.table)
    a0 = "0"
    b0 = str(cert.z)
    for x in cert.inputs_a:
        for y in cert.inputs_b:
            c = b[a0, b0, x, y]
            if c:
                table[a0, b0, x, y] -= eps if c > 0 else -eps
    return DistributionFamily(pf.scenario, table, check=False)


# ---------------------------------------------------------------- file format


def certificate_to_json(cert: CorruptionCertificate) -> dict:
    def sets(family):
        return [{"weight": frac_pair(ws.weight), "pairs": sorted([x, y] for x, y in ws.pairs)} for ws in family]

    return {
        "kind": "corruption_certificate",
        "inputs_a": list(cert.inputs_a),
        "inputs_b": list(cert.inputs_b),
        "f": [[x, y, v] for (x, y), v in cert.f.items()],
        "mu": [[x, y, v.numerator, v.denominator] for (x, y), v in cert.mu.items() if v],
        "z": cert.z,
        "U": sets(cert.U),
        "V": sets(cert.V),
        "g": None if cert.g is None else frac_pair(cert.g),
        "metadata": cert.metadata,
    }


def certificate_from_json(obj) -> CorruptionCertificate:
    if not isinstance(obj, dict):
        raise FormatError("top level: expected an object")
    try:
        f = {}
        for i, e in enumerate(obj["f"]):
            if not isinstance(e, list) or len(e) != 3:
                raise FormatError(f"f[{i}]: expected [x, y, value]")
            f[str(e[0]), str(e[1])] = int(e[2])
        mu = {}
        for i, e in enumerate(obj["mu"]):
            if not isinstance(e, list) or len(e) != 4:
                raise FormatError(f"mu[{i}]: expected [x, y, num, den]")
            mu[str(e[0]), str(e[1])] = parse_frac_pair(e[2:], f"mu[{i}]")

        def sets(name):
            out = []
            for i, s in enumerate(obj[name]):
                w = parse_frac_pair(s["weight"], f"{name}[{i}].weight")
                out.append(WeightedSet(frozenset(tuple(p) for p in s["pairs"]), w))
            return out

        g = obj.get("g")
        g = None if g is None else parse_frac_pair(g, "g")
        return CorruptionCertificate(obj["inputs_a"], obj["inputs_b"], f, mu, int(obj["z"]),
                                     sets("U"), sets("V"), g, dict(obj.get("metadata", {})))
    except KeyError as exc:
        raise FormatError(f"missing field {exc}") from None
    except CertificateInvalid as exc:
        raise FormatError(str(exc)) from None


def read_certificate(path) -> CorruptionCertificate:
    obj = load_json(path)
    try:
        return certificate_from_json(obj)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_certificate(cert: CorruptionCertificate, path) -> None:
    dump_json(certificate_to_json(cert), path)
