"""Scenarios, exact-rational distribution families and Bell functionals.

Every probability and coefficient is a :class:`fractions.Fraction`.  Labels
are strings; the abort outcome is the reserved label :data:`BOT`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

BOT = "BOT"

Key = tuple  # (a, b, x, y)


class ScenarioMismatch(ValueError):
    pass


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions, gmpy2 rationals and ``"n/d"`` strings exactly.

    Floats are rejected: nothing in the bound computations may be inexact.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        raise TypeError(f"refusing inexact float {value!r}; pass a Fraction or 'n/d' string")
    num = getattr(value, "numerator", None)
    den = getattr(value, "denominator", None)
    if num is not None and den is not None:
        return Fraction(int(num), int(den))
    raise TypeError(f"cannot convert {value!r} to an exact rational")


def _labels(values: Iterable, what: str) -> tuple[str, ...]:
    labels = tuple(str(v) for v in values)
    if not labels:
        raise ValueError(f"{what} must be non-empty")
    if len(set(labels)) != len(labels):
        raise ValueError(f"{what} contains duplicate labels: {labels}")
    return labels


@dataclass(frozen=True)
class Scenario:
    inputs_a: tuple[str, ...]
    inputs_b: tuple[str, ...]
    outputs_a: tuple[str, ...]
    outputs_b: tuple[str, ...]
    abort_allowed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inputs_a", _labels(self.inputs_a, "inputs_a"))
        object.__setattr__(self, "inputs_b", _labels(self.inputs_b, "inputs_b"))
        object.__setattr__(self, "outputs_a", _labels(self.outputs_a, "outputs_a"))
        object.__setattr__(self, "outputs_b", _labels(self.outputs_b, "outputs_b"))
        if BOT in self.outputs_a or BOT in self.outputs_b:
            raise ValueError(f"{BOT!r} is reserved for the abort outcome")
        object.__setattr__(self, "abort_allowed", bool(self.abort_allowed))

    @classmethod
    def uniform(cls, n_inputs: int, n_outputs: int, abort: bool = False) -> "Scenario":
        """Symmetric scenario with labels ``"0" .. "k-1"`` on both sides."""
        ins = [str(i) for i in range(n_inputs)]
        outs = [str(i) for i in range(n_outputs)]
        return cls(ins, ins, outs, outs, abort)

    @property
    def full_outputs_a(self) -> tuple[str, ...]:
        return self.outputs_a + ((BOT,) if self.abort_allowed else ())

    @property
    def full_outputs_b(self) -> tuple[str, ...]:
        return self.outputs_b + ((BOT,) if self.abort_allowed else ())

    def base(self) -> "Scenario":
        if not self.abort_allowed:
            return self
        return Scenario(self.inputs_a, self.inputs_b, self.outputs_a, self.outputs_b, False)

    def with_abort(self) -> "Scenario":
        if self.abort_allowed:
            return self
        return Scenario(self.inputs_a, self.inputs_b, self.outputs_a, self.outputs_b, True)

    def input_pairs(self) -> list[tuple[str, str]]:
        return [(x, y) for x in self.inputs_a for y in self.inputs_b]

    def outcome_pairs(self, include_abort: bool = True) -> list[tuple[str, str]]:
        if include_abort:
            return list(itertools.product(self.full_outputs_a, self.full_outputs_b))
        return list(itertools.product(self.outputs_a, self.outputs_b))

    def keys(self, include_abort: bool = True) -> list[Key]:
        """All ``(a, b, x, y)`` quadruples, grouped by input pair."""
        outs = self.outcome_pairs(include_abort)
        return [(a, b, x, y) for x, y in self.input_pairs() for a, b in outs]

    def compatible(self, other: "Scenario") -> bool:
        return self.base() == other.base()

    def to_json(self) -> dict:
        return {
            "inputs_a": list(self.inputs_a),
            "inputs_b": list(self.inputs_b),
            "outputs_a": list(self.outputs_a),
            "outputs_b": list(self.outputs_b),
            "abort_allowed": self.abort_allowed,
        }


def _check_compatible(s1: Scenario, s2: Scenario):
    if not s1.compatible(s2):
        raise ScenarioMismatch(f"scenarios differ:\n  {s1}\n  {s2}")


def is_abort(key: Key) -> bool:
    return key[0] == BOT or key[1] == BOT


@dataclass(frozen=True)
class DistributionFamily:
    """A table ``p(a,b|x,y)``.

    With ``check=False`` the table is an arbitrary rational tensor on the
    scenario's keys; perturbed tables (``p + Delta``) are built that way.
    """

    scenario: Scenario
    table: Mapping[Key, Fraction]
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        keys = self.scenario.keys()
        valid = set(keys)
        for k in self.table:
            if k not in valid:
                raise KeyError(f"entry {k} is not an outcome/input of {self.scenario}")
        full = {k: as_fraction(self.table.get(k, 0)) for k in keys}
        object.__setattr__(self, "table", full)
        if self.check:
            for k, v in full.items():
                if v < 0:
                    raise ValueError(f"negative probability p{k} = {v}")
            for x, y in self.scenario.input_pairs():
                s = sum(full[a, b, x, y] for a, b in self.scenario.outcome_pairs())
                if s != 1:
                    raise ValueError(f"p(.,.|{x},{y}) sums to {s}, not 1")

    def __getitem__(self, key: Key) -> Fraction:
        return self.table[key]

    def __hash__(self):
        return hash((self.scenario, tuple(self.table.items())))

    def block(self, x: str, y: str) -> dict[tuple[str, str], Fraction]:
        return {(a, b): self.table[a, b, x, y] for a, b in self.scenario.outcome_pairs()}

    def is_valid(self) -> bool:
        if any(v < 0 for v in self.table.values()):
            return False
        return all(sum(self.block(x, y).values()) == 1 for x, y in self.scenario.input_pairs())

    def embed(self, scenario: Scenario) -> "DistributionFamily":
        """Same table viewed in a scenario with more outputs (new entries 0)."""
        _check_inputs_equal(self.scenario, scenario)
        out_a, out_b = set(scenario.full_outputs_a), set(scenario.full_outputs_b)
        extra = [k for k, v in self.table.items() if v and (k[0] not in out_a or k[1] not in out_b)]
        if extra:
            raise ScenarioMismatch(f"entry {extra[0]} has no place in {scenario}")
        table = {k: v for k, v in self.table.items() if k[0] in out_a and k[1] in out_b}
        return DistributionFamily(scenario, table, check=self.check)

    def __add__(self, other: "DistributionFamily") -> "DistributionFamily":
        _check_compatible(self.scenario, other.scenario)
        if self.scenario != other.scenario:
            raise ScenarioMismatch("abort flags differ")
        return DistributionFamily(
            self.scenario, {k: v + other.table[k] for k, v in self.table.items()}, check=False
        )

    def scale(self, factor) -> "DistributionFamily":
        c = as_fraction(factor)
        return DistributionFamily(self.scenario, {k: c * v for k, v in self.table.items()}, check=False)


def _check_inputs_equal(s1: Scenario, s2: Scenario):
    if s1.inputs_a != s2.inputs_a or s1.inputs_b != s2.inputs_b:
        raise ScenarioMismatch("input sets differ")


def convex_mix(weights: Iterable, families: Iterable[DistributionFamily]) -> DistributionFamily:
    """Exact ``sum_i w_i p_i``; validated only if the weights form a distribution."""
    weights = [as_fraction(w) for w in weights]
    families = list(families)
    if len(weights) != len(families) or not families:
        raise ValueError("need one weight per family")
    scen = families[0].scenario
    table = {k: Fraction(0) for k in scen.keys()}
    for w, p in zip(weights, families):
        if p.scenario != scen:
            raise ScenarioMismatch("families live in different scenarios")
        for k, v in p.table.items():
            table[k] += w * v
    check = sum(weights) == 1 and all(w >= 0 for w in weights)
    return DistributionFamily(scen, table, check=check)


@dataclass(frozen=True)
class BellFunctional:
    """Coefficients ``B[a,b,x,y]``; keys absent from ``coeffs`` are zero."""

    scenario: Scenario
    coeffs: Mapping[Key, Fraction]

    def __post_init__(self):
        valid = set(self.scenario.keys())
        clean = {}
        for k, v in self.coeffs.items():
            k = tuple(k)
            if k not in valid:
                raise KeyError(f"coefficient {k} is not a key of {self.scenario}")
            v = as_fraction(v)
            if v:
                clean[k] = v
        object.__setattr__(self, "coeffs", clean)

    def __getitem__(self, key: Key) -> Fraction:
        return self.coeffs.get(tuple(key), Fraction(0))

    def __hash__(self):
        return hash((self.scenario, tuple(sorted(self.coeffs.items()))))

    @classmethod
    def zero(cls, scenario: Scenario) -> "BellFunctional":
        return cls(scenario, {})

    def has_abort_coefficients(self) -> bool:
        return any(is_abort(k) for k in self.coeffs)

    def scale(self, factor) -> "BellFunctional":
        c = as_fraction(factor)
        return BellFunctional(self.scenario, {k: c * v for k, v in self.coeffs.items()})

    def __add__(self, other: "BellFunctional") -> "BellFunctional":
        _check_compatible(self.scenario, other.scenario)
        scen = self.scenario if self.scenario.abort_allowed else other.scenario
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) + v
        return BellFunctional(scen, out)

    def __sub__(self, other: "BellFunctional") -> "BellFunctional":
        return self + other.scale(-1)

    def plus_constant(self, c) -> "BellFunctional":
        """Add ``c`` to the value on every non-aborting family.

        The constant is spread as ``c / (|X||Y|)`` over every non-abort key,
        since each input pair carries total probability one.
        """
        c = as_fraction(c)
        n = len(self.scenario.inputs_a) * len(self.scenario.inputs_b)
        share = c / n
        out = dict(self.coeffs)
        for k in self.scenario.keys(include_abort=False):
            out[k] = out.get(k, Fraction(0)) + share
        return BellFunctional(self.scenario, out)

    def embed(self, scenario: Scenario) -> "BellFunctional":
        """Extend to a scenario with more outputs; new coefficients are zero."""
        _check_inputs_equal(self.scenario, scenario)
        valid = set(scenario.keys())
        missing = [k for k in self.coeffs if k not in valid]
        if missing:
            raise ScenarioMismatch(f"coefficient {missing[0]} has no place in {scenario}")
        return BellFunctional(scenario, self.coeffs)


def evaluate(b: BellFunctional, p: DistributionFamily) -> Fraction:
    """``B(p)`` summed over non-abort outcomes only."""
    _check_compatible(b.scenario, p.scenario)
    table = p.table
    return sum((v * table[k] for k, v in b.coeffs.items() if not is_abort(k)), Fraction(0))


def evaluate_full(b: BellFunctional, p: DistributionFamily) -> Fraction:
    """``B(p)`` including abort-indexed coefficients."""
    _check_compatible(b.scenario, p.scenario)
    table = p.table
    return sum((v * table.get(k, 0) for k, v in b.coeffs.items()), Fraction(0))


def marginals(p: DistributionFamily):
    """Return ``(p_A, p_B)`` with ``p_A[a, x, y]`` and ``p_B[b, x, y]``."""
    s = p.scenario
    pa, pb = {}, {}
    for x, y in s.input_pairs():
        for a in s.full_outputs_a:
            pa[a, x, y] = sum(p.table[a, b, x, y] for b in s.full_outputs_b)
        for b in s.full_outputs_b:
            pb[b, x, y] = sum(p.table[a, b, x, y] for a in s.full_outputs_a)
    return pa, pb


def is_nonsignaling(p: DistributionFamily):
    """Return ``(ok, witness)``.

    The witness is the first violating tuple: ``("A", a, x, y, y0)`` when
    Alice's marginal at ``(x, y)`` differs from that at ``(x, y0)``, and
    ``("B", b, x, y, x0)`` symmetrically for Bob.
    """
    s = p.scenario
    pa, pb = marginals(p)
    y0 = s.inputs_b[0]
    for x in s.inputs_a:
        for y in s.inputs_b[1:]:
            for a in s.full_outputs_a:
                if pa[a, x, y] != pa[a, x, y0]:
                    return False, ("A", a, x, y, y0)
    x0 = s.inputs_a[0]
    for y in s.inputs_b:
        for x in s.inputs_a[1:]:
            for b in s.full_outputs_b:
                if pb[b, x, y] != pb[b, x0, y]:
                    return False, ("B", b, x, y, x0)
    return True, None


def l1_distance(p: DistributionFamily, q: DistributionFamily) -> Fraction:
    """``max_{x,y} sum_{a,b} |p - q|``."""
    _check_compatible(p.scenario, q.scenario)
    if p.scenario != q.scenario:
        raise ScenarioMismatch("abort flags differ")
    s = p.scenario
    return max(
        sum(abs(p.table[a, b, x, y] - q.table[a, b, x, y]) for a, b in s.outcome_pairs())
        for x, y in s.input_pairs()
    )


def uniform_distribution(scenario: Scenario) -> DistributionFamily:
    """Uniform over the non-abort outcomes of each input pair."""
    w = Fraction(1, len(scenario.outputs_a) * len(scenario.outputs_b))
    return DistributionFamily(scenario, {k: w for k in scenario.keys(include_abort=False)})


def mix_uniform(p: DistributionFamily, delta) -> DistributionFamily:
    """``(1 - delta) p + delta u``."""
    delta = as_fraction(delta)
    if not 0 <= delta <= 1:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if p.scenario.abort_allowed:
        raise ValueError("mix_uniform expects a family without abort outcomes")
    u = uniform_distribution(p.scenario)
    return DistributionFamily(
        p.scenario, {k: (1 - delta) * v + delta * u.table[k] for k, v in p.table.items()}
    )


def xor_bits(a: str, b: str) -> int:
    return int(a) ^ int(b)


def build_pf(f: Mapping[tuple[str, str], int], inputs_a=None, inputs_b=None) -> DistributionFamily:
    """The family with ``a xor b = f(x, y)`` and uniform marginals.

    ``f`` may be partial; input pairs outside its domain get the uniform
    distribution over the four outcomes.  Input label order defaults to the
    order of first appearance in ``f``.
    """
    if not f:
        raise ValueError("f has an empty domain")
    if inputs_a is None:
        inputs_a = list(dict.fromkeys(str(x) for x, _ in f))
    if inputs_b is None:
        inputs_b = list(dict.fromkeys(str(y) for _, y in f))
    scen = Scenario(inputs_a, inputs_b, ("0", "1"), ("0", "1"))
    fv = {(str(x), str(y)): int(v) for (x, y), v in f.items()}
    half, quarter = Fraction(1, 2), Fraction(1, 4)
    table = {}
    for a, b, x, y in scen.keys():
        v = fv.get((x, y))
        if v is None:
            table[a, b, x, y] = quarter
        else:
            table[a, b, x, y] = half if xor_bits(a, b) == v else Fraction(0)
    return DistributionFamily(scen, table)


def chsh_functional(scenario: Scenario | None = None) -> BellFunctional:
    """Normalized CHSH: ``(1/2) (-1)^(x.y + a + b)`` on binary labels."""
    scen = scenario or Scenario.uniform(2, 2)
    coeffs = {
        (a, b, x, y): Fraction((-1) ** ((int(x) * int(y)) ^ xor_bits(a, b)), 2)
        for a, b, x, y in scen.keys(include_abort=False)
    }
    return BellFunctional(scen, coeffs)


def pr_box() -> DistributionFamily:
    """``p_f`` for ``f = AND`` on one-bit inputs."""
    return build_pf({(x, y): int(x) & int(y) for x in "01" for y in "01"})


def random_perturbation(p: DistributionFamily, eps, rng) -> DistributionFamily:
    """A random family within l1 distance ``eps`` of ``p`` in every block.

    Each block moves a random amount of mass, at most ``eps/2``, from one
    outcome with positive probability to another outcome.  ``rng`` is a
    ``random.Random``.
    """
    eps = as_fraction(eps)
    s = p.scenario
    table = dict(p.table)
    outs = s.outcome_pairs()
    for x, y in s.input_pairs():
        src = [o for o in outs if table[o[0], o[1], x, y] > 0]
        a, b = rng.choice(src)
        c, d = rng.choice([o for o in outs if o != (a, b)] or [(a, b)])
        cap = min(eps / 2, table[a, b, x, y])
        m = cap * Fraction(rng.randint(0, 1000), 1000)
        table[a, b, x, y] -= m
        table[c, d, x, y] += m
    return DistributionFamily(s, table)

