"""Local deterministic strategies, linear optimization over them, and locality tests."""

from __future__ import annotations

import functools
import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .core import BOT, BellFunctional, DistributionFamily, Scenario
from .lp import LinearProgram, solve

DEFAULT_BUDGET = 10**7
BUDGET_ENV = "BELLCERT_BUDGET"

# rows of the gathered tensor processed per numpy chunk
_CHUNK_CELLS = 1 << 22


class BudgetExceeded(RuntimeError):
    def __init__(self, count: int, budget: int, what: str = "strategies"):
        super().__init__(f"would enumerate {count} {what}, budget is {budget}")
        self.count = count
        self.budget = budget


def default_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    if raw:
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"{BUDGET_ENV}={raw!r} is not an integer") from None
    return DEFAULT_BUDGET


def _budget(budget):
    return default_budget() if budget is None else int(budget)


@dataclass(frozen=True)
class LocalDetStrategy:
    scenario: Scenario
    map_a: tuple[str, ...]  # output for each x, in scenario order
    map_b: tuple[str, ...]

    def __post_init__(self):
        s = self.scenario
        if len(self.map_a) != len(s.inputs_a) or len(self.map_b) != len(s.inputs_b):
            raise ValueError("strategy must be total on X and Y")
        if not set(self.map_a) <= set(s.full_outputs_a) or not set(self.map_b) <= set(s.full_outputs_b):
            raise ValueError("strategy uses an output outside the scenario")

    def output_a(self, x: str) -> str:
        return self.map_a[self.scenario.inputs_a.index(x)]

    def output_b(self, y: str) -> str:
        return self.map_b[self.scenario.inputs_b.index(y)]

    def aborts(self) -> bool:
        return BOT in self.map_a or BOT in self.map_b

    def support(self) -> list[tuple]:
        """The keys carrying probability one."""
        s = self.scenario
        return [
            (a, b, x, y)
            for x, a in zip(s.inputs_a, self.map_a)
            for y, b in zip(s.inputs_b, self.map_b)
        ]

    def describe(self) -> str:
        s = self.scenario
        fa = ",".join(f"{x}->{a}" for x, a in zip(s.inputs_a, self.map_a))
        fb = ",".join(f"{y}->{b}" for y, b in zip(s.inputs_b, self.map_b))
        return f"A[{fa}] B[{fb}]"


def _strategy_scenario(scenario: Scenario, with_abort: bool) -> Scenario:
    return scenario.with_abort() if with_abort else scenario


def count_ldet(scenario: Scenario, with_abort: bool) -> int:
    na = len(scenario.outputs_a) + with_abort
    nb = len(scenario.outputs_b) + with_abort
    return na ** len(scenario.inputs_a) * nb ** len(scenario.inputs_b)


def enumerate_ldet(scenario: Scenario, with_abort: bool = False, budget=None) -> Iterator[LocalDetStrategy]:
    """Stream L_det (or L_det^⊥) in lexicographic (map_a, map_b) order."""
    total = count_ldet(scenario, with_abort)
    budget = _budget(budget)
    if total > budget:
        raise BudgetExceeded(total, budget)
    scen = _strategy_scenario(scenario, with_abort)
    outs_a = scenario.outputs_a + ((BOT,) if with_abort else ())
    outs_b = scenario.outputs_b + ((BOT,) if with_abort else ())
    maps_b = list(itertools.product(outs_b, repeat=len(scenario.inputs_b)))
    for ma in itertools.product(outs_a, repeat=len(scenario.inputs_a)):
        for mb in maps_b:
            yield LocalDetStrategy(scen, ma, mb)


@functools.lru_cache(maxsize=32)
def ldet_list(scenario: Scenario, with_abort: bool = False, budget=None) -> tuple[LocalDetStrategy, ...]:
    """Cached, shared read-only strategy list."""
    return tuple(enumerate_ldet(scenario, with_abort, budget))


def strategy_to_distribution(s: LocalDetStrategy, scenario: Scenario | None = None) -> DistributionFamily:
    one = Fraction(1)
    return DistributionFamily(scenario or s.scenario, {k: one for k in s.support()})


def strategy_value(b: BellFunctional, s: LocalDetStrategy, include_abort: bool = False) -> Fraction:
    """``B(l)`` by direct summation over the strategy's support."""
    total = Fraction(0)
    for k in s.support():
        if include_abort or (k[0] != BOT and k[1] != BOT):
            total += b[k]
    return total


# ---------------------------------------------------------------- optimization


@dataclass
class LocalMax:
    value: Fraction
    strategy: LocalDetStrategy
    count: int  # |L_det| (or |L_det^⊥|) covered by the search


def _integer_tensor(b: BellFunctional, outs_a, outs_b, include_abort: bool):
    """Coefficients scaled to integers, shape (X, Y, |outs_a|, |outs_b|)."""
    s = b.scenario
    den = 1
    for v in b.coeffs.values():
        den = math.lcm(den, v.denominator)
    vals = [[[[0] * len(outs_b) for _ in outs_a] for _ in s.inputs_b] for _ in s.inputs_a]
    peak = 0
    for (a, bb, x, y), v in b.coeffs.items():
        if not include_abort and (a == BOT or bb == BOT):
            continue
        if a not in outs_a or bb not in outs_b:
            continue
        n = int(v * den)
        vals[s.inputs_a.index(x)][s.inputs_b.index(y)][outs_a.index(a)][outs_b.index(bb)] = n
        peak = max(peak, abs(n))
    bound = peak * len(s.inputs_a) * len(s.inputs_b) * 4
    dtype = np.int64 if bound < 2**62 else object
    return np.array(vals, dtype=dtype), den


def _decode(indices: np.ndarray, radix: int, width: int) -> np.ndarray:
    """Mixed-radix digits, most significant first (lexicographic order)."""
    out = np.empty((len(indices), width), dtype=np.int64)
    rem = indices.copy()
    for i in range(width - 1, -1, -1):
        out[:, i] = rem % radix
        rem //= radix
    return out


def _best_response_scan(t: np.ndarray, sign: int):
    """Maximize ``sign * sum_{x,y} t[x, y, a(x), b(y)]`` over all maps a, b.

    Enumerates a explicitly; b is the exact per-y best response.  Returns the
    optimum and the lexicographically first optimal (a, b) index pair.
    """
    t = t * sign
    nx, ny, na, nb = t.shape
    total = na**nx
    chunk = max(1, _CHUNK_CELLS // max(1, nx * ny * nb))
    best_val, best_a, best_b = None, None, None
    xs = np.arange(nx)[None, :]
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        amap = _decode(idx, na, nx) if nx else np.zeros((len(idx), 0), dtype=np.int64)
        g = t[xs, :, amap, :]  # (K, X, Y, nb)
        s = g.sum(axis=1)  # (K, Y, nb)
        br = s.max(axis=2)  # (K, Y)
        vals = br.sum(axis=1)
        k = int(np.argmax(vals))  # first maximal Alice map in this chunk
        v = vals[k]
        if best_val is None or v > best_val:
            best_val = v
            best_a = amap[k].tolist()
            best_b = [int(np.argmax(s[k, y])) for y in range(ny)]
    return sign * int(best_val), best_a, best_b


def max_bell_over_ldet(
    b: BellFunctional,
    with_abort: bool = False,
    absolute: bool = False,
    include_abort: bool = False,
    minimize: bool = False,
    budget=None,
) -> LocalMax:
    """Exact ``max B(l)`` (or ``max |B(l)|``, or ``min B(l)``) over L_det / L_det^⊥.

    Alice's maps are enumerated explicitly and Bob plays an exact best
    response per input, so the cost is ``|A|^|X|`` rather than the full count.
    The budget applies to Alice's enumerated maps.  Ties go to the first
    strategy in :func:`enumerate_ldet` order.
    """
    s = b.scenario
    outs_a = s.outputs_a + ((BOT,) if with_abort else ())
    outs_b = s.outputs_b + ((BOT,) if with_abort else ())
    explicit = len(outs_a) ** len(s.inputs_a)
    budget = _budget(budget)
    if explicit > budget:
        raise BudgetExceeded(explicit, budget, "Alice maps")
    t, den = _integer_tensor(b, outs_a, outs_b, include_abort)
    scen = _strategy_scenario(s.base(), with_abort)

    def build(res):
        val, ia, ib = res
        strat = LocalDetStrategy(scen, tuple(outs_a[i] for i in ia), tuple(outs_b[j] for j in ib))
        return Fraction(val, den), strat, (ia, ib)

    count = count_ldet(s.base(), with_abort)
    if minimize:
        v, st, _ = build(_best_response_scan(t, -1))
        return LocalMax(v, st, count)
    hi, st_hi, pos_hi = build(_best_response_scan(t, 1))
    if not absolute:
        return LocalMax(hi, st_hi, count)
    lo, st_lo, pos_lo = build(_best_response_scan(t, -1))
    if -lo > hi or (-lo == hi and pos_lo < pos_hi):
        return LocalMax(-lo, st_lo, count)
    return LocalMax(hi, st_hi, count)


def max_bell_by_enumeration(b: BellFunctional, with_abort=False, absolute=False,
                            include_abort=False, budget=None) -> LocalMax:
    """Reference implementation: evaluate every strategy one by one."""
    best, arg, n = None, None, 0
    for st in enumerate_ldet(b.scenario.base(), with_abort, budget):
        n += 1
        v = strategy_value(b, st, include_abort)
        if absolute:
            v = abs(v)
        if best is None or v > best:
            best, arg = v, st
    return LocalMax(best, arg, n)


# ---------------------------------------------------------------- membership


@dataclass
class LocalityResult:
    local: bool
    weights: list[tuple[LocalDetStrategy, Fraction]]
    separator: BellFunctional | None  # B with B(p) > max_l B(l) when not local
    separator_gap: Fraction | None  # B(p) - max_l B(l)


def is_local(p: DistributionFamily, with_abort: bool | None = None, budget=None) -> LocalityResult:
    """Decide ``p in conv(L_det)`` by an exact feasibility LP.

    When ``p`` is not local, the Farkas certificate yields a functional whose
    value on ``p`` strictly exceeds its maximum over the strategies (evaluated
    with abort coefficients included when ``with_abort``).
    """
    scen = p.scenario
    if with_abort is None:
        with_abort = scen.abort_allowed
    if with_abort and not scen.abort_allowed:
        scen = scen.with_abort()
        p = p.embed(scen)
    strategies = ldet_list(scen.base(), with_abort, _budget(budget))
    keys = scen.keys()
    lp = LinearProgram("max", "locality")
    names = []
    for i in range(len(strategies)):
        names.append(lp.add_variable(f"w{i}"))
    rows: dict[tuple, list] = {k: [] for k in keys}
    for name, st in zip(names, strategies):
        for k in st.support():
            rows[k].append((name, 1))
    for i, k in enumerate(keys):
        lp.add_constraint(f"k{i}", rows[k], "=", p.table[k])
    lp.add_constraint("norm", [(n, 1) for n in names], "=", 1)
    sol = solve(lp)
    if sol.status == "optimal":
        weights = [(st, sol.primal[n]) for n, st in zip(names, strategies) if sol.primal[n]]
        return LocalityResult(True, weights, None, None)
    if sol.status != "infeasible":
        raise RuntimeError(f"locality LP ended with status {sol.status}")
    coeffs = {k: sol.farkas[f"k{i}"] for i, k in enumerate(keys)}
    sep = BellFunctional(scen, coeffs)
    pv = sum((v * p.table[k] for k, v in sep.coeffs.items()), Fraction(0))
    lmax = max_bell_over_ldet(sep, with_abort=with_abort, include_abort=True).value
    if not pv > lmax:
        raise AssertionError("Farkas separator does not separate")
    return LocalityResult(False, [], sep, pv - lmax)
