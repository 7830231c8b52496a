"""Nonlocality measures as exact linear programs, each returning a certificate.

* ``nu`` / ``nu_eps``: nuclear norm, certificate ``B`` with ``|B(l)| <= 1``.
* ``eff`` / ``eff_eps``: efficiency bound, certificate ``(B, beta)`` with
  ``B(l) <= 1`` on strategies that may abort and ``B(p + Delta) >= beta`` for
  every admissible perturbation ``Delta``.

Certificates are re-verified by strategy enumeration before being returned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .core import (
    BellFunctional,
    DistributionFamily,
    Scenario,
    ScenarioMismatch,
    as_fraction,
    evaluate,
    is_nonsignaling,
)
from .local import (
    BudgetExceeded,
    LocalDetStrategy,
    _budget,
    ldet_list,
    max_bell_over_ldet,
)
from .lp import LinearProgram, LpSolution, solve


class CertificateError(AssertionError):
    """A computed certificate failed its independent re-verification."""


@dataclass
class BoundResult:
    value: Fraction | None  # None stands for +infinity
    certificate: BellFunctional | None
    beta: Fraction | None = None
    witness: list[tuple[LocalDetStrategy, Fraction]] = field(default_factory=list)
    zeta: Fraction | None = None
    status: str = "optimal"
    checks: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class NoisePolytopePoint:
    """Additive perturbation ``Delta`` on the non-abort keys of a scenario."""

    scenario: Scenario
    delta: dict

    def __getitem__(self, key):
        return self.delta.get(key, Fraction(0))

    def is_admissible(self, eps) -> bool:
        eps = as_fraction(eps)
        s = self.scenario
        for x, y in s.input_pairs():
            block = [self[a, b, x, y] for a, b in s.outcome_pairs(False)]
            if sum(block) != 0 or sum(abs(v) for v in block) > eps:
                return False
        return True

    def apply(self, p: DistributionFamily) -> DistributionFamily:
        """``p + Delta`` as an unchecked table (it may leave the simplex)."""
        return DistributionFamily(p.scenario, {k: v + self[k] for k, v in p.table.items()}, check=False)


def _key_names(keys) -> dict:
    return {k: f"k{i}" for i, k in enumerate(keys)}


def _check_eps(eps) -> Fraction:
    eps = as_fraction(eps)
    if not 0 <= eps <= 1:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    return eps


def _require_optimal(sol: LpSolution, what: str):
    if sol.status != "optimal":
        raise RuntimeError(f"{what} LP ended with status {sol.status}")


# ---------------------------------------------------------------- nu


def _nu_program(p: DistributionFamily, eps: Fraction | None, budget):
    scen = p.scenario
    keys = scen.keys(include_abort=False)
    names = _key_names(keys)
    strategies = ldet_list(scen, False, _budget(budget))
    lp = LinearProgram("min", "nu" if eps is None else "nu_eps")
    rows = {k: [] for k in keys}
    for i, st in enumerate(strategies):
        lp.add_variable(f"yp{i}", "nonneg", 1)
        lp.add_variable(f"ym{i}", "nonneg", 1)
        for k in st.support():
            rows[k] += [(f"yp{i}", 1), (f"ym{i}", -1)]
    if eps is not None:
        # p + e = sum (y+ - y-) l lies in the span of L_det, so it is
        # automatically nonsignaling; positivity, normalization and the mass
        # bound are explicit rows.
        for k in keys:
            n = names[k]
            lp.add_variable("e" + n, "free")
            lp.add_variable("t" + n, "nonneg")
            rows[k].append(("e" + n, -1))
            lp.add_constraint("pos" + n, {"e" + n: 1}, ">=", -p.table[k])
            lp.add_constraint("ap" + n, {"t" + n: 1, "e" + n: -1}, ">=", 0)
            lp.add_constraint("am" + n, {"t" + n: 1, "e" + n: 1}, ">=", 0)
        for j, (x, y) in enumerate(scen.input_pairs()):
            block = [names[a, b, x, y] for a, b in scen.outcome_pairs(False)]
            lp.add_constraint(f"sum{j}", [("e" + n, 1) for n in block], "=", 0)
            lp.add_constraint(f"mass{j}", [("t" + n, 1) for n in block], "<=", eps)
    for k in keys:
        lp.add_constraint(names[k], rows[k], "=", p.table[k])
    return lp, keys, names, strategies


def _nu_solve(p: DistributionFamily, eps, budget) -> BoundResult:
    if p.scenario.abort_allowed:
        raise ValueError("nu is defined on families without abort outcomes")
    ok, wit = is_nonsignaling(p)
    if not ok:
        raise ValueError(f"p is signaling, witness {wit}")
    lp, keys, names, strategies = _nu_program(p, eps, budget)
    sol = solve(lp)
    _require_optimal(sol, "nu")
    cert = BellFunctional(p.scenario, {k: sol.duals[names[k]] for k in keys})
    witness = []
    for i, st in enumerate(strategies):
        c = sol.primal[f"yp{i}"] - sol.primal[f"ym{i}"]
        if c:
            witness.append((st, c))
    res = BoundResult(sol.objective, cert, witness=witness)
    lmax = max_bell_over_ldet(cert, absolute=True, budget=budget).value
    if lmax > 1:
        raise CertificateError(f"nu certificate has max |B(l)| = {lmax} > 1")
    res.checks["max|B(l)| over L_det"] = str(lmax)
    if eps is None:
        bp = evaluate(cert, p)
        if bp != sol.objective:
            raise CertificateError(f"nu certificate value {bp} != LP value {sol.objective}")
        res.checks["B(p) = value"] = "pass"
    res.checks["primal = dual"] = "pass"
    return res


def nu(p: DistributionFamily, budget=None) -> BoundResult:
    """``nu(p) = min sum|y_l|`` over ``sum y_l l = p``; dual ``max B(p)``, ``|B(l)| <= 1``."""
    return _nu_solve(p, None, budget)


def nu_eps(p: DistributionFamily, eps, budget=None) -> BoundResult:
    """Smallest nuclear norm over valid nonsignaling families within ``eps`` of ``p``."""
    return _nu_solve(p, _check_eps(eps), budget)


# ---------------------------------------------------------------- eff


def _eff_program(p: DistributionFamily, eps: Fraction | None, budget):
    scen = p.scenario.base()
    keys = scen.keys(include_abort=False)
    names = _key_names(keys)
    strategies = ldet_list(scen, True, _budget(budget))
    lp = LinearProgram("max", "eff" if eps is None else "eff_eps")
    rows = {k: [] for k in keys}
    norm = []
    for i, st in enumerate(strategies):
        w = lp.add_variable(f"w{i}")
        norm.append((w, 1))
        for k in st.support():
            if k in rows:
                rows[k].append((w, 1))
    lp.add_variable("zeta", "nonneg", 1)
    for k in keys:
        if p.table[k]:
            rows[k].append(("zeta", -p.table[k]))
    if eps is not None:
        for k in keys:
            n = names[k]
            lp.add_variable("e" + n, "free")
            lp.add_variable("t" + n, "nonneg")
            rows[k].append(("e" + n, -1))
            lp.add_constraint("ap" + n, {"t" + n: 1, "e" + n: -1}, ">=", 0)
            lp.add_constraint("am" + n, {"t" + n: 1, "e" + n: 1}, ">=", 0)
        for j, (x, y) in enumerate(scen.input_pairs()):
            block = [names[a, b, x, y] for a, b in scen.outcome_pairs(False)]
            lp.add_constraint(f"sum{j}", [("e" + n, 1) for n in block], "=", 0)
            mass = [("t" + n, 1) for n in block]
            if eps:
                mass.append(("zeta", -eps))
            lp.add_constraint(f"mass{j}", mass, "<=", 0)
    for k in keys:
        lp.add_constraint(names[k], rows[k], "=", 0)
    lp.add_constraint("norm", norm, "=", 1)
    return lp, keys, names, strategies


def robust_minimum(b: BellFunctional, p: DistributionFamily, eps) -> Fraction:
    """``min B(p + Delta)`` over the perturbation polytope, in closed form.

    Each block contributes its minimum over the vertices ``(eps/2)(e_i - e_j)``
    and ``0``, which is ``-(eps/2)(max_ab B - min_ab B)``.
    """
    eps = as_fraction(eps)
    s = p.scenario.base()
    total = evaluate(b, p)
    for x, y in s.input_pairs():
        block = [b[a, bb, x, y] for a, bb in s.outcome_pairs(False)]
        total -= eps / 2 * (max(block) - min(block))
    return total


def _eff_solve(p: DistributionFamily, eps, budget, dual_check: bool) -> BoundResult:
    if p.scenario.abort_allowed:
        raise ValueError("eff expects a family without abort outcomes")
    lp, keys, names, strategies = _eff_program(p, eps, budget)
    sol = solve(lp)
    _require_optimal(sol, "eff")
    zeta = sol.objective
    if zeta == 0:
        return BoundResult(None, None, zeta=zeta, status="infinite",
                           checks={"diagnostic": "zeta* = 0, eff is unbounded"})
    value = 1 / zeta
    y_norm = sol.duals["norm"]
    if y_norm != zeta:
        raise CertificateError("normalization dual does not equal zeta*")
    cert = BellFunctional(p.scenario, {k: -sol.duals[names[k]] / zeta for k in keys})
    witness = [(st, sol.primal[f"w{i}"]) for i, st in enumerate(strategies) if sol.primal[f"w{i}"]]
    res = BoundResult(value, cert, beta=value, witness=witness, zeta=zeta)
    lmax = max_bell_over_ldet(cert, with_abort=True, budget=budget).value
    if lmax > 1:
        raise CertificateError(f"eff certificate has max B(l) over L_det^BOT = {lmax} > 1")
    res.checks["max B(l) over L_det^BOT"] = str(lmax)
    if eps is None:
        bp = evaluate(cert, p)
        if bp != value:
            raise CertificateError(f"eff certificate B(p) = {bp} != {value}")
        res.checks["B(p) = value"] = "pass"
    else:
        floor = robust_minimum(cert, p, eps)
        if floor < value:
            raise CertificateError(f"min B(p+Delta) = {floor} < beta = {value}")
        res.checks["min B(p+Delta) >= beta"] = str(floor)
    res.checks["primal = dual"] = "pass"
    if dual_check:
        other = eff_dual_value(p, budget)
        if eps is None and other != value:
            raise CertificateError(f"eff dual LP value {other} != primal value {value}")
        res.checks["standalone dual LP"] = str(other)
    return res


def eff(p: DistributionFamily, budget=None, dual_check: bool = False) -> BoundResult:
    """``eff(p) = 1/zeta*`` with ``zeta* = max zeta`` s.t. ``sum w_l l = zeta p``.

    With ``dual_check`` the dual program ``max B(p)`` s.t. ``B(l) <= 1`` is
    also solved as its own LP and the two values are compared.
    """
    return _eff_solve(p, None, budget, dual_check)


def eff_eps(p: DistributionFamily, eps, budget=None) -> BoundResult:
    """Efficiency bound with ``eps`` perturbation, through the rescaled primal LP."""
    return _eff_solve(p, _check_eps(eps), budget, False)


def eff_dual_value(p: DistributionFamily, budget=None) -> Fraction:
    """``max B(p)`` s.t. ``B(l) <= 1`` for every strategy that may abort."""
    scen = p.scenario.base()
    keys = scen.keys(include_abort=False)
    names = _key_names(keys)
    lp = LinearProgram("max", "eff_dual")
    for k in keys:
        lp.add_variable(names[k], "free", p.table[k])
    seen = set()
    for i, st in enumerate(ldet_list(scen, True, _budget(budget))):
        supp = tuple(sorted(names[k] for k in st.support() if k in names))
        if not supp or supp in seen:  # empty row reads 0 <= 1
            continue
        seen.add(supp)
        lp.add_constraint(f"l{i}", [(n, 1) for n in supp], "<=", 1)
    sol = solve(lp)
    _require_optimal(sol, "eff dual")
    return sol.objective


# ---------------------------------------------------------------- Delta polytope


def _block_points(k: int, half_eps: Fraction) -> list[tuple[Fraction, ...]]:
    zero = Fraction(0)
    pts = [tuple([zero] * k)]
    if half_eps == 0:
        return pts
    for i, j in itertools.permutations(range(k), 2):
        v = [zero] * k
        v[i], v[j] = half_eps, -half_eps
        pts.append(tuple(v))
    return pts


def count_delta_points(scenario: Scenario, eps) -> int:
    if as_fraction(eps) == 0:
        return 1
    k = len(scenario.outputs_a) * len(scenario.outputs_b)
    return (k * (k - 1) + 1) ** len(scenario.input_pairs())


def delta_extreme_points(scenario: Scenario, eps, budget=None) -> Iterator[NoisePolytopePoint]:
    """Stream the product of per-block points ``0`` and ``(eps/2)(e_i - e_j)``."""
    eps = as_fraction(eps)
    scen = scenario.base()
    total = count_delta_points(scen, eps)
    budget = _budget(budget)
    if total > budget:
        raise BudgetExceeded(total, budget, "perturbation points")
    outs = scen.outcome_pairs(False)
    pts = _block_points(len(outs), eps / 2)
    pairs = scen.input_pairs()
    for combo in itertools.product(pts, repeat=len(pairs)):
        delta = {}
        for (x, y), block in zip(pairs, combo):
            for (a, b), v in zip(outs, block):
                if v:
                    delta[a, b, x, y] = v
        yield NoisePolytopePoint(scen, delta)


def _delta_matrix(scen: Scenario, eps: Fraction, keys, budget) -> np.ndarray:
    """All perturbation points as rows, scaled by ``2/eps`` to entries in {-1, 0, 1}."""
    index = {k: i for i, k in enumerate(keys)}
    rows = []
    scale = 2 / eps
    for pt in delta_extreme_points(scen, eps, budget):
        r = [0] * len(keys)
        for k, v in pt.delta.items():
            r[index[k]] = int(v * scale)
        rows.append(r)
    return np.array(rows, dtype=np.int64)


def eff_eps_by_extreme_points(p: DistributionFamily, eps, budget=None, max_rounds: int = 10_000):
    """Reference value of the efficiency bound from the vertex form of the noise set.

    Solves ``min sum mu_l`` s.t. ``sum mu_l l = sum_D lam_D (p + D)``,
    ``sum lam_D = 1`` whose dual is ``max beta`` s.t. ``B(p + D) >= beta`` for
    every vertex ``D`` and ``B(l) <= 1``.  The ``lam`` columns are generated
    by scanning every vertex; the loop stops when none prices out, which is
    the exact optimality condition of the full program.

    Returns ``(value, B, rounds)``.
    """
    eps = _check_eps(eps)
    scen = p.scenario.base()
    keys = scen.keys(include_abort=False)
    names = _key_names(keys)
    strategies = ldet_list(scen, True, _budget(budget))
    dmat = _delta_matrix(scen, eps, keys, budget) if eps else np.zeros((1, len(keys)), dtype=np.int64)
    pvec = [p.table[k] for k in keys]
    active = [0]  # row 0 of dmat is the zero perturbation
    for rounds in range(1, max_rounds + 1):
        lp = LinearProgram("min", "eff_vertex_form")
        rows = {k: [] for k in keys}
        for i, st in enumerate(strategies):
            lp.add_variable(f"mu{i}", "nonneg", 1)
            for k in st.support():
                if k in rows:
                    rows[k].append((f"mu{i}", 1))
        for d in active:
            name = f"lam{d}"
            lp.add_variable(name)
            for j, k in enumerate(keys):
                v = pvec[j] + eps / 2 * int(dmat[d, j])
                if v:
                    rows[k].append((name, -v))
        for k in keys:
            lp.add_constraint(names[k], rows[k], "=", 0)
        lp.add_constraint("norm", [(f"lam{d}", 1) for d in active], "=", 1)
        sol = solve(lp)
        _require_optimal(sol, "vertex-form")
        y = [sol.duals[names[k]] for k in keys]
        pi = sol.duals["norm"]
        # reduced cost of lam_D is y.(p + D) - pi; scale to integers
        den = 1
        for v in y:
            den = math.lcm(den, v.denominator)
        yi = np.array([int(v * den) for v in y], dtype=object)
        yp = sum((a * b for a, b in zip(y, pvec)), Fraction(0))
        scores = dmat.astype(object).dot(yi)  # den * y.D * (2/eps)
        cut = (pi - yp) * den * (2 / eps) if eps else None
        entering = None
        if eps:
            order = np.argsort(scores.astype(float), kind="stable")
            for d in order[:64]:
                if scores[d] < cut and int(d) not in active:
                    entering = int(d)
                    break
            if entering is None:
                bad = [d for d in range(len(scores)) if scores[d] < cut and d not in active]
                entering = bad[0] if bad else None
        if entering is None:
            return sol.objective, BellFunctional(p.scenario, dict(zip(keys, y))), rounds
        active.append(entering)
    raise RuntimeError("column generation did not converge")


# ---------------------------------------------------------------- Q^BOT feasibility


@dataclass
class QeffCheck:
    feasible: bool
    bound: Fraction | None
    offending: tuple | None = None
    detail: str = ""


def check_qeff_feasible(p: DistributionFamily, q: DistributionFamily, zeta) -> QeffCheck:
    """Check ``q(a,b|x,y) = zeta p(a,b|x,y)`` on every non-abort key exactly."""
    zeta = as_fraction(zeta)
    if not p.scenario.compatible(q.scenario):
        raise ScenarioMismatch("p and q live in different scenarios")
    if zeta <= 0:
        return QeffCheck(False, None, None, "zeta must be positive")
    for k in p.scenario.keys(include_abort=False):
        if q.table[k] != zeta * p.table[k]:
            return QeffCheck(False, None, k, f"q{k} = {q.table[k]} but zeta*p = {zeta * p.table[k]}")
    return QeffCheck(True, 1 / zeta)
