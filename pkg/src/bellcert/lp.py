"""Exact rational linear programming with primal and dual certificates.

A revised simplex method over :class:`gmpy2.mpq` with an explicit basis
inverse.  Entering columns follow Bland's smallest-index rule, which cannot
cycle, so the method always terminates.  Setting ``DEGENERATE_RUN`` above
zero switches to Dantzig's rule until that many degenerate pivots in a row
have been seen.  Phase 1 minimizes the sum of artificial variables and its duals
give a Farkas certificate when the program is infeasible.

Dual sign conventions (checked by :func:`verify_solution`):

* ``max``: duals are ``>= 0`` on ``<=`` rows, ``<= 0`` on ``>=`` rows; every
  column satisfies ``c_j - y.A_j <= 0`` (nonneg), ``= 0`` (free), ``>= 0``
  (nonpos).
* ``min``: the mirror image (``<=`` rows ``<= 0``, ``>=`` rows ``>= 0``,
  nonneg columns ``c_j - y.A_j >= 0``).
* Farkas vector ``y`` for an infeasible program: ``<=`` rows ``<= 0``, ``>=``
  rows ``>= 0``; ``y.A_j <= 0`` for nonneg columns, ``= 0`` for free ones,
  ``>= 0`` for nonpos ones; and ``y.b > 0``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from gmpy2 import mpq

from .core import as_fraction

OPS = ("<=", ">=", "=")
SIGNS = ("nonneg", "free", "nonpos")

DEFAULT_PIVOT_CAP = 200_000
# Bland from the first pivot; the strategy-weight LPs here are highly
# degenerate and Dantzig pricing mostly adds full scans
DEGENERATE_RUN = 0


class LpError(ValueError):
    pass


def _q(v) -> mpq:
    if isinstance(v, Fraction):
        return mpq(v.numerator, v.denominator)
    return mpq(v)


def _frac(v: mpq) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, Fraction]
    op: str
    rhs: Fraction


class LinearProgram:
    """A named LP model; standard-form conversion happens inside :func:`solve`."""

    def __init__(self, sense: str = "max", name: str = "lp"):
        if sense not in ("max", "min"):
            raise LpError(f"sense must be 'max' or 'min', got {sense!r}")
        self.sense = sense
        self.name = name
        self.var_names: list[str] = []
        self.var_signs: list[str] = []
        self.objective: dict[int, Fraction] = {}
        self.constraints: list[Constraint] = []
        self._var_index: dict[str, int] = {}
        self._row_index: dict[str, int] = {}

    def add_variable(self, name: str, sign: str = "nonneg", objective=0) -> str:
        if sign not in SIGNS:
            raise LpError(f"unknown sign constraint {sign!r}")
        if name in self._var_index:
            raise LpError(f"duplicate variable {name!r}")
        self._var_index[name] = len(self.var_names)
        self.var_names.append(name)
        self.var_signs.append(sign)
        c = as_fraction(objective)
        if c:
            self.objective[self._var_index[name]] = c
        return name

    def set_objective(self, coeffs: Mapping[str, object]) -> None:
        self.objective = {}
        for v, c in coeffs.items():
            c = as_fraction(c)
            if c:
                self.objective[self.var(v)] = c

    def var(self, name: str) -> int:
        try:
            return self._var_index[name]
        except KeyError:
            raise LpError(f"undeclared variable {name!r}") from None

    def add_constraint(self, name: str, coeffs, op: str, rhs=0) -> str:
        """``coeffs`` is a mapping or an iterable of ``(variable, coef)`` pairs."""
        if op not in OPS:
            raise LpError(f"unknown constraint sense {op!r}")
        if name in self._row_index:
            raise LpError(f"duplicate constraint {name!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        row: dict[int, Fraction] = {}
        for v, c in items:
            j = self.var(v)
            if j in row:
                raise LpError(f"constraint {name!r}: duplicate coefficient for {v!r}")
            c = as_fraction(c)
            if c:
                row[j] = c
        self._row_index[name] = len(self.constraints)
        self.constraints.append(Constraint(name, row, op, as_fraction(rhs)))
        return name

    @property
    def num_variables(self) -> int:
        return len(self.var_names)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def to_lp_text(self) -> str:
        """CPLEX-style LP text.  Each row is scaled to integer coefficients, so
        the dump is exact; the objective is scaled likewise (noted in a comment).
        """

        def clean(n: str) -> str:
            return re.sub(r"[^A-Za-z0-9_.]", "_", n)

        def terms(row: Mapping[int, Fraction], scale: int) -> str:
            parts = []
            for j in sorted(row):
                c = row[j] * scale
                sgn = "-" if c < 0 else "+"
                parts.append(f"{sgn} {abs(c.numerator)} {clean(self.var_names[j])}")
            text = " ".join(parts) if parts else "0 " + clean(self.var_names[0])
            return text[2:] if text.startswith("+ ") else text

        def lcm_of(values) -> int:
            out = 1
            for v in values:
                out = math.lcm(out, v.denominator)
            return out

        lines = [f"\\ {self.name}"]
        oscale = lcm_of(self.objective.values())
        if oscale != 1:
            lines.append(f"\\ objective multiplied by {oscale}")
        lines.append("Maximize" if self.sense == "max" else "Minimize")
        lines.append(" obj: " + terms(self.objective, oscale))
        lines.append("Subject To")
        for con in self.constraints:
            s = lcm_of(list(con.coeffs.values()) + [con.rhs])
            rhs = con.rhs * s
            lines.append(f" {clean(con.name)}: {terms(con.coeffs, s)} {con.op} {rhs.numerator}")
        lines.append("Bounds")
        for n, sign in zip(self.var_names, self.var_signs):
            if sign == "free":
                lines.append(f" {clean(n)} free")
            elif sign == "nonpos":
                lines.append(f" -inf <= {clean(n)} <= 0")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | limit
    objective: Fraction | None = None
    primal: dict[str, Fraction] = field(default_factory=dict)
    duals: dict[str, Fraction] = field(default_factory=dict)
    dual_objective: Fraction | None = None
    farkas: dict[str, Fraction] = field(default_factory=dict)
    ray: dict[str, Fraction] = field(default_factory=dict)
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Standard:
    """``max c.x  s.t.  A x = b,  x >= 0,  b >= 0`` built from a model."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        m = lp.num_constraints
        self.m = m
        self.cols: list[list[tuple[int, mpq]]] = []
        self.cost: list[mpq] = []
        # column -> (kind, payload): ("var", j, sign multiplier) | ("slack", row) | ("art", row)
        self.origin: list[tuple] = []
        flip = [con.rhs < 0 for con in lp.constraints]
        self.row_sign = [-1 if f else 1 for f in flip]
        self.b = [_q(abs(con.rhs)) for con in lp.constraints]
        obj_sign = 1 if lp.sense == "max" else -1

        by_var: list[list[tuple[int, Fraction]]] = [[] for _ in range(lp.num_variables)]
        for r, con in enumerate(lp.constraints):
            for j, c in con.coeffs.items():
                by_var[j].append((r, c))

        for j, sign in enumerate(lp.var_signs):
            mults = {"nonneg": (1,), "nonpos": (-1,), "free": (1, -1)}[sign]
            for mult in mults:
                col = [(r, _q(c * mult * self.row_sign[r])) for r, c in by_var[j]]
                self.cols.append(col)
                self.cost.append(_q(obj_sign * mult * lp.objective.get(j, 0)))
                self.origin.append(("var", j, mult))
        self.n_struct = len(self.cols)

        self.basis: list[int] = [-1] * m
        for r, con in enumerate(lp.constraints):
            if con.op == "=":
                continue
            coef = (1 if con.op == "<=" else -1) * self.row_sign[r]
            self.cols.append([(r, mpq(coef))])
            self.cost.append(mpq(0))
            self.origin.append(("slack", r))
            if coef == 1:
                self.basis[r] = len(self.cols) - 1
        self.n_real = len(self.cols)
        for r in range(m):
            if self.basis[r] == -1:
                self.cols.append([(r, mpq(1))])
                self.cost.append(mpq(0))
                self.origin.append(("art", r))
                self.basis[r] = len(self.cols) - 1
        self.n = len(self.cols)
        self.is_art = [o[0] == "art" for o in self.origin]


class _Simplex:
    def __init__(self, std: _Standard, pivot_cap: int):
        self.s = std
        m = std.m
        self.binv = [[mpq(1) if i == k else mpq(0) for k in range(m)] for i in range(m)]
        self.xb = list(std.b)
        self.pivots = 0
        self.cap = pivot_cap
        self.in_basis = [False] * std.n
        for j in std.basis:
            self.in_basis[j] = True

    def duals(self, cost) -> list[mpq]:
        m = self.s.m
        y = [mpq(0)] * m
        for i, j in enumerate(self.s.basis):
            cb = cost[j]
            if cb:
                row = self.binv[i]
                for k in range(m):
                    if row[k]:
                        y[k] += cb * row[k]
        return y

    def column(self, j) -> list[mpq]:
        m = self.s.m
        u = [mpq(0)] * m
        for r, a in self.s.cols[j]:
            for i in range(m):
                bi = self.binv[i][r]
                if bi:
                    u[i] += bi * a
        return u

    def pivot(self, r: int, j: int, u: list[mpq]):
        m = self.s.m
        piv = u[r]
        row_r = [v / piv for v in self.binv[r]]
        self.binv[r] = row_r
        t = self.xb[r] / piv
        for i in range(m):
            if i != r and u[i]:
                ui = u[i]
                row_i = self.binv[i]
                self.binv[i] = [a - ui * b if b else a for a, b in zip(row_i, row_r)]
                self.xb[i] -= ui * t
        self.xb[r] = t
        self.in_basis[self.s.basis[r]] = False
        self.s.basis[r] = j
        self.in_basis[j] = True
        self.pivots += 1

    def run(self, cost, allowed) -> str:
        """Maximize ``cost . x`` over columns with ``allowed[j]``."""
        s = self.s
        degenerate = 0
        while True:
            if self.pivots >= self.cap:
                return "limit"
            y = self.duals(cost)
            live = {r: v for r, v in enumerate(y) if v}
            bland = degenerate >= DEGENERATE_RUN
            enter, best = -1, mpq(0)
            for j in range(s.n):
                if self.in_basis[j] or not allowed[j]:
                    continue
                d = cost[j]
                for r, a in s.cols[j]:
                    if r in live:
                        d -= live[r] * a
                if d > 0:
                    if bland:
                        enter = j
                        break
                    if d > best:
                        enter, best = j, d
            if enter < 0:
                return "optimal"
            u = self.column(enter)
            leave, ratio = -1, None
            for i in range(s.m):
                if u[i] > 0:
                    t = self.xb[i] / u[i]
                    if (
                        ratio is None
                        or t < ratio
                        or (t == ratio and s.basis[i] < s.basis[leave])
                    ):
                        leave, ratio = i, t
            if leave < 0:
                self.unbounded_column = (enter, u)
                return "unbounded"
            degenerate = degenerate + 1 if ratio == 0 else 0
            self.pivot(leave, enter, u)

    def drive_out_artificials(self):
        s = self.s
        for r in range(s.m):
            if not s.is_art[s.basis[r]]:
                continue
            row = self.binv[r]
            for j in range(s.n_real):
                if self.in_basis[j]:
                    continue
                val = sum((row[i] * a for i, a in s.cols[j]), mpq(0))
                if val:
                    self.pivot(r, j, self.column(j))
                    break


def _map_row_vector(std: _Standard, y: list[mpq], factor: int = 1) -> dict[str, Fraction]:
    return {
        con.name: _frac(factor * std.row_sign[r] * y[r]) for r, con in enumerate(std.lp.constraints)
    }


def _primal_values(std: _Standard, x: dict[int, mpq]) -> dict[str, Fraction]:
    vals = [mpq(0)] * std.lp.num_variables
    for col, v in x.items():
        kind = std.origin[col]
        if kind[0] == "var":
            vals[kind[1]] += kind[2] * v
    return {n: _frac(v) for n, v in zip(std.lp.var_names, vals)}


def solve(lp: LinearProgram, pivot_cap: int = DEFAULT_PIVOT_CAP, verify: bool = True) -> LpSolution:
    """Solve exactly.  Optimal solutions carry duals with matching objective."""
    std = _Standard(lp)
    sx = _Simplex(std, pivot_cap)
    n_art = std.n - std.n_real

    if n_art:
        phase1_cost = [mpq(-1) if a else mpq(0) for a in std.is_art]
        status = sx.run(phase1_cost, [True] * std.n)
        if status == "limit":
            return LpSolution("limit", pivots=sx.pivots)
        infeas = -sum((phase1_cost[j] * sx.xb[i] for i, j in enumerate(std.basis)), mpq(0))
        if infeas > 0:
            y = sx.duals(phase1_cost)
            sol = LpSolution("infeasible", farkas=_map_row_vector(std, y, factor=-1), pivots=sx.pivots)
            if verify:
                verify_solution(lp, sol)
            return sol
        sx.drive_out_artificials()

    allowed = [not a for a in std.is_art]
    status = sx.run(std.cost, allowed)
    if status == "limit":
        return LpSolution("limit", pivots=sx.pivots)

    x = {j: sx.xb[i] for i, j in enumerate(std.basis) if sx.xb[i]}
    primal = _primal_values(std, x)
    if status == "unbounded":
        enter, u = sx.unbounded_column
        d = {enter: mpq(1)}
        for i, j in enumerate(std.basis):
            if u[i]:
                d[j] = d.get(j, mpq(0)) - u[i]
        sol = LpSolution("unbounded", primal=primal, ray=_primal_values(std, d), pivots=sx.pivots)
        if verify:
            verify_solution(lp, sol)
        return sol

    y = sx.duals(std.cost)
    factor = 1 if lp.sense == "max" else -1
    duals = _map_row_vector(std, y, factor=factor)
    obj = sum((c * primal[lp.var_names[j]] for j, c in lp.objective.items()), Fraction(0))
    dual_obj = sum((duals[con.name] * con.rhs for con in lp.constraints), Fraction(0))
    sol = LpSolution("optimal", obj, primal, duals, dual_obj, pivots=sx.pivots)
    if verify:
        verify_solution(lp, sol)
    return sol


def _column_products(lp: LinearProgram, y: Mapping[str, Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * lp.num_variables
    for con in lp.constraints:
        yr = y[con.name]
        if yr:
            for j, a in con.coeffs.items():
                out[j] += yr * a
    return out


def verify_solution(lp: LinearProgram, sol: LpSolution) -> None:
    """Check the certificate carried by ``sol`` exactly; raise LpError if broken."""
    if sol.status == "optimal":
        _check_primal(lp, sol.primal)
        ya = _column_products(lp, sol.duals)
        flip = 1 if lp.sense == "max" else -1
        for con in lp.constraints:
            y = flip * sol.duals[con.name]
            if (con.op == "<=" and y < 0) or (con.op == ">=" and y > 0):
                raise LpError(f"dual sign violated on row {con.name!r}")
        for j, sign in enumerate(lp.var_signs):
            d = flip * (lp.objective.get(j, Fraction(0)) - ya[j])
            if (sign == "nonneg" and d > 0) or (sign == "nonpos" and d < 0) or (sign == "free" and d != 0):
                raise LpError(f"dual constraint violated at column {lp.var_names[j]!r}")
        if sol.objective != sol.dual_objective:
            raise LpError(f"duality gap: primal {sol.objective} vs dual {sol.dual_objective}")
    elif sol.status == "infeasible":
        y = sol.farkas
        for con in lp.constraints:
            v = y[con.name]
            if (con.op == "<=" and v > 0) or (con.op == ">=" and v < 0):
                raise LpError(f"Farkas sign violated on row {con.name!r}")
        ya = _column_products(lp, y)
        for j, sign in enumerate(lp.var_signs):
            if (sign == "nonneg" and ya[j] > 0) or (sign == "nonpos" and ya[j] < 0) or (
                sign == "free" and ya[j] != 0
            ):
                raise LpError(f"Farkas column condition violated at {lp.var_names[j]!r}")
        if not sum((y[c.name] * c.rhs for c in lp.constraints), Fraction(0)) > 0:
            raise LpError("Farkas certificate has y.b <= 0")
    elif sol.status == "unbounded":
        _check_primal(lp, sol.primal)
        d = sol.ray
        for con in lp.constraints:
            ad = sum((a * d[lp.var_names[j]] for j, a in con.coeffs.items()), Fraction(0))
            if (con.op == "<=" and ad > 0) or (con.op == ">=" and ad < 0) or (con.op == "=" and ad != 0):
                raise LpError(f"ray leaves row {con.name!r}")
        for n, sign in zip(lp.var_names, lp.var_signs):
            if (sign == "nonneg" and d[n] < 0) or (sign == "nonpos" and d[n] > 0):
                raise LpError(f"ray violates the sign of {n!r}")
        gain = sum((c * d[lp.var_names[j]] for j, c in lp.objective.items()), Fraction(0))
        if (lp.sense == "max" and gain <= 0) or (lp.sense == "min" and gain >= 0):
            raise LpError("ray does not improve the objective")


def _check_primal(lp: LinearProgram, x: Mapping[str, Fraction]) -> None:
    for n, sign in zip(lp.var_names, lp.var_signs):
        if (sign == "nonneg" and x[n] < 0) or (sign == "nonpos" and x[n] > 0):
            raise LpError(f"primal value of {n!r} has the wrong sign")
    for con in lp.constraints:
        ax = sum((a * x[lp.var_names[j]] for j, a in con.coeffs.items()), Fraction(0))
        if (con.op == "<=" and ax > con.rhs) or (con.op == ">=" and ax < con.rhs) or (
            con.op == "=" and ax != con.rhs
        ):
            raise LpError(f"primal row {con.name!r} violated: {ax} {con.op} {con.rhs}")


def lp_from_arrays(sense: str, c: Iterable, rows: Iterable[tuple[Iterable, str, object]],
                   signs: Iterable[str] | None = None) -> LinearProgram:
    """Small convenience constructor used by tests and the CLI dump."""
    c = list(c)
    lp = LinearProgram(sense)
    signs = list(signs) if signs is not None else ["nonneg"] * len(c)
    for j, (cj, sg) in enumerate(zip(c, signs)):
        lp.add_variable(f"x{j}", sg, cj)
    for i, (coefs, op, rhs) in enumerate(rows):
        lp.add_constraint(f"r{i}", [(f"x{j}", a) for j, a in enumerate(coefs) if a], op, rhs)
    return lp
