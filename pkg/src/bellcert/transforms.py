"""Functional transformations: saturation, abort padding and stripping, the
inefficiency-resistance pipeline, and transcript lifting for noise resistance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .core import (
    BOT,
    BellFunctional,
    DistributionFamily,
    Scenario,
    evaluate,
    evaluate_full,
    is_abort,
    is_nonsignaling,
)
from .local import LocalDetStrategy, max_bell_over_ldet


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class MarginalPair:
    """Per-input output distributions for each party."""

    m_a: Mapping[str, Mapping[str, Fraction]]
    m_b: Mapping[str, Mapping[str, Fraction]]

    def __post_init__(self):
        for side, fam in (("A", self.m_a), ("B", self.m_b)):
            for inp, dist in fam.items():
                if any(v < 0 for v in dist.values()) or sum(dist.values()) != 1:
                    raise ValueError(f"m_{side}(.|{inp}) is not a distribution")

    @classmethod
    def from_strategy(cls, s: LocalDetStrategy) -> "MarginalPair":
        """Point masses of a non-aborting deterministic strategy."""
        if s.aborts():
            raise ValueError("marginals must be over non-abort outputs")
        sc = s.scenario
        one = Fraction(1)
        return cls(
            {x: {a: one} for x, a in zip(sc.inputs_a, s.map_a)},
            {y: {b: one} for y, b in zip(sc.inputs_b, s.map_b)},
        )


@dataclass
class Saturation:
    functional: BellFunctional
    lplus: LocalDetStrategy
    lminus: LocalDetStrategy
    top: Fraction  # M
    bottom: Fraction  # m
    abort_max_abs: Fraction | None = None  # max |B~(l)| over strategies that may abort


def saturate(b: BellFunctional, check_abort: bool = True) -> Saturation:
    """Affine rescale so the local range becomes exactly [-1, 1].

    ``B~ = (2B - M - m) / (M - m)`` where ``m, M`` are the extreme values of
    ``B`` on deterministic strategies.
    """
    hi = max_bell_over_ldet(b)
    lo = max_bell_over_ldet(b, minimize=True)
    top, bottom = hi.value, lo.value
    if top == bottom:
        raise TransformError(f"functional is constant ({top}) on L_det")
    width = top - bottom
    out = b.scale(Fraction(2) / width).plus_constant(-(top + bottom) / width)
    check = max_bell_over_ldet(out, absolute=True).value
    if check != 1:
        raise TransformError(f"saturated functional has local max-abs {check}")
    res = Saturation(out, hi.strategy, lo.strategy, top, bottom)
    if check_abort:
        res.abort_max_abs = max_bell_over_ldet(out, with_abort=True, absolute=True).value
    return res


def pad_abort(b: BellFunctional, m: MarginalPair) -> BellFunctional:
    """Put weight on abort events as if an abort were replaced by a sample of ``m``."""
    if b.has_abort_coefficients():
        raise TransformError("pad_abort expects a functional without abort coefficients")
    base = b.scenario.base()
    scen = base.with_abort()
    out = dict(b.coeffs)
    for x, y in base.input_pairs():
        ma, mb = m.m_a[x], m.m_b[y]
        for bb in base.outputs_b:
            v = sum((w * b[a, bb, x, y] for a, w in ma.items()), Fraction(0))
            if v:
                out[BOT, bb, x, y] = v
        for a in base.outputs_a:
            v = sum((w * b[a, bb, x, y] for bb, w in mb.items()), Fraction(0))
            if v:
                out[a, BOT, x, y] = v
        v = sum(
            (wa * wb * b[a, bb, x, y] for a, wa in ma.items() for bb, wb in mb.items()),
            Fraction(0),
        )
        if v:
            out[BOT, BOT, x, y] = v
    return BellFunctional(scen, out)


def strip_abort(b: BellFunctional) -> BellFunctional:
    """``B''_{ab} = B'_{ab} - B'_{a,BOT} - B'_{BOT,b} + B'_{BOT,BOT}``; zero on aborts."""
    scen = b.scenario.with_abort()
    out = {}
    for a, bb, x, y in scen.keys(include_abort=False):
        out[a, bb, x, y] = b[a, bb, x, y] - b[a, BOT, x, y] - b[BOT, bb, x, y] + b[BOT, BOT, x, y]
    return BellFunctional(scen, out)


def _with_abort(p: DistributionFamily) -> DistributionFamily:
    return p if p.scenario.abort_allowed else p.embed(p.scenario.with_abort())


def abort_bob(p: DistributionFamily) -> DistributionFamily:
    """``p_{A,BOT}``: Bob replaces every output by the abort symbol."""
    p = _with_abort(p)
    s = p.scenario
    table = {}
    for x, y in s.input_pairs():
        for a in s.full_outputs_a:
            table[a, BOT, x, y] = sum(p.table[a, bb, x, y] for bb in s.full_outputs_b)
    return DistributionFamily(s, table, check=p.check)


def abort_alice(p: DistributionFamily) -> DistributionFamily:
    """``p_{BOT,B}``: Alice replaces every output by the abort symbol."""
    p = _with_abort(p)
    s = p.scenario
    table = {}
    for x, y in s.input_pairs():
        for bb in s.full_outputs_b:
            table[BOT, bb, x, y] = sum(p.table[a, bb, x, y] for a in s.full_outputs_a)
    return DistributionFamily(s, table, check=p.check)


def always_abort(scenario: Scenario) -> DistributionFamily:
    s = scenario.with_abort()
    return DistributionFamily(s, {(BOT, BOT, x, y): Fraction(1) for x, y in s.input_pairs()})


def strip_identity(b: BellFunctional, p: DistributionFamily) -> tuple[Fraction, Fraction]:
    """Both sides of the stripping identity, computed independently.

    Left: ``B''(p)``.  Right: ``B'(p) - B'(p_{A,BOT}) - B'(p_{BOT,B}) + B'(p_{BOT,BOT})``,
    all under the full (abort-including) evaluation.
    """
    p = _with_abort(p)
    left = evaluate_full(strip_abort(b), p)
    right = (
        evaluate_full(b, p)
        - evaluate_full(b, abort_bob(p))
        - evaluate_full(b, abort_alice(p))
        + evaluate_full(b, always_abort(p.scenario))
    )
    return left, right


@dataclass
class ResistancePipeline:
    source: BellFunctional
    saturation: Saturation
    pad_minus: BellFunctional
    pad_plus: BellFunctional
    averaged: BellFunctional  # B'
    stripped: BellFunctional  # B''
    result: BellFunctional  # B* = B''/3
    checks: dict[str, str] = field(default_factory=dict)


def resistance_pipeline(b: BellFunctional, p: DistributionFamily, budget=None) -> ResistancePipeline:
    """Saturate, pad with both extreme strategies, average, strip, divide by 3.

    Both guarantees are re-verified before returning:
    ``B*(p) >= B(p)/3 - 2/3`` and ``|B*(l)| <= 1`` on every strategy that may abort.
    """
    if b.has_abort_coefficients():
        raise TransformError("input functional must not weight abort events")
    local = max_bell_over_ldet(b, absolute=True, budget=budget).value
    if local > 1:
        raise TransformError(f"input is not normalized: max |B(l)| = {local}")
    if p.scenario.abort_allowed:
        raise TransformError("p must be a family without abort outcomes")
    ok, wit = is_nonsignaling(p)
    if not ok:
        raise TransformError(f"p is signaling, witness {wit}")
    bp = evaluate(b, p)
    if bp < 1:
        raise TransformError(f"B(p) = {bp} < 1")

    sat = saturate(b, check_abort=False)
    bt = sat.functional
    pm = pad_abort(bt, MarginalPair.from_strategy(sat.lminus))
    pp = pad_abort(bt, MarginalPair.from_strategy(sat.lplus))
    avg = (pm + pp).scale(Fraction(1, 2))
    stripped = strip_abort(avg)
    star = stripped.scale(Fraction(1, 3))
    res = ResistancePipeline(b, sat, pm, pp, avg, stripped, star)

    corner = evaluate_full(avg, always_abort(b.scenario))
    if corner != 0:
        raise TransformError(f"B'(p_BOT,BOT) = {corner}, expected 0")
    res.checks["B'(p_BOT,BOT) = 0"] = "pass"
    if star.has_abort_coefficients():
        raise TransformError("B* carries abort coefficients")
    worst = max_bell_over_ldet(star, with_abort=True, absolute=True, budget=budget).value
    if worst > 1:
        raise TransformError(f"max |B*(l)| over L_det^BOT = {worst} > 1")
    res.checks["max |B*(l)| over L_det^BOT"] = str(worst)
    got = evaluate(star, p)
    floor = bp / 3 - Fraction(2, 3)
    if got < floor:
        raise TransformError(f"B*(p) = {got} < B(p)/3 - 2/3 = {floor}")
    res.checks["B*(p) >= B(p)/3 - 2/3"] = f"{got} >= {floor}"
    return res


def make_inefficiency_resistant(b: BellFunctional, p: DistributionFamily, budget=None) -> BellFunctional:
    return resistance_pipeline(b, p, budget).result


# ---------------------------------------------------------------- lifting


def transcript_labels(spec) -> tuple[str, ...]:
    """Accept a size or an explicit label sequence; the first label is the zero transcript."""
    if isinstance(spec, int):
        if spec < 1:
            raise TransformError("transcript set must be non-empty")
        return tuple(str(i) for i in range(spec))
    labels = tuple(str(t) for t in spec)
    if not labels:
        raise TransformError("transcript set has no zero label")
    return labels


def lift_label(out: str, transcript: str) -> str:
    return f"{out}|{transcript}"


def lifted_scenario(scen: Scenario, m_a, m_b) -> Scenario:
    ta, tb = transcript_labels(m_a), transcript_labels(m_b)
    return Scenario(
        scen.inputs_a,
        scen.inputs_b,
        [lift_label(a, t) for a in scen.outputs_a for t in ta],
        [lift_label(b, t) for b in scen.outputs_b for t in tb],
        scen.abort_allowed,
    )


def lift_noise_resistant(b: BellFunctional, transcripts: tuple[Sequence[str] | int, Sequence[str] | int]) -> BellFunctional:
    """Coefficients move to the zero-transcript outputs; everything else is zero."""
    m_a, m_b = transcripts
    ta, tb = transcript_labels(m_a), transcript_labels(m_b)
    scen = lifted_scenario(b.scenario, ta, tb)
    coeffs = {}
    for (a, bb, x, y), v in b.coeffs.items():
        if is_abort((a, bb, x, y)):
            continue
        coeffs[lift_label(a, ta[0]), lift_label(bb, tb[0]), x, y] = v
    return BellFunctional(scen, coeffs)


def lift_distribution_zero(p: DistributionFamily, m_a, m_b) -> DistributionFamily:
    """Place ``p`` on the zero transcripts only (an unchecked, sub-normalized table)."""
    ta, tb = transcript_labels(m_a), transcript_labels(m_b)
    scen = lifted_scenario(p.scenario, ta, tb)
    table = {
        (lift_label(a, ta[0]), lift_label(bb, tb[0]), x, y): v
        for (a, bb, x, y), v in p.table.items()
        if not is_abort((a, bb, x, y))
    }
    return DistributionFamily(scen, table, check=False)
