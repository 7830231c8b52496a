"""Violation reports: exact values with verdicts, rendered as text and TSV."""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .core import BellFunctional, DistributionFamily, evaluate, mix_uniform
from .local import max_bell_over_ldet


def fmt(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


def dec(v: Fraction) -> str:
    return f"{float(v):.12g}"


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class ReportRow:
    name: str
    value: Fraction | None
    verdict: str
    note: str = ""


@dataclass
class Report:
    title: str
    inputs: list[tuple[str, str, str]] = field(default_factory=list)  # role, path, digest
    settings: dict = field(default_factory=dict)
    rows: list[ReportRow] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def add(self, name, value, verdict, note=""):
        self.rows.append(ReportRow(name, value, verdict, note))

    @property
    def ok(self) -> bool:
        return all(r.verdict not in ("fail",) for r in self.rows)

    def render_text(self) -> str:
        lines = [f"== {self.title} =="]
        for role, path, digest in self.inputs:
            lines.append(f"input {role}: {path} sha256={digest}")
        for k, v in self.settings.items():
            lines.append(f"setting {k}: {v}")
        for r in self.rows:
            val = "-" if r.value is None else f"{fmt(r.value)} ({dec(r.value)})"
            extra = f"  [{r.note}]" if r.note else ""
            lines.append(f"{r.name}: {val}  {r.verdict}{extra}")
        for k, v in self.timing.items():
            lines.append(f"time {k}: {v:.3f}s")
        lines.append(f"overall: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def render_tsv(self) -> str:
        out = ["# " + self.title]
        for role, path, digest in self.inputs:
            out.append(f"# input\t{role}\t{path}\t{digest}")
        for k, v in self.settings.items():
            out.append(f"# setting\t{k}\t{v}")
        out.append("quantity\texact\tdecimal\tverdict\tnote")
        for r in self.rows:
            exact = "" if r.value is None else fmt(r.value)
            decimal = "" if r.value is None else dec(r.value)
            out.append(f"{r.name}\t{exact}\t{decimal}\t{r.verdict}\t{r.note}")
        for k, v in self.timing.items():
            out.append(f"# time\t{k}\t{v:.3f}")
        return "\n".join(out) + "\n"


@dataclass
class ViolationData:
    report: Report
    deltas: list[Fraction]
    curve: list[Fraction]
    local_max: Fraction


def violation_report(p: DistributionFamily | None, b: BellFunctional, q: DistributionFamily,
                     inputs=(), settings=None, delta_points: int = 8, delta_max=Fraction(1, 2),
                     budget=None, timing: bool = False) -> ViolationData:
    """``B(q)``, the maximum of ``B`` over strategies that may abort, and their ratio.

    The violation verdict passes when ``B(q)`` exceeds that maximum.  A
    uniform-noise sweep ``B((1-d) q + d u)`` over ``delta_points`` values is
    included for the figure.
    """
    rep = Report("violation report")
    rep.inputs = list(inputs)
    rep.settings = dict(settings or {})
    clock = time.perf_counter()
    bq = evaluate(b, q)
    rep.add("B(q)", bq, "exact")
    lm = max_bell_over_ldet(b, with_abort=True, budget=budget)
    rep.add("max B(l) over L_det^BOT", lm.value, "enumerated", f"{lm.count} strategies; witness {lm.strategy.describe()}")
    if p is not None:
        if p.scenario.compatible(b.scenario):
            rep.add("B(p)", evaluate(b, p), "exact")
        else:
            rep.add("B(p)", None, "skipped", "p and B use different output sets")
    if lm.value > 0:
        ratio = bq / lm.value
        rep.add("ratio B(q)/max", ratio, "pass" if ratio > 1 else "fail", "violation iff ratio > 1")
    else:
        rep.add("ratio B(q)/max", None, "pass" if bq > lm.value else "fail",
                "local maximum is not positive; verdict compares B(q) with it")
    deltas, curve = [], []
    n = max(2, delta_points)
    delta_max = Fraction(delta_max)
    for i in range(n):
        d = delta_max * i / (n - 1)
        v = evaluate(b, mix_uniform(q, d)) if not q.scenario.abort_allowed else None
        if v is None:
            break
        deltas.append(d)
        curve.append(v)
        rep.add(f"B(q) at noise {fmt(d)}", v, "exact", "above local max" if v > lm.value else "not above local max")
    if timing:
        rep.timing["total"] = time.perf_counter() - clock
    return ViolationData(rep, deltas, curve, lm.value)
