"""Command-line front end.

Exit codes: 0 all requested verifications passed, 1 a verification failed,
2 malformed input, 3 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .bounds import CertificateError, eff, eff_eps, nu, nu_eps
from .core import BellFunctional, DistributionFamily, evaluate, random_perturbation
from .corruption import (
    CertificateInvalid,
    build_bell,
    read_certificate,
    robustness_bound,
    tighten_certificate,
    verify_rectangle_condition,
    write_certificate,
)
from .io import FormatError, dump_json, parse_rational, read_distribution, read_functional, write_distribution, write_functional
from .local import BUDGET_ENV, BudgetExceeded, default_budget, max_bell_over_ldet
from .problems import InstanceTooLarge, disj, ort, toy_catalog, tribes
from .quantum import compile_violation, eval_strategy, read_strategy, tsirelson_strategy, write_strategy
from .report import dec, fmt, sha256_file, violation_report
from .transforms import (
    MarginalPair,
    TransformError,
    lift_noise_resistant,
    pad_abort,
    resistance_pipeline,
    saturate,
    strip_abort,
)


def show(v: Fraction) -> str:
    return f"{fmt(v)} ({dec(v)})"


def _common(p: argparse.ArgumentParser):
    p.add_argument("--budget", type=int, default=None,
                   help=f"enumeration budget (default ${BUDGET_ENV} or {default_budget()})")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    p.add_argument("--jobs", type=int, default=1, help="worker cap (computations here are single-threaded)")


def _out_dir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------- bounds


def cmd_nu(args) -> int:
    p = read_distribution(args.p)
    res = nu(p, args.budget) if args.eps is None else nu_eps(p, args.eps, args.budget)
    label = "nu(p)" if args.eps is None else f"nu_{fmt(args.eps)}(p)"
    print(f"{label} = {show(res.value)}")
    for k, v in res.checks.items():
        print(f"check {k}: {v}")
    if args.witness:
        for st, c in res.witness:
            print(f"witness {fmt(c)} * {st.describe()}")
    if args.certificate:
        write_functional(res.certificate, args.certificate)
        print(f"certificate written to {args.certificate}")
    return 0


def cmd_eff(args) -> int:
    p = read_distribution(args.p)
    if args.eps is None:
        res = eff(p, args.budget, dual_check=args.dual_check)
        label = "eff(p)"
    else:
        res = eff_eps(p, args.eps, args.budget)
        label = f"eff_{fmt(args.eps)}(p)"
    if res.value is None:
        print(f"{label} = +inf ({res.checks.get('diagnostic', '')})")
        return 1
    print(f"{label} = {show(res.value)}")
    print(f"beta = {show(res.beta)}")
    print(f"zeta* = {show(res.zeta)}")
    for k, v in res.checks.items():
        print(f"check {k}: {v}")
    if args.witness:
        for st, w in res.witness:
            print(f"witness {fmt(w)} * {st.describe()}")
    if args.certificate:
        write_functional(res.certificate, args.certificate)
        print(f"certificate written to {args.certificate}")
    return 0


def cmd_ldet(args) -> int:
    b = read_functional(args.b)
    res = max_bell_over_ldet(b, with_abort=args.with_abort, absolute=args.absolute, budget=args.budget)
    what = "max |B(l)|" if args.absolute else "max B(l)"
    where = "L_det^BOT" if args.with_abort else "L_det"
    print(f"{what} over {where} = {show(res.value)}")
    print(f"witness: {res.strategy.describe()}")
    print(f"strategies: {res.count}")
    return 0


# ---------------------------------------------------------------- transforms


def cmd_transform(args) -> int:
    b = read_functional(args.input)
    p = read_distribution(args.p) if args.p else None
    steps = [s.strip() for s in args.pipeline.split(",") if s.strip()]
    for step in steps:
        if step == "saturate":
            sat = saturate(b)
            print(f"saturate: m = {show(sat.bottom)}, M = {show(sat.top)}; "
                  f"l- = {sat.lminus.describe()}, l+ = {sat.lplus.describe()}")
            b = sat.functional
        elif step == "pad":
            lo = max_bell_over_ldet(b, minimize=True, budget=args.budget)
            b = pad_abort(b, MarginalPair.from_strategy(lo.strategy))
            print(f"pad: marginals of {lo.strategy.describe()}")
        elif step == "strip":
            b = strip_abort(b)
            print("strip: abort coefficients removed")
        elif step == "resist":
            if p is None:
                raise TransformError("the resist step needs --p")
            res = resistance_pipeline(b, p, args.budget)
            for k, v in res.checks.items():
                print(f"check {k}: {v}")
            b = res.result
        elif step == "lift":
            ma, mb = (int(t) for t in args.transcripts.split(","))
            b = lift_noise_resistant(b, (ma, mb))
            print(f"lift: {ma} x {mb} transcripts")
        else:
            raise TransformError(f"unknown pipeline step {step!r}")
    if p is not None and p.scenario.compatible(b.scenario):
        print(f"B(p) = {show(evaluate(b, p))}")
    if args.out:
        write_functional(b, args.out)
        print(f"functional written to {args.out}")
    return 0


# ---------------------------------------------------------------- corruption


def cmd_corruption(args) -> int:
    cert = read_certificate(args.cert)
    if args.action == "verify":
        chk = verify_rectangle_condition(cert, args.mode, args.samples, args.seed, args.budget)
        tag = "certifying" if chk.certifying else "NON-CERTIFYING (sampled)"
        print(f"mode: {chk.mode}, {tag}, rectangles checked: {chk.rectangles}")
        print(f"worst rectangle: R_A = {list(chk.worst_rows)}, R_B = {list(chk.worst_cols)}")
        print(f"max excess = {show(chk.excess)}")
        if chk.slack is not None:
            print(f"slack g - excess = {show(chk.slack)}")
        print("verdict:", "pass" if chk.passed else "fail")
        return 0 if chk.passed else 1
    if args.action == "tighten":
        gammas = [parse_rational(t) for t in args.gammas.split(",")] if args.gammas else None
        print("gamma\tg*\tworst R_A\tworst R_B")
        for row in tighten_certificate(cert, gammas, args.budget):
            gm = "-" if row.gamma is None else fmt(row.gamma)
            print(f"{gm}\t{fmt(row.g)}\t{','.join(row.worst_rows)}\t{','.join(row.worst_cols)}")
        return 0
    # build
    cb = build_bell(cert, verify_rectangles=not args.waive, budget=args.budget)
    print(f"max B(l) over L_det^BOT = {show(cb.local_max)}")
    print(f"B(p_f) = {show(cb.pf_value)} (closed form {show(cb.pf_closed_form)})")
    status = 0
    if args.eps is not None:
        bound = robustness_bound(cert, args.eps)
        print(f"robustness bound at eps {fmt(args.eps)}: {show(bound)}")
        worst = _perturbation_check(cb.functional, cert.p_f(), args.eps, args.perturbations, args.seed)
        verdict = "pass" if worst >= bound else "fail"
        print(f"min over {args.perturbations} random perturbations: {show(worst)} {verdict}")
        status = 0 if verdict == "pass" else 1
    if args.out:
        write_functional(cb.functional, args.out)
        print(f"functional written to {args.out}")
    return status


def _perturbation_check(b: BellFunctional, pf: DistributionFamily, eps, count: int, seed: int) -> Fraction:
    rng = random.Random(seed)
    return min(evaluate(b, random_perturbation(pf, eps, rng)) for _ in range(count))


# ---------------------------------------------------------------- problems


def cmd_problem(args) -> int:
    kind = args.kind
    if kind == "disj":
        inst = disj(args.n, args.gamma)
    elif kind == "tribes":
        inst = tribes(args.s, args.t)
    elif kind == "ort":
        inst = ort(args.n, args.l, args.gamma if args.with_certificate else None)
    else:
        names = {t.name: t for t in toy_catalog()}
        if args.name not in names:
            raise FormatError(f"unknown toy {args.name!r}; choose from {sorted(names)}")
        inst = names[args.name]
    out = _out_dir(args.out)
    dump_json({"kind": "function", "name": inst.name, "inputs_a": list(inst.inputs_a),
               "inputs_b": list(inst.inputs_b), "entries": [[x, y, v] for (x, y), v in inst.f.items()]},
              out / "f.json")
    write_distribution(inst.p_f(), out / "p_f.json")
    notes = {k: v for k, v in inst.notes.items() if k != "mu_tilde"}
    dump_json({"name": inst.name, "n": inst.n, "notes": notes}, out / "notes.json")
    print(f"{inst.name}: {len(inst.f)} promise inputs")
    for k, v in notes.items():
        print(f"  {k}: {v}")
    if inst.certificate is not None:
        write_certificate(inst.certificate, out / "certificate.json")
        print(f"certificate (verified exhaustively) written to {out / 'certificate.json'}")
    print(f"files written to {out}")
    return 0


# ---------------------------------------------------------------- quantum


def cmd_quantum(args) -> int:
    if args.action == "tsirelson":
        write_strategy(tsirelson_strategy(), args.out)
        print(f"strategy written to {args.out}")
        return 0
    if args.action == "eval":
        s = read_strategy(args.strategy)
        r = eval_strategy(s)
        print(f"rationalization residual: {r.residual:.3e}")
        print(f"signaling residual before rationalization: {r.signaling:.3e}")
        if args.b:
            b = read_functional(args.b)
            v = evaluate(b, r.family)
            lm = max_bell_over_ldet(b, budget=args.budget)
            print(f"B(q) = {show(v)}")
            print(f"max B(l) over L_det = {show(lm.value)}")
        if args.out:
            write_distribution(r.family, args.out)
            print(f"distribution written to {args.out}")
        return 0
    # compile
    p = read_distribution(args.p)
    b = read_functional(args.b)
    cv = compile_violation(p, b, args.beta, args.ma, args.mb, budget=args.budget)
    print(f"K = {cv.transcripts}, claimed value beta/K = {show(cv.claimed)}")
    print(f"B~(q_bar) = {show(cv.value)} = B(p')/K with B(p') = {show(cv.base_value)}")
    out = _out_dir(args.out)
    write_distribution(cv.q_bar, out / "q_bar.json")
    write_functional(cv.b, out / "B_lifted.json")
    print(f"files written to {out}")
    return 0


# ---------------------------------------------------------------- report


def cmd_report(args) -> int:
    from .plotting import plot_noise_curve

    started = time.perf_counter()
    b = read_functional(args.b)
    q = read_distribution(args.q)
    p = read_distribution(args.p) if args.p else None
    inputs = [("B", args.b, sha256_file(args.b)), ("q", args.q, sha256_file(args.q))]
    if args.p:
        inputs.insert(0, ("p", args.p, sha256_file(args.p)))
    budget = args.budget if args.budget is not None else default_budget()
    settings = {"budget": budget, "seed": args.seed, "jobs": args.jobs,
                "delta_points": args.delta_points, "delta_max": fmt(args.delta_max), "version": __version__}
    data = violation_report(p, b, q, inputs, settings, args.delta_points, args.delta_max, budget, args.timing)
    rep = data.report
    if args.timing:
        rep.timing["wall"] = time.perf_counter() - started
    text = rep.render_text()
    sys.stdout.write(text)
    if args.out:
        out = _out_dir(args.out)
        (out / "report.txt").write_text(text)
        (out / "report.tsv").write_text(rep.render_tsv())
        if data.deltas:
            plot_noise_curve([float(d) for d in data.deltas], [float(v) for v in data.curve],
                             float(data.local_max), out / "violation.png", title="Bell value under uniform noise")
        print(f"report written to {out}")
    return 0 if rep.ok else 1


# ---------------------------------------------------------------- parser


def _rational(text: str) -> Fraction:
    return parse_rational(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bellcert", description="Exact Bell-functional certificates.")
    ap.add_argument("--version", action="version", version=f"bellcert {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _common(common)

    for name, fn, help_ in (("nu", cmd_nu, "nuclear norm of a nonsignaling family"),
                            ("eff", cmd_eff, "efficiency bound of a family")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("--p", required=True, help="distribution file")
        sp.add_argument("--eps", type=_rational, default=None, help="perturbation radius num/den")
        sp.add_argument("--certificate", help="write the certificate functional here")
        sp.add_argument("--witness", action="store_true", help="print the primal decomposition")
        if name == "eff":
            sp.add_argument("--dual-check", action="store_true", help="also solve the dual program separately")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("ldet", help="optimize a functional over deterministic strategies")
    lsub = sp.add_subparsers(dest="action", required=True)
    lm = lsub.add_parser("max", parents=[common])
    lm.add_argument("--b", required=True, help="functional file")
    lm.add_argument("--with-abort", action="store_true")
    lm.add_argument("--absolute", action="store_true")
    lm.set_defaults(func=cmd_ldet)

    sp = sub.add_parser("transform", parents=[common], help="apply functional transformations")
    sp.add_argument("--pipeline", required=True, help="comma list of saturate,pad,strip,resist,lift")
    sp.add_argument("--in", dest="input", required=True, help="functional file")
    sp.add_argument("--p", help="distribution file (needed by resist)")
    sp.add_argument("--transcripts", default="1,1", help="M_A,M_B sizes for lift")
    sp.add_argument("--out", help="output functional file")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("corruption", help="corruption certificates")
    csub = sp.add_subparsers(dest="action", required=True)
    for action in ("verify", "tighten", "build"):
        cp = csub.add_parser(action, parents=[common])
        cp.add_argument("--cert", required=True, help="certificate file")
        if action == "verify":
            cp.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
            cp.add_argument("--samples", type=int, default=1000)
        if action == "tighten":
            cp.add_argument("--gammas", help="comma list of gamma values (single U and V)")
        if action == "build":
            cp.add_argument("--out", help="write the functional here")
            cp.add_argument("--eps", type=_rational, default=None, help="check the robustness bound at this radius")
            cp.add_argument("--perturbations", type=int, default=50)
            cp.add_argument("--waive", action="store_true", help="skip the rectangle verification")
        cp.set_defaults(func=cmd_corruption)

    sp = sub.add_parser("problem", help="problem instances")
    psub = sp.add_subparsers(dest="action", required=True)
    pg = psub.add_parser("gen", parents=[common])
    pg.add_argument("kind", choices=("disj", "tribes", "ort", "toy"))
    pg.add_argument("--n", type=int, default=2)
    pg.add_argument("--s", type=int, default=2)
    pg.add_argument("--t", type=int, default=2)
    pg.add_argument("--l", type=int, default=0)
    pg.add_argument("--gamma", type=_rational, default=Fraction(1))
    pg.add_argument("--with-certificate", action="store_true", help="attach a certificate (ort)")
    pg.add_argument("--name", default="AND1", help="toy instance name")
    pg.add_argument("--out", required=True, help="output directory")
    pg.set_defaults(func=cmd_problem)

    sp = sub.add_parser("quantum", help="quantum strategies")
    qsub = sp.add_subparsers(dest="action", required=True)
    qe = qsub.add_parser("eval", parents=[common])
    qe.add_argument("--strategy", required=True)
    qe.add_argument("--b", help="functional to evaluate on the result")
    qe.add_argument("--out", help="write the rationalized distribution here")
    qe.set_defaults(func=cmd_quantum)
    qt = qsub.add_parser("tsirelson", parents=[common], help="write the optimal CHSH strategy")
    qt.add_argument("--out", required=True)
    qt.set_defaults(func=cmd_quantum)
    qc = qsub.add_parser("compile", parents=[common])
    qc.add_argument("--p", required=True, help="p' distribution file")
    qc.add_argument("--b", required=True, help="certificate functional file")
    qc.add_argument("--beta", type=_rational, required=True)
    qc.add_argument("--ma", type=int, default=1, help="number of Alice transcripts")
    qc.add_argument("--mb", type=int, default=1, help="number of Bob transcripts")
    qc.add_argument("--out", required=True, help="output directory")
    qc.set_defaults(func=cmd_quantum)

    sp = sub.add_parser("report", help="reports")
    rsub = sp.add_subparsers(dest="action", required=True)
    rv = rsub.add_parser("violation", parents=[common])
    rv.add_argument("--p", help="source distribution file")
    rv.add_argument("--b", required=True, help="functional file")
    rv.add_argument("--q", required=True, help="family to test")
    rv.add_argument("--delta-points", type=int, default=8)
    rv.add_argument("--delta-max", type=_rational, default=Fraction(1, 2))
    rv.add_argument("--timing", action="store_true", help="include wall-clock times (breaks byte-identical output)")
    rv.add_argument("--out", help="directory for report.txt, report.tsv and violation.png")
    rv.set_defaults(func=cmd_report)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (CertificateError, CertificateInvalid, TransformError, InstanceTooLarge, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
