"""Finite-dimensional quantum strategies and distribution-level compilation.

This is the only module that uses floating point.  Probabilities are turned
into exact rationals by :func:`rationalize` before anything else sees them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .core import (
    BOT,
    BellFunctional,
    DistributionFamily,
    Scenario,
    as_fraction,
    evaluate,
    l1_distance,
    mix_uniform,
    uniform_distribution,
)
from .io import FormatError, load_json, dump_json
from .local import max_bell_over_ldet
from .transforms import lift_label, lift_noise_resistant, lifted_scenario, transcript_labels

STATE_TOL = 1e-12
POVM_TOL = 1e-10
SIGNAL_TOL = 1e-9
DENOMINATOR_CAP = 10**6
ABORT_RELABEL = "A"


class StrategyInvalid(ValueError):
    pass


def _labels_in_order(meas: Mapping) -> list[str]:
    out = []
    for fam in meas.values():
        for lab in fam:
            if lab != BOT and lab not in out:
                out.append(lab)
    return out


@dataclass
class QuantumStrategy:
    state: np.ndarray  # length d_a * d_b, Alice's factor first
    dims: tuple[int, int]
    measurements_a: dict  # x -> {label: d_a x d_a matrix}
    measurements_b: dict  # y -> {label: d_b x d_b matrix}
    outputs_a: tuple | None = None
    outputs_b: tuple | None = None

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=complex).reshape(-1)
        self.measurements_a = {str(x): {str(k): np.asarray(v, dtype=complex) for k, v in fam.items()}
                               for x, fam in self.measurements_a.items()}
        self.measurements_b = {str(y): {str(k): np.asarray(v, dtype=complex) for k, v in fam.items()}
                               for y, fam in self.measurements_b.items()}
        if self.outputs_a is None:
            self.outputs_a = tuple(_labels_in_order(self.measurements_a))
        if self.outputs_b is None:
            self.outputs_b = tuple(_labels_in_order(self.measurements_b))
        self.validate()

    @property
    def aborts(self) -> bool:
        return any(BOT in fam for m in (self.measurements_a, self.measurements_b) for fam in m.values())

    def scenario(self) -> Scenario:
        return Scenario(list(self.measurements_a), list(self.measurements_b),
                        self.outputs_a, self.outputs_b, self.aborts)

    def validate(self):
        da, db = self.dims
        if self.state.shape != (da * db,):
            raise StrategyInvalid(f"state has length {self.state.size}, expected {da * db}")
        norm = float(np.linalg.norm(self.state))
        if abs(norm - 1) > STATE_TOL:
            raise StrategyInvalid(f"state norm is {norm!r}, not 1")
        for side, meas, d, outs in (("A", self.measurements_a, da, self.outputs_a),
                                    ("B", self.measurements_b, db, self.outputs_b)):
            if not meas:
                raise StrategyInvalid(f"party {side} has no measurements")
            for inp, fam in meas.items():
                total = np.zeros((d, d), dtype=complex)
                for lab, op in fam.items():
                    where = f"{side} input {inp} outcome {lab}"
                    if lab != BOT and lab not in outs:
                        raise StrategyInvalid(f"{where}: label not in the output set")
                    if op.shape != (d, d):
                        raise StrategyInvalid(f"{where}: shape {op.shape}, expected {(d, d)}")
                    if np.max(np.abs(op - op.conj().T)) > POVM_TOL:
                        raise StrategyInvalid(f"{where}: operator is not Hermitian")
                    low = float(np.min(np.linalg.eigvalsh(op)))
                    if low < -POVM_TOL:
                        raise StrategyInvalid(f"{where}: eigenvalue {low!r} < 0")
                    total += op
                err = float(np.max(np.abs(total - np.eye(d))))
                if err > POVM_TOL:
                    raise StrategyInvalid(f"{side} input {inp}: operators sum to identity only within {err!r}")


def strategy_probabilities(s: QuantumStrategy) -> dict:
    """Floating-point ``<psi| A^x_a (x) B^y_b |psi>`` for every key of the scenario."""
    scen = s.scenario()
    psi = s.state
    probs = {}
    for x, y in scen.input_pairs():
        fa, fb = s.measurements_a[x], s.measurements_b[y]
        for a in scen.full_outputs_a:
            for b in scen.full_outputs_b:
                if a in fa and b in fb:
                    v = np.vdot(psi, np.kron(fa[a], fb[b]) @ psi).real
                else:
                    v = 0.0
                probs[a, b, x, y] = float(v)
    return probs


def signaling_residual(scen: Scenario, probs: Mapping) -> float:
    """Largest change of a marginal when the other party's input changes."""
    worst = 0.0
    for x in scen.inputs_a:
        for a in scen.full_outputs_a:
            vals = [sum(probs[a, b, x, y] for b in scen.full_outputs_b) for y in scen.inputs_b]
            worst = max(worst, max(vals) - min(vals))
    for y in scen.inputs_b:
        for b in scen.full_outputs_b:
            vals = [sum(probs[a, b, x, y] for a in scen.full_outputs_a) for x in scen.inputs_a]
            worst = max(worst, max(vals) - min(vals))
    return worst


@dataclass
class Rationalized:
    family: DistributionFamily
    residual: float  # max |rational - float| over entries
    signaling: float  # pre-rationalization signaling residual


def rationalize(scen: Scenario, probs: Mapping, cap: int = DENOMINATOR_CAP) -> Rationalized:
    """Continued-fraction rounding with denominator ``cap``, then exact renormalization per input pair."""
    table = {}
    for x, y in scen.input_pairs():
        block = {}
        for a, b in scen.outcome_pairs():
            v = max(0.0, probs[a, b, x, y])
            block[a, b] = Fraction(v).limit_denominator(cap)
        total = sum(block.values())
        if total <= 0:
            raise StrategyInvalid(f"input pair ({x}, {y}) has no probability mass")
        for (a, b), v in block.items():
            table[a, b, x, y] = v / total
    fam = DistributionFamily(scen, table)
    residual = max(abs(float(table[k]) - probs[k]) for k in table)
    return Rationalized(fam, residual, signaling_residual(scen, probs))


def eval_strategy(s: QuantumStrategy, cap: int = DENOMINATOR_CAP) -> Rationalized:
    probs = strategy_probabilities(s)
    scen = s.scenario()
    sig = signaling_residual(scen, probs)
    if sig > SIGNAL_TOL:
        raise StrategyInvalid(f"strategy signals numerically (residual {sig!r})")
    return rationalize(scen, probs, cap)


def evaluate_float(b: BellFunctional, probs: Mapping) -> float:
    return sum(float(v) * probs[k] for k, v in b.coeffs.items() if BOT not in k[:2])


def _projectors(op: np.ndarray):
    ident = np.eye(op.shape[0])
    return (ident + op) / 2, (ident - op) / 2


def tsirelson_strategy() -> QuantumStrategy:
    """Maximally entangled qubits with the optimal CHSH observables; output 0 is eigenvalue +1."""
    z = np.array([[1, 0], [0, -1]], dtype=complex)
    xo = np.array([[0, 1], [1, 0]], dtype=complex)
    r = 1 / math.sqrt(2)
    phi = np.array([r, 0, 0, r], dtype=complex)
    obs_a = {"0": z, "1": xo}
    obs_b = {"0": (z + xo) * r, "1": (z - xo) * r}
    ma = {x: dict(zip(("0", "1"), _projectors(o))) for x, o in obs_a.items()}
    mb = {y: dict(zip(("0", "1"), _projectors(o))) for y, o in obs_b.items()}
    return QuantumStrategy(phi, (2, 2), ma, mb, ("0", "1"), ("0", "1"))


def product_strategy(map_a: Mapping[str, str], map_b: Mapping[str, str], outputs=("0", "1")) -> QuantumStrategy:
    """Deterministic projective strategy on a product qubit state."""
    d = len(outputs)

    def basis(i):
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1
        return m

    state = np.zeros(d * d, dtype=complex)
    state[0] = 1

    def meas(mapping):
        out = {}
        for inp, o in mapping.items():
            j = outputs.index(o)
            # output o on |0> via a basis permutation
            out[inp] = {lab: basis((i - j) % d) for i, lab in enumerate(outputs)}
        return out

    return QuantumStrategy(state, (d, d), meas(map_a), meas(map_b), tuple(outputs), tuple(outputs))


def relabel_abort(q: DistributionFamily, label: str = ABORT_RELABEL) -> DistributionFamily:
    """Move abort mass to a fresh ordinary output ``label`` on each side."""
    s = q.scenario
    if label in s.outputs_a or label in s.outputs_b:
        raise ValueError(f"label {label!r} is already an output")
    scen = Scenario(s.inputs_a, s.inputs_b, s.outputs_a + (label,), s.outputs_b + (label,), False)
    table = {}
    for (a, b, x, y), v in q.table.items():
        if v:
            table[label if a == BOT else a, label if b == BOT else b, x, y] = v
    return DistributionFamily(scen, table)


# ---------------------------------------------------------------- compilation


@dataclass
class CompiledViolation:
    q_bar: DistributionFamily
    b: BellFunctional  # lifted functional
    claimed: Fraction  # beta / K
    value: Fraction  # B~(q_bar)
    base_value: Fraction  # B(p')
    transcripts: int  # K = M_A * M_B
    provenance: dict = field(default_factory=dict)


def default_q_bar(p_prime: DistributionFamily, m_a, m_b) -> DistributionFamily:
    """``p'/K`` on the zero transcripts and ``1/(K |A| |B|)`` on every other lifted outcome."""
    ta, tb = transcript_labels(m_a), transcript_labels(m_b)
    k = len(ta) * len(tb)
    base = p_prime.scenario
    scen = lifted_scenario(base, ta, tb)
    filler = Fraction(1, k * len(base.outputs_a) * len(base.outputs_b))
    table = {}
    for x, y in base.input_pairs():
        for a in base.outputs_a:
            for b in base.outputs_b:
                for ua in ta:
                    for ub in tb:
                        key = (lift_label(a, ua), lift_label(b, ub), x, y)
                        if ua == ta[0] and ub == tb[0]:
                            table[key] = p_prime.table[a, b, x, y] / k
                        else:
                            table[key] = filler
    return DistributionFamily(scen, table)


def embedding_defect(q_bar: DistributionFamily, p_prime: DistributionFamily, m_a, m_b):
    """First key where ``q_bar(a|0, b|0 | x, y) != p'(a, b | x, y) / K``, or None."""
    ta, tb = transcript_labels(m_a), transcript_labels(m_b)
    k = len(ta) * len(tb)
    for (a, b, x, y), v in p_prime.table.items():
        if a == BOT or b == BOT:
            continue
        key = (lift_label(a, ta[0]), lift_label(b, tb[0]), x, y)
        if q_bar.table.get(key) != v / k:
            return key, q_bar.table.get(key), v / k
    return None


def compile_violation(p_prime: DistributionFamily, b: BellFunctional, beta, m_a=1, m_b=1,
                      q_bar: DistributionFamily | None = None, verify_local: bool = True,
                      provenance: dict | None = None, budget=None) -> CompiledViolation:
    """Lift ``(b, beta)`` to transcript outputs and check the embedded family.

    ``K = |M_A| |M_B|`` must be a power of two.  The claimed value ``beta/K``
    is returned only after ``B~(q_bar) = B(p')/K >= beta/K`` holds exactly.
    """
    beta = as_fraction(beta)
    ta, tb = transcript_labels(m_a), transcript_labels(m_b)
    k = len(ta) * len(tb)
    if k & (k - 1):
        raise ValueError(f"transcript count {k} is not a power of two")
    if b.has_abort_coefficients():
        raise ValueError("functional must not weight abort events")
    if verify_local:
        lmax = max_bell_over_ldet(b, with_abort=True, budget=budget).value
        if lmax > 1:
            raise ValueError(f"functional reaches {lmax} > 1 on a strategy that may abort")
    base_value = evaluate(b, p_prime)
    if base_value < beta:
        raise ValueError(f"B(p') = {base_value} < beta = {beta}")
    if q_bar is None:
        q_bar = default_q_bar(p_prime, ta, tb)
    defect = embedding_defect(q_bar, p_prime, ta, tb)
    if defect is not None:
        key, got, want = defect
        raise ValueError(f"q_bar{key} = {got}, embedding requires {want}")
    lifted = lift_noise_resistant(b, (ta, tb))
    value = evaluate(lifted, q_bar)
    if value != base_value / k:
        raise AssertionError(f"B~(q_bar) = {value} but B(p')/K = {base_value / k}")
    claimed = beta / k
    prov = {"K": k, "2q": k.bit_length() - 1}
    prov.update(provenance or {})
    return CompiledViolation(q_bar, lifted, claimed, value, base_value, k, prov)


def noise_margin(p_prime: DistributionFamily, eps, eps_prime) -> Fraction:
    """Largest uniform-mixing weight keeping ``p'`` inside the ``eps - eps'`` ball."""
    eps, eps_prime = as_fraction(eps), as_fraction(eps_prime)
    spread = l1_distance(p_prime, uniform_distribution(p_prime.scenario))
    if spread == 0:
        return Fraction(1)
    return min(Fraction(1), (eps - eps_prime) / spread)


@dataclass
class NoiseRow:
    delta: Fraction
    lifted_value: Fraction  # B~((1-d) q_bar + d u)
    chain_value: Fraction  # ((1-d) B(p') + d B(u)) / K
    claimed: Fraction

    @property
    def holds(self) -> bool:
        return self.lifted_value == self.chain_value and self.lifted_value >= self.claimed


def noise_chain(cv: CompiledViolation, b: BellFunctional, p_prime: DistributionFamily, deltas) -> list[NoiseRow]:
    u = uniform_distribution(p_prime.scenario)
    bu = evaluate(b, u)
    rows = []
    for d in deltas:
        d = as_fraction(d)
        lhs = evaluate(cv.b, mix_uniform(cv.q_bar, d))
        rhs = ((1 - d) * cv.base_value + d * bu) / cv.transcripts
        rows.append(NoiseRow(d, lhs, rhs, cv.claimed))
    return rows


# ---------------------------------------------------------------- file format


def _matrix_to_json(m: np.ndarray) -> dict:
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _matrix_from_json(obj, where: str) -> np.ndarray:
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: bad complex array ({exc})") from None
    if re.shape != im.shape:
        raise FormatError(f"{where}: real and imaginary parts differ in shape")
    return re + 1j * im


def strategy_to_json(s: QuantumStrategy) -> dict:
    def meas(m):
        return {inp: {lab: _matrix_to_json(op) for lab, op in fam.items()} for inp, fam in m.items()}

    return {
        "kind": "quantum_strategy",
        "dims": list(s.dims),
        "outputs_a": list(s.outputs_a),
        "outputs_b": list(s.outputs_b),
        "state": _matrix_to_json(s.state),
        "measurements_a": meas(s.measurements_a),
        "measurements_b": meas(s.measurements_b),
    }


def strategy_from_json(obj) -> QuantumStrategy:
    if not isinstance(obj, dict):
        raise FormatError("top level: expected an object")
    try:
        dims = tuple(int(d) for d in obj["dims"])
        state = _matrix_from_json(obj["state"], "state")

        def meas(name):
            return {
                str(inp): {str(lab): _matrix_from_json(op, f"{name}.{inp}.{lab}") for lab, op in fam.items()}
                for inp, fam in obj[name].items()
            }

        return QuantumStrategy(state, dims, meas("measurements_a"), meas("measurements_b"),
                               tuple(obj["outputs_a"]) if "outputs_a" in obj else None,
                               tuple(obj["outputs_b"]) if "outputs_b" in obj else None)
    except KeyError as exc:
        raise FormatError(f"missing field {exc}") from None
    except StrategyInvalid as exc:
        raise FormatError(str(exc)) from None


def read_strategy(path) -> QuantumStrategy:
    obj = load_json(path)
    try:
        return strategy_from_json(obj)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_strategy(s: QuantumStrategy, path) -> None:
    dump_json(strategy_to_json(s), path)
