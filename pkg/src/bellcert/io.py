"""JSON round-tripping for families, functionals and rationals.

File layout::

    {"kind": "distribution" | "functional",
     "scenario": {"inputs_a": [...], "inputs_b": [...],
                  "outputs_a": [...], "outputs_b": [...], "abort_allowed": false},
     "entries": [[a, b, x, y, num, den], ...]}

The abort outcome is written as the string ``"BOT"``.  Only nonzero entries
are written; missing entries read back as zero.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .core import BellFunctional, DistributionFamily, Scenario


class FormatError(ValueError):
    """Malformed input file; the message carries the offending location."""


def frac_pair(v: Fraction) -> list[int]:
    return [v.numerator, v.denominator]


def parse_frac_pair(obj, where: str) -> Fraction:
    if isinstance(obj, str):
        try:
            return Fraction(obj)
        except ValueError as exc:
            raise FormatError(f"{where}: {exc}") from None
    if (
        not isinstance(obj, list)
        or len(obj) != 2
        or not all(isinstance(t, int) and not isinstance(t, bool) for t in obj)
    ):
        raise FormatError(f"{where}: expected [numerator, denominator] integers, got {obj!r}")
    if obj[1] == 0:
        raise FormatError(f"{where}: zero denominator")
    return Fraction(obj[0], obj[1])


def parse_rational(text: str) -> Fraction:
    """Parse ``"3/8"``, ``"2"`` or ``"0.125"`` exactly (decimals are exact)."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"bad rational {text!r}: {exc}") from None


def load_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n")


def scenario_from_json(obj, where="scenario") -> Scenario:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object")
    try:
        return Scenario(
            obj["inputs_a"], obj["inputs_b"], obj["outputs_a"], obj["outputs_b"],
            bool(obj.get("abort_allowed", False)),
        )
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {exc}") from None
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def _entries_to_json(table) -> list:
    return [[a, b, x, y, v.numerator, v.denominator] for (a, b, x, y), v in table.items() if v]


def _entries_from_json(obj, scenario: Scenario) -> dict:
    if not isinstance(obj, list):
        raise FormatError("entries: expected a list")
    valid = set(scenario.keys())
    out = {}
    for i, e in enumerate(obj):
        where = f"entries[{i}]"
        if not isinstance(e, list) or len(e) != 6:
            raise FormatError(f"{where}: expected [a, b, x, y, num, den]")
        key = tuple(str(t) for t in e[:4])
        if key not in valid:
            raise FormatError(f"{where}: {key} is not a key of the scenario")
        if key in out:
            raise FormatError(f"{where}: duplicate entry {key}")
        out[key] = parse_frac_pair(e[4:], where)
    return out


def distribution_to_json(p: DistributionFamily) -> dict:
    return {"kind": "distribution", "scenario": p.scenario.to_json(), "entries": _entries_to_json(p.table)}


def functional_to_json(b: BellFunctional) -> dict:
    return {"kind": "functional", "scenario": b.scenario.to_json(), "entries": _entries_to_json(b.coeffs)}


def distribution_from_json(obj, check: bool = True) -> DistributionFamily:
    if not isinstance(obj, dict):
        raise FormatError("top level: expected an object")
    if obj.get("kind", "distribution") != "distribution":
        raise FormatError(f"kind: expected 'distribution', got {obj.get('kind')!r}")
    scen = scenario_from_json(obj.get("scenario"))
    table = _entries_from_json(obj.get("entries", []), scen)
    try:
        return DistributionFamily(scen, table, check=check)
    except ValueError as exc:
        raise FormatError(f"entries: {exc}") from None


def functional_from_json(obj) -> BellFunctional:
    if not isinstance(obj, dict):
        raise FormatError("top level: expected an object")
    if obj.get("kind", "functional") != "functional":
        raise FormatError(f"kind: expected 'functional', got {obj.get('kind')!r}")
    scen = scenario_from_json(obj.get("scenario"))
    return BellFunctional(scen, _entries_from_json(obj.get("entries", []), scen))


def read_distribution(path, check: bool = True) -> DistributionFamily:
    obj = load_json(path)
    try:
        return distribution_from_json(obj, check=check)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def read_functional(path) -> BellFunctional:
    obj = load_json(path)
    try:
        return functional_from_json(obj)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_distribution(p: DistributionFamily, path) -> None:
    dump_json(distribution_to_json(p), path)


def write_functional(b: BellFunctional, path) -> None:
    dump_json(functional_to_json(b), path)
