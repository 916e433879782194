"""Family definition files.

A family is described by a TOML document, either naming a builtin::

    builtin = "torus2"
    n_grid = [8, 16, 32]
    [params]
    d = 2

or giving an inline template::

    label = "three-state"
    states = [-1, 0, 1]
    n_grid = [10, 100, 1000, 10000]
    theta = "2"

    [[rate]]
    from = -1
    to = 0
    value = "N"

    [[valley]]
    well = [-1]
    basin = [-1, 0]
    xi = -1

    [[well]]
    label = 1
    states = [-1]
    attractor = -1

Rate values use the grammar of :mod:`metastab.expr`.
"""

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli
import tomli_w

from .analysis import DEFAULT_GRID, ChainFamily, MetaPartition, ValleySpec
from .chain import ChainSpec
from .errors import InputError, NegativeRate, ParseError, UnknownState
from .expr import compile_expression
from .fixtures import BUILTINS, Fixture, builtin

__all__ = ["FamilyDefinition", "parse_family", "load_family", "dump_family", "definition_to_fixture"]

_LINE = re.compile(r"line (\d+)")


@dataclass(frozen=True)
class FamilyDefinition:
    """Parsed family document; equality is structural."""

    label: str = ""
    builtin: Optional[str] = None
    params: tuple = ()
    states: tuple = ()
    rates: tuple = ()
    valleys: tuple = ()
    wells: tuple = ()
    n_grid: tuple = DEFAULT_GRID
    theta: Optional[str] = None
    source: str = field(default="", compare=False, repr=False)


def _line_of(source, needle):
    for k, line in enumerate(source.splitlines(), 1):
        if needle in line:
            return k
    return None


def _state(value, known, source):
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise ParseError(_line_of(source, repr(value)), f"state label {value!r} must be an integer or string")
    if known is not None and value not in known:
        raise UnknownState(value)
    return value


def _states(values, known, source):
    if not isinstance(values, list):
        raise ParseError(None, "expected a list of states")
    return tuple(_state(v, known, source) for v in values)


def _grid(doc):
    grid = doc.get("n_grid", list(DEFAULT_GRID))
    if not isinstance(grid, list) or not all(isinstance(n, int) and not isinstance(n, bool)
                                             and n > 0 for n in grid):
        raise ParseError(None, "n_grid must be a list of positive integers")
    if any(b <= a for a, b in zip(grid, grid[1:])) or not grid:
        raise ParseError(None, "n_grid must be strictly increasing")
    return tuple(grid)


_ENTRY_KEYS = {"rate": {"from", "to", "value"}, "valley": {"well", "basin", "xi"},
               "well": {"label", "states", "attractor"}}


def _check_entries(doc, text):
    for name, keys in _ENTRY_KEYS.items():
        entries = doc.get(name, [])
        if not isinstance(entries, list) or not all(isinstance(e, dict) for e in entries):
            raise ParseError(_line_of(text, name), f"{name!r} must be an array of tables")
        for entry in entries:
            extra = set(entry) - keys
            if extra:
                key = sorted(extra)[0]
                raise ParseError(_line_of(text, key), f"unknown key {key!r} in [[{name}]]")


def parse_family(text: str) -> FamilyDefinition:
    """Parse and validate a family document."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = _LINE.search(str(exc))
        raise ParseError(int(m.group(1)) if m else None, str(exc)) from None
    allowed = {"label", "builtin", "params", "states", "rate", "valley", "well", "n_grid", "theta"}
    extra = set(doc) - allowed
    if extra:
        key = sorted(extra)[0]
        raise ParseError(_line_of(text, key), f"unknown key {key!r}")
    _check_entries(doc, text)
    grid = _grid(doc)
    theta = doc.get("theta")
    if theta is not None:
        theta = str(theta) if not isinstance(theta, str) else theta
        compile_expression(theta, _line_of(text, "theta"))
    label = str(doc.get("label", doc.get("builtin", "")))
    if "builtin" in doc:
        name = doc["builtin"]
        if name not in BUILTINS:
            raise ParseError(_line_of(text, "builtin"), f"unknown builtin {name!r}")
        if set(doc) & {"states", "rate", "valley", "well"}:
            raise ParseError(None, "a builtin family cannot also declare states, rates or sets")
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise ParseError(_line_of(text, "params"), "params must be a table")
        return FamilyDefinition(label, name, tuple(sorted(params.items())), n_grid=grid,
                                theta=theta, source=text)
    if "states" not in doc:
        raise ParseError(None, "a family needs either 'builtin' or 'states'")
    states = _states(doc["states"], None, text)
    if len(set(states)) != len(states):
        raise ParseError(_line_of(text, "states"), "duplicate state labels")
    known = set(states)
    rates = []
    for entry in doc.get("rate", []):
        missing = {"from", "to", "value"} - set(entry)
        if missing:
            raise ParseError(None, f"rate entry lacks {sorted(missing)}")
        a, b = _state(entry["from"], known, text), _state(entry["to"], known, text)
        value = entry["value"]
        txt = value if isinstance(value, str) else repr(value)
        compile_expression(txt, _line_of(text, txt))
        rates.append((a, b, txt))
    valleys = []
    for entry in doc.get("valley", []):
        W = _states(entry.get("well", []), known, text)
        B = _states(entry.get("basin", []), known, text)
        xi = _state(entry.get("xi"), known, text)
        ValleySpec(W, B, xi)
        valleys.append((W, B, xi))
    wells = []
    for k, entry in enumerate(doc.get("well", []), 1):
        x = entry.get("label", k)
        wells.append((x, _states(entry.get("states", []), known, text),
                      _state(entry.get("attractor"), known, text)))
    defn = FamilyDefinition(label, None, (), states, tuple(rates), tuple(valleys), tuple(wells),
                            grid, theta, source=text)
    if wells:
        _partition(defn)
    _check_rates(defn)
    return defn


def _partition(defn):
    return MetaPartition({x: set(s) for x, s, _ in defn.wells}, {x: a for x, _, a in defn.wells})


def _check_rates(defn):
    compiled = [(a, b, compile_expression(t)) for a, b, t in defn.rates]
    for N in defn.n_grid:
        for a, b, e in compiled:
            v = e(N)
            if not math.isfinite(v) or v <= 0:
                raise NegativeRate(N, (a, b), v)


def definition_to_fixture(defn: FamilyDefinition) -> Fixture:
    """Turn a definition into a :class:`Fixture` (family, valleys, partition, scale)."""
    theta = compile_expression(defn.theta) if defn.theta is not None else None
    if defn.builtin is not None:
        fx = builtin(defn.builtin, n_grid=defn.n_grid, **dict(defn.params))
        if theta is not None:
            fx.theta, fx.theta_text = theta, defn.theta
        return fx
    compiled = [(a, b, compile_expression(t)) for a, b, t in defn.rates]
    states = defn.states

    def gen(N):
        return ChainSpec(states, {(a, b): e(N) for a, b, e in compiled})

    fam = ChainFamily(gen, defn.n_grid, defn.label)
    valleys = [ValleySpec(W, B, xi) for W, B, xi in defn.valleys]
    partition = _partition(defn) if defn.wells else None
    return Fixture(defn.label, fam, valleys, partition, theta, defn.theta)


def load_family(source) -> tuple:
    """Load ``source`` (a builtin name or a path to a TOML file).

    Returns
    -------
    (FamilyDefinition, Fixture)
    """
    if isinstance(source, str) and source in BUILTINS:
        defn = FamilyDefinition(source, source)
        return defn, definition_to_fixture(defn)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read family file {str(path)!r}: {exc.strerror}") from None
    defn = parse_family(text)
    return defn, definition_to_fixture(defn)


def dump_family(defn: FamilyDefinition) -> str:
    """Serialise a definition; :func:`parse_family` inverts it."""
    doc = {}
    if defn.label:
        doc["label"] = defn.label
    if defn.builtin is not None:
        doc["builtin"] = defn.builtin
    doc["n_grid"] = list(defn.n_grid)
    if defn.theta is not None:
        doc["theta"] = defn.theta
    if defn.params:
        doc["params"] = dict(defn.params)
    if defn.builtin is None:
        doc["states"] = list(defn.states)
        doc["rate"] = [{"from": a, "to": b, "value": t} for a, b, t in defn.rates]
        if defn.valleys:
            doc["valley"] = [{"well": list(W), "basin": list(B), "xi": xi}
                             for W, B, xi in defn.valleys]
        if defn.wells:
            doc["well"] = [{"label": x, "states": list(s), "attractor": a}
                           for x, s, a in defn.wells]
    return tomli_w.dumps(doc)
