"""Scenario files: JSON parsing with exact numbers, presets and materialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np

from .concav import UtilityFunction, example1_utility
from .config import DEFAULT, Tolerances
from .errors import ScenarioParseError
from .grid import SimplexGrid
from .markov import TransitionMatrix

SCHEMA_VERSION = 1
UTILITY_KINDS = ("example1", "constant", "grid")
TOLERANCE_FIELDS = ("num", "hull", "contact", "vi", "vi_max_iter", "mixing_cap")
DEFAULT_LAMBDAS = (0.0, 0.3, 0.5, 0.9, 0.99, 0.999)
DEFAULT_GRID = 2000
DEFAULT_SEEDS = tuple(range(30))


def _fraction(x, where: str) -> Fraction:
    if isinstance(x, bool):
        raise ScenarioParseError(f"{where}: expected a number, got {x!r}")
    try:
        if isinstance(x, (int, Decimal, Fraction)):
            return Fraction(x)
        if isinstance(x, float):
            return Fraction(Decimal(repr(x)))
        if isinstance(x, str):
            return Fraction(x.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ScenarioParseError(f"{where}: cannot parse {x!r} as a number") from exc
    raise ScenarioParseError(f"{where}: expected a number, got {x!r}")


def _encode_fraction(f: Fraction):
    # plain JSON number when it survives a float round trip, "a/b" otherwise
    if f.denominator == 1:
        return int(f)
    x = float(f)
    if Fraction(Decimal(repr(x))) == f:
        return x
    return f"{f.numerator}/{f.denominator}"


@dataclass(frozen=True)
class Scenario:
    name: str
    states: int
    M: tuple                       # rows of Fractions
    utility: dict
    lambdas: tuple = DEFAULT_LAMBDAS
    grid_resolution: int = DEFAULT_GRID
    seeds: tuple = DEFAULT_SEEDS
    tolerances: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    # ------------------------------------------------------------ materialize
    def matrix(self) -> TransitionMatrix:
        return TransitionMatrix(np.array([[float(x) for x in row] for row in self.M]))

    def grid(self) -> SimplexGrid:
        return SimplexGrid(self.states, self.grid_resolution)

    def tol(self) -> Tolerances:
        return DEFAULT.with_overrides(**self.tolerances)

    def utility_function(self, grid: SimplexGrid | None = None) -> UtilityFunction:
        grid = self.grid() if grid is None else grid
        kind = self.utility["kind"]
        if kind == "example1":
            return example1_utility(grid)
        if kind == "constant":
            c = float(self.utility["value"])
            return UtilityFunction(grid, np.full(len(grid), c), kind="constant")
        values = np.asarray(self.utility["values"], dtype=float)
        if values.size != len(grid):
            raise ScenarioParseError(
                f"utility.values: {values.size} values for a grid of {len(grid)} nodes")
        return UtilityFunction(grid, values, kind="grid")

    def with_overrides(self, **kw) -> "Scenario":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "tolerances" in kw:
            kw["tolerances"] = {**self.tolerances, **kw["tolerances"]}
        return validate(replace(self, **kw))

    # ------------------------------------------------------------ serialize
    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "states": self.states,
            "M": [[_encode_fraction(x) for x in row] for row in self.M],
            "utility": self.utility,
            "lambdas": list(self.lambdas),
            "grid_resolution": self.grid_resolution,
            "seeds": list(self.seeds),
            "tolerances": dict(sorted(self.tolerances.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path


def validate(s: Scenario) -> Scenario:
    """Check field types and ranges; raises :class:`ScenarioParseError` with the field name."""
    if not s.name or any(c in s.name for c in "/\\"):
        raise ScenarioParseError("name: must be a non-empty string without path separators")
    if s.states not in (2, 3):
        raise ScenarioParseError(f"states: only k = 2 or 3 are supported, got {s.states}")
    if len(s.M) != s.states or any(len(r) != s.states for r in s.M):
        raise ScenarioParseError(f"M: expected a {s.states}x{s.states} matrix")
    for i, row in enumerate(s.M):
        if any(x < 0 for x in row) or sum(row) != 1:
            raise ScenarioParseError(f"M[{i}]: entries must be non-negative and sum to exactly 1")
    kind = s.utility.get("kind")
    if kind not in UTILITY_KINDS:
        raise ScenarioParseError(f"utility.kind: expected one of {UTILITY_KINDS}, got {kind!r}")
    if kind == "example1" and s.states != 2:
        raise ScenarioParseError("utility.kind: example1 needs states = 2")
    if kind == "constant" and "value" not in s.utility:
        raise ScenarioParseError("utility.value: required for a constant utility")
    if kind == "grid" and "values" not in s.utility:
        raise ScenarioParseError("utility.values: required for a grid utility")
    for lam in s.lambdas:
        if not 0.0 <= lam < 1.0:
            raise ScenarioParseError(f"lambdas: {lam} is outside [0, 1)")
    if s.grid_resolution < 1:
        raise ScenarioParseError("grid_resolution: must be a positive integer")
    for key in s.tolerances:
        if key not in TOLERANCE_FIELDS:
            raise ScenarioParseError(f"tolerances.{key}: unknown tolerance")
    return s


def from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioParseError("top level: expected a JSON object")
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioParseError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    for key in ("name", "states", "M", "utility"):
        if key not in d:
            raise ScenarioParseError(f"{key}: missing required field")
    unknown = set(d) - {"schema_version", "name", "states", "M", "utility", "lambdas",
                        "grid_resolution", "seeds", "tolerances"}
    if unknown:
        raise ScenarioParseError(f"{sorted(unknown)[0]}: unknown field")

    def integer(x, where):
        if isinstance(x, bool) or not isinstance(x, (int, Decimal)) or Decimal(x) != int(x):
            raise ScenarioParseError(f"{where}: expected an integer, got {x!r}")
        return int(x)

    M = d["M"]
    if not isinstance(M, list) or not all(isinstance(r, list) for r in M):
        raise ScenarioParseError("M: expected a list of rows")
    M = tuple(tuple(_fraction(x, f"M[{i}][{j}]") for j, x in enumerate(row)) for i, row in enumerate(M))
    util = d["utility"]
    if not isinstance(util, dict):
        raise ScenarioParseError("utility: expected an object")
    util = {k: (float(v) if isinstance(v, Decimal) else
                [float(x) for x in v] if isinstance(v, list) else v) for k, v in util.items()}
    lambdas = tuple(float(_fraction(x, f"lambdas[{i}]")) for i, x in enumerate(d.get("lambdas", DEFAULT_LAMBDAS)))
    seeds = tuple(integer(x, f"seeds[{i}]") for i, x in enumerate(d.get("seeds", DEFAULT_SEEDS)))
    tols = d.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ScenarioParseError("tolerances: expected an object")
    tols = {k: (int(v) if k in ("vi_max_iter", "mixing_cap") else float(v)) for k, v in tols.items()}
    name = d["name"]
    if not isinstance(name, str):
        raise ScenarioParseError("name: expected a string")
    s = Scenario(
        name=name,
        states=integer(d["states"], "states"),
        M=M,
        utility=util,
        lambdas=lambdas,
        grid_resolution=integer(d.get("grid_resolution", DEFAULT_GRID), "grid_resolution"),
        seeds=seeds,
        tolerances=tols,
    )
    return validate(s)


def loads(text: str) -> Scenario:
    try:
        d = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_dict(d)


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"{path}: {exc.strerror}") from exc
    try:
        return loads(text)
    except ScenarioParseError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc


M1 = ((Fraction(1, 10), Fraction(9, 10)), (Fraction(6, 10), Fraction(4, 10)))
M2 = ((Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 6), Fraction(5, 6)))

PRESETS = {
    "example1-M1": Scenario("example1-M1", 2, M1, {"kind": "example1"}),
    "example1-M2": Scenario("example1-M2", 2, M2, {"kind": "example1"}),
}


def resolve(name_or_path: str) -> Scenario:
    """A preset name or a path to a scenario file."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    return load(name_or_path)
