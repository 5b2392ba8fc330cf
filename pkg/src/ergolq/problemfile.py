"""Problem files: a self-describing JSON document with explicit dimensions.

Structure (matrices row-major, C/D/sigma are lists of length d):

    {
      "schema_version": 1,
      "system":  {"n": 1, "m": 1, "d": 1,
                  "A": [[1.0]], "B": [[1.0]],
                  "C": [[[1.0]]], "D": [[[0.0]]],
                  "b": [1.0], "sigma": [[1.0]]},
      "weights": {"Q": [[-1.0]], "S": [[-1.0]], "R": [[0.0]],
                  "q": [0.0], "rho": [0.0]},
      "strategy": {"Theta": [[-3.0]], "v": [0.0]},      # optional
      "sim":      {"dt": 1e-3, "horizon_t": 2000.0},    # optional, partial
      "schedule": [1e-2, 2.5e-3]                        # optional
    }

S, q, rho and strategy.v may be omitted (zeros).  Malformed documents
(bad JSON, NaN/Infinity, wrong types, unknown keys) raise
ProblemFormatError; well-formed documents whose arrays contradict the
declared dimensions raise DimensionError.  dump_problem emits a
normalized document that re-parses to bit-identical arrays.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ProblemFormatError
from .model import CostWeights, LinearSystem, Strategy
from .simulate import SimConfig

SCHEMA_VERSION = 1

_SIM_FIELDS = ("dt", "horizon_t", "n_paths", "burn_in_t", "seed", "abel_lambda")


@dataclass(frozen=True)
class Problem:
    """A parsed problem file."""

    system: LinearSystem
    weights: CostWeights
    strategy: Strategy | None = None
    sim: SimConfig | None = None
    schedule: tuple | None = None


def _reject_constant(token: str):
    raise ProblemFormatError(f"non-finite literal {token!r} is not allowed")


def loads_strict(text: str) -> dict:
    """JSON text to dict, rejecting NaN/Infinity and non-object roots."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem file must be a JSON object")
    return doc


def _section(doc: dict, key: str, required: bool = True):
    if key not in doc:
        if required:
            raise ProblemFormatError(f"missing section {key!r}")
        return None
    value = doc[key]
    if not isinstance(value, dict):
        raise ProblemFormatError(f"section {key!r} must be an object")
    return value


def _int_field(sec: dict, key: str, where: str) -> int:
    if key not in sec:
        raise ProblemFormatError(f"{where}: missing field {key!r}")
    value = sec[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProblemFormatError(f"{where}.{key} must be an integer")
    return value


def _array(value, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{where}: not a numeric array ({exc})") from exc
    if not np.all(np.isfinite(arr)):
        raise ProblemFormatError(f"{where}: contains NaN or infinity")
    return arr


def _shaped(sec: dict, key: str, shape: tuple, where: str, default=None) -> np.ndarray:
    if key not in sec:
        if default is not None:
            return default
        raise ProblemFormatError(f"{where}: missing field {key!r}")
    arr = _array(sec[key], f"{where}.{key}")
    if arr.shape != shape:
        raise DimensionError(f"{where}.{key} has shape {arr.shape}, expected {shape}")
    return arr


def _matrix_list(sec: dict, key: str, count: int, shape: tuple, where: str) -> tuple:
    if key not in sec:
        raise ProblemFormatError(f"{where}: missing field {key!r}")
    value = sec[key]
    if not isinstance(value, list):
        raise ProblemFormatError(f"{where}.{key} must be a list of {count} arrays")
    if len(value) != count:
        raise DimensionError(f"{where}.{key} has {len(value)} entries, expected d={count}")
    out = []
    for k, item in enumerate(value):
        arr = _array(item, f"{where}.{key}[{k}]")
        if arr.shape != shape:
            raise DimensionError(
                f"{where}.{key}[{k}] has shape {arr.shape}, expected {shape}"
            )
        out.append(arr)
    return tuple(out)


def problem_from_dict(doc: dict) -> Problem:
    """Validate a parsed document and build the domain objects."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem document must be an object")
    known = {"schema_version", "system", "weights", "strategy", "sim", "schedule"}
    extra = set(doc) - known
    if extra:
        raise ProblemFormatError(f"unknown top-level keys: {sorted(extra)}")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ProblemFormatError(
            f"schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )

    sec = _section(doc, "system")
    n = _int_field(sec, "n", "system")
    m = _int_field(sec, "m", "system")
    d = _int_field(sec, "d", "system")
    if n < 1 or m < 1 or d < 0:
        raise DimensionError(f"need n >= 1, m >= 1, d >= 0; got n={n}, m={m}, d={d}")
    system = LinearSystem(
        A=_shaped(sec, "A", (n, n), "system"),
        B=_shaped(sec, "B", (n, m), "system"),
        C=_matrix_list(sec, "C", d, (n, n), "system"),
        D=_matrix_list(sec, "D", d, (n, m), "system"),
        b=_shaped(sec, "b", (n,), "system", default=np.zeros(n)),
        sigma=_matrix_list(sec, "sigma", d, (n,), "system"),
    )

    sec = _section(doc, "weights")
    weights = CostWeights(
        Q=_shaped(sec, "Q", (n, n), "weights"),
        S=_shaped(sec, "S", (m, n), "weights", default=np.zeros((m, n))),
        R=_shaped(sec, "R", (m, m), "weights"),
        q=_shaped(sec, "q", (n,), "weights", default=np.zeros(n)),
        rho=_shaped(sec, "rho", (m,), "weights", default=np.zeros(m)),
    )

    strategy = None
    sec = _section(doc, "strategy", required=False)
    if sec is not None:
        strategy = Strategy(
            Theta=_shaped(sec, "Theta", (m, n), "strategy"),
            v=_shaped(sec, "v", (m,), "strategy", default=np.zeros(m)),
        )

    sim = None
    sec = _section(doc, "sim", required=False)
    if sec is not None:
        extra = set(sec) - set(_SIM_FIELDS)
        if extra:
            raise ProblemFormatError(f"unknown sim keys: {sorted(extra)}")
        kwargs = {}
        for key in _SIM_FIELDS:
            if key not in sec:
                continue
            value = sec[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ProblemFormatError(f"sim.{key} must be a number")
            if not np.isfinite(value):
                raise ProblemFormatError(f"sim.{key} contains NaN or infinity")
            kwargs[key] = int(value) if key in ("n_paths", "seed") else float(value)
        try:
            sim = SimConfig(**kwargs)
        except ConfigError as exc:
            raise ProblemFormatError(f"sim: {exc}") from exc

    schedule = None
    if "schedule" in doc:
        raw = doc["schedule"]
        if not isinstance(raw, list) or not raw:
            raise ProblemFormatError("schedule must be a nonempty list of numbers")
        levels = []
        for j, value in enumerate(raw):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ProblemFormatError(f"schedule[{j}] must be a number")
            if not np.isfinite(value) or value <= 0.0:
                raise ProblemFormatError(f"schedule[{j}] must be finite and positive")
            levels.append(float(value))
        if any(b >= a for a, b in zip(levels, levels[1:])):
            raise ProblemFormatError("schedule must be strictly decreasing")
        schedule = tuple(levels)

    return Problem(
        system=system, weights=weights, strategy=strategy, sim=sim, schedule=schedule
    )


def parse_problem(text: str) -> Problem:
    return problem_from_dict(loads_strict(text))


def load_problem(path) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFormatError(f"cannot read problem file: {exc}") from exc
    return parse_problem(text)


def normalize_problem(problem: Problem) -> dict:
    """Canonical plain-python document; floats survive a JSON round trip
    bit-exactly (shortest-repr serialization)."""
    system, weights = problem.system, problem.weights
    doc = {
        "schema_version": SCHEMA_VERSION,
        "system": {
            "n": system.n,
            "m": system.m,
            "d": system.d,
            "A": system.A.tolist(),
            "B": system.B.tolist(),
            "C": [c.tolist() for c in system.C],
            "D": [dk.tolist() for dk in system.D],
            "b": system.b.tolist(),
            "sigma": [s.tolist() for s in system.sigma],
        },
        "weights": {
            "Q": weights.Q.tolist(),
            "S": weights.S.tolist(),
            "R": weights.R.tolist(),
            "q": weights.q.tolist(),
            "rho": weights.rho.tolist(),
        },
    }
    if problem.strategy is not None:
        doc["strategy"] = {
            "Theta": problem.strategy.Theta.tolist(),
            "v": problem.strategy.v.tolist(),
        }
    if problem.sim is not None:
        doc["sim"] = {key: getattr(problem.sim, key) for key in _SIM_FIELDS}
    if problem.schedule is not None:
        doc["schedule"] = list(problem.schedule)
    return doc


def dump_problem(problem: Problem) -> str:
    return json.dumps(normalize_problem(problem), indent=2) + "\n"


def with_seed(problem: Problem, seed: int) -> Problem:
    """Problem with the simulation seed overridden (creating sim if absent)."""
    sim = problem.sim if problem.sim is not None else SimConfig()
    return dataclasses.replace(problem, sim=dataclasses.replace(sim, seed=seed))
