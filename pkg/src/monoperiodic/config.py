"""Run configuration: a TOML file with sections problem/grid/constants/checks/sweep/output.

Unknown sections and keys are rejected so that a misspelled hypothesis
constant can never be silently ignored.  Numeric entries may be written as
expressions such as ``"2*pi"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .expressions import ExpressionError, evaluate_number, pointwise_rhs, profile
from .monotone_solver import HypothesisConstants
from .problems import KINDS, ProblemRecipe

CHECKS = ("h1", "h3h4h5", "certificate", "oracle", "extremality")

_KIND_PARAMS = {
    "scalar_delay": {"a", "k", "c"},
    "parabolic_1d": {"diffusion", "upper_scale"},
    "transport_periodic": {"upper_level"},
    "scalar_bistable": set(),
}
_PROBLEM_KEYS = {"kind", "period", "delay", "spatial_nodes", "rhs", "lower", "upper"}
_SECTIONS = {
    "problem": None,
    "grid": {"nodes", "tolerance", "max_iter", "quadrature"},
    "constants": {"C", "C1", "C2", "C3", "L1", "L2", "N"},
    "checks": {"enabled", "samples", "seed", "probes", "oracle", "oracle_bound",
               "oracle_periods", "oracle_substeps", "substeps"},
    "sweep": {"nodes", "jobs"},
    "output": {"directory"},
}
_DEFAULT_PERIOD = {"parabolic_1d": 1.0}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    recipe: ProblemRecipe
    source: dict
    tolerance: float = 1e-8
    max_iter: int = 500
    quadrature: str = "exponential"
    checks: tuple = ()
    samples: int = 2000
    seed: int = 0
    probes: int = 3
    oracle: str = "auto"
    oracle_bound: float = 1e-3
    oracle_periods: int = 50
    oracle_substeps: int = 10
    substeps: int = 64
    sweep_nodes: tuple = (64, 128, 256)
    jobs: int = 1
    output: Path = field(default_factory=lambda: Path("out"))


def _number(section, key, value):
    try:
        return evaluate_number(value)
    except ExpressionError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _int(section, key, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{section}] {key}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"[{section}] {key}: must be >= {minimum}, got {value}")
    return value


def _unknown(section, keys, allowed):
    extra = sorted(set(keys) - set(allowed))
    if extra:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(extra)}; allowed: {', '.join(sorted(allowed))}")


def parse_config(data: dict, base: Path | None = None) -> RunConfig:
    """Validate a parsed TOML mapping."""
    extra = sorted(set(data) - set(_SECTIONS))
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(extra)}; allowed: {', '.join(_SECTIONS)}")
    if "problem" not in data:
        raise ConfigError("missing [problem] section")
    prob = data["problem"]
    kind = prob.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"[problem] kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    _unknown("problem", prob, _PROBLEM_KEYS | _KIND_PARAMS[kind])

    grid = data.get("grid", {})
    _unknown("grid", grid, _SECTIONS["grid"])
    nodes = _int("grid", "nodes", grid.get("nodes", 256), 2)
    tol = _number("grid", "tolerance", grid.get("tolerance", 1e-8))
    if not tol > 0:
        raise ConfigError(f"[grid] tolerance: must be > 0, got {tol}")
    max_iter = _int("grid", "max_iter", grid.get("max_iter", 500), 1)
    quadrature = grid.get("quadrature", "exponential")
    if quadrature not in ("exponential", "trapezoid"):
        raise ConfigError(f"[grid] quadrature: expected 'exponential' or 'trapezoid', got {quadrature!r}")

    period = _number("problem", "period", prob.get("period", _DEFAULT_PERIOD.get(kind, 2 * math.pi)))
    if not period > 0:
        raise ConfigError(f"[problem] period: must be > 0, got {period}")
    delay = _number("problem", "delay", prob.get("delay", 0.0))
    if delay < 0:
        raise ConfigError(f"[problem] delay: must be >= 0, got {delay}")
    default_space = {"parabolic_1d": 50, "transport_periodic": 64}.get(kind, 1)
    spatial = _int("problem", "spatial_nodes", prob.get("spatial_nodes", default_space), 1)
    params = {k: _number("problem", k, prob[k]) for k in _KIND_PARAMS[kind] if k in prob}
    compiled = {}
    for key, compile_ in (("rhs", pointwise_rhs), ("lower", profile), ("upper", profile)):
        if key in prob:
            try:
                compiled[key] = compile_(str(prob[key]))
            except ExpressionError as exc:
                raise ConfigError(f"[problem] {key}: {exc}") from None
    rhs, lower, upper = (compiled.get(k) for k in ("rhs", "lower", "upper"))

    constants = None
    if "constants" in data:
        sec = data["constants"]
        _unknown("constants", sec, _SECTIONS["constants"])
        vals = {k: _number("constants", k, v) for k, v in sec.items()}
        try:
            constants = HypothesisConstants(**vals)
        except ValueError as exc:
            raise ConfigError(f"[constants] {exc}") from None

    recipe = ProblemRecipe(kind, nodes, period, delay, spatial, params, rhs, lower, upper, constants)

    chk = data.get("checks", {})
    _unknown("checks", chk, _SECTIONS["checks"])
    enabled = chk.get("enabled", [])
    if not isinstance(enabled, list) or any(c not in CHECKS for c in enabled):
        raise ConfigError(f"[checks] enabled: expected a list drawn from {', '.join(CHECKS)}, got {enabled!r}")
    oracle = chk.get("oracle", "auto")
    if oracle not in ("auto", "fourier", "timestep"):
        raise ConfigError(f"[checks] oracle: expected auto, fourier or timestep, got {oracle!r}")

    sweep = data.get("sweep", {})
    _unknown("sweep", sweep, _SECTIONS["sweep"])
    sweep_nodes = sweep.get("nodes", [64, 128, 256])
    if not isinstance(sweep_nodes, list) or not sweep_nodes:
        raise ConfigError("[sweep] nodes: expected a nonempty list of integers")
    sweep_nodes = tuple(_int("sweep", "nodes", m, 2) for m in sweep_nodes)

    out = data.get("output", {})
    _unknown("output", out, _SECTIONS["output"])
    directory = Path(out.get("directory", "out"))
    if base is not None and not directory.is_absolute():
        directory = base / directory

    return RunConfig(
        recipe=recipe, source=data, tolerance=tol, max_iter=max_iter, quadrature=quadrature,
        checks=tuple(enabled),
        samples=_int("checks", "samples", chk.get("samples", 2000), 1),
        seed=_int("checks", "seed", chk.get("seed", 0), 0),
        probes=_int("checks", "probes", chk.get("probes", 3), 1),
        oracle=oracle,
        oracle_bound=_number("checks", "oracle_bound", chk.get("oracle_bound", 1e-3)),
        oracle_periods=_int("checks", "oracle_periods", chk.get("oracle_periods", 50), 1),
        oracle_substeps=_int("checks", "oracle_substeps", chk.get("oracle_substeps", 10), 1),
        substeps=_int("checks", "substeps", chk.get("substeps", 64), 1),
        sweep_nodes=sweep_nodes,
        jobs=_int("sweep", "jobs", sweep.get("jobs", 1), 1),
        output=directory,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, base=path.parent)
