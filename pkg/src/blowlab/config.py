"""Flat key-value run configuration.

The on-disk format is one ``key = value`` pair per line, ``#`` comments,
blank lines ignored.  Keys map 1:1 onto the model parameters, the solver
knobs, and the seed construction; unknown keys are an error (diffable
configs should not rot silently).
"""
from __future__ import annotations

from dataclasses import dataclass

from .fields import BOUNDARIES, RadialGrid
from .params import ModelParams, ParameterError, validate
from .solver import SolverConfig


class ConfigError(ValueError):
    """Malformed configuration file or inadmissible key/value."""


# key -> (type, default); beta/t_max default to None (absent)
_SCHEMA = {
    "p": (float, 4.0),
    "q": (float, 3.0),
    "mu": (float, 0.1),
    "dim": (int, 1),
    "beta": (float, None),
    "R": (float, 1.0),
    "M": (int, 4096),
    "dt_safety": (float, 0.5),
    "blowup_cap": (float, 1e8),
    "boundary": (str, "dirichlet-zero"),
    "record_stride": (int, 2000),
    "snapshot_growth": (float, 1.05),
    "max_steps": (int, 5_000_000),
    "t_max": (float, None),
    "t_star": (float, 0.01),
    "taper_start": (float, 0.85),
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs: validated params, solver config, seed knobs."""

    params: ModelParams
    solver: SolverConfig
    t_star: float
    taper_start: float
    raw: dict

    def to_dict(self) -> dict:
        return dict(self.raw)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse key-value lines into a raw typed dict (defaults filled in)."""
    raw = {key: default for key, (_type, default) in _SCHEMA.items()}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        typ, _default = _SCHEMA[key]
        try:
            if typ is str:
                raw[key] = value
            elif value.lower() == "none":
                raw[key] = None
            else:
                raw[key] = typ(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return raw


def build_run_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    """Turn a raw key dict (plus CLI overrides) into validated objects."""
    merged = dict(raw)
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in _SCHEMA:
                raise ConfigError(f"unknown override key {key!r}")
            merged[key] = value
    try:
        params = validate(
            p=float(merged["p"]), q=float(merged["q"]), mu=float(merged["mu"]),
            dim=int(merged["dim"]),
            beta=None if merged["beta"] is None else float(merged["beta"]),
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if merged["boundary"] not in BOUNDARIES:
        raise ConfigError(
            f"boundary must be one of {BOUNDARIES}, got {merged['boundary']!r}"
        )
    try:
        grid = RadialGrid(R=float(merged["R"]), M=int(merged["M"]), dim=params.dim)
        solver = SolverConfig(
            grid=grid, params=params,
            dt_safety=float(merged["dt_safety"]),
            blowup_cap=float(merged["blowup_cap"]),
            boundary=str(merged["boundary"]),
            record_stride=int(merged["record_stride"]),
            snapshot_growth=float(merged["snapshot_growth"]),
            max_steps=int(merged["max_steps"]),
            t_max=None if merged["t_max"] is None else float(merged["t_max"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    merged["beta"] = params.beta  # echo the resolved beta into artifacts
    return RunConfig(params=params, solver=solver,
                     t_star=float(merged["t_star"]),
                     taper_start=float(merged["taper_start"]), raw=merged)


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Read a config file (or use defaults when path is None) and build."""
    if path is None:
        raw = {key: default for key, (_t, default) in _SCHEMA.items()}
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw = parse_config_text(text, source=str(path))
    return build_run_config(raw, overrides)
