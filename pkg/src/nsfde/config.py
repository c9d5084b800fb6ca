"""Plain-text experiment configuration (INI sections, strict schema).

Unknown sections or keys are rejected, and the scientific parameters
(dt, steps, K, N, seed) must be explicit; there are no entropy defaults.
Matrices are written row by row with ';' between rows and ',' between
entries, e.g. ``A = 0.4,0.1; 0.0,0.3``; vectors drop the ';'.

The two coefficient sections describe the two systems of a comparison run.
``[coefficients_bar]`` inherits any key it does not set from
``[coefficients]`` and cannot redefine the neutral term (A, kappa): the
comparison framework shares one neutral term between the systems.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet, mean_field_linear_family
from .measures import Ensemble
from .solver import _philox_uniforms, initial_ensemble

__all__ = [
    "ConfigError",
    "GridConfig",
    "CoefficientConfig",
    "InitialConfig",
    "RunConfig",
    "OutputConfig",
    "ExperimentConfig",
    "parse_config",
    "build_coefficient_sets",
    "build_initial_ensembles",
]

_FAMILIES = {"mean_field_linear", "mean_field_linear_lagged_sigma"}

_SECTION_KEYS = {
    "grid": {"dt", "steps", "K", "N", "seed", "contraction_window"},
    "coefficients": {"family", "A", "B", "C", "g", "s", "c", "kappa", "L"},
    "coefficients_bar": {"family", "B", "C", "g", "s", "c", "L"},
    "initial": {"values", "amplitude", "clip"},
    "initial_bar": {"values", "amplitude", "clip", "shift", "shift_low", "shift_high"},
    "run": {
        "tol", "max_iter", "slack", "eps_list", "trials",
        "left_file", "right_file", "localize_tol", "ratio_threshold",
    },
    "output": {"directory", "precision"},
}


class ConfigError(Exception):
    """Configuration cannot be parsed or fails validation."""


@dataclass(frozen=True)
class GridConfig:
    dt: float
    steps: int
    K: int
    N: int
    seed: int
    contraction_window: float | None = None

    @property
    def r0(self) -> float:
        return self.K * self.dt

    @property
    def T(self) -> float:
        return self.steps * self.dt


@dataclass(frozen=True)
class CoefficientConfig:
    family: str
    A: np.ndarray | None
    B: np.ndarray
    C: np.ndarray
    g: np.ndarray | None
    s: np.ndarray
    c: np.ndarray
    kappa: float | None
    L: float | None


@dataclass(frozen=True)
class InitialConfig:
    values: np.ndarray | None
    amplitude: float
    clip: float
    shift: float | None = None
    shift_low: float | None = None
    shift_high: float | None = None


@dataclass(frozen=True)
class RunConfig:
    tol: float = 1e-10
    max_iter: int = 50
    slack: float = 1e-9
    eps_list: tuple | None = None
    trials: int = 500
    left_file: str | None = None
    right_file: str | None = None
    localize_tol: float = 1e-9
    ratio_threshold: float = 1.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "nsfde_out"
    precision: int = 17


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig | None
    coefficients: CoefficientConfig | None
    coefficients_bar: CoefficientConfig | None
    initial: InitialConfig | None
    initial_bar: InitialConfig | None
    run: RunConfig
    output: OutputConfig
    raw: dict


def _parse_matrix(text: str, where: str) -> np.ndarray:
    try:
        rows = [
            [float(v) for v in row.split(",") if v.strip() != ""]
            for row in text.split(";")
        ]
        arr = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse matrix {text!r} ({exc})") from None
    if arr.ndim != 2 or any(len(r) != len(rows[0]) for r in rows):
        raise ConfigError(f"{where}: ragged matrix {text!r}")
    return arr


def _parse_vector(text: str, where: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse vector {text!r} ({exc})") from None


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{where}: expected a real number, got {text!r}") from None


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {text!r}") from None


def _coefficient_config(sec: dict, name: str, base: CoefficientConfig | None = None) -> CoefficientConfig:
    def get(key):
        return sec.get(key)

    family = get("family") or (base.family if base else None)
    if family is None:
        raise ConfigError(f"{name}.family is required")
    if family not in _FAMILIES:
        raise ConfigError(f"{name}.family: unknown family {family!r}; choose from {sorted(_FAMILIES)}")
    if base is None:
        A = _parse_matrix(get("A"), f"{name}.A") if get("A") is not None else None
        kappa = _parse_float(get("kappa"), f"{name}.kappa") if get("kappa") is not None else None
        if A is not None and kappa is None:
            raise ConfigError(f"{name}.kappa is required when A is given")
        if kappa is not None and not 0.0 < kappa < 1.0:
            raise ConfigError(f"{name}.kappa must lie in (0, 1), got {kappa}")
        if A is not None:
            rowsum = float(np.abs(A).sum(axis=1).max())
            if abs(rowsum - kappa) > 1e-9:
                raise ConfigError(
                    f"{name}.kappa={kappa} does not match the max absolute row sum of A ({rowsum})"
                )
    else:
        A, kappa = base.A, base.kappa
    B = _parse_matrix(get("B"), f"{name}.B") if get("B") is not None else (base.B if base else None)
    C = _parse_matrix(get("C"), f"{name}.C") if get("C") is not None else (base.C if base else None)
    if B is None or C is None:
        raise ConfigError(f"{name}: B and C are required")
    g = _parse_vector(get("g"), f"{name}.g") if get("g") is not None else (base.g if base else None)
    s = _parse_matrix(get("s"), f"{name}.s") if get("s") is not None else (base.s if base else None)
    c = _parse_matrix(get("c"), f"{name}.c") if get("c") is not None else (base.c if base else None)
    if s is None or c is None:
        raise ConfigError(f"{name}: s and c are required")
    L = _parse_float(get("L"), f"{name}.L") if get("L") is not None else (base.L if base else None)
    n = B.shape[0]
    if B.shape != (n, n) or C.shape != (n, n):
        raise ConfigError(f"{name}: B and C must be square matrices of equal size")
    if A is not None and A.shape != (n, n):
        raise ConfigError(f"{name}: A must match the dimension of B")
    if s.shape[0] != n or c.shape != s.shape:
        raise ConfigError(f"{name}: s must have {n} rows and c must match s")
    if g is not None and g.size != n:
        raise ConfigError(f"{name}: g must have {n} entries")
    return CoefficientConfig(family=family, A=A, B=B, C=C, g=g, s=s, c=c, kappa=kappa, L=L)


def _initial_config(sec: dict, name: str, allow_relative: bool) -> InitialConfig:
    values = _parse_vector(sec["values"], f"{name}.values") if "values" in sec else None
    amplitude = _parse_float(sec.get("amplitude", "0"), f"{name}.amplitude")
    clip = _parse_float(sec.get("clip", "3"), f"{name}.clip")
    shift = shift_low = shift_high = None
    if allow_relative:
        if "shift" in sec:
            shift = _parse_float(sec["shift"], f"{name}.shift")
        if "shift_low" in sec or "shift_high" in sec:
            if not ("shift_low" in sec and "shift_high" in sec):
                raise ConfigError(f"{name}: shift_low and shift_high must be given together")
            shift_low = _parse_float(sec["shift_low"], f"{name}.shift_low")
            shift_high = _parse_float(sec["shift_high"], f"{name}.shift_high")
            if not 0 <= shift_low <= shift_high:
                raise ConfigError(f"{name}: need 0 <= shift_low <= shift_high")
        relative = shift is not None or shift_low is not None
        if relative and values is not None:
            raise ConfigError(f"{name}: give either explicit values or a shift, not both")
        if not relative and values is None:
            raise ConfigError(f"{name}: values or a shift specification is required")
        if shift is not None and shift_low is not None:
            raise ConfigError(f"{name}: give shift or shift_low/shift_high, not both")
        if shift is not None and shift < 0:
            raise ConfigError(f"{name}.shift must be nonnegative")
    elif values is None:
        raise ConfigError(f"{name}.values is required")
    return InitialConfig(values=values, amplitude=amplitude, clip=clip,
                         shift=shift, shift_low=shift_low, shift_high=shift_high)


def parse_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (C and c are distinct)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    raw: dict = {}
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = _SECTION_KEYS[section]
        sec = dict(parser.items(section))
        for key in sec:
            if key not in allowed:
                raise ConfigError(f"unknown key {section}.{key} (allowed: {sorted(allowed)})")
        raw[section] = dict(sec)

    grid = None
    if "grid" in raw:
        sec = raw["grid"]
        for key in ("dt", "steps", "K", "N", "seed"):
            if key not in sec:
                raise ConfigError(f"grid.{key} is required (no entropy defaults)")
        grid = GridConfig(
            dt=_parse_float(sec["dt"], "grid.dt"),
            steps=_parse_int(sec["steps"], "grid.steps"),
            K=_parse_int(sec["K"], "grid.K"),
            N=_parse_int(sec["N"], "grid.N"),
            seed=_parse_int(sec["seed"], "grid.seed"),
            contraction_window=(
                _parse_float(sec["contraction_window"], "grid.contraction_window")
                if "contraction_window" in sec else None
            ),
        )
        if grid.dt <= 0 or grid.steps < 1 or grid.K < 1 or grid.N < 1:
            raise ConfigError("grid: need dt > 0, steps >= 1, K >= 1, N >= 1")

    coefficients = None
    if "coefficients" in raw:
        coefficients = _coefficient_config(raw["coefficients"], "coefficients")
    coefficients_bar = None
    if "coefficients_bar" in raw:
        if coefficients is None:
            raise ConfigError("[coefficients_bar] requires [coefficients]")
        coefficients_bar = _coefficient_config(raw["coefficients_bar"], "coefficients_bar", base=coefficients)

    initial = _initial_config(raw["initial"], "initial", allow_relative=False) if "initial" in raw else None
    initial_bar = (
        _initial_config(raw["initial_bar"], "initial_bar", allow_relative=True)
        if "initial_bar" in raw else None
    )

    run_kwargs = {}
    if "run" in raw:
        sec = raw["run"]
        if "tol" in sec:
            run_kwargs["tol"] = _parse_float(sec["tol"], "run.tol")
        if "max_iter" in sec:
            run_kwargs["max_iter"] = _parse_int(sec["max_iter"], "run.max_iter")
        if "slack" in sec:
            run_kwargs["slack"] = _parse_float(sec["slack"], "run.slack")
        if "trials" in sec:
            run_kwargs["trials"] = _parse_int(sec["trials"], "run.trials")
        if "localize_tol" in sec:
            run_kwargs["localize_tol"] = _parse_float(sec["localize_tol"], "run.localize_tol")
        if "ratio_threshold" in sec:
            run_kwargs["ratio_threshold"] = _parse_float(sec["ratio_threshold"], "run.ratio_threshold")
        if "eps_list" in sec:
            run_kwargs["eps_list"] = tuple(
                float(v) for v in _parse_vector(sec["eps_list"], "run.eps_list")
            )
        if "left_file" in sec:
            run_kwargs["left_file"] = sec["left_file"]
        if "right_file" in sec:
            run_kwargs["right_file"] = sec["right_file"]
    run = RunConfig(**run_kwargs)

    out_kwargs = {}
    if "output" in raw:
        sec = raw["output"]
        if "directory" in sec:
            out_kwargs["directory"] = sec["directory"]
        if "precision" in sec:
            out_kwargs["precision"] = _parse_int(sec["precision"], "output.precision")
    output = OutputConfig(**out_kwargs)
    if not 1 <= output.precision <= 17:
        raise ConfigError("output.precision must lie in [1, 17]")

    return ExperimentConfig(
        grid=grid,
        coefficients=coefficients,
        coefficients_bar=coefficients_bar,
        initial=initial,
        initial_bar=initial_bar,
        run=run,
        output=output,
        raw=raw,
    )


def _build_set(cc: CoefficientConfig, K: int, r0: float) -> CoefficientSet:
    cs = mean_field_linear_family(
        A=cc.A,
        B=cc.B,
        C=cc.C,
        s=cc.s,
        c=cc.c,
        g=cc.g,
        K=K,
        r0=r0,
        lagged_sigma=(cc.family == "mean_field_linear_lagged_sigma"),
    )
    if cc.L is not None:
        declared = dict(cs.declared)
        declared["lip"] = cc.L
        cs = CoefficientSet(
            neutral=cs.neutral, drift=cs.drift, diffusion=cs.diffusion,
            n=cs.n, m=cs.m, declared=declared, claims=cs.claims,
        )
    return cs


def build_coefficient_sets(cfg: ExperimentConfig):
    """Instantiate the configured system(s); the bar system shares the
    neutral term object of the base system."""
    if cfg.grid is None or cfg.coefficients is None:
        raise ConfigError("this command requires [grid] and [coefficients]")
    cs = _build_set(cfg.coefficients, cfg.grid.K, cfg.grid.r0)
    cs_bar = None
    if cfg.coefficients_bar is not None:
        cs_bar = _build_set(cfg.coefficients_bar, cfg.grid.K, cfg.grid.r0)
        cs_bar = CoefficientSet(
            neutral=cs.neutral,
            drift=cs_bar.drift,
            diffusion=(
                cs_bar.diffusion if cfg.coefficients_bar.family == "mean_field_linear_lagged_sigma"
                else type(cs_bar.diffusion)(cs_bar.diffusion.s, cs_bar.diffusion.c, cs.neutral)
            ),
            n=cs_bar.n, m=cs_bar.m, declared=cs_bar.declared, claims=cs_bar.claims,
        )
    return cs, cs_bar


def build_initial_ensembles(cfg: ExperimentConfig, n: int):
    """Build the initial ensemble(s) from the config.

    The bar ensemble is either sampled independently (explicit values) or
    derived from the base one by nonnegative constant per-pair shifts.
    """
    if cfg.grid is None or cfg.initial is None:
        raise ConfigError("this command requires [grid] and [initial]")
    g = cfg.grid
    if cfg.initial.values.size != n:
        raise ConfigError(f"initial.values must have {n} entries")
    left = initial_ensemble(
        cfg.initial.values, g.K, g.r0, g.N, g.seed,
        amplitude=cfg.initial.amplitude, clip=cfg.initial.clip, stream_offset=0,
    )
    right = None
    ib = cfg.initial_bar
    if ib is not None:
        if ib.values is not None:
            if ib.values.size != n:
                raise ConfigError(f"initial_bar.values must have {n} entries")
            right = initial_ensemble(
                ib.values, g.K, g.r0, g.N, g.seed,
                amplitude=ib.amplitude, clip=ib.clip, stream_offset=1,
            )
        elif ib.shift is not None:
            right = Ensemble(left.values + ib.shift, left.r0)
        else:
            u = _philox_uniforms(g.seed, (1 << 48) + 2, g.N)
            shifts = ib.shift_low + (ib.shift_high - ib.shift_low) * u
            right = Ensemble(left.values + shifts[:, None, None], left.r0)
    return left, right
