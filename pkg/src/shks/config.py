"""Flat key=value configuration with dotted sections.

The format is one `key = value` pair per line, `#` comments, chosen over
nested formats for diff-friendliness in experiment sweeps. Unknown keys are
rejected by name; flag overrides win over file values and both are echoed in
the run manifest.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dynamics import CutoffSpec, LinearNoise, NoiseModel, NonlinearNoise, ZeroNoise
from .experiments import SCAN_PARAMETERS, SmallDataBound
from .integrator import Constant, InitialCondition, RandomSobolev, SingleMode, SolverConfig
from .spectral import TorusGrid


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key(s)."""


DEFAULTS: dict[str, str] = {
    "grid.dimension": "1",
    "grid.points": "128",
    "s": "2.0",
    "dt": "0.001",
    "t_final": "1.0",
    "galerkin_n": "auto",
    "cutoff.radius": "unbounded",
    "stop_threshold": "1000.0",
    "record_every": "10",
    "noise.type": "zero",
    "noise.lambda": "1.0",
    "noise.delta": "1.0",
    "noise.c_eff": "1.0",
    "ic.kind": "single_mode",
    "ic.value": "0.1",
    "ic.amplitude": "0.05",
    "ic.wavevector": "1",
    "ic.target_norm": "1.0",
    "ic.decay": "auto",
    "ic.seed": "auto",
    "mc.paths": "64",
    "scan.parameter": "nonlinear_c",
    "scan.values": "0,1,2,4,8",
    "bound.big_r": "",
    "bound.rho": "",
    "bound.c_tilde": "",
    "dt_ladder": "0.01,0.005,0.0025,0.00125,0.0003125",
    "conv.paths": "1",
    "n_ladder": "4,8,16,32",
    "conv.r": "1.0",
    "kappa.samples": "64",
    "kappa.amplitudes": "0.5,1.0,2.0",
    "gbm.lambda": "1.0",
    "gbm.rho": "4.0",
    "gbm.t": "1.0",
    "gbm.paths": "100000",
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse `key = value` lines into a raw string map."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def resolve(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
) -> dict[str, str]:
    """Apply defaults, then file values, then flag overrides.

    Unknown keys (in either source) are rejected with a message listing them.
    """
    resolved = dict(DEFAULTS)
    for label, source in (("config file", file_values), ("flags", overrides)):
        if not source:
            continue
        unknown = sorted(k for k in source if k not in DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown {label} key(s): {', '.join(unknown)}")
        resolved.update(source)
    return resolved


def _float(resolved: dict[str, str], key: str) -> float:
    try:
        return float(resolved[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number ({resolved[key]!r})") from exc


def _int(resolved: dict[str, str], key: str) -> int:
    try:
        return int(resolved[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer ({resolved[key]!r})") from exc


def _float_list(resolved: dict[str, str], key: str) -> list[float]:
    text = resolved[key]
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{key}: not a comma-separated number list ({text!r})") from exc


def _int_list(resolved: dict[str, str], key: str) -> list[int]:
    text = resolved[key]
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{key}: not a comma-separated integer list ({text!r})") from exc


def _build_noise(resolved: dict[str, str]) -> NoiseModel:
    kind = resolved["noise.type"]
    if kind == "zero":
        return ZeroNoise()
    if kind == "linear":
        return LinearNoise(lam=_float(resolved, "noise.lambda"))
    if kind == "nonlinear":
        delta = _float(resolved, "noise.delta")
        c_eff = _float(resolved, "noise.c_eff")
        if delta < 0:
            raise ConfigError(f"noise.delta: must be nonnegative, got {delta}")
        if c_eff <= 0:
            raise ConfigError(f"noise.c_eff: must be positive, got {c_eff}")
        return NonlinearNoise(delta=delta, c_eff=c_eff)
    raise ConfigError(f"noise.type: expected zero|linear|nonlinear, got {kind!r}")


def _build_initial(resolved: dict[str, str], dimension: int) -> InitialCondition:
    kind = resolved["ic.kind"]
    if kind == "constant":
        return Constant(value=_float(resolved, "ic.value"))
    if kind == "single_mode":
        wave = _int_list(resolved, "ic.wavevector")
        if len(wave) == 1 and dimension > 1:
            wave = wave + [0] * (dimension - 1)
        if len(wave) != dimension:
            raise ConfigError(
                f"ic.wavevector: expected {dimension} component(s), got {len(wave)}"
            )
        return SingleMode(amplitude=_float(resolved, "ic.amplitude"), wavevector=tuple(wave))
    if kind == "random_sobolev":
        decay = None if resolved["ic.decay"] == "auto" else _float(resolved, "ic.decay")
        seed = None if resolved["ic.seed"] == "auto" else _int(resolved, "ic.seed")
        return RandomSobolev(
            target_norm=_float(resolved, "ic.target_norm"), decay=decay, seed=seed
        )
    raise ConfigError(
        f"ic.kind: expected constant|single_mode|random_sobolev, got {kind!r}"
    )


def build_solver_config(resolved: dict[str, str]) -> SolverConfig:
    dimension = _int(resolved, "grid.dimension")
    if dimension not in (1, 2):
        raise ConfigError(f"grid.dimension: expected 1 or 2, got {dimension}")
    points = _int(resolved, "grid.points")
    if points < 4 or points % 2 != 0:
        raise ConfigError(f"grid.points: must be even and >= 4, got {points}")
    grid = TorusGrid(dimension=dimension, points_per_dim=points)

    s = _float(resolved, "s")
    if s <= 0:
        raise ConfigError(f"s: must be positive, got {s}")
    dt = _float(resolved, "dt")
    if dt <= 0:
        raise ConfigError(f"dt: must be positive, got {dt}")
    t_final = _float(resolved, "t_final")
    if t_final <= 0:
        raise ConfigError(f"t_final: must be positive, got {t_final}")
    stop = _float(resolved, "stop_threshold")
    if stop <= 0:
        raise ConfigError(f"stop_threshold: must be positive, got {stop}")
    record_every = _int(resolved, "record_every")
    if record_every < 1:
        raise ConfigError(f"record_every: must be >= 1, got {record_every}")

    if resolved["galerkin_n"] == "auto":
        galerkin_n = None
    else:
        galerkin_n = _int(resolved, "galerkin_n")
        if not 0 <= galerkin_n <= points // 2:
            raise ConfigError(
                f"galerkin_n: must lie in [0, {points // 2}], got {galerkin_n}"
            )

    if resolved["cutoff.radius"] == "unbounded":
        cutoff = CutoffSpec.unbounded()
    else:
        radius = _float(resolved, "cutoff.radius")
        if radius <= 0:
            raise ConfigError(f"cutoff.radius: must be positive, got {radius}")
        cutoff = CutoffSpec(radius=radius)

    return SolverConfig(
        grid=grid,
        s=s,
        dt=dt,
        t_final=t_final,
        initial=_build_initial(resolved, dimension),
        noise=_build_noise(resolved),
        cutoff=cutoff,
        galerkin_n=galerkin_n,
        stop_threshold=stop,
        record_every=record_every,
    )


@dataclass
class ExperimentParams:
    """Typed view of the experiment-level keys."""

    mc_paths: int
    scan_parameter: str
    scan_values: list[float]
    bound: SmallDataBound | None
    dt_ladder: list[float]
    conv_paths: int
    n_ladder: list[int]
    conv_r: float
    kappa_samples: int
    kappa_amplitudes: list[float]
    gbm_lambda: float
    gbm_rho: float
    gbm_t: float
    gbm_paths: int


def build_experiment_params(resolved: dict[str, str]) -> ExperimentParams:
    mc_paths = _int(resolved, "mc.paths")
    if mc_paths < 1:
        raise ConfigError(f"mc.paths: must be >= 1, got {mc_paths}")
    parameter = resolved["scan.parameter"]
    if parameter not in SCAN_PARAMETERS:
        raise ConfigError(
            f"scan.parameter: expected one of {', '.join(SCAN_PARAMETERS)}, got {parameter!r}"
        )
    bound = None
    if resolved["bound.big_r"] or resolved["bound.rho"]:
        if not (resolved["bound.big_r"] and resolved["bound.rho"]):
            raise ConfigError("bound.big_r and bound.rho must be set together")
        c_tilde = (
            _float(resolved, "bound.c_tilde") if resolved["bound.c_tilde"] else None
        )
        try:
            bound = SmallDataBound(
                big_r=_float(resolved, "bound.big_r"),
                rho=_float(resolved, "bound.rho"),
                c_tilde=c_tilde,
            )
        except ValueError as exc:
            raise ConfigError(f"bound: {exc}") from exc
    conv_paths = _int(resolved, "conv.paths")
    if conv_paths < 1:
        raise ConfigError(f"conv.paths: must be >= 1, got {conv_paths}")
    gbm_paths = _int(resolved, "gbm.paths")
    if gbm_paths < 1:
        raise ConfigError(f"gbm.paths: must be >= 1, got {gbm_paths}")
    kappa_samples = _int(resolved, "kappa.samples")
    if kappa_samples < 1:
        raise ConfigError(f"kappa.samples: must be >= 1, got {kappa_samples}")
    return ExperimentParams(
        mc_paths=mc_paths,
        scan_parameter=parameter,
        scan_values=_float_list(resolved, "scan.values"),
        bound=bound,
        dt_ladder=_float_list(resolved, "dt_ladder"),
        conv_paths=conv_paths,
        n_ladder=_int_list(resolved, "n_ladder"),
        conv_r=_float(resolved, "conv.r"),
        kappa_samples=kappa_samples,
        kappa_amplitudes=_float_list(resolved, "kappa.amplitudes"),
        gbm_lambda=_float(resolved, "gbm.lambda"),
        gbm_rho=_float(resolved, "gbm.rho"),
        gbm_t=_float(resolved, "gbm.t"),
        gbm_paths=gbm_paths,
    )


@dataclass
class ResolvedConfig:
    solver: SolverConfig
    experiment: ExperimentParams
    resolved: dict[str, str]
    file_values: dict[str, str]
    overrides: dict[str, str]


def parse_config(
    path: str | None = None, overrides: dict[str, str] | None = None
) -> ResolvedConfig:
    """Load, resolve, and validate a configuration.

    `path` may be None (defaults only); `overrides` come from --set flags and
    win over file values.
    """
    file_values: dict[str, str] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        file_values = parse_config_text(text, source=path)
    resolved = resolve(file_values, overrides)
    return ResolvedConfig(
        solver=build_solver_config(resolved),
        experiment=build_experiment_params(resolved),
        resolved=resolved,
        file_values=file_values,
        overrides=dict(overrides or {}),
    )
