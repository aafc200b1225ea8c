# src/stochastic_bidomain/config.py - Run configuration document and output-root resolution.
from __future__ import annotations

import os
import re
import sys
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from dotenv import load_dotenv

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .bidomain_op import BidomainOperator, ConductivitySpec, build_operator
from .experiments import McConfig
from .ionic import DEFAULT_PARAMETERS, IonicModel, SampleBox, make_model
from .mesh import Field, Grid, make_grid
from .noise import NoiseSpectrum, PowerLaw, make_spectrum
from .sim import ConstantSource, Electrode, ElectrodeSource, SimConfig, State

OUTPUT_DIR_ENV = "SBIDOMAIN_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "runs"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class GridSection:
    dimension: int = 1
    extent: float | tuple[float, ...] = float(np.pi)
    nodes_per_axis: int | tuple[int, ...] = 65


@dataclass(frozen=True)
class ConductivitySection:
    sigma_i: float | tuple[tuple[float, float], tuple[float, float]] = 1.0
    sigma_e: float | tuple[tuple[float, float], tuple[float, float]] = 1.0
    bounds: tuple[float, float] = (1e-2, 1e2)


@dataclass(frozen=True)
class ModelSection:
    kind: str = "fitzhugh_nagumo"
    params: dict[str, float] = field(default_factory=dict)
    box_u: float = 10.0
    box_w: float = 10.0


@dataclass(frozen=True)
class NoiseSection:
    rule: str = "power_law"
    modes: int = 32
    scale: float = 1.0
    power: float = 3.0
    gammas: tuple[float, ...] = ()


@dataclass(frozen=True)
class ElectrodeSection:
    amplitude: float
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    t_on: float = 0.0
    t_off: float = float("inf")


@dataclass(frozen=True)
class SimSection:
    dt: float = 1e-3
    T: float = 1.0
    scheme: str = "imex_spectral"
    epsilon: float = 0.0
    record_every: int = 1
    u0: float = 0.0
    w0: float = 0.0
    source: float = 0.0
    electrodes: tuple[ElectrodeSection, ...] = ()


@dataclass(frozen=True)
class ExperimentSection:
    replicas: int = 200
    seed: int = 0
    threads: int = 1
    ci_multiplier: float = 4.0
    epsilons: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    r: float = 0.3
    epsilon: float = 0.1
    eps1: float = 0.2
    eps2: float = 0.1
    burn_in: float = 5.0
    horizon: float = 5.0
    horizons: tuple[float, ...] = (10.0, 20.0, 40.0)
    stationarity_hypotheses: bool = False


SECTION_TYPES: dict[str, type] = {
    "grid": GridSection,
    "conductivity": ConductivitySection,
    "model": ModelSection,
    "noise": NoiseSection,
    "sim": SimSection,
    "experiment": ExperimentSection,
}

# ---------------------------------------------------------------------
# Value coercion
# ---------------------------------------------------------------------


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _integer(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return int(value)


def _boolean(key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{key} must be true or false, got {value!r}")
    return value


def _string(key: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def _numbers(key: str, value: Any) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{key} must be a list of numbers, got {value!r}")
    return tuple(_number(key, v) for v in value)


def _scalar_or_list(key: str, value: Any, conv) -> Any:
    if isinstance(value, (list, tuple)):
        return tuple(conv(key, v) for v in value)
    return conv(key, value)


def _conductivity(key: str, value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        rows = tuple(_numbers(key, row) for row in value)
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ConfigError(f"{key} must be a number or a 2x2 table, got {value!r}")
        return rows
    return _number(key, value)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _check_keys(section: str, data: Mapping[str, Any], allowed: set[str]) -> None:
    unknown = sorted(k for k in data if k not in allowed)
    if unknown:
        raise ConfigError(f"Unknown key: {section}.{unknown[0]}")


def _section(data: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    raw = data.get(name, {})
    if not isinstance(raw, Mapping):
        raise ConfigError(f"[{name}] must be a table")
    return raw


# ---------------------------------------------------------------------
# Section parsers
# ---------------------------------------------------------------------


def _parse_grid(raw: Mapping[str, Any]) -> GridSection:
    _check_keys("grid", raw, {"dimension", "extent", "nodes_per_axis"})
    d = GridSection()
    sec = GridSection(
        dimension=_integer("grid.dimension", raw.get("dimension", d.dimension)),
        extent=_scalar_or_list("grid.extent", raw.get("extent", d.extent), _number),
        nodes_per_axis=_scalar_or_list(
            "grid.nodes_per_axis", raw.get("nodes_per_axis", d.nodes_per_axis), _integer
        ),
    )
    _require(sec.dimension in (1, 2), f"grid.dimension must be 1 or 2, got {sec.dimension}")
    ext = sec.extent if isinstance(sec.extent, tuple) else (sec.extent,)
    nodes = sec.nodes_per_axis if isinstance(sec.nodes_per_axis, tuple) else (sec.nodes_per_axis,)
    _require(all(e > 0 for e in ext), f"grid.extent must be > 0 (Grid invariant), got {sec.extent}")
    _require(
        all(n >= 3 for n in nodes),
        f"grid.nodes_per_axis must be >= 3 (Grid invariant), got {sec.nodes_per_axis}",
    )
    return sec


def _parse_conductivity(raw: Mapping[str, Any]) -> ConductivitySection:
    _check_keys("conductivity", raw, {"sigma_i", "sigma_e", "bounds"})
    d = ConductivitySection()
    bounds = _numbers("conductivity.bounds", raw.get("bounds", list(d.bounds)))
    _require(len(bounds) == 2, f"conductivity.bounds must hold two numbers, got {bounds}")
    _require(
        0 < bounds[0] <= bounds[1],
        f"conductivity.bounds must satisfy 0 < s1 <= s2 (ConductivitySpec invariant), got {bounds}",
    )
    return ConductivitySection(
        sigma_i=_conductivity("conductivity.sigma_i", raw.get("sigma_i", d.sigma_i)),
        sigma_e=_conductivity("conductivity.sigma_e", raw.get("sigma_e", d.sigma_e)),
        bounds=(bounds[0], bounds[1]),
    )


def _parse_model(raw: Mapping[str, Any]) -> ModelSection:
    kind = _string("model.kind", raw.get("kind", ModelSection.kind))
    if kind not in DEFAULT_PARAMETERS:
        raise ConfigError(f"model.kind must be one of {sorted(DEFAULT_PARAMETERS)}, got {kind!r}")
    names = set(DEFAULT_PARAMETERS[kind])
    _check_keys("model", raw, {"kind", "box_u", "box_w"} | names)

    params = {
        k: _number(f"model.{k}", raw.get(k, v)) for k, v in DEFAULT_PARAMETERS[kind].items()
    }
    try:
        make_model(kind, **params)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None

    sec = ModelSection(
        kind=kind,
        params=params,
        box_u=_number("model.box_u", raw.get("box_u", ModelSection.box_u)),
        box_w=_number("model.box_w", raw.get("box_w", ModelSection.box_w)),
    )
    _require(sec.box_u > 0 and sec.box_w > 0, "model.box_u and model.box_w must be > 0")
    return sec


def _parse_noise(raw: Mapping[str, Any]) -> NoiseSection:
    _check_keys("noise", raw, {"rule", "modes", "scale", "power", "gammas"})
    d = NoiseSection()
    rule = _string("noise.rule", raw.get("rule", d.rule))
    _require(
        rule in ("power_law", "explicit"),
        f"noise.rule must be power_law or explicit, got {rule!r}",
    )

    gammas = _numbers("noise.gammas", raw.get("gammas", list(d.gammas)))
    default_modes = len(gammas) if rule == "explicit" else d.modes
    sec = NoiseSection(
        rule=rule,
        modes=_integer("noise.modes", raw.get("modes", default_modes)),
        scale=_number("noise.scale", raw.get("scale", d.scale)),
        power=_number("noise.power", raw.get("power", d.power)),
        gammas=gammas,
    )
    _require(sec.modes >= 0, f"noise.modes must be >= 0, got {sec.modes}")
    _require(
        sec.scale >= 0,
        f"noise.scale must be >= 0 (NoiseSpectrum invariant gamma_k >= 0), got {sec.scale}",
    )
    _require(
        all(g >= 0 for g in gammas),
        "noise.gammas must be >= 0 (NoiseSpectrum invariant gamma_k >= 0)",
    )
    if rule == "explicit":
        _require(
            len(gammas) == sec.modes,
            f"noise.gammas has {len(gammas)} entries but noise.modes = {sec.modes}",
        )
    return sec


def _parse_electrode(raw: Any, index: int) -> ElectrodeSection:
    if not isinstance(raw, Mapping):
        raise ConfigError(f"sim.electrodes[{index}] must be a table")
    prefix = f"sim.electrodes[{index}]"
    _check_keys(prefix, raw, {"amplitude", "lower", "upper", "t_on", "t_off"})
    for key in ("amplitude", "lower", "upper"):
        if key not in raw:
            raise ConfigError(f"Missing key: {prefix}.{key}")
    sec = ElectrodeSection(
        amplitude=_number(f"{prefix}.amplitude", raw["amplitude"]),
        lower=_numbers(f"{prefix}.lower", raw["lower"]),
        upper=_numbers(f"{prefix}.upper", raw["upper"]),
        t_on=_number(f"{prefix}.t_on", raw.get("t_on", 0.0)),
        t_off=_number(f"{prefix}.t_off", raw.get("t_off", float("inf"))),
    )
    _require(len(sec.lower) == len(sec.upper), f"{prefix}.lower and .upper differ in length")
    _require(sec.t_off > sec.t_on, f"{prefix}.t_off must exceed t_on")
    return sec


def _parse_sim(raw: Mapping[str, Any]) -> SimSection:
    _check_keys(
        "sim",
        raw,
        {"dt", "T", "scheme", "epsilon", "record_every", "u0", "w0", "source", "electrodes"},
    )
    d = SimSection()
    electrodes_raw = raw.get("electrodes", [])
    if not isinstance(electrodes_raw, list):
        raise ConfigError("sim.electrodes must be an array of tables ([[sim.electrodes]])")

    sec = SimSection(
        dt=_number("sim.dt", raw.get("dt", d.dt)),
        T=_number("sim.T", raw.get("T", d.T)),
        scheme=_string("sim.scheme", raw.get("scheme", d.scheme)),
        epsilon=_number("sim.epsilon", raw.get("epsilon", d.epsilon)),
        record_every=_integer("sim.record_every", raw.get("record_every", d.record_every)),
        u0=_number("sim.u0", raw.get("u0", d.u0)),
        w0=_number("sim.w0", raw.get("w0", d.w0)),
        source=_number("sim.source", raw.get("source", d.source)),
        electrodes=tuple(_parse_electrode(e, i) for i, e in enumerate(electrodes_raw)),
    )
    _require(sec.dt > 0, f"sim.dt must be > 0 (SimConfig invariant dt > 0), got {sec.dt}")
    _require(
        sec.T >= sec.dt, f"sim.T must be >= sim.dt (SimConfig invariant T >= dt), got T={sec.T}"
    )
    _require(
        sec.scheme in ("imex_spectral", "explicit_em"),
        f"sim.scheme must be imex_spectral or explicit_em, got {sec.scheme!r}",
    )
    _require(
        sec.epsilon >= 0,
        f"sim.epsilon must be >= 0 (SimConfig invariant epsilon >= 0), got {sec.epsilon}",
    )
    _require(sec.record_every >= 1, f"sim.record_every must be >= 1, got {sec.record_every}")
    _require(
        not (sec.electrodes and sec.source != 0.0),
        "sim.source and [[sim.electrodes]] are exclusive",
    )
    return sec


def _parse_experiment(raw: Mapping[str, Any]) -> ExperimentSection:
    d = ExperimentSection()
    _check_keys("experiment", raw, set(asdict(d)))
    sec = ExperimentSection(
        replicas=_integer("experiment.replicas", raw.get("replicas", d.replicas)),
        seed=_integer("experiment.seed", raw.get("seed", d.seed)),
        threads=_integer("experiment.threads", raw.get("threads", d.threads)),
        ci_multiplier=_number(
            "experiment.ci_multiplier", raw.get("ci_multiplier", d.ci_multiplier)
        ),
        epsilons=_numbers("experiment.epsilons", raw.get("epsilons", list(d.epsilons))),
        r=_number("experiment.r", raw.get("r", d.r)),
        epsilon=_number("experiment.epsilon", raw.get("epsilon", d.epsilon)),
        eps1=_number("experiment.eps1", raw.get("eps1", d.eps1)),
        eps2=_number("experiment.eps2", raw.get("eps2", d.eps2)),
        burn_in=_number("experiment.burn_in", raw.get("burn_in", d.burn_in)),
        horizon=_number("experiment.horizon", raw.get("horizon", d.horizon)),
        horizons=_numbers("experiment.horizons", raw.get("horizons", list(d.horizons))),
        stationarity_hypotheses=_boolean(
            "experiment.stationarity_hypotheses",
            raw.get("stationarity_hypotheses", d.stationarity_hypotheses),
        ),
    )
    _require(
        sec.replicas >= 2,
        f"experiment.replicas must be >= 2 (McConfig invariant M >= 2), got {sec.replicas}",
    )
    _require(sec.seed >= 0, f"experiment.seed must be >= 0, got {sec.seed}")
    _require(sec.threads >= 1, f"experiment.threads must be >= 1, got {sec.threads}")
    _require(
        sec.ci_multiplier > 0, f"experiment.ci_multiplier must be > 0, got {sec.ci_multiplier}"
    )
    _require(all(e >= 0 for e in sec.epsilons), "experiment.epsilons must be >= 0")
    _require(sec.eps1 >= 0 and sec.eps2 >= 0, "experiment.eps1 and eps2 must be >= 0")
    return sec


# ---------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------


def _jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    conductivity: ConductivitySection = field(default_factory=ConductivitySection)
    model: ModelSection = field(default_factory=ModelSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    sim: SimSection = field(default_factory=SimSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> RunConfig:
        unknown = sorted(k for k in data if k not in SECTION_TYPES)
        if unknown:
            raise ConfigError(f"Unknown section: [{unknown[0]}]")
        return cls(
            grid=_parse_grid(_section(data, "grid")),
            conductivity=_parse_conductivity(_section(data, "conductivity")),
            model=_parse_model(_section(data, "model")),
            noise=_parse_noise(_section(data, "noise")),
            sim=_parse_sim(_section(data, "sim")),
            experiment=_parse_experiment(_section(data, "experiment")),
        )

    def echo(self) -> dict[str, Any]:
        out = {name: _jsonable(asdict(getattr(self, name))) for name in SECTION_TYPES}
        model = out.pop("model")
        out["model"] = {
            "kind": model["kind"],
            **model["params"],
            "box_u": model["box_u"],
            "box_w": model["box_w"],
        }
        return out

    def with_overrides(
        self,
        seed: int | None = None,
        replicas: int | None = None,
        threads: int | None = None,
    ) -> RunConfig:
        exp = self.experiment
        raw = {
            **_jsonable(asdict(exp)),
            **({"seed": seed} if seed is not None else {}),
            **({"replicas": replicas} if replicas is not None else {}),
            **({"threads": threads} if threads is not None else {}),
        }
        return RunConfig(
            grid=self.grid,
            conductivity=self.conductivity,
            model=self.model,
            noise=self.noise,
            sim=self.sim,
            experiment=_parse_experiment(raw),
        )

    # -- builders -------------------------------------------------------

    def build_grid(self) -> Grid:
        return make_grid(self.grid.dimension, self.grid.extent, self.grid.nodes_per_axis)

    def build_operator(self, grid: Grid | None = None) -> BidomainOperator:
        c = self.conductivity
        spec = ConductivitySpec(
            sigma_i=np.asarray(c.sigma_i, dtype=float),
            sigma_e=np.asarray(c.sigma_e, dtype=float),
            ellipticity_bounds=c.bounds,
        )
        return build_operator(spec, grid or self.build_grid())

    def build_model(self) -> IonicModel:
        return make_model(self.model.kind, **self.model.params)

    def sample_box(self) -> SampleBox:
        return SampleBox(u_max=self.model.box_u, w_max=self.model.box_w)

    def build_spectrum(self, operator: BidomainOperator) -> NoiseSpectrum:
        n = self.noise
        rule = PowerLaw(scale=n.scale, power=n.power) if n.rule == "power_law" else list(n.gammas)
        try:
            return make_spectrum(rule, n.modes, operator)
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from None

    def build_sim_config(self, grid: Grid) -> SimConfig:
        s = self.sim
        source = None
        if s.electrodes:
            try:
                source = ElectrodeSource(
                    grid,
                    tuple(
                        Electrode(e.amplitude, e.lower, e.upper, e.t_on, e.t_off)
                        for e in s.electrodes
                    ),
                )
            except ValueError as exc:
                raise ConfigError(f"sim.electrodes: {exc}") from None
        elif s.source != 0.0:
            source = ConstantSource(Field.constant(grid, s.source))
        return SimConfig(
            dt=s.dt,
            T=s.T,
            scheme=s.scheme,  # type: ignore[arg-type]
            epsilon=s.epsilon,
            source=source,
            record_every=s.record_every,
        )

    def build_initial(self, grid: Grid) -> State:
        return State.constant(grid, self.sim.u0, self.sim.w0)

    def mc_config(self, progress: bool = False) -> McConfig:
        e = self.experiment
        return McConfig(
            replicas=e.replicas,
            seed=e.seed,
            ci_multiplier=e.ci_multiplier,
            threads=e.threads,
            progress=progress,
        )


_LINE_RE = re.compile(r"line (\d+)")


def parse_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Config not found: {p}")
    try:
        with p.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        line = getattr(exc, "lineno", None) or (int(m.group(1)) if m else None)
        raise ConfigError(f"TOML parse error: {exc}", line=line) from None
    return RunConfig.from_mapping(data)


def output_root(out_dir: str | Path | None = None, root: str | Path = ".") -> Path:
    if out_dir:
        return Path(out_dir)
    load_dotenv(Path(root).resolve() / ".env")
    env = os.getenv(OUTPUT_DIR_ENV, "").strip()
    return Path(env) if env else Path(root) / DEFAULT_OUTPUT_DIR


__all__ = [
    "ConfigError",
    "RunConfig",
    "GridSection",
    "ConductivitySection",
    "ModelSection",
    "NoiseSection",
    "SimSection",
    "ElectrodeSection",
    "ExperimentSection",
    "parse_config",
    "output_root",
    "OUTPUT_DIR_ENV",
]
