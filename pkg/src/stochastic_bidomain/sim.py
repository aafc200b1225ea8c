# src/stochastic_bidomain/sim.py - Time integration of the stochastic bidomain system.
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import pandas as pd

from .bidomain_op import BidomainOperator
from .ionic import C3Fit, IonicModel, eval_f, eval_g, fit_condition_c3
from .mesh import Field, Grid, gradient_sq
from .noise import (
    ConvolutionState,
    NoiseSpectrum,
    WienerState,
    convolution_step,
    ou_coefficients,
    sample_increment,
    wiener_field,
)
from .quality import BLOWUP_THRESHOLD, LEDGER_COLUMNS, first_bad_row, require_columns, state_ok
from .streams import replica_generator

Scheme = Literal["imex_spectral", "explicit_em"]

# ---------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConstantSource:
    current: Field

    time_independent = True

    def __call__(self, t: float) -> np.ndarray:
        return self.current.values

    def to_dict(self) -> dict[str, object]:
        return {"kind": "constant", "values": [float(v) for v in self.current.values]}


@dataclass(frozen=True)
class Electrode:
    """Rectangular stimulus region [lower, upper] per axis, active on [t_on, t_off)."""

    amplitude: float
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    t_on: float = 0.0
    t_off: float = float("inf")

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper):
            raise ValueError(f"electrode bounds differ in length: {self.lower} vs {self.upper}")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"electrode lower > upper: {self.lower} vs {self.upper}")
        if self.t_off <= self.t_on:
            raise ValueError(f"electrode t_off must exceed t_on, got [{self.t_on}, {self.t_off})")

    def active(self, t: float) -> bool:
        return self.t_on <= t < self.t_off

    def to_dict(self) -> dict[str, object]:
        return {
            "amplitude": self.amplitude,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "t_on": self.t_on,
            "t_off": self.t_off,
        }


@dataclass(frozen=True, eq=False)
class ElectrodeSource:
    """I(t, x) = sum_k amplitude_k * chi_{Omega_k}(x) over the active electrodes."""

    grid: Grid
    electrodes: tuple[Electrode, ...]

    def __post_init__(self) -> None:
        for e in self.electrodes:
            if len(e.lower) != self.grid.dimension:
                raise ValueError(
                    f"electrode has {len(e.lower)} bounds, grid is {self.grid.dimension}-D"
                )
        masks = []
        for e in self.electrodes:
            inside = np.ones(self.grid.n_nodes, dtype=bool)
            for x, lo, hi in zip(self.grid.coordinates, e.lower, e.upper):
                inside &= (x >= lo) & (x <= hi)
            masks.append(inside.astype(float))
        object.__setattr__(self, "_masks", masks)

    @property
    def time_independent(self) -> bool:
        return all(e.t_on <= 0 and np.isinf(e.t_off) for e in self.electrodes)

    def __call__(self, t: float) -> np.ndarray:
        out = np.zeros(self.grid.n_nodes)
        for e, mask in zip(self.electrodes, self._masks):
            if e.active(t):
                out += e.amplitude * mask
        return out

    def to_dict(self) -> dict[str, object]:
        return {"kind": "electrodes", "electrodes": [e.to_dict() for e in self.electrodes]}


Source = ConstantSource | ElectrodeSource | Callable[[float], np.ndarray]


def source_is_time_independent(source: Source | None) -> bool:
    if source is None:
        return True
    return bool(getattr(source, "time_independent", False))


def _source_values(source: Source | None, t: float, n: int) -> np.ndarray | None:
    if source is None:
        return None
    vals = source(t)
    vals = vals.values if isinstance(vals, Field) else np.asarray(vals, dtype=float)
    if vals.shape != (n,):
        raise ValueError(f"grid mismatch: source returned shape {vals.shape}, expected ({n},)")
    return vals


# ---------------------------------------------------------------------
# Config and state
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SimConfig:
    dt: float
    T: float
    scheme: Scheme = "imex_spectral"
    epsilon: float = 0.0
    source: Source | None = None
    record_every: int = 1

    def __post_init__(self) -> None:
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not (np.isfinite(self.T) and self.T >= self.dt):
            raise ValueError(f"T must be >= dt, got T={self.T}, dt={self.dt}")
        if self.scheme not in ("imex_spectral", "explicit_em"):
            raise ValueError(f"Unknown scheme: {self.scheme!r}")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError(f"record_every must be an integer >= 1, got {self.record_every}")

    @property
    def n_steps(self) -> int:
        return max(1, int(np.floor(self.T / self.dt + 1e-9)))

    def check_stability(self, operator: BidomainOperator) -> None:
        if self.scheme == "explicit_em":
            lam_max = float(operator.eigenvalues[-1])
            if self.dt * lam_max >= 2.0:
                raise ValueError(
                    f"explicit_em unstable: dt * lambda_max = {self.dt * lam_max:.4g} >= 2; "
                    "reduce dt or use imex_spectral"
                )

    def to_dict(self) -> dict[str, object]:
        src = self.source
        return {
            "dt": self.dt,
            "T": self.T,
            "scheme": self.scheme,
            "epsilon": self.epsilon,
            "record_every": self.record_every,
            "source": (
                None if src is None else getattr(src, "to_dict", lambda: {"kind": "callable"})()
            ),
        }


@dataclass(frozen=True, eq=False)
class State:
    u: Field
    w: Field
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.u.grid != self.w.grid:
            raise ValueError(f"grid mismatch: u on {self.u.grid}, w on {self.w.grid}")

    @classmethod
    def constant(cls, grid: Grid, u0: float = 0.0, w0: float = 0.0) -> State:
        return cls(Field.constant(grid, u0), Field.constant(grid, w0))


class BlowUpError(RuntimeError):
    """Raised on a non-finite or oversized state; ``ledger`` ends with the offending row."""

    def __init__(
        self,
        time: float,
        last_row: dict[str, float] | None,
        ledger: pd.DataFrame,
        first_bad: int | None = None,
    ):
        super().__init__(f"blow-up at t={time:.6g}: state non-finite or above {BLOWUP_THRESHOLD:g}")
        self.time = time
        self.last_row = last_row
        self.ledger = ledger
        self.first_bad = first_bad

    @classmethod
    def from_ledger(cls, time: float, ledger: pd.DataFrame) -> BlowUpError:
        bad = first_bad_row(ledger) if len(ledger) else None
        if bad is None and len(ledger):
            bad = len(ledger) - 1
        last = ledger.iloc[bad - 1].to_dict() if bad else None
        return cls(time=time, last_row=last, ledger=ledger, first_bad=bad)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    epsilon: float
    times: np.ndarray
    u: np.ndarray
    w: np.ndarray
    ledger: pd.DataFrame
    final: State
    wiener: Field | None = None

    def __post_init__(self) -> None:
        require_columns(self.ledger, LEDGER_COLUMNS)


# ---------------------------------------------------------------------
# Energy ledger
# ---------------------------------------------------------------------


def _ledger_row(
    t: float,
    u: np.ndarray,
    w: np.ndarray,
    uh: np.ndarray,
    operator: BidomainOperator,
    model: IonicModel,
    c3: C3Fit,
) -> list[float]:
    grid = operator.grid
    q = grid.quadrature_weight
    hu = float(np.sum(q * u * u))
    hw = float(np.sum(q * w * w))
    l4 = float(np.sum(q * u**4))
    fu = float(np.sum(q * u * eval_f(model, u, w)))
    gw = float(np.sum(q * w * eval_g(model, u, w)))
    residual = fu + gw - (c3.a * l4 - c3.b * (hu + hw) - c3.c * grid.measure)
    return [
        t,
        hu,
        hw,
        hu + float(gradient_sq(grid, u)),
        l4,
        float(np.sum(operator.eigenvalues * uh * uh)),
        residual,
    ]


def _frame(rows: list[list[float]]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=LEDGER_COLUMNS)


# ---------------------------------------------------------------------
# Integrator
# ---------------------------------------------------------------------


def _phi(rate: np.ndarray | float, dt: float) -> np.ndarray:
    """(1 - exp(-rate dt)) / rate, equal to dt at rate 0."""
    r = np.asarray(rate, dtype=float)
    safe = np.where(r == 0, 1.0, r)
    return np.where(r == 0, dt, -np.expm1(-safe * dt) / safe)


@dataclass
class _Member:
    epsilon: float
    uh: np.ndarray
    w: np.ndarray
    wa: ConvolutionState | None = None
    rows: list[list[float]] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    us: list[np.ndarray] = field(default_factory=list)
    ws: list[np.ndarray] = field(default_factory=list)

    def shifted(self, uh: np.ndarray) -> np.ndarray:
        """Modes of u = U + epsilon W_A for a transformed member, else uh unchanged."""
        if self.wa is None or self.epsilon == 0.0:
            return uh
        out = uh.copy()
        out[1 : self.wa.values.size + 1] += self.epsilon * self.wa.values
        return out


class _Stepper:
    def __init__(
        self,
        config: SimConfig,
        operator: BidomainOperator,
        model: IonicModel,
        spectrum: NoiseSpectrum,
    ) -> None:
        if spectrum.n_modes > operator.n_modes - 1:
            raise ValueError(
                f"spectrum has {spectrum.n_modes} modes, operator only {operator.n_modes - 1}"
            )
        config.check_stability(operator)
        self.config = config
        self.op = operator
        self.model = model
        self.spectrum = spectrum
        self.K = spectrum.n_modes
        dt = config.dt
        lam = operator.eigenvalues

        # direct-path noise per mode is noise_gain * dW
        if config.scheme == "imex_spectral":
            self.decay = np.exp(-lam * dt)
            self.phi = _phi(lam, dt)
            if self.K:
                _, std = ou_coefficients(spectrum, operator, dt)
                self.noise_gain = std / np.sqrt(dt)
            else:
                self.noise_gain = np.zeros(0)
            self.w_decay = float(np.exp(-model.g2 * dt))
            self.w_phi = float(_phi(model.g2, dt))
        else:
            self.decay = 1.0 - lam * dt
            self.phi = np.full_like(lam, dt)
            self.noise_gain = np.sqrt(spectrum.gammas)
            self.w_decay = 1.0 - model.g2 * dt
            self.w_phi = dt

    def drift(self, t: float, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        out = -eval_f(self.model, u, w)
        src = _source_values(self.config.source, t, u.size)
        return out if src is None else out + src

    def advance(self, m: _Member, t: float, dW: np.ndarray | None) -> np.ndarray:
        """One step for one member driven by the Wiener increments dW; returns u at t + dt."""
        u = self.op.from_modes(m.shifted(m.uh))
        F = self.drift(t, u, m.w)
        uh = self.decay * m.uh + self.phi * self.op.to_modes(F)
        w = self.w_decay * m.w - self.w_phi * eval_g(self.model, u, 0.0 * m.w)

        if dW is not None:
            if m.wa is not None:
                xi = dW / np.sqrt(self.config.dt)
                m.wa = convolution_step(m.wa, self.spectrum, self.op, self.config.dt, xi=xi)
            elif m.epsilon != 0.0:
                uh[1 : self.K + 1] += m.epsilon * self.noise_gain * dW

        m.uh, m.w = uh, w
        return self.op.from_modes(m.shifted(uh))


def _run(
    initial: State,
    config: SimConfig,
    operator: BidomainOperator,
    model: IonicModel,
    spectrum: NoiseSpectrum,
    epsilons: Sequence[float],
    seed: int,
    replica_id: int,
    transformed: bool,
    c3: C3Fit | None,
    keep_states: bool,
) -> list[TrajectoryRecord]:
    if initial.u.grid != operator.grid:
        raise ValueError(f"grid mismatch: state on {initial.u.grid}, operator on {operator.grid}")
    if not epsilons:
        raise ValueError("epsilons must be nonempty")
    if any(not (np.isfinite(e) and e >= 0) for e in epsilons):
        raise ValueError(f"epsilons must be finite and >= 0, got {list(epsilons)}")

    stepper = _Stepper(config, operator, model, spectrum)
    c3 = c3 if c3 is not None else fit_condition_c3(model)
    K = stepper.K
    # one draw of K normals per step, in step order, from the replica's own stream
    wiener = WienerState.start(K, replica_generator(seed, replica_id))

    uh0 = operator.to_modes(initial.u.values)
    members = [
        _Member(
            epsilon=float(e),
            uh=uh0.copy(),
            w=initial.w.values.copy(),
            wa=ConvolutionState.zero(K) if transformed else None,
        )
        for e in epsilons
    ]

    def record(m: _Member, t: float, u: np.ndarray) -> None:
        m.rows.append(_ledger_row(t, u, m.w, m.shifted(m.uh), operator, model, c3))
        m.times.append(t)
        if keep_states:
            m.us.append(u.copy())
            m.ws.append(m.w.copy())

    def blow_up(m: _Member, t: float, u: np.ndarray) -> BlowUpError:
        with np.errstate(all="ignore"):
            row = _ledger_row(t, u, m.w, m.shifted(m.uh), operator, model, c3)
        return BlowUpError.from_ledger(t, _frame([*m.rows, row]))

    t0 = float(initial.t)
    for m in members:
        record(m, t0, initial.u.values)

    n_steps, every = config.n_steps, config.record_every
    for step in range(1, n_steps + 1):
        t_prev = t0 + (step - 1) * config.dt
        t = t0 + step * config.dt
        dW = sample_increment(wiener, config.dt) if K else None
        for m in members:
            u = stepper.advance(m, t_prev, dW)
            if not state_ok(u, m.w):
                raise blow_up(m, t, u)
            if step % every == 0 or step == n_steps:
                record(m, t, u)

    path = wiener_field(wiener, spectrum, operator) if K else None
    out = []
    for m in members:
        us = np.array(m.us) if keep_states else np.empty((0, operator.grid.n_nodes))
        ws = np.array(m.ws) if keep_states else np.empty((0, operator.grid.n_nodes))
        final_u = us[-1] if keep_states else operator.from_modes(m.shifted(m.uh))
        out.append(
            TrajectoryRecord(
                epsilon=m.epsilon,
                times=np.array(m.times),
                u=us,
                w=ws,
                ledger=_frame(m.rows),
                final=State(
                    Field(operator.grid, final_u), Field(operator.grid, m.w), m.times[-1]
                ),
                wiener=path,
            )
        )
    return out


# ---------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------


def step_imex(
    state: State,
    config: SimConfig,
    operator: BidomainOperator,
    model: IonicModel,
    spectrum: NoiseSpectrum,
    xi: np.ndarray | None = None,
) -> State:
    """Single step of the configured scheme; xi are the K standard normals for this step."""
    if state.u.grid != operator.grid:
        raise ValueError(f"grid mismatch: state on {state.u.grid}, operator on {operator.grid}")
    stepper = _Stepper(config, operator, model, spectrum)
    uh = operator.to_modes(state.u.values)
    m = _Member(epsilon=config.epsilon, uh=uh, w=state.w.values.copy())
    if stepper.K and xi is None and config.epsilon != 0.0:
        raise ValueError("step_imex with epsilon > 0 needs xi")
    dW = None if xi is None else np.sqrt(config.dt) * np.asarray(xi, dtype=float)
    u = stepper.advance(m, state.t, dW)
    if not state_ok(u, m.w):
        raise BlowUpError(time=state.t + config.dt, last_row=None, ledger=_frame([]))
    return State(Field(operator.grid, u), Field(operator.grid, m.w), state.t + config.dt)


def simulate_coupled(
    initial: State,
    config: SimConfig,
    operator: BidomainOperator,
    model: IonicModel,
    spectrum: NoiseSpectrum,
    epsilons: Sequence[float],
    seed: int,
    replica_id: int = 0,
    c3: C3Fit | None = None,
    keep_states: bool = True,
) -> list[TrajectoryRecord]:
    """One Brownian path shared by every amplitude in epsilons; config.epsilon is ignored."""
    return _run(
        initial, config, operator, model, spectrum, epsilons, seed, replica_id, False, c3,
        keep_states,
    )


def simulate(
    initial: State,
    config: SimConfig,
    operator: BidomainOperator,
    model: IonicModel,
    spectrum: NoiseSpectrum,
    seed: int,
    replica_id: int = 0,
    c3: C3Fit | None = None,
    keep_states: bool = True,
) -> TrajectoryRecord:
    return simulate_coupled(
        initial,
        config,
        operator,
        model,
        spectrum,
        [config.epsilon],
        seed,
        replica_id,
        c3=c3,
        keep_states=keep_states,
    )[0]


def simulate_transformed(
    initial: State,
    config: SimConfig,
    operator: BidomainOperator,
    model: IonicModel,
    spectrum: NoiseSpectrum,
    seed: int,
    replica_id: int = 0,
    c3: C3Fit | None = None,
    keep_states: bool = True,
) -> TrajectoryRecord:
    """Integrates U = u - epsilon W_A with W_A advanced exactly; reports u = U + epsilon W_A."""
    return _run(
        initial,
        config,
        operator,
        model,
        spectrum,
        [config.epsilon],
        seed,
        replica_id,
        True,
        c3,
        keep_states,
    )[0]


def sup_difference(a: TrajectoryRecord, b: TrajectoryRecord, grid: Grid) -> float:
    """sup over shared record points of ||u_a - u_b||_H^2 + ||w_a - w_b||_H^2."""
    if a.u.shape != b.u.shape or a.u.size == 0:
        raise ValueError("records must hold states on identical record points")
    q = grid.quadrature_weight
    du, dw = a.u - b.u, a.w - b.w
    return float(np.max((du * du) @ q + (dw * dw) @ q))


def difference_series(a: TrajectoryRecord, b: TrajectoryRecord, grid: Grid) -> np.ndarray:
    if a.u.shape != b.u.shape or a.u.size == 0:
        raise ValueError("records must hold states on identical record points")
    q = grid.quadrature_weight
    du, dw = a.u - b.u, a.w - b.w
    return (du * du) @ q + (dw * dw) @ q


__all__ = [
    "ConstantSource",
    "Electrode",
    "ElectrodeSource",
    "SimConfig",
    "State",
    "TrajectoryRecord",
    "BlowUpError",
    "source_is_time_independent",
    "step_imex",
    "simulate",
    "simulate_coupled",
    "simulate_transformed",
    "sup_difference",
    "difference_series",
]
