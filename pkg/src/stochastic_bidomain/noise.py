# src/stochastic_bidomain/noise.py - Q-Wiener noise in the operator eigenbasis.
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bidomain_op import BidomainOperator, semigroup_apply
from .mesh import Field, norm_h_sq

Verdict = Literal["converges", "diverges", "inconclusive"]

# ---------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class PowerLaw:
    """gamma_k = scale * k**(-power) for k = 1..K."""

    scale: float = 1.0
    power: float = 3.0

    def __post_init__(self) -> None:
        if self.scale < 0 or not np.isfinite(self.scale):
            raise ValueError(
                f"negative coefficients: power-law scale must be >= 0, got {self.scale}"
            )
        if not np.isfinite(self.power):
            raise ValueError(f"power-law exponent must be finite, got {self.power}")


@dataclass(frozen=True, eq=False)
class NoiseSpectrum:
    """Coefficients gamma_k for the positive modes k = 1..K; the constant mode carries no noise."""

    gammas: np.ndarray
    rule: PowerLaw | None = None

    def __post_init__(self) -> None:
        g = np.array(self.gammas, dtype=float).ravel()
        if np.any(~np.isfinite(g)) or np.any(g < 0):
            raise ValueError(
                "negative coefficients: gammas must be finite and >= 0, "
                f"min={g.min(initial=0.0)}"
            )
        g.setflags(write=False)
        object.__setattr__(self, "gammas", g)

    @property
    def n_modes(self) -> int:
        return int(self.gammas.size)

    @property
    def trace(self) -> float:
        return float(np.sum(self.gammas))

    @property
    def decay_rule(self) -> str:
        return "power_law" if self.rule is not None else "explicit"

    def to_dict(self) -> dict[str, object]:
        out: dict[str, object] = {
            "decay_rule": self.decay_rule,
            "n_modes": self.n_modes,
            "trace": self.trace,
            "extrapolated_trace": extrapolated_trace(self),
        }
        if self.rule is not None:
            out["scale"] = self.rule.scale
            out["power"] = self.rule.power
        else:
            out["gammas"] = [float(g) for g in self.gammas]
        return out


def make_spectrum(
    rule: PowerLaw | Sequence[float],
    K: int,
    operator: BidomainOperator,
) -> NoiseSpectrum:
    available = operator.n_modes - 1
    if K < 0 or K > available:
        raise ValueError(f"K must be in [0, {available}] for this operator, got {K}")

    if isinstance(rule, PowerLaw):
        k = np.arange(1, K + 1, dtype=float)
        return NoiseSpectrum(gammas=rule.scale * k ** (-rule.power), rule=rule)

    gammas = np.asarray(rule, dtype=float).ravel()
    if gammas.size != K:
        raise ValueError(f"explicit spectrum has {gammas.size} coefficients, expected K={K}")
    return NoiseSpectrum(gammas=gammas)


def extrapolated_trace(spectrum: NoiseSpectrum) -> float:
    """Partial sum plus the integral tail of the power law beyond K (midpoint rule)."""
    partial = spectrum.trace
    rule = spectrum.rule
    if rule is None or rule.scale == 0:
        return partial
    if rule.power <= 1:
        return float("inf")
    K = spectrum.n_modes
    return partial + rule.scale * (K + 0.5) ** (1.0 - rule.power) / (rule.power - 1.0)


# ---------------------------------------------------------------------
# Summability
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SummabilityReport:
    s_half: float
    s_sq: float
    slope_half: float
    slope_sq: float
    verdict_half: Verdict
    verdict_sq: Verdict

    @property
    def finite(self) -> bool:
        return self.verdict_half == "converges" and self.verdict_sq == "converges"

    def to_dict(self) -> dict[str, object]:
        return {
            "s_half": self.s_half,
            "s_sq": self.s_sq,
            "slope_half": None if np.isnan(self.slope_half) else self.slope_half,
            "slope_sq": None if np.isnan(self.slope_sq) else self.slope_sq,
            "verdict_half": self.verdict_half,
            "verdict_sq": self.verdict_sq,
        }


def _tail_verdict(terms: np.ndarray) -> tuple[float, Verdict]:
    k = np.arange(1, terms.size + 1, dtype=float)
    upper = slice(terms.size // 2, terms.size)
    kk, tt = k[upper], terms[upper]
    keep = tt > 0
    if keep.sum() < 4:
        return float("nan"), "inconclusive"

    slope = float(np.polyfit(np.log(kk[keep]), np.log(tt[keep]), 1)[0])
    if slope < -1.1:
        return slope, "converges"
    if slope > -0.9:
        return slope, "diverges"
    return slope, "inconclusive"


def check_summability(spectrum: NoiseSpectrum, operator: BidomainOperator) -> SummabilityReport:
    lam = operator.eigenvalues[1 : spectrum.n_modes + 1]
    half_terms = spectrum.gammas * np.sqrt(lam)
    sq_terms = spectrum.gammas**2 * lam**2

    slope_half, verdict_half = _tail_verdict(half_terms)
    slope_sq, verdict_sq = _tail_verdict(sq_terms)
    return SummabilityReport(
        s_half=float(np.sum(half_terms)),
        s_sq=float(np.sum(sq_terms)),
        slope_half=slope_half,
        slope_sq=slope_sq,
        verdict_half=verdict_half,
        verdict_sq=verdict_sq,
    )


# ---------------------------------------------------------------------
# Wiener process and stochastic convolution
# ---------------------------------------------------------------------


@dataclass
class WienerState:
    """Per-mode Brownian values W_k(t), owned by a single replica."""

    values: np.ndarray
    t: float
    rng: np.random.Generator

    @classmethod
    def start(cls, n_modes: int, rng: np.random.Generator) -> WienerState:
        return cls(values=np.zeros(n_modes), t=0.0, rng=rng)


def sample_increment(state: WienerState, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    dW = np.sqrt(dt) * state.rng.standard_normal(state.values.shape)
    state.values = state.values + dW
    state.t += dt
    return dW


def wiener_field(state: WienerState, spectrum: NoiseSpectrum, operator: BidomainOperator) -> Field:
    K = spectrum.n_modes
    coeffs = np.zeros(operator.n_modes)
    coeffs[1 : K + 1] = np.sqrt(spectrum.gammas) * state.values[:K]
    return Field(operator.grid, operator.from_modes(coeffs))


@dataclass(frozen=True, eq=False)
class ConvolutionState:
    """W_A in the eigenbasis: modes 1..K, with optional leading replica dimensions."""

    values: np.ndarray
    t: float = 0.0

    @classmethod
    def zero(cls, n_modes: int, leading: tuple[int, ...] = ()) -> ConvolutionState:
        return cls(values=np.zeros(leading + (n_modes,)), t=0.0)


def ou_variance(gammas: np.ndarray, lam: np.ndarray, t: float) -> np.ndarray:
    """Var of mode k of W_A(t): gamma_k (1 - exp(-2 lambda_k t)) / (2 lambda_k)."""
    return gammas * -np.expm1(-2.0 * lam * t) / (2.0 * lam)


def ou_coefficients(
    spectrum: NoiseSpectrum, operator: BidomainOperator, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact one-step (decay, std) per noise-carrying mode."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    K = spectrum.n_modes
    lam = operator.eigenvalues[1 : K + 1]
    if np.any((lam <= 0) & (spectrum.gammas > 0)):
        raise ValueError("noise weight on a zero eigenvalue mode")
    lam_safe = np.where(lam > 0, lam, 1.0)
    return np.exp(-lam * dt), np.sqrt(ou_variance(spectrum.gammas, lam_safe, dt))


def convolution_step(
    state: ConvolutionState,
    spectrum: NoiseSpectrum,
    operator: BidomainOperator,
    dt: float,
    rng: np.random.Generator | None = None,
    xi: np.ndarray | None = None,
) -> ConvolutionState:
    decay, std = ou_coefficients(spectrum, operator, dt)
    if xi is None:
        if rng is None:
            raise ValueError("convolution_step needs rng or xi")
        xi = rng.standard_normal(state.values.shape)
    return ConvolutionState(values=decay * state.values + std * xi, t=state.t + dt)


def linear_mean_square(
    operator: BidomainOperator,
    spectrum: NoiseSpectrum,
    u0: Field,
    epsilon: float,
    t: float,
) -> float:
    """E||u(t)||_H^2 for du = -A u dt + epsilon dW."""
    K = spectrum.n_modes
    lam = operator.eigenvalues[1 : K + 1]
    drift = norm_h_sq(semigroup_apply(operator, t, u0))
    return drift + epsilon**2 * float(np.sum(ou_variance(spectrum.gammas, lam, t)))


__all__ = [
    "PowerLaw",
    "NoiseSpectrum",
    "SummabilityReport",
    "WienerState",
    "ConvolutionState",
    "make_spectrum",
    "extrapolated_trace",
    "check_summability",
    "sample_increment",
    "wiener_field",
    "ou_variance",
    "ou_coefficients",
    "convolution_step",
    "linear_mean_square",
]
