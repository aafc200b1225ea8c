# src/stochastic_bidomain/ionic.py - Ionic models and their structural checks.
from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, NamedTuple

import numpy as np
from scipy import optimize

from .mesh import Field

ModelKind = Literal[
    "fitzhugh_nagumo",
    "aliev_panfilov",
    "rogers_mcculloch",
    "allen_cahn",
    "custom",
]

NAMED_KINDS: tuple[str, ...] = (
    "fitzhugh_nagumo",
    "aliev_panfilov",
    "rogers_mcculloch",
    "allen_cahn",
)

DEFAULT_PARAMETERS: dict[str, dict[str, float]] = {
    "fitzhugh_nagumo": {"eta": 1.0, "a": 0.1, "b": 0.5, "c": 0.5},
    "aliev_panfilov": {"eta": 1.0, "k": 8.0, "a": 0.15},
    "rogers_mcculloch": {"eta": 1.0, "b": 1.0, "a": 0.13, "c": 0.26, "d": 1.0},
    "allen_cahn": {"eta": 0.2},
}

ScalarFn = Callable[[np.ndarray], np.ndarray]

# ---------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------


class _Parts(NamedTuple):
    f1: ScalarFn
    f2: ScalarFn
    g1: ScalarFn
    g2: float
    cubic_coefficient: float


def _fitzhugh_nagumo(p: Mapping[str, float]) -> _Parts:
    eta, a, b, c = p["eta"], p["a"], p["b"], p["c"]
    return _Parts(
        f1=lambda u: eta * u * (u - a) * (u - 1.0),
        f2=lambda u: eta + 0.0 * u,
        g1=lambda u: -c * u,
        g2=b,
        cubic_coefficient=eta,
    )


def _aliev_panfilov(p: Mapping[str, float]) -> _Parts:
    eta, k, a = p["eta"], p["k"], p["a"]
    return _Parts(
        f1=lambda u: eta * k * u * (u - a) * (u - 1.0),
        f2=lambda u: eta * u,
        g1=lambda u: k * u * (u - 1.0 - a),
        g2=1.0,
        cubic_coefficient=eta * k,
    )


def _rogers_mcculloch(p: Mapping[str, float]) -> _Parts:
    eta, b, a, c, d = p["eta"], p["b"], p["a"], p["c"], p["d"]
    return _Parts(
        f1=lambda u: eta * b * u * (u - a) * (u - 1.0),
        f2=lambda u: eta * u,
        g1=lambda u: -c * u,
        g2=d,
        cubic_coefficient=eta * b,
    )


def _allen_cahn(p: Mapping[str, float]) -> _Parts:
    eta = p["eta"]
    return _Parts(
        f1=lambda u: eta * (u**3 - u),
        f2=lambda u: 0.0 * u,
        g1=lambda u: 0.0 * u,
        g2=0.0,
        cubic_coefficient=eta,
    )


_BUILDERS: dict[str, Callable[[Mapping[str, float]], _Parts]] = {
    "fitzhugh_nagumo": _fitzhugh_nagumo,
    "aliev_panfilov": _aliev_panfilov,
    "rogers_mcculloch": _rogers_mcculloch,
    "allen_cahn": _allen_cahn,
}


@dataclass(frozen=True, eq=False)
class IonicModel:
    """f(u, w) = f1(u) + f2(u) w and g(u, w) = g1(u) + g2 w."""

    kind: ModelKind
    params: Mapping[str, float] = field(default_factory=dict)
    custom_parts: _Parts | None = None

    @cached_property
    def parts(self) -> _Parts:
        if self.kind == "custom":
            if self.custom_parts is None:
                raise ValueError("custom model needs f1, f2, g1, g2")
            return self.custom_parts
        return _BUILDERS[self.kind](self.params)

    @property
    def g2(self) -> float:
        return float(self.parts.g2)

    @property
    def cubic_coefficient(self) -> float:
        return float(self.parts.cubic_coefficient)

    def to_dict(self) -> dict[str, object]:
        out: dict[str, object] = {"kind": self.kind, "params": dict(self.params)}
        if self.kind == "custom":
            out["g2"] = self.g2
            out["cubic_coefficient"] = self.cubic_coefficient
        return out


def _validate(kind: str, params: Mapping[str, float]) -> None:
    missing = [k for k in DEFAULT_PARAMETERS[kind] if k not in params]
    if missing:
        raise ValueError(f"Missing {kind} parameters: {missing}")
    extra = [k for k in params if k not in DEFAULT_PARAMETERS[kind]]
    if extra:
        raise ValueError(f"Unknown {kind} parameters: {extra}")

    for name, value in params.items():
        if not np.isfinite(value):
            raise ValueError(f"{kind}.{name} must be finite, got {value}")
        if name == "a":
            if not 0.0 < value < 1.0:
                raise ValueError(f"{kind}.a must satisfy 0 < a < 1, got {value}")
        elif value <= 0.0:
            raise ValueError(f"{kind}.{name} must be > 0, got {value}")


def make_model(kind: str, **params: float) -> IonicModel:
    if kind not in _BUILDERS:
        raise ValueError(f"Unknown model kind: {kind!r} (expected one of {list(NAMED_KINDS)})")
    resolved = {**DEFAULT_PARAMETERS[kind], **{k: float(v) for k, v in params.items()}}
    _validate(kind, resolved)
    return IonicModel(kind=kind, params=resolved)  # type: ignore[arg-type]


def fitzhugh_nagumo(eta: float = 1.0, a: float = 0.1, b: float = 0.5, c: float = 0.5) -> IonicModel:
    return make_model("fitzhugh_nagumo", eta=eta, a=a, b=b, c=c)


def aliev_panfilov(eta: float = 1.0, k: float = 8.0, a: float = 0.15) -> IonicModel:
    return make_model("aliev_panfilov", eta=eta, k=k, a=a)


def rogers_mcculloch(
    eta: float = 1.0, b: float = 1.0, a: float = 0.13, c: float = 0.26, d: float = 1.0
) -> IonicModel:
    return make_model("rogers_mcculloch", eta=eta, b=b, a=a, c=c, d=d)


def allen_cahn(eta: float = 0.2) -> IonicModel:
    return make_model("allen_cahn", eta=eta)


def custom_model(
    f1: ScalarFn,
    f2: ScalarFn,
    g1: ScalarFn,
    g2: float,
    cubic_coefficient: float = 0.0,
) -> IonicModel:
    """User nonlinearity.

    cubic_coefficient is the declared u**3 coefficient of f1, used by the dissipation fit.
    """
    if not np.isfinite(g2):
        raise ValueError(f"g2 must be finite, got {g2}")
    parts = _Parts(f1=f1, f2=f2, g1=g1, g2=float(g2), cubic_coefficient=float(cubic_coefficient))
    return IonicModel(kind="custom", custom_parts=parts)


# ---------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------


def _lift(u, w):
    if isinstance(u, Field):
        grid = u.grid
        wv = w.values if isinstance(w, Field) else w
        return grid, u.values, wv
    return None, u, w.values if isinstance(w, Field) else w


def eval_f(model: IonicModel, u, w):
    grid, uv, wv = _lift(u, w)
    p = model.parts
    out = p.f1(np.asarray(uv)) + p.f2(np.asarray(uv)) * np.asarray(wv)
    return Field(grid, out) if grid is not None else out


def eval_g(model: IonicModel, u, w):
    grid, uv, wv = _lift(u, w)
    p = model.parts
    out = p.g1(np.asarray(uv)) + p.g2 * np.asarray(wv)
    return Field(grid, out) if grid is not None else out


# ---------------------------------------------------------------------
# Sampling helpers
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SampleBox:
    u_max: float = 10.0
    w_max: float = 10.0

    def __post_init__(self) -> None:
        if not (self.u_max > 0 and self.w_max > 0):
            raise ValueError(
                f"sample box must be nonempty, got |u| <= {self.u_max}, |w| <= {self.w_max}"
            )

    def to_dict(self) -> dict[str, float]:
        return {"u_max": self.u_max, "w_max": self.w_max}


DEFAULT_BOX = SampleBox()

_POLISH_TOL = {"xatol": 1e-12}
_LBFGSB_TOL = {"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200}


def _derivative(fn: ScalarFn, u: np.ndarray) -> np.ndarray:
    """Complex-step derivative; central differences for callables that drop the imaginary part."""
    u = np.asarray(u, dtype=float)
    h = 1e-20
    try:
        val = np.asarray(fn(u + 1j * h))
        if np.iscomplexobj(val):
            return np.broadcast_to(val.imag / h, u.shape).astype(float)
    except (TypeError, ValueError):
        pass
    step = 1e-6 * np.maximum(1.0, np.abs(u))
    return np.broadcast_to((fn(u + step) - fn(u - step)) / (2.0 * step), u.shape).astype(float)


def _candidates(values: np.ndarray, top: int = 5) -> np.ndarray:
    flat = np.where(np.isfinite(values), values, -np.inf).ravel()
    top = min(top, flat.size)
    idx = np.argpartition(-flat, top - 1)[:top]
    return idx[np.argsort(-flat[idx])]


def _max_1d(fn: ScalarFn, lo: float, hi: float, n: int) -> tuple[float, float]:
    """Sampled maximum of fn on [lo, hi] polished with bounded Brent; returns (value, argmax)."""
    x = np.linspace(lo, hi, n)
    vals = np.asarray(fn(x), dtype=float)
    k0 = int(np.nanargmax(vals))
    best, arg = float(vals[k0]), float(x[k0])
    step = (hi - lo) / max(n - 1, 1)
    for k in _candidates(vals):
        a, b = max(lo, x[k] - step), min(hi, x[k] + step)
        if b <= a:
            continue
        res = optimize.minimize_scalar(
            lambda t: -float(fn(np.asarray(t))),
            bounds=(a, b),
            method="bounded",
            options=_POLISH_TOL,
        )
        if np.isfinite(res.fun) and -res.fun > best:
            best, arg = float(-res.fun), float(res.x)
    return best, arg


def _max_2d(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    u: np.ndarray,
    w: np.ndarray,
    values: np.ndarray,
    bounds: tuple[tuple[float, float], tuple[float, float]],
) -> tuple[float, tuple[float, float]]:
    flat_u, flat_w, flat_v = u.ravel(), w.ravel(), values.ravel()
    k0 = int(np.nanargmax(np.where(np.isfinite(flat_v), flat_v, -np.inf)))
    best, arg = float(flat_v[k0]), (float(flat_u[k0]), float(flat_w[k0]))
    hu = (bounds[0][1] - bounds[0][0]) / max(u.shape[0] - 1, 1)
    hw = (bounds[1][1] - bounds[1][0]) / max(u.shape[1] - 1, 1)
    for k in _candidates(values):
        x0 = np.array([flat_u[k], flat_w[k]])
        cell = [
            (max(bounds[0][0], x0[0] - hu), min(bounds[0][1], x0[0] + hu)),
            (max(bounds[1][0], x0[1] - hw), min(bounds[1][1], x0[1] + hw)),
        ]
        res = optimize.minimize(
            lambda x: -float(fn(np.asarray(x[0]), np.asarray(x[1]))),
            x0,
            method="L-BFGS-B",
            bounds=cell,
            options=_LBFGSB_TOL,
        )
        if np.isfinite(res.fun) and -res.fun > best:
            best, arg = float(-res.fun), (float(res.x[0]), float(res.x[1]))
    return best, arg


def _growth_slope(fn: ScalarFn, radius: float) -> float:
    """Largest log-log slope of |fn| between radius/2 and radius on either side of zero."""
    slopes = []
    for s in (-1.0, 1.0):
        far = abs(float(fn(np.asarray(s * radius))))
        near = abs(float(fn(np.asarray(s * radius / 2.0))))
        if far > 0 and near > 0:
            slopes.append(np.log2(far / near))
    return max(slopes) if slopes else float("-inf")


# ---------------------------------------------------------------------
# Growth envelopes
# ---------------------------------------------------------------------


class C1Fit(NamedTuple):
    constants: tuple[float, float, float, float, float, float]
    unbounded: tuple[str, ...]


def _envelope(
    fn: ScalarFn, power: int, u_max: float, n: int, check_growth: bool
) -> tuple[float, float]:
    """Constants (c_lo, c_hi) with |fn(u)| <= c_lo + c_hi |u|**power on |u| <= u_max."""
    if check_growth and _growth_slope(fn, u_max) > power + 0.5:
        return float("nan"), float("inf")

    absfn = lambda x: np.abs(fn(x))  # noqa: E731
    inner = min(1.0, u_max)
    c_lo, _ = _max_1d(absfn, -inner, inner, n)
    c_lo = max(c_lo, 0.0)
    if u_max <= 1.0:
        return c_lo, 0.0

    ratio = lambda x: (absfn(x) - c_lo) / np.abs(x) ** power  # noqa: E731
    n_side = max(n // 2, 3)
    c_hi = max(_max_1d(ratio, 1.0, u_max, n_side)[0], _max_1d(ratio, -u_max, -1.0, n_side)[0], 0.0)
    return c_lo, c_hi


def fit_condition_c1(
    model: IonicModel, box: SampleBox = DEFAULT_BOX, n_samples: int = 2001
) -> C1Fit:
    if n_samples < 3:
        raise ValueError(f"n_samples must be >= 3, got {n_samples}")
    p = model.parts
    check = model.kind == "custom"
    c1, c2 = _envelope(p.f1, 3, box.u_max, n_samples, check)
    c3, c4 = _envelope(p.f2, 1, box.u_max, n_samples, check)
    c5, c6 = _envelope(p.g1, 2, box.u_max, n_samples, check)

    names = ("f1", "f2", "g1")
    unbounded = tuple(n for n, c in zip(names, (c2, c4, c6)) if np.isinf(c))
    return C1Fit(constants=(c1, c2, c3, c4, c5, c6), unbounded=unbounded)


# ---------------------------------------------------------------------
# Dissipation
# ---------------------------------------------------------------------


class C3Fit(NamedTuple):
    a: float
    b: float
    c: float
    violation: tuple[float, float] | None
    closed_form: bool | None


def _c3_deficit(model: IonicModel, a: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    # a u^4 - (u f + w g): the inequality needs this below b (u^2 + w^2) + c
    def deficit(u: np.ndarray, w: np.ndarray) -> np.ndarray:
        return a * u**4 - (u * eval_f(model, u, w) + w * eval_g(model, u, w))

    return deficit


def c3_closed_form(model: IonicModel) -> bool | None:
    """Closed-form dissipation criterion where one is known; FHN uses g = k w - d u naming."""
    if model.kind == "allen_cahn":
        return True
    if model.kind == "fitzhugh_nagumo":
        eta, k, d = model.params["eta"], model.params["b"], model.params["c"]
        return abs(eta - d) / 2.0 <= k
    return None


def fit_condition_c3(
    model: IonicModel, box: SampleBox = DEFAULT_BOX, n_samples: int = 201
) -> C3Fit:
    if n_samples < 3:
        raise ValueError(f"n_samples must be >= 3, got {n_samples}")
    a = max(model.cubic_coefficient / 2.0, 0.0)
    deficit = _c3_deficit(model, a)

    u, w = np.meshgrid(
        np.linspace(-box.u_max, box.u_max, n_samples),
        np.linspace(-box.w_max, box.w_max, n_samples),
        indexing="ij",
    )
    d = deficit(u, w)
    bounds = ((-box.u_max, box.u_max), (-box.w_max, box.w_max))

    inner = (np.abs(u) <= 1.0) & (np.abs(w) <= 1.0)
    iu, iw = min(1.0, box.u_max), min(1.0, box.w_max)
    inner_bounds = ((-iu, iu), (-iw, iw))
    d_inner = np.where(inner, d, -np.inf)
    c = max(_max_2d(deficit, u, w, d_inner, inner_bounds)[0], 0.0)

    outer = ~inner
    b = 0.0
    if outer.any():

        def ratio(uu: np.ndarray, ww: np.ndarray) -> np.ndarray:
            r2 = np.maximum(uu**2 + ww**2, 1e-300)
            return (deficit(uu, ww) - c) / r2

        r = np.where(outer, ratio(u, w), -np.inf)
        b = max(_max_2d(ratio, u, w, r, bounds)[0], 0.0)

    violation = None
    if model.kind == "custom":
        violation = _c3_shell_violation(deficit, min(box.u_max, box.w_max))

    return C3Fit(a=a, b=b, c=c, violation=violation, closed_form=c3_closed_form(model))


def _c3_shell_violation(
    deficit: Callable[[np.ndarray, np.ndarray], np.ndarray], radius: float
) -> tuple[float, float] | None:
    theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    far = deficit(radius * np.cos(theta), radius * np.sin(theta))
    near = deficit(0.5 * radius * np.cos(theta), 0.5 * radius * np.sin(theta))
    if far.max() <= 0 or near.max() <= 0:
        return None
    if np.log2(far.max() / near.max()) <= 2.5:
        return None
    k = int(np.argmax(far))
    return float(radius * np.cos(theta[k])), float(radius * np.sin(theta[k]))


def c3_residual(fit: C3Fit, model: IonicModel, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """u f + w g - (a u^4 - b (u^2 + w^2) - c); non-negative where the inequality holds."""
    lhs = u * eval_f(model, u, w) + w * eval_g(model, u, w)
    return lhs - (fit.a * u**4 - fit.b * (u**2 + w**2) - fit.c)


# ---------------------------------------------------------------------
# Monotonicity
# ---------------------------------------------------------------------


class MonotonicityFit(NamedTuple):
    c1: float
    c2: float
    cross_coupling: float
    c2_sampled: float
    min_slack: float
    violation: tuple[tuple[float, float], tuple[float, float]] | None


def monotonicity_residual(
    model: IonicModel,
    p1: tuple[float, float] | np.ndarray,
    p2: tuple[float, float] | np.ndarray,
    c1: float,
    c2: float,
) -> np.ndarray | float:
    """Slack of (F(p1) - F(p2)).(p1 - p2) <= -c1 du^2 - c2 dw^2 with F = (-f, -g).

    Nonnegative where the inequality holds.
    """
    u1, w1 = np.asarray(p1, dtype=float).T
    u2, w2 = np.asarray(p2, dtype=float).T
    du, dw = u1 - u2, w1 - w2
    q = (eval_f(model, u1, w1) - eval_f(model, u2, w2)) * du
    q = q + (eval_g(model, u1, w1) - eval_g(model, u2, w2)) * dw
    slack = q - c1 * du**2 - c2 * dw**2
    return float(slack) if np.ndim(slack) == 0 else slack


def fit_monotonicity(
    model: IonicModel,
    box: SampleBox = DEFAULT_BOX,
    n_pairs: int = 20000,
    n_samples: int = 2001,
    seed: int = 0,
) -> MonotonicityFit:
    p = model.parts
    W = box.w_max

    def f_u_low(x: np.ndarray) -> np.ndarray:
        # f_u = f1' + f2' w is affine in w, so its box minimum sits at w = +-W
        d1, d2 = _derivative(p.f1, x), _derivative(p.f2, x)
        return np.minimum(d1 + d2 * W, d1 - d2 * W)

    def half_cross(x: np.ndarray) -> np.ndarray:
        return 0.5 * np.abs(p.f2(np.asarray(x)) + _derivative(p.g1, x))

    x = np.linspace(-box.u_max, box.u_max, n_samples)
    fu, cross = f_u_low(x), half_cross(x)
    bad = ~np.isfinite(fu) | ~np.isfinite(cross)
    if bad.any():
        k = int(np.argmax(bad))
        step = 2.0 * box.u_max / (n_samples - 1)
        pair = ((float(x[k]), 0.0), (float(x[k] + step), 0.0))
        inf = float("-inf")
        return MonotonicityFit(inf, inf, float("inf"), inf, inf, pair)

    neg_fu = lambda t: -f_u_low(t)  # noqa: E731
    c1 = -_max_1d(neg_fu, -box.u_max, box.u_max, n_samples)[0]
    kappa = max(_max_1d(half_cross, -box.u_max, box.u_max, n_samples)[0], 0.0)
    if kappa <= 1e-14 * max(1.0, abs(c1)):
        kappa = 0.0

    c1 -= kappa
    c2 = model.g2 - kappa

    rng = np.random.default_rng(seed)
    scale = np.array([box.u_max, W])
    p1 = rng.uniform(-1.0, 1.0, (n_pairs, 2)) * scale
    p2 = rng.uniform(-1.0, 1.0, (n_pairs, 2)) * scale
    slack = monotonicity_residual(model, p1, p2, c1, c2)
    dw2 = (p1[:, 1] - p2[:, 1]) ** 2
    c2_sampled = float(np.min((slack + c2 * dw2)[dw2 > 1e-12] / dw2[dw2 > 1e-12]))

    return MonotonicityFit(
        c1=float(c1),
        c2=float(c2),
        cross_coupling=float(kappa),
        c2_sampled=c2_sampled,
        min_slack=float(np.min(slack)),
        violation=None,
    )


# ---------------------------------------------------------------------
# Coefficient condition
# ---------------------------------------------------------------------


class CoefficientCheck(NamedTuple):
    satisfied: bool
    margin: float
    requirement: float
    c2_ok: bool


def check_coefficient_condition(
    model: IonicModel,
    alpha: float,
    poincare_cp: float,
    box: SampleBox = DEFAULT_BOX,
    monotonicity: MonotonicityFit | None = None,
) -> CoefficientCheck:
    if alpha <= 0 or poincare_cp <= 0:
        raise ValueError(f"alpha and poincare_cp must be > 0, got {alpha}, {poincare_cp}")
    budget = alpha / poincare_cp

    if model.kind == "allen_cahn":
        requirement = model.params["eta"]
        c2_ok = True
    elif model.kind == "fitzhugh_nagumo":
        eta, a = model.params["eta"], model.params["a"]
        k, d = model.params["b"], model.params["c"]
        requirement = ((1.0 + a) ** 2 / 3.0 - a) * eta + abs(eta - d) / 2.0
        c2_ok = abs(eta - d) / 2.0 <= k
    else:
        fit = monotonicity or fit_monotonicity(model, box)
        requirement = -fit.c1
        c2_ok = bool(fit.violation is None and fit.c2 >= 0)

    margin = budget - requirement
    return CoefficientCheck(
        satisfied=bool(margin >= 0 and c2_ok),
        margin=float(margin),
        requirement=float(requirement),
        c2_ok=bool(c2_ok),
    )


# ---------------------------------------------------------------------
# Aggregate report
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    model: dict[str, object]
    sampled_box: SampleBox
    c1: C1Fit
    c3: C3Fit
    monotonicity: MonotonicityFit
    coefficient_condition: CoefficientCheck | None = None
    notes: tuple[str, ...] = ()

    @property
    def certified(self) -> bool:
        return (
            not self.c1.unbounded
            and self.c3.violation is None
            and self.monotonicity.violation is None
        )

    def to_dict(self) -> dict[str, object]:
        cc = self.coefficient_condition
        return {
            "model": self.model,
            "sampled_box": self.sampled_box.to_dict(),
            "c1_constants": list(self.c1.constants),
            "c1_unbounded": list(self.c1.unbounded),
            "c3_constants": {"a": self.c3.a, "b": self.c3.b, "c": self.c3.c},
            "c3_violation": self.c3.violation,
            "c3_closed_form": self.c3.closed_form,
            "monotonicity_constants": {"c1": self.monotonicity.c1, "c2": self.monotonicity.c2},
            "monotonicity_cross_coupling": self.monotonicity.cross_coupling,
            "monotonicity_min_slack": self.monotonicity.min_slack,
            "monotonicity_violation": self.monotonicity.violation,
            "coefficient_condition": None if cc is None else cc._asdict(),
            "certified": self.certified,
            "notes": list(self.notes),
        }


def check_model(
    model: IonicModel,
    box: SampleBox = DEFAULT_BOX,
    alpha: float | None = None,
    poincare_cp: float | None = None,
) -> ConditionReport:
    c1 = fit_condition_c1(model, box)
    c3 = fit_condition_c3(model, box)
    mono = fit_monotonicity(model, box)

    cc = None
    if alpha is not None and poincare_cp is not None:
        cc = check_coefficient_condition(model, alpha, poincare_cp, box, monotonicity=mono)

    notes: list[str] = []
    if model.kind == "aliev_panfilov":
        notes.append("g taken as k u (u - 1 - a) + w: no relaxation rate on w (g2 = 1)")
    if model.kind == "fitzhugh_nagumo":
        notes.append("closed-form checks read g = k w - d u with k = b, d = c")
    if c3.closed_form is False:
        notes.append(
            "closed-form dissipation criterion fails; "
            "dissipation holds on the box only with enlarged b"
        )
    if model.kind == "custom" and model.cubic_coefficient <= 0:
        notes.append(
            "custom model declares no positive cubic coefficient; dissipation fitted with a = 0"
        )

    return ConditionReport(
        model=model.to_dict(),
        sampled_box=box,
        c1=c1,
        c3=c3,
        monotonicity=mono,
        coefficient_condition=cc,
        notes=tuple(notes),
    )


__all__ = [
    "IonicModel",
    "SampleBox",
    "ConditionReport",
    "C1Fit",
    "C3Fit",
    "MonotonicityFit",
    "CoefficientCheck",
    "make_model",
    "fitzhugh_nagumo",
    "aliev_panfilov",
    "rogers_mcculloch",
    "allen_cahn",
    "custom_model",
    "eval_f",
    "eval_g",
    "fit_condition_c1",
    "fit_condition_c3",
    "c3_closed_form",
    "c3_residual",
    "fit_monotonicity",
    "monotonicity_residual",
    "check_coefficient_condition",
    "check_model",
]
