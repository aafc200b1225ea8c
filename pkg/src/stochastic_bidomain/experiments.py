# src/stochastic_bidomain/experiments.py - Monte-Carlo checks of the stochastic bounds.
from __future__ import annotations

import sys
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, trapezoid
from tqdm import tqdm

from .bidomain_op import BidomainOperator
from .ionic import (
    C3Fit,
    IonicModel,
    check_coefficient_condition,
    fit_condition_c3,
    fit_monotonicity,
)
from .mesh import Field
from .noise import NoiseSpectrum, check_summability
from .sim import (
    BlowUpError,
    SimConfig,
    State,
    difference_series,
    simulate_coupled,
    source_is_time_independent,
    sup_difference,
)

Verdict = Literal["within_bound", "violated_beyond_CI", "inconclusive"]

MAX_EXCLUDED_SHARE = 0.05
TAIL_BOUND_RANGE: tuple[float, float] = (0.02, 0.9)
SUPPORT_TOLERANCE = 0.2
SMALL_NOISE_RATIO_FACTOR = 3.0

# ---------------------------------------------------------------------
# Inputs and reports
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class McConfig:
    replicas: int = 200
    seed: int = 0
    ci_multiplier: float = 4.0
    threads: int = 1
    progress: bool = False

    def __post_init__(self) -> None:
        if self.replicas < 2:
            raise ValueError(f"replicas must be >= 2, got {self.replicas}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if not self.ci_multiplier > 0:
            raise ValueError(f"ci_multiplier must be > 0, got {self.ci_multiplier}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


def _mc_echo(mc: McConfig) -> dict[str, object]:
    # results do not depend on threads or progress
    return {"replicas": mc.replicas, "seed": mc.seed, "ci_multiplier": mc.ci_multiplier}


@dataclass(frozen=True, eq=False)
class SimInputs:
    initial: State
    config: SimConfig
    operator: BidomainOperator
    model: IonicModel
    spectrum: NoiseSpectrum
    c3: C3Fit | None = None

    def with_c3(self) -> SimInputs:
        return self if self.c3 is not None else replace(self, c3=fit_condition_c3(self.model))

    def echo(self) -> dict[str, object]:
        return {
            "grid": self.operator.grid.to_dict(),
            "model": self.model.to_dict(),
            "sim": self.config.to_dict(),
            "noise_trace": self.spectrum.trace,
            "noise_modes": self.spectrum.n_modes,
        }


@dataclass(frozen=True)
class Quantity:
    name: str
    estimate: float
    se: float
    bound: float | None
    verdict: Verdict

    def to_dict(self) -> dict[str, object]:
        return {
            "name": self.name,
            "estimate": self.estimate,
            "se": self.se,
            "bound": self.bound,
            "verdict": self.verdict,
        }


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    experiment: str
    inputs: dict[str, object]
    quantities: list[Quantity]
    verdict: Verdict
    replicas: pd.DataFrame
    excluded: int = 0
    diagnostics: list[str] = field(default_factory=list)
    extras: dict[str, object] = field(default_factory=dict)

    @property
    def primary(self) -> Quantity | None:
        return self.quantities[0] if self.quantities else None

    def to_dict(self) -> dict[str, object]:
        head = self.primary
        return {
            "experiment": self.experiment,
            "verdict": self.verdict,
            "estimate": None if head is None else head.estimate,
            "se": None if head is None else head.se,
            "bound": None if head is None else head.bound,
            "quantities": [q.to_dict() for q in self.quantities],
            "excluded_replicas": self.excluded,
            "diagnostics": list(self.diagnostics),
            "extras": self.extras,
            "inputs": self.inputs,
        }


# ---------------------------------------------------------------------
# Estimation helpers
# ---------------------------------------------------------------------


def mc_estimate(samples: Sequence[float] | np.ndarray) -> tuple[float, float]:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError(f"mc_estimate needs >= 2 samples, got {x.size}")
    mean = float(np.sum(x) / x.size)
    se = float(np.std(x, ddof=1) / np.sqrt(x.size))
    return mean, se


def compare_to_bound(estimate: float, se: float, bound: float, k: float) -> Verdict:
    if not (np.isfinite(estimate) and np.isfinite(se)):
        return "inconclusive"
    if estimate - k * se > bound:
        return "violated_beyond_CI"
    return "within_bound"


def combine(verdicts: Sequence[Verdict]) -> Verdict:
    if "violated_beyond_CI" in verdicts:
        return "violated_beyond_CI"
    if "inconclusive" in verdicts:
        return "inconclusive"
    return "within_bound"


def tail_bound(r: float, epsilon: float, gamma: float, T: float) -> float:
    """3 exp(-r^2 / (4 gamma epsilon^2 T))."""
    denom = 4.0 * gamma * epsilon**2 * T
    if denom <= 0:
        return 0.0
    return float(3.0 * np.exp(-(r**2) / denom))


def coupling_bound(eps1: float, eps2: float, gamma: float) -> float:
    return float((eps1 - eps2) ** 2 * gamma)


def run_replicas(
    task: Callable[[int], dict[str, float]],
    mc: McConfig,
    desc: str,
) -> tuple[pd.DataFrame, int]:
    """Run task(replica_id) for every replica; rows come back ordered by replica id."""

    def guarded(rid: int) -> dict[str, float] | None:
        try:
            return task(rid)
        except BlowUpError:
            return None

    ids = range(mc.replicas)
    with ThreadPoolExecutor(max_workers=mc.threads) as pool:
        results = list(
            tqdm(
                pool.map(guarded, ids),
                total=mc.replicas,
                desc=desc,
                file=sys.stderr,
                disable=not mc.progress,
            )
        )

    rows = [{"replica": rid, **res} for rid, res in zip(ids, results) if res is not None]
    excluded = sum(res is None for res in results)
    return pd.DataFrame(rows), excluded


def _exclusion_guard(excluded: int, mc: McConfig, diagnostics: list[str]) -> bool:
    if excluded:
        diagnostics.append(f"{excluded} of {mc.replicas} replicas excluded after blow-up")
    if excluded > MAX_EXCLUDED_SHARE * mc.replicas or mc.replicas - excluded < 2:
        diagnostics.append("too many excluded replicas for a verdict")
        return False
    return True


def _report(
    name: str,
    inputs: SimInputs,
    params: dict[str, object],
    quantities: list[Quantity],
    table: pd.DataFrame,
    excluded: int,
    diagnostics: list[str],
    guards_ok: bool,
    extras: dict[str, object] | None = None,
) -> ExperimentReport:
    verdict = combine([q.verdict for q in quantities]) if quantities else "inconclusive"
    if not guards_ok:
        verdict = "inconclusive"
    return ExperimentReport(
        experiment=name,
        inputs={**inputs.echo(), **params},
        quantities=quantities,
        verdict=verdict,
        replicas=table,
        excluded=excluded,
        diagnostics=diagnostics,
        extras=extras or {},
    )


def _window_mean(t: np.ndarray, y: np.ndarray, start: float, stop: float) -> float:
    mask = (t >= start - 1e-12) & (t <= stop + 1e-12)
    if mask.sum() < 2:
        raise ValueError(f"window [{start}, {stop}] holds fewer than two record points")
    tt, yy = t[mask], y[mask]
    return float(trapezoid(yy, tt) / (tt[-1] - tt[0]))


# ---------------------------------------------------------------------
# Small-noise deviation
# ---------------------------------------------------------------------


def small_noise_deviation(
    epsilons: Sequence[float],
    inputs: SimInputs,
    mc: McConfig,
) -> ExperimentReport:
    """E sup_t (||u_eps - u||^2 + ||w_eps - w||^2) along an epsilon ladder, coupled to eps = 0."""
    eps = sorted({float(e) for e in epsilons}, reverse=True)
    if not eps or any(e < 0 for e in eps):
        raise ValueError(f"epsilons must be nonempty and >= 0, got {list(epsilons)}")
    inputs = replace(inputs.with_c3(), config=replace(inputs.config, record_every=1))
    grid = inputs.operator.grid
    members = [0.0, *eps]
    k = mc.ci_multiplier
    diagnostics: list[str] = []
    guards_ok = True

    mono = fit_monotonicity(inputs.model)
    if mono.violation is not None:
        diagnostics.append("monotonicity fit returned a violation certificate on the default box")
        guards_ok = False

    def task(rid: int) -> dict[str, float]:
        recs = simulate_coupled(
            inputs.initial, inputs.config, inputs.operator, inputs.model, inputs.spectrum,
            members, mc.seed, rid, c3=inputs.c3,
        )
        base = recs[0]
        return {f"D_eps_{e:g}": sup_difference(r, base, grid) for e, r in zip(eps, recs[1:])}

    table, excluded = run_replicas(task, mc, "small-noise")
    guards_ok &= _exclusion_guard(excluded, mc, diagnostics)

    quantities: list[Quantity] = []
    stats: dict[float, tuple[float, float]] = {}
    if not table.empty:
        for e in eps:
            stats[e] = mc_estimate(table[f"D_eps_{e:g}"])

    positive = [e for e in eps if e > 0]
    ratios = {e: (stats[e][0] / e, stats[e][1] / e) for e in positive if e in stats}
    if ratios:
        e_max = positive[0]
        ratio_bound = SMALL_NOISE_RATIO_FACTOR * ratios[e_max][0]
        for e in positive:
            est, se = ratios[e]
            if e == e_max:
                quantities.append(Quantity(f"D/eps at eps={e:g}", est, se, None, "within_bound"))
            else:
                quantities.append(
                    Quantity(
                        f"D/eps at eps={e:g}", est, se, ratio_bound,
                        compare_to_bound(est, se, ratio_bound, k),
                    )
                )
    if 0.0 in stats:
        est, se = stats[0.0]
        quantities.append(Quantity("D at eps=0", est, se, 0.0, compare_to_bound(est, se, 0.0, k)))

    decreasing = True
    for big, small in zip(positive, positive[1:]):
        if table.empty:
            break
        d, se = mc_estimate(table[f"D_eps_{big:g}"] - table[f"D_eps_{small:g}"])
        if not d - k * se > 0:
            decreasing = False
            diagnostics.append(
                f"D not strictly decreasing beyond CI between eps={big:g} and eps={small:g}"
            )
    if not decreasing:
        guards_ok = False

    extras = {
        "fitted_C": max((r[0] for r in ratios.values()), default=float("nan")),
        "D": {f"{e:g}": {"estimate": s[0], "se": s[1]} for e, s in stats.items()},
        "strictly_decreasing": decreasing,
        "monotonicity_constants": {"c1": mono.c1, "c2": mono.c2},
    }
    return _report(
        "small-noise", inputs, {"epsilons": eps, "mc": _mc_echo(mc)}, quantities, table, excluded,
        diagnostics, guards_ok, extras,
    )


# ---------------------------------------------------------------------
# Tail probability
# ---------------------------------------------------------------------


def tail_probability(
    r: float,
    epsilon: float,
    T: float,
    inputs: SimInputs,
    mc: McConfig,
) -> ExperimentReport:
    if r <= 0 or epsilon <= 0 or T <= 0:
        raise ValueError(f"r, epsilon and T must be > 0, got r={r}, epsilon={epsilon}, T={T}")
    inputs = replace(inputs.with_c3(), config=replace(inputs.config, T=T, record_every=1))
    op = inputs.operator
    gamma = inputs.spectrum.trace
    bound = tail_bound(r, epsilon, gamma, T)
    k = mc.ci_multiplier
    diagnostics: list[str] = []
    guards_ok = True

    lo, hi = TAIL_BOUND_RANGE
    if not lo < bound < hi:
        diagnostics.append(
            f"tail bound {bound:.4g} outside ({lo}, {hi}); no informative comparison"
        )
        guards_ok = False

    cc = check_coefficient_condition(inputs.model, op.alpha, op.poincare_cp)
    if not cc.satisfied:
        diagnostics.append(
            f"coefficient condition fails (margin {cc.margin:.4g}); tail bound hypothesis not met"
        )
        guards_ok = False

    def task(rid: int) -> dict[str, float]:
        base, pert = simulate_coupled(
            inputs.initial, inputs.config, op, inputs.model, inputs.spectrum,
            [0.0, epsilon], mc.seed, rid, c3=inputs.c3,
        )
        s = sup_difference(pert, base, op.grid)
        return {"sup_sq_difference": s, "exceeds": float(s >= r**2)}

    table, excluded = run_replicas(task, mc, "tail")
    guards_ok &= _exclusion_guard(excluded, mc, diagnostics)

    quantities: list[Quantity] = []
    if len(table) >= 2:
        p = float(np.sum(table["exceeds"]) / len(table))
        se = float(np.sqrt(p * (1.0 - p) / len(table)))
        verdict = compare_to_bound(p, se, bound, k)
        quantities.append(Quantity("P(sup >= r^2)", p, se, bound, verdict))

    extras = {"gamma": gamma, "coefficient_condition": cc._asdict()}
    params = {"r": r, "epsilon": epsilon, "T": T, "mc": _mc_echo(mc)}
    return _report(
        "tail", inputs, params, quantities, table, excluded, diagnostics, guards_ok, extras
    )


# ---------------------------------------------------------------------
# Stationary coupling
# ---------------------------------------------------------------------


def _stationary_preflight(
    inputs: SimInputs, burn_in: float, horizon: float, hypotheses: bool, diagnostics: list[str]
) -> bool:
    if burn_in <= 0 or horizon <= 0:
        raise ValueError(f"burn_in and horizon must be > 0, got {burn_in}, {horizon}")
    if not source_is_time_independent(inputs.config.source):
        raise ValueError("stationary experiments need a time-independent source")
    ok = True
    if not hypotheses:
        diagnostics.append(
            "stationarity hypotheses not asserted (experiment.stationarity_hypotheses)"
        )
        ok = False
    op = inputs.operator
    cc = check_coefficient_condition(inputs.model, op.alpha, op.poincare_cp)
    if not cc.satisfied:
        diagnostics.append(f"coefficient condition fails (margin {cc.margin:.4g})")
        ok = False
    return ok


def _windows(
    recs, base, grid, burn_in: float, horizon: float
) -> tuple[float, float]:
    d = difference_series(recs, base, grid)
    t = recs.times
    return (
        _window_mean(t, d, burn_in, burn_in + horizon),
        _window_mean(t, d, 2.0 * burn_in, 2.0 * burn_in + horizon),
    )


def _burn_in_check(table: pd.DataFrame, col: str, k: float, diagnostics: list[str]) -> bool:
    """Doubling the burn-in must move the window estimate by less than its standard error."""
    _, se = mc_estimate(table[f"{col}_w1"])
    change, change_se = mc_estimate(table[f"{col}_w2"] - table[f"{col}_w1"])
    if abs(change) < se:
        return True
    diagnostics.append(
        f"burn-in insufficient for {col}: doubling it moves the estimate by {change:.4g} "
        f"(estimate se {se:.3g})"
    )
    if abs(change) - k * change_se <= se:
        diagnostics.append(
            f"note: the burn-in change for {col} is within {k:g} standard errors "
            f"of its own Monte-Carlo noise (se {change_se:.3g})"
        )
    return False


def stationary_coupling(
    eps1: float,
    eps2: float,
    burn_in: float,
    horizon: float,
    inputs: SimInputs,
    mc: McConfig,
    stationarity_hypotheses: bool = False,
) -> ExperimentReport:
    """Post-burn-in E(||u1 - u2||^2 + ||w1 - w2||^2) for two amplitudes on one path.

    Compared against (eps1 - eps2)^2 gamma.
    """
    if eps1 < 0 or eps2 < 0:
        raise ValueError(f"epsilons must be >= 0, got {eps1}, {eps2}")
    diagnostics: list[str] = []
    guards_ok = _stationary_preflight(
        inputs, burn_in, horizon, stationarity_hypotheses, diagnostics
    )
    inputs = replace(inputs.with_c3(), config=replace(inputs.config, T=2.0 * burn_in + horizon))
    op = inputs.operator
    gamma = inputs.spectrum.trace
    bound = coupling_bound(eps1, eps2, gamma)
    k = mc.ci_multiplier

    def task(rid: int) -> dict[str, float]:
        a, b = simulate_coupled(
            inputs.initial, inputs.config, op, inputs.model, inputs.spectrum,
            [eps1, eps2], mc.seed, rid, c3=inputs.c3,
        )
        w1, w2 = _windows(a, b, op.grid, burn_in, horizon)
        return {"diff_w1": w1, "diff_w2": w2}

    table, excluded = run_replicas(task, mc, "stationary")
    guards_ok &= _exclusion_guard(excluded, mc, diagnostics)

    quantities: list[Quantity] = []
    if len(table) >= 2:
        est, se = mc_estimate(table["diff_w1"])
        verdict = compare_to_bound(est, se, bound, k)
        quantities.append(Quantity("stationary squared difference", est, se, bound, verdict))
        guards_ok &= _burn_in_check(table, "diff", k, diagnostics)

    params = {
        "eps1": eps1, "eps2": eps2, "burn_in": burn_in, "horizon": horizon, "mc": _mc_echo(mc)
    }
    return _report(
        "stationary", inputs, params, quantities, table, excluded, diagnostics, guards_ok,
        {"gamma": gamma},
    )


def stationary_convergence(
    epsilons: Sequence[float],
    burn_in: float,
    horizon: float,
    inputs: SimInputs,
    mc: McConfig,
    stationarity_hypotheses: bool = False,
) -> ExperimentReport:
    """Stationary solutions at eps against the deterministic one, each compared to eps^2 gamma."""
    eps = sorted({float(e) for e in epsilons if e > 0}, reverse=True)
    if not eps:
        raise ValueError(f"need at least one epsilon > 0, got {list(epsilons)}")
    diagnostics: list[str] = []
    guards_ok = _stationary_preflight(
        inputs, burn_in, horizon, stationarity_hypotheses, diagnostics
    )
    inputs = replace(inputs.with_c3(), config=replace(inputs.config, T=2.0 * burn_in + horizon))
    op = inputs.operator
    gamma = inputs.spectrum.trace
    k = mc.ci_multiplier

    def task(rid: int) -> dict[str, float]:
        recs = simulate_coupled(
            inputs.initial, inputs.config, op, inputs.model, inputs.spectrum,
            [0.0, *eps], mc.seed, rid, c3=inputs.c3,
        )
        out: dict[str, float] = {}
        for e, rec in zip(eps, recs[1:]):
            w1, w2 = _windows(rec, recs[0], op.grid, burn_in, horizon)
            out[f"eps_{e:g}_w1"] = w1
            out[f"eps_{e:g}_w2"] = w2
        return out

    table, excluded = run_replicas(task, mc, "convergence")
    guards_ok &= _exclusion_guard(excluded, mc, diagnostics)

    quantities: list[Quantity] = []
    if len(table) >= 2:
        for e in eps:
            est, se = mc_estimate(table[f"eps_{e:g}_w1"])
            b = coupling_bound(e, 0.0, gamma)
            name = f"distance to deterministic at eps={e:g}"
            quantities.append(Quantity(name, est, se, b, compare_to_bound(est, se, b, k)))
            guards_ok &= _burn_in_check(table, f"eps_{e:g}", k, diagnostics)

    decreasing = all(a.estimate > b.estimate for a, b in zip(quantities, quantities[1:]))
    if quantities and not decreasing:
        diagnostics.append("distance to the deterministic solution is not monotone in epsilon")

    params = {"epsilons": eps, "burn_in": burn_in, "horizon": horizon, "mc": _mc_echo(mc)}
    extras = {"gamma": gamma, "monotone_decrease": decreasing}
    return _report(
        "convergence", inputs, params, quantities, table, excluded, diagnostics, guards_ok, extras
    )


# ---------------------------------------------------------------------
# Invariant-measure support
# ---------------------------------------------------------------------


def _scaled(state: State, factor: float) -> State:
    return State(
        Field(state.u.grid, factor * state.u.values),
        Field(state.w.grid, factor * state.w.values),
        state.t,
    )


def _cumulative_at(rec, horizons: Sequence[float]) -> np.ndarray:
    ledger = rec.ledger
    t = ledger["t"].to_numpy()
    y = ledger["norm_u_V2"].to_numpy() + ledger["norm_w_H2"].to_numpy()
    cum = cumulative_trapezoid(y, t, initial=0.0)
    return np.interp(horizons, t, cum)


def invariant_support(
    inputs: SimInputs,
    horizons: Sequence[float],
    mc: McConfig,
    initial_scale: float = float(np.sqrt(2.0)),
) -> ExperimentReport:
    """(1/T) int_0^T (||u||_V^2 + ||w||_H^2) dt per horizon.

    Also fits (K1, K2) in cumulative integral <= K1 + K2 T.
    """
    hs = sorted({float(h) for h in horizons})
    if len(hs) < 2 or hs[0] <= 0:
        raise ValueError(f"need at least two positive horizons, got {list(horizons)}")
    inputs = replace(inputs.with_c3(), config=replace(inputs.config, T=hs[-1]))
    op = inputs.operator
    k = mc.ci_multiplier
    diagnostics: list[str] = []
    guards_ok = True

    summ = check_summability(inputs.spectrum, op)
    if inputs.spectrum.n_modes and not summ.finite:
        diagnostics.append(
            "noise summability not established "
            f"(half: {summ.verdict_half}, squared: {summ.verdict_sq})"
        )
        guards_ok = False
    if inputs.c3.violation is not None:
        diagnostics.append("dissipation condition not certified on the sample box")
        guards_ok = False

    scaled = _scaled(inputs.initial, initial_scale)
    q = op.grid.quadrature_weight
    norms0 = [
        float(q @ (s.u.values**2) + q @ (s.w.values**2)) for s in (inputs.initial, scaled)
    ]
    eps = inputs.config.epsilon
    design = np.column_stack([np.ones(len(hs)), hs])

    def task(rid: int) -> dict[str, float]:
        out: dict[str, float] = {}
        for tag, start in (("base", inputs.initial), ("scaled", scaled)):
            (rec,) = simulate_coupled(
                start, inputs.config, op, inputs.model, inputs.spectrum,
                [eps], mc.seed, rid, c3=inputs.c3, keep_states=False,
            )
            cum = _cumulative_at(rec, hs)
            for h, c in zip(hs, cum):
                out[f"{tag}_cum_{h:g}"] = float(c)
                out[f"{tag}_avg_{h:g}"] = float(c / h)
            out[f"{tag}_slope"] = float(np.linalg.lstsq(design, cum, rcond=None)[0][1])
        return out

    table, excluded = run_replicas(task, mc, "support")
    guards_ok &= _exclusion_guard(excluded, mc, diagnostics)

    quantities: list[Quantity] = []
    extras: dict[str, object] = {"horizons": hs, "initial_norms": norms0}
    if len(table) >= 2:
        averages = {h: mc_estimate(table[f"base_avg_{h:g}"]) for h in hs}
        extras["averages"] = {f"{h:g}": {"estimate": m, "se": s} for h, (m, s) in averages.items()}
        for h1, h2 in zip(hs, hs[1:]):
            m1 = averages[h1][0]
            d, d_se = mc_estimate(table[f"base_avg_{h2:g}"] - table[f"base_avg_{h1:g}"])
            if m1 > 0:
                est, se = abs(d) / m1, d_se / m1
            else:
                est, se = (0.0, 0.0) if d == 0 else (float("inf"), 0.0)
            quantities.append(
                Quantity(
                    f"relative change of time average T={h1:g}->{h2:g}",
                    est, se, SUPPORT_TOLERANCE, compare_to_bound(est, se, SUPPORT_TOLERANCE, k),
                )
            )

        rows, target = [], []
        for norm0, tag in zip(norms0, ("base", "scaled")):
            for h in hs:
                rows.append([norm0, h])
                target.append(float(np.sum(table[f"{tag}_cum_{h:g}"]) / len(table)))
        (k1, k2), *_ = np.linalg.lstsq(np.array(rows), np.array(target), rcond=None)
        slope_diff, slope_se = mc_estimate(table["scaled_slope"] - table["base_slope"])
        extras.update(
            {
                "K1": float(k1),
                "K2": float(k2),
                "slope_change_with_initial_norm": {"estimate": slope_diff, "se": slope_se},
            }
        )
        if abs(slope_diff) - k * slope_se > 0:
            diagnostics.append("fitted K2 depends on the initial norm beyond CI")

    params = {"horizons": hs, "initial_scale": initial_scale, "mc": _mc_echo(mc)}
    return _report(
        "support", inputs, params, quantities, table, excluded, diagnostics, guards_ok, extras
    )


__all__ = [
    "McConfig",
    "SimInputs",
    "Quantity",
    "ExperimentReport",
    "mc_estimate",
    "compare_to_bound",
    "combine",
    "tail_bound",
    "coupling_bound",
    "run_replicas",
    "small_noise_deviation",
    "tail_probability",
    "stationary_coupling",
    "stationary_convergence",
    "invariant_support",
]
