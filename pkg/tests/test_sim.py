import numpy as np
import pytest
from scipy.integrate import solve_ivp

from stochastic_bidomain.bidomain_op import ConductivitySpec, build_operator
from stochastic_bidomain.ionic import custom_model, eval_f, fit_condition_c3, fitzhugh_nagumo
from stochastic_bidomain.mesh import Field, make_grid, norm_h_sq, weighted_mean
from stochastic_bidomain.noise import NoiseSpectrum, PowerLaw, linear_mean_square, make_spectrum
from stochastic_bidomain.quality import LEDGER_COLUMNS, first_bad_row
from stochastic_bidomain.streams import replica_generator
from stochastic_bidomain.sim import (
    BlowUpError,
    ConstantSource,
    Electrode,
    ElectrodeSource,
    SimConfig,
    State,
    difference_series,
    simulate,
    simulate_coupled,
    simulate_transformed,
    source_is_time_independent,
    step_imex,
    sup_difference,
)

NO_NOISE = NoiseSpectrum(gammas=np.zeros(0))


def _sample_operator(n=17, extent=np.pi):
    return build_operator(ConductivitySpec(1.0, 1.0), make_grid(1, extent, n))


def _zero_model():
    return custom_model(lambda u: 0.0 * u, lambda u: 0.0 * u, lambda u: 0.0 * u, g2=1.0)


def _cosine_state(op, shift=0.5):
    return State(Field.from_function(op.grid, lambda x: np.cos(x) + shift), Field.zeros(op.grid))


# ---------------------------------------------------------------------
# Config and sources
# ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"dt": 0.0, "T": 1.0}, "dt must be > 0"),
        ({"dt": 0.1, "T": 0.05}, "T must be >= dt"),
        ({"dt": 0.1, "T": 1.0, "scheme": "rk4"}, "Unknown scheme"),
        ({"dt": 0.1, "T": 1.0, "epsilon": -0.1}, "epsilon must be >= 0"),
        ({"dt": 0.1, "T": 1.0, "record_every": 0}, "record_every"),
    ],
)
def test_sim_config_rejects_bad_values(kwargs, message):
    with pytest.raises(ValueError, match=message):
        SimConfig(**kwargs)


def test_sim_config_step_count():
    assert SimConfig(dt=0.1, T=1.0).n_steps == 10
    assert SimConfig(dt=0.3, T=1.0).n_steps == 3


def test_explicit_scheme_checks_stability():
    op = _sample_operator(n=65)
    with pytest.raises(ValueError, match="explicit_em unstable"):
        SimConfig(dt=0.01, T=0.1, scheme="explicit_em").check_stability(op)
    SimConfig(dt=1e-3, T=0.1, scheme="explicit_em").check_stability(op)


def test_electrode_source_switches_on_and_off():
    grid = make_grid(1, 1.0, 11)
    src = ElectrodeSource(grid, (Electrode(2.0, (0.15,), (0.45,), t_on=0.1, t_off=0.3),))

    np.testing.assert_allclose(src(0.0), 0.0)
    np.testing.assert_allclose(src(0.2), [0, 0, 2, 2, 2, 0, 0, 0, 0, 0, 0])
    np.testing.assert_allclose(src(0.3), 0.0)
    assert src.time_independent is False
    assert source_is_time_independent(None)
    assert source_is_time_independent(ConstantSource(Field.zeros(grid)))


def test_electrode_rejects_bad_geometry():
    with pytest.raises(ValueError, match="lower > upper"):
        Electrode(1.0, (0.5,), (0.1,))
    with pytest.raises(ValueError, match="t_off must exceed t_on"):
        Electrode(1.0, (0.0,), (0.1,), t_on=1.0, t_off=1.0)
    with pytest.raises(ValueError, match="grid is 1-D"):
        ElectrodeSource(make_grid(1, 1.0, 5), (Electrode(1.0, (0.0, 0.0), (1.0, 1.0)),))


# ---------------------------------------------------------------------
# Deterministic behavior
# ---------------------------------------------------------------------


def test_resting_state_is_an_equilibrium():
    op = _sample_operator(n=9, extent=1.0)
    model = fitzhugh_nagumo()
    rec = simulate(State.constant(op.grid), SimConfig(dt=0.01, T=0.1), op, model, NO_NOISE, seed=0)

    assert list(rec.ledger.columns) == LEDGER_COLUMNS
    assert len(rec.ledger) == 11
    norms = rec.ledger[["norm_u_H2", "norm_w_H2", "norm_u_V2", "u_L4_4", "a_uu"]]
    assert (norms == 0.0).all().all()

    c = fit_condition_c3(model).c
    np.testing.assert_allclose(rec.ledger["c3_residual"], c * op.grid.measure)


def test_record_every_thins_the_ledger():
    op = _sample_operator(n=9, extent=1.0)
    rec = simulate(
        State.constant(op.grid, 0.2),
        SimConfig(dt=0.1, T=1.0, record_every=3),
        op,
        fitzhugh_nagumo(),
        NO_NOISE,
        seed=0,
    )

    np.testing.assert_allclose(rec.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert rec.u.shape == (5, 9)


def test_spatially_constant_run_matches_ode():
    op = _sample_operator(n=5, extent=1.0)
    model = fitzhugh_nagumo()
    initial = State.constant(op.grid, 0.5, 0.1)

    def final(dt):
        config = SimConfig(dt=dt, T=5.0, record_every=1000)
        rec = simulate(initial, config, op, model, NO_NOISE, seed=0, keep_states=False)
        return rec.final

    def rhs(t, y):
        u, w = y
        return [-(u * (u - 0.1) * (u - 1.0) + w), -(-0.5 * u + 0.5 * w)]

    ref = solve_ivp(rhs, (0.0, 5.0), [0.5, 0.1], rtol=1e-10, atol=1e-12).y[:, -1]
    coarse, fine = final(2e-4), final(1e-4)
    np.testing.assert_allclose(fine.u.values, ref[0], atol=1e-3)
    # first-order scheme: one Richardson step removes the leading error term
    np.testing.assert_allclose(2 * fine.u.values - coarse.u.values, ref[0], atol=1e-4)
    np.testing.assert_allclose(2 * fine.w.values - coarse.w.values, ref[1], atol=1e-4)


def test_mean_moves_by_reaction_only():
    op = _sample_operator()
    model = fitzhugh_nagumo()
    state = State(_cosine_state(op).u, Field.constant(op.grid, 0.2))
    spec = make_spectrum(PowerLaw(), 4, op)
    config = SimConfig(dt=0.01, T=0.01, epsilon=0.3)

    out = step_imex(state, config, op, model, spec, xi=np.array([1.0, -1.0, 0.5, 2.0]))

    reaction = Field(op.grid, -eval_f(model, state.u, state.w).values)
    expected = weighted_mean(state.u) + 0.01 * weighted_mean(reaction)
    assert weighted_mean(out.u) == pytest.approx(expected, rel=1e-10)
    assert out.t == pytest.approx(0.01)


def test_step_imex_needs_xi_with_noise():
    op = _sample_operator(n=9)
    spec = make_spectrum(PowerLaw(), 2, op)
    with pytest.raises(ValueError, match="needs xi"):
        config = SimConfig(dt=0.1, T=0.1, epsilon=0.1)
        step_imex(State.constant(op.grid), config, op, fitzhugh_nagumo(), spec)


def test_constant_source_drives_the_mean():
    op = _sample_operator(n=9, extent=1.0)
    src = ConstantSource(Field.constant(op.grid, 1.0))
    config = SimConfig(dt=0.1, T=1.0, source=src)
    rec = simulate(State.constant(op.grid), config, op, _zero_model(), NO_NOISE, seed=0)

    np.testing.assert_allclose(rec.final.u.values, 1.0, atol=1e-12)


def test_imex_converges_at_first_order():
    op = _sample_operator()
    model = fitzhugh_nagumo()
    initial = _cosine_state(op)

    def final_u(dt):
        config = SimConfig(dt=dt, T=1.0)
        rec = simulate(initial, config, op, model, NO_NOISE, seed=0, keep_states=False)
        return rec.final.u

    reference = final_u(1e-4)
    dts = np.array([0.02, 0.01, 0.005])
    errors = [
        np.sqrt(norm_h_sq(Field(op.grid, final_u(dt).values - reference.values))) for dt in dts
    ]
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]

    assert 0.8 <= slope <= 1.2


def test_blow_up_keeps_partial_ledger():
    op = _sample_operator(n=9, extent=1.0)
    model = custom_model(lambda u: -(u**3), lambda u: 0.0 * u, lambda u: 0.0 * u, g2=1.0)

    with pytest.raises(BlowUpError) as exc:
        config = SimConfig(dt=0.1, T=5.0)
        simulate(State.constant(op.grid, 2.0), config, op, model, NO_NOISE, seed=0)

    err = exc.value
    assert err.time == pytest.approx(0.6)
    assert len(err.ledger) == 7
    assert err.first_bad == 6
    assert err.ledger["t"].iloc[-1] == pytest.approx(0.6)
    assert err.last_row["t"] == pytest.approx(0.5)
    assert first_bad_row(err.ledger.iloc[:6]) is None


def test_initial_state_must_match_operator_grid():
    op = _sample_operator(n=9)
    other = State.constant(make_grid(1, 1.0, 9))
    with pytest.raises(ValueError, match="grid mismatch"):
        simulate(other, SimConfig(dt=0.1, T=0.1), op, fitzhugh_nagumo(), NO_NOISE, seed=0)


# ---------------------------------------------------------------------
# Stochastic behavior
# ---------------------------------------------------------------------


def test_same_seed_and_replica_reproduce_the_path():
    op = _sample_operator()
    spec = make_spectrum(PowerLaw(), 8, op)
    config = SimConfig(dt=0.01, T=0.2, epsilon=0.2)
    a = simulate(_cosine_state(op), config, op, fitzhugh_nagumo(), spec, seed=3, replica_id=4)
    b = simulate(_cosine_state(op), config, op, fitzhugh_nagumo(), spec, seed=3, replica_id=4)
    c = simulate(_cosine_state(op), config, op, fitzhugh_nagumo(), spec, seed=3, replica_id=5)

    np.testing.assert_array_equal(a.u, b.u)
    assert not np.array_equal(a.u, c.u)


def test_coupled_members_match_single_runs():
    op = _sample_operator()
    model = fitzhugh_nagumo()
    spec = make_spectrum(PowerLaw(), 8, op)
    config = SimConfig(dt=0.01, T=0.2)
    initial = _cosine_state(op)

    quiet, noisy = simulate_coupled(initial, config, op, model, spec, [0.0, 0.1], seed=1)
    alone = simulate(initial, SimConfig(dt=0.01, T=0.2, epsilon=0.1), op, model, spec, seed=1)
    deterministic = simulate(initial, config, op, model, spec, seed=1)

    np.testing.assert_array_equal(noisy.u, alone.u)
    np.testing.assert_array_equal(quiet.u, deterministic.u)
    assert sup_difference(quiet, noisy, op.grid) > 0
    assert difference_series(quiet, noisy, op.grid)[0] == 0.0


def test_transformed_path_agrees_with_direct_path():
    op = _sample_operator()
    model = fitzhugh_nagumo()
    spec = make_spectrum(PowerLaw(), 8, op)
    config = SimConfig(dt=0.01, T=0.5, epsilon=0.2)
    initial = _cosine_state(op)

    direct = simulate(initial, config, op, model, spec, seed=2)
    transformed = simulate_transformed(initial, config, op, model, spec, seed=2)

    np.testing.assert_allclose(transformed.u, direct.u, atol=1e-10)
    np.testing.assert_allclose(transformed.w, direct.w, atol=1e-10)
    np.testing.assert_allclose(transformed.final.u.values, direct.final.u.values, atol=1e-10)


def test_dropping_states_keeps_final_state():
    op = _sample_operator()
    spec = make_spectrum(PowerLaw(), 8, op)
    config = SimConfig(dt=0.01, T=0.1, epsilon=0.2)
    kept = simulate_transformed(_cosine_state(op), config, op, fitzhugh_nagumo(), spec, seed=0)
    dropped = simulate_transformed(
        _cosine_state(op), config, op, fitzhugh_nagumo(), spec, seed=0, keep_states=False
    )

    assert dropped.u.shape == (0, op.grid.n_nodes)
    np.testing.assert_allclose(dropped.final.u.values, kept.final.u.values, atol=1e-12)
    with pytest.raises(ValueError, match="identical record points"):
        sup_difference(dropped, dropped, op.grid)


def test_linear_model_second_moment_matches_closed_form():
    op = _sample_operator(n=33)
    spec = make_spectrum(PowerLaw(1.0, 2.0), 8, op)
    initial = _cosine_state(op, shift=0.0)
    config = SimConfig(dt=0.01, T=0.5, epsilon=0.5)
    model = _zero_model()
    c3 = fit_condition_c3(model)

    samples = []
    for r in range(400):
        rec = simulate(
            initial, config, op, model, spec, seed=9, replica_id=r, c3=c3, keep_states=False
        )
        samples.append(norm_h_sq(rec.final.u))
    samples = np.array(samples)
    expected = linear_mean_square(op, spec, initial.u, 0.5, 0.5)
    se = samples.std(ddof=1) / np.sqrt(samples.size)

    assert abs(samples.mean() - expected) <= 4 * se


def test_noisy_run_keeps_dissipation_slack_nonnegative():
    op = _sample_operator(n=9, extent=1.0)
    model = fitzhugh_nagumo()
    spec = make_spectrum(PowerLaw(), 8, op)
    config = SimConfig(dt=0.01, T=10.0, epsilon=0.1)

    rec = simulate(_cosine_state(op), config, op, model, spec, seed=5, keep_states=False)

    assert len(rec.ledger) == config.n_steps + 1
    assert (rec.ledger["c3_residual"] >= 0.0).all()


def test_wiener_path_follows_the_replica_stream():
    op = _sample_operator()
    spec = make_spectrum(PowerLaw(), 8, op)
    config = SimConfig(dt=0.01, T=0.2, epsilon=0.2)
    initial = _cosine_state(op)

    direct = simulate(initial, config, op, fitzhugh_nagumo(), spec, seed=3, replica_id=4)
    transformed = simulate_transformed(
        initial, config, op, fitzhugh_nagumo(), spec, seed=3, replica_id=4
    )

    rng = replica_generator(3, 4)
    W = np.zeros(8)
    for _ in range(config.n_steps):
        W = W + np.sqrt(0.01) * rng.standard_normal(8)
    coeffs = np.zeros(op.n_modes)
    coeffs[1:9] = np.sqrt(spec.gammas) * W

    np.testing.assert_allclose(direct.wiener.values, op.from_modes(coeffs), atol=1e-12)
    np.testing.assert_array_equal(transformed.wiener.values, direct.wiener.values)


def test_deterministic_run_has_no_wiener_path():
    op = _sample_operator(n=9)
    rec = simulate(_cosine_state(op), SimConfig(dt=0.1, T=0.2), op, fitzhugh_nagumo(), NO_NOISE, 0)

    assert rec.wiener is None
