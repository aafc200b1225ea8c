import numpy as np
import pytest

from stochastic_bidomain.bidomain_op import assemble_elliptic
from stochastic_bidomain.mesh import (
    Field,
    gradient_components,
    gradient_operator,
    gradient_sq,
    inner_product_h,
    make_grid,
    mean_zero_project,
    norm_h_sq,
    norm_l4,
    norm_v_sq,
    weighted_mean,
)


def _random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return Field(grid, rng.standard_normal(grid.n_nodes))


def test_make_grid_trapezoid_weights_on_interval():
    grid = make_grid(1, np.pi, 5)

    assert grid.spacing == pytest.approx((np.pi / 4,))
    expected = [np.pi / 8, np.pi / 4, np.pi / 4, np.pi / 4, np.pi / 8]
    np.testing.assert_allclose(grid.quadrature_weight, expected, rtol=1e-15)


def test_make_grid_unit_square_weights_sum_to_measure():
    grid = make_grid(2, (1.0, 1.0), 3)

    assert grid.n_nodes == 9
    assert grid.quadrature_weight.sum() == pytest.approx(1.0, rel=1e-12)


def test_make_grid_long_interval_weights_sum_to_measure():
    grid = make_grid(1, 2 * np.pi, 129)
    assert abs(grid.quadrature_weight.sum() - 2 * np.pi) <= 1e-12 * 2 * np.pi


@pytest.mark.parametrize(
    "args",
    [(1, 1.0, 2), (1, 0.0, 5), (1, -1.0, 5), (3, 1.0, 5), (2, (1.0,), 5)],
)
def test_make_grid_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_field_length_must_match_grid():
    grid = make_grid(1, 1.0, 5)
    with pytest.raises(ValueError, match="5 nodes"):
        Field(grid, np.zeros(4))


def test_inner_product_basics():
    square = make_grid(2, (1.0, 1.0), 9)
    one = Field.constant(square, 1.0)

    assert inner_product_h(Field.zeros(square), _random_field(square)) == 0.0
    assert inner_product_h(one, one) == pytest.approx(1.0, rel=1e-12)


def test_inner_product_of_sine_matches_integral():
    grid = make_grid(1, np.pi, 257)
    s = Field.from_function(grid, np.sin)

    assert abs(inner_product_h(s, s) - np.pi / 2) <= 1e-4


def test_inner_product_rejects_grid_mismatch():
    a = Field.zeros(make_grid(1, 1.0, 5))
    b = Field.zeros(make_grid(1, 2.0, 5))
    with pytest.raises(ValueError, match="grid mismatch"):
        inner_product_h(a, b)


def test_cauchy_schwarz_on_random_fields():
    grid = make_grid(2, (1.0, 2.0), (7, 9))
    for seed in range(10):
        a, b = _random_field(grid, seed), _random_field(grid, seed + 100)
        assert abs(inner_product_h(a, b)) <= np.sqrt(norm_h_sq(a) * norm_h_sq(b)) + 1e-12


def test_norm_v_of_constant_equals_norm_h():
    grid = make_grid(2, (1.0, 1.0), 5)
    c = Field.constant(grid, 3.0)

    assert norm_v_sq(c) == pytest.approx(9.0, rel=1e-12)
    assert norm_v_sq(c) == norm_h_sq(c)
    assert norm_v_sq(Field.zeros(grid)) == 0.0


def test_norm_v_of_cosine_matches_integral():
    grid = make_grid(1, np.pi, 513)
    c = Field.from_function(grid, np.cos)

    assert abs(norm_v_sq(c) - np.pi) <= 1e-3
    assert norm_v_sq(c) >= norm_h_sq(c)


def test_norm_l4_of_unit_field():
    grid = make_grid(2, (1.0, 1.0), 5)
    assert norm_l4(Field.constant(grid, 1.0)) == pytest.approx(1.0, rel=1e-12)


def test_mean_zero_project_properties():
    grid = make_grid(2, (1.0, 2.0), (5, 6))
    a = _random_field(grid, 3)
    b = _random_field(grid, 4)
    one = Field.constant(grid, 1.0)

    p = mean_zero_project(a)
    np.testing.assert_allclose(mean_zero_project(p).values, p.values, atol=1e-14)
    assert abs(weighted_mean(p)) <= 1e-13 * np.sqrt(norm_h_sq(a))
    assert abs(inner_product_h(p, one)) <= 1e-12 * np.sqrt(norm_h_sq(a) * norm_h_sq(one))

    # linear
    combo = Field(grid, 2.0 * a.values - b.values)
    expected = 2.0 * p.values - mean_zero_project(b).values
    np.testing.assert_allclose(mean_zero_project(combo).values, expected, atol=1e-12)

    np.testing.assert_allclose(mean_zero_project(Field.constant(grid, 4.2)).values, 0.0, atol=1e-14)


def test_gradient_operator_matches_gradient_components():
    grid = make_grid(2, (1.0, 1.5), (5, 4))
    u = _random_field(grid, 7).values

    for D, d in zip(gradient_operator(grid), gradient_components(grid, u)):
        np.testing.assert_allclose(D @ u, d, atol=1e-12)


def test_gradient_energy_matches_unit_stiffness():
    grid = make_grid(2, (1.0, 1.5), (5, 4))
    u = _random_field(grid, 8).values
    K = assemble_elliptic(1.0, grid, (1.0, 1.0)).stiffness

    assert [w.sum() for w in grid.face_weights] == pytest.approx([1.5, 1.5])
    assert float(gradient_sq(grid, u)) == pytest.approx(float(u @ K @ u), rel=1e-12)
