import numpy as np
import pytest

from mvhbond import REFERENCE_PARAMS, NumericsConfig, b_price, c_value
from mvhbond.output import read_csv
from mvhbond.pde_oracle import (
    GridError,
    GridSpec,
    b_grid_error,
    interior_mask,
    residual_check,
    solve_b_pde,
    solve_c_pde,
)

P = REFERENCE_PARAMS
SMALL = GridSpec(nu=200, ntau=200)


@pytest.fixture(scope="module")
def b_sol():
    return solve_b_pde(P, SMALL)


@pytest.fixture(scope="module")
def c_sol():
    return solve_c_pde(P, SMALL)


def test_grid_spec_validation():
    for bad in (dict(nu=401), dict(nu=2), dict(ntau=1), dict(width=0.0), dict(rannacher_steps=-1)):
        with pytest.raises(GridError):
            GridSpec(**bad)
    spec = GridSpec(nu=100, ntau=50)
    u, tau = spec.axes(P)
    assert u[50] == pytest.approx(np.log(P.D), abs=1e-14)
    assert u[-1] - u[0] == pytest.approx(2 * 8.0 * 0.15 * np.sqrt(10))
    assert tau[0] == 0.0 and tau[-1] == P.T
    assert spec.refined() == GridSpec(200, 100, 8.0, 4)
    assert GridSpec.from_numerics(NumericsConfig()) == GridSpec()


def test_b_payoff_row_and_bounds(b_sol):
    np.testing.assert_array_equal(b_sol.values[0], np.minimum(b_sol.v_grid, P.D))
    assert np.all(np.isfinite(b_sol.values))
    assert np.all(b_sol.values >= 0) and np.all(b_sol.values <= P.D + b_sol.v_grid.max())
    np.testing.assert_array_equal(b_sol.row(P.T), b_sol.values[0])
    with pytest.raises(GridError):
        b_sol.row(0.01234)


def test_b_against_closed_form(b_sol):
    assert b_grid_error(P, b_sol) < 1e-3
    assert abs(b_sol.interpolate(0.0, 66.0) - b_price(P, 0.0, 66.0).b) / P.D < 1e-3


def test_b_second_order_convergence():
    errs = [b_grid_error(P, solve_b_pde(P, GridSpec(n, n))) for n in (100, 200, 400)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.0 <= r <= 5.0 for r in ratios)


def test_b_vanishing_volatility():
    p = P.replace(sigma1=0.01, mu1=0.0, mu2=0.0)
    sol = solve_b_pde(p, GridSpec(200, 200))
    v = np.array([90.0, 110.0])   # away from the kink at D
    np.testing.assert_allclose(sol.interpolate(0.0, v), np.minimum(v, p.D), rtol=2e-3)


def test_c_zero_start_and_nonnegative(c_sol):
    np.testing.assert_array_equal(c_sol.values[0], 0.0)
    assert np.all(c_sol.values >= -1e-12 * c_sol.values.max())


def test_c_against_quadrature(c_sol):
    v = np.array([66.0, 132.0])
    ref = c_value(P, 0.0, v).c
    np.testing.assert_allclose(c_sol.interpolate(0.0, v), ref, rtol=1e-2)


def test_c_grid_source(b_sol):
    sol = solve_c_pde(P, SMALL, b_surface=b_sol, source="grid")
    np.testing.assert_allclose(sol.interpolate(0.0, 66.0), c_value(P, 0.0, 66.0).c, rtol=1e-2)
    with pytest.raises(GridError):
        solve_c_pde(P, GridSpec(100, 100), b_surface=b_sol, source="grid")
    with pytest.raises(ValueError):
        solve_c_pde(P, SMALL, source="spline")


def test_c_complete_market_is_zero():
    sol = solve_c_pde(P.replace(rho=1.0), GridSpec(60, 60))
    np.testing.assert_array_equal(sol.values, 0.0)


def test_closed_form_residuals():
    t, v = np.meshgrid(np.linspace(0, 9.9, 12), P.D * np.logspace(-1, 1, 12), indexing="ij")
    assert residual_check(P, (t, v), "a") <= 1e-14
    assert residual_check(P, (t, v), "b") <= 1e-8 * P.D
    scale = np.max(c_value(P, t, v).c)
    assert residual_check(P, (t, v), "c") <= 1e-4 * scale
    with pytest.raises(ValueError):
        residual_check(P, (t, v), "d")


def test_grid_residuals_small(b_sol, c_sol):
    assert residual_check(P, b_sol, "b") < 1e-2 * P.D
    assert residual_check(P, c_sol, "c") < 1e-2 * c_sol.values.max()


def test_interior_mask(b_sol):
    mask = interior_mask(P, b_sol)
    assert not mask[0].any() and mask.any()


def test_surface_dump(tmp_path, b_sol):
    path = tmp_path / "b.csv"
    b_sol.to_csv(path, header_lines=["surface b"], every=50)
    header, rows = read_csv(str(path))
    assert header == ["tau", "u", "v", "value"]
    assert len(rows) == 5 * 5
    assert float(rows[0][3]) == pytest.approx(min(float(rows[0][2]), P.D))
