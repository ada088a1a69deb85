import numpy as np
import pytest
from scipy.integrate import quad

from blowlab.fields import (
    NonFiniteFieldError,
    RadialField,
    RadialGrid,
    field_to_csv,
    gradient,
    laplacian,
    nonlocal_prefix,
    sup_norm,
)
from blowlab.profiles import f_profile, grad_f_profile


def grid1(M=64, R=1.0, dim=1):
    return RadialGrid(R=R, M=M, dim=dim)


def test_grid_nodes():
    g = grid1(M=10, R=2.5)
    assert g.h == pytest.approx(0.25)
    assert np.allclose(g.r, np.arange(11) * 0.25)
    assert g.h * g.M == pytest.approx(g.R, rel=1e-15)
    with pytest.raises(ValueError):
        RadialGrid(R=1.0, M=4)


def test_nan_field_is_hard_error():
    g = grid1()
    vals = np.zeros(g.M + 1)
    vals[3] = np.nan
    with pytest.raises(NonFiniteFieldError):
        RadialField(g, vals)
    vals[3] = np.inf
    with pytest.raises(NonFiniteFieldError):
        RadialField(g, vals)


@pytest.mark.parametrize("dim,expected", [(1, 2.0), (3, 6.0)])
def test_laplacian_exact_on_r_squared(dim, expected):
    g = grid1(M=32, dim=dim)
    f = RadialField(g, g.r ** 2)
    lap = laplacian(f).values
    assert np.allclose(lap[:-1], expected, atol=1e-10)  # interior + origin


def test_laplacian_of_constant_is_zero():
    g = grid1(dim=2)
    lap = laplacian(RadialField(g, np.full(g.M + 1, 3.7)), boundary="neumann-zero")
    assert np.allclose(lap.values, 0.0, atol=1e-12)


def test_laplacian_second_order_convergence():
    """Halving h cuts the max error on cos(r) by a factor in [3.5, 4.5]."""
    def err(M):
        g = grid1(M=M, dim=3)
        r = g.r
        lap = laplacian(RadialField(g, np.cos(r)), boundary="neumann-zero").values
        with np.errstate(invalid="ignore", divide="ignore"):
            exact = -np.cos(r) - 2.0 * np.sin(r) / r
        exact[0] = -3.0
        return np.max(np.abs(lap[:-1] - exact[:-1]))

    ratio = err(64) / err(128)
    assert 3.5 <= ratio <= 4.5


def test_gradient_exact_on_r_squared():
    g = grid1(M=32)
    grad = gradient(RadialField(g, g.r ** 2)).values
    assert np.allclose(grad, 2.0 * g.r, atol=1e-10)  # incl. one-sided boundary
    assert grad[0] == 0.0
    const = gradient(RadialField(g, np.full(g.M + 1, 2.0)))
    assert np.allclose(const.values, 0.0, atol=1e-12)


def test_gradient_converges_to_profile_derivative(default_params):
    def err(M):
        g = grid1(M=M, R=5.0)
        grad = gradient(RadialField(g, f_profile(g.r, default_params))).values
        return np.max(np.abs(grad[1:-1] - grad_f_profile(g.r[1:-1], default_params)))

    e1, e2 = err(128), err(256)
    assert e1 / e2 == pytest.approx(4.0, abs=0.5)


def test_prefix_constant_field_n1(default_params):
    # u == 2, q = 3: J(0.5) = integral of 4 over [-0.5, 0.5] = 4
    g = grid1(M=64, R=1.0)
    J = nonlocal_prefix(RadialField(g, np.full(g.M + 1, 2.0)), default_params).J
    assert J[0] == 0.0
    assert J[32] == pytest.approx(4.0, rel=1e-12)
    assert np.all(np.diff(J) >= 0.0)


def test_prefix_unit_field_n2_gives_ball_area():
    from blowlab.params import validate
    params2 = validate(p=4.0, q=4.5, mu=0.1, dim=2)
    g = grid1(M=128, R=2.0, dim=2)
    J = nonlocal_prefix(RadialField(g, np.ones(g.M + 1)), params2).J
    assert np.allclose(J, np.pi * g.r ** 2, rtol=1e-12, atol=1e-12)


def test_prefix_homogeneous_of_degree_q_minus_one(default_params):
    g = grid1(M=96, R=2.0)
    rng = np.random.default_rng(3)
    u = rng.uniform(-1.0, 2.0, g.M + 1)
    lam = 3.7
    J1 = nonlocal_prefix(RadialField(g, u), default_params).J
    J2 = nonlocal_prefix(RadialField(g, lam * u), default_params).J
    assert np.allclose(J2, lam ** (default_params.q - 1.0) * J1, rtol=1e-12)


def test_prefix_against_quadrature_oracle(default_params):
    """Intermediate-profile field at T-t = 1e-3: grid prefix at r=R agrees
    with adaptive quadrature of the same integrand to O(h^2)."""
    p = default_params
    s = 1e-3
    ell = np.sqrt(s * abs(np.log(s)))
    amp = s ** (-1.0 / 3.0)

    def integrand(r):
        return (amp * f_profile(r / ell, p)) ** (p.q - 1.0)

    oracle = 2.0 * quad(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
    g = grid1(M=4096, R=1.0)
    J = nonlocal_prefix(RadialField(g, amp * f_profile(g.r / ell, p)), p).J
    assert J[-1] == pytest.approx(oracle, rel=5e-6)


def test_sup_norm_locations(default_params):
    g = grid1(M=64, R=4.0)
    f = RadialField(g, f_profile(g.r, default_params))
    value, where = sup_norm(f)
    assert where == 0.0
    assert value == pytest.approx(default_params.kappa, rel=1e-14)
    # restriction excluding the max gives the boundary of the window
    u = np.zeros(g.M + 1)
    u[40] = 2.0
    value, where = sup_norm(RadialField(g, u), radius=1.0)
    assert (value, where) == (0.0, 0.0)  # ties break to the smallest radius
    value, where = sup_norm(RadialField(g, u))
    assert (value, where) == (2.0, pytest.approx(2.5))
    with pytest.raises(ValueError):
        sup_norm(f, radius=10.0)


def test_field_csv_shape(default_params):
    g = grid1(M=8)
    text = field_to_csv(RadialField(g, np.ones(9), time=0.25), default_params)
    lines = text.strip().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    assert any("time: 0.25" in ln for ln in header)
    assert any("mu: 0.1" in ln for ln in header)
    assert lines[len(header)] == "r,u,du_dr,J"
    assert len(lines) == len(header) + 1 + 9
