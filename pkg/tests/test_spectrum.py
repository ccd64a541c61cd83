import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kspulse.errors import DomainTooShort
from kspulse.spectrum import (_exp_weights, asymptotic_matrices, dispersion_curve, dispersion_roots,
                              exp_convolution, instability_sweep, k_profile, max_growth, quadratic_roots,
                              resolvent_apply_L0, resolvent_bound_check, resolvent_constant, resolvent_residual,
                              smooth_forcing, tau_grid, weight_discriminant, weight_polynomial,
                              weight_polynomial_check, write_dispersion_csv)

eps_st = st.sampled_from([1e-1, 3e-2, 1e-2, 1e-3])
rho_st = st.floats(0.0, 10.0)
tau_st = st.floats(-3.0, 3.0)


def closed_form_coefficients(eps, s, c, k0, gp, rho, tau):
    """Trace and determinant of the weighted symbol, written out by hand."""
    D = eps + 1.0 / eps
    tr_M = (s - c) + s - 2.0 * rho * D
    tr_N = rho**2 * D - rho * (2.0 * s - c) - gp / eps
    a = tau**2 * D - 1j * tau * tr_M - tr_N
    m11 = -(tau**2) * eps + 1j * tau * ((s - c) - 2 * rho * eps) + rho**2 * eps - rho * (s - c)
    m12 = (tau**2 + 2j * tau * rho - rho**2) * k0
    m21 = 1.0 / eps
    m22 = -(tau**2) / eps + 1j * tau * (s - 2 * rho / eps) + rho**2 / eps - rho * s - gp / eps
    return a, m11 * m22 - m12 * m21


@given(eps_st, rho_st, tau_st)
@settings(max_examples=80)
def test_coefficients_closed_form(model, params, eps, rho, tau):
    p = params.with_epsilon(eps)
    m = asymptotic_matrices(model, p, "+", rho)
    a, b = m.coefficients(tau)
    k0 = model.chi * p.u_minus * float(model.phi_prime(0.0))
    a_ref, b_ref = closed_form_coefficients(eps, p.s, model.critical_speed, k0, float(model.g_prime(p.v_plus)), rho, tau)
    scale = 1.0 + abs(a_ref) ** 2
    assert abs(a - a_ref) <= 1e-12 * (1.0 + abs(a_ref))
    assert abs(b - b_ref) <= 1e-12 * scale


@given(eps_st, rho_st, tau_st)
@settings(max_examples=80)
def test_roots_against_eigenvalues(model, params, eps, rho, tau):
    m = asymptotic_matrices(model, params.with_epsilon(eps), "+", rho)
    pt = dispersion_roots(m, tau)
    ev = np.linalg.eigvals(m.symbol(tau))
    ours = np.sort_complex(np.array([pt.lambda_plus, pt.lambda_minus]))
    scale = 1.0 + np.max(np.abs(ev))
    assert np.allclose(ours, np.sort_complex(ev), atol=1e-9 * scale)
    a, b = m.coefficients(tau)
    ref = np.sort_complex(np.roots([1.0, a, b]))
    assert np.allclose(ours, ref, atol=1e-9 * scale)
    assert pt.lambda_plus.real >= pt.lambda_minus.real


def test_quadratic_roots_no_cancellation():
    a, b = complex(1e8), complex(1.0)
    big, small = quadratic_roots(a, b)
    assert small == pytest.approx(-1e-8, rel=1e-12)
    assert big == pytest.approx(-1e8, rel=1e-12)
    assert quadratic_roots(0j, 0j) == (0j, 0j)


@given(eps_st, rho_st, st.floats(0.01, 3.0))
@settings(max_examples=40)
def test_conjugate_symmetry(model, params, eps, rho, tau):
    m = asymptotic_matrices(model, params.with_epsilon(eps), "+", rho)
    a, b = dispersion_roots(m, tau), dispersion_roots(m, -tau)
    assert np.allclose(sorted([a.lambda_plus.conjugate(), a.lambda_minus.conjugate()], key=lambda z: z.imag),
                       sorted([b.lambda_plus, b.lambda_minus], key=lambda z: z.imag), atol=1e-9 * (1 + 1 / eps))


def test_tau_zero_roots(model, params):
    for eps in (0.1, 0.01, 1e-3):
        p = params.with_epsilon(eps)
        pt = dispersion_roots(asymptotic_matrices(model, p), 0.0)
        assert pt.lambda_plus == pytest.approx(-float(model.g_prime(p.v_plus)) / eps, rel=1e-14)
        assert abs(pt.lambda_minus) < 1e-12


def test_rho_continuity(model, params):
    p = params.with_epsilon(0.01)
    base = max_growth(asymptotic_matrices(model, p, "+", 0.0)).lam.real
    near = max_growth(asymptotic_matrices(model, p, "+", 1e-9)).lam.real
    assert near == pytest.approx(base, rel=1e-6)


def test_growth_rates(model, params):
    for eps in (0.1, 0.01, 1e-3):
        res = max_growth(asymptotic_matrices(model, params.with_epsilon(eps)))
        assert res.positive
        assert res.lam.real == pytest.approx(1.0 / eps, rel=1e-6)


def test_sweep_positive_for_all_weights(model, params):
    rhos = [0.0, 0.01, 0.1, 1.0, 10.0]
    for row in instability_sweep(model, params.with_epsilon(0.01), rhos):
        assert row["positive"]


def test_weight_polynomial(model, params):
    p = params.with_epsilon(0.01)
    rho = np.linspace(0.0, 10.0, 101)
    P = weight_polynomial(model, p, rho)
    for r, val in zip(rho[::10], P[::10]):
        a, _ = asymptotic_matrices(model, p, "+", r).coefficients(0.0)
        assert val == pytest.approx(-a.real, rel=1e-12)
    chk = weight_polynomial_check(model, p, rho)
    assert chk["P_positive"] and chk["discriminant_negative"]
    assert weight_discriminant(model, p) < 0.0


def test_tau_grid():
    t = tau_grid(2.0, 401)
    assert t[0] == -2.0 and t[-1] == 2.0 and t[200] == 0.0
    assert np.all(np.diff(t) > 0)


def test_dispersion_csv(tmp_path, model, params):
    curve = dispersion_curve(asymptotic_matrices(model, params.with_epsilon(0.1)), tau_grid(1.0, 11))
    path = tmp_path / "d.csv"
    write_dispersion_csv(path, curve)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (11, 5)


def test_side_validation(model, params):
    with pytest.raises(ValueError):
        asymptotic_matrices(model, params, "+")  # epsilon = 0
    with pytest.raises(ValueError):
        asymptotic_matrices(model, params.with_epsilon(0.1), "left")


# --------------------------------------------------------------------------- resolvent


def test_exp_weights_series_branch():
    z = np.array([0.5 - 1e-12, 0.5 + 1e-12, 0.3 + 0.3j, 1e-8])
    A, B = _exp_weights(z)
    Aref = (1 - np.exp(-z)) / z
    Bref = (1 - np.exp(-z) - z * np.exp(-z)) / z**2
    assert np.allclose(A[:3], Aref[:3], rtol=1e-13)
    assert np.allclose(B[:3], Bref[:3], rtol=1e-11)
    assert A[3] == pytest.approx(1.0) and B[3] == pytest.approx(0.5)


def test_exp_convolution_against_quadrature():
    x = np.linspace(-10, 10, 401)
    F = np.exp(-x**2) * (1 + 0.5j * x)
    kappa = 1.3 + 0.4j
    got = exp_convolution(F, x[1] - x[0], kappa)
    fine = np.linspace(-10, 10, 400_001)
    Ff = np.interp(fine, x, F.real) + 1j * np.interp(fine, x, F.imag)
    for i in (0, 100, 200, 333, 400):
        ref = np.trapezoid(np.exp(-kappa * np.abs(x[i] - fine)) * Ff, fine)
        assert abs(got[i] - ref) < 1e-8


def manufactured(eps, lam, x, k):
    """Gaussian p, q with their exact forcing."""
    p = np.exp(-(x / 3.0) ** 2) * (1 + 0.2j)
    q = np.exp(-((x - 1.0) / 2.0) ** 2)
    p2 = p * (4 * x**2 / 81 - 2 / 9)
    q2 = q * (4 * (x - 1) ** 2 / 16 - 2 / 4)
    f1 = eps * p2 - k * q2 - lam * p
    f2 = q2 / eps - lam * q
    return p, q, f1, f2


@pytest.mark.parametrize("lam", [2.0, 5.0 + 3.0j, 40.0 - 30.0j])
def test_resolvent_manufactured(lam):
    eps = 0.1
    x = np.linspace(-40.0, 40.0, 16001)
    k = 0.5 + 0.3 * np.tanh(x)
    p, q, f1, f2 = manufactured(eps, lam, x, k)
    P, Q = resolvent_apply_L0(eps, lam, f1, f2, x, k)
    assert np.max(np.abs(Q - q)) < 1e-5
    assert np.max(np.abs(P - p)) < 1e-5
    assert resolvent_residual(eps, lam, P, Q, f1, f2, x, k) < 1e-3


def test_resolvent_second_order():
    eps, lam = 0.1, 3.0 + 1.0j
    errs = []
    for n in (2001, 4001, 8001):
        x = np.linspace(-40.0, 40.0, n)
        k = 0.5 + 0.3 * np.tanh(x)
        p, q, f1, f2 = manufactured(eps, lam, x, k)
        P, Q = resolvent_apply_L0(eps, lam, f1, f2, x, k)
        errs.append(max(np.max(np.abs(P - p)), np.max(np.abs(Q - q))))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_constant_forcing_far_from_edges():
    eps, lam, c = 0.1, 4.0, 2.0 - 1.0j
    x = np.linspace(-100.0, 100.0, 4001)
    k = np.full_like(x, 0.7)
    _, q = resolvent_apply_L0(eps, lam, np.zeros_like(x, dtype=complex), np.full_like(x, c, dtype=complex), x, k)
    mid = np.abs(x) < 20
    assert np.allclose(q[mid], -c / lam, rtol=1e-6)


def test_linearity_and_zero():
    eps, lam = 0.1, 6.0 + 2.0j
    x = np.linspace(-30, 30, 3001)
    k = np.exp(-x**2)
    rng = np.random.default_rng(1)
    fa, fb = smooth_forcing(rng, x), smooth_forcing(rng, x)
    pa, qa = resolvent_apply_L0(eps, lam, *fa, x, k)
    pb, qb = resolvent_apply_L0(eps, lam, *fb, x, k)
    pc, qc = resolvent_apply_L0(eps, lam, 2 * fa[0] - 1j * fb[0], 2 * fa[1] - 1j * fb[1], x, k)
    assert np.allclose(pc, 2 * pa - 1j * pb, atol=1e-12) and np.allclose(qc, 2 * qa - 1j * qb, atol=1e-12)
    z = np.zeros_like(x, dtype=complex)
    p0, q0 = resolvent_apply_L0(eps, lam, z, z, x, k)
    assert not np.any(p0) and not np.any(q0)


def test_domain_too_short():
    x = np.linspace(-5, 5, 101)
    z = np.zeros_like(x, dtype=complex)
    with pytest.raises(DomainTooShort):
        resolvent_apply_L0(0.1, 1.0, z, z, x, np.zeros_like(x))
    with pytest.raises(ValueError):
        resolvent_apply_L0(0.1, -1.0, z, z, x, np.zeros_like(x))


def test_bound_on_pulse_profile(model, params, singular_orbit):
    eps = 0.1
    x = np.arange(-30.0, 30.0 + 1e-9, 1e-2)
    k = k_profile(model, params, singular_orbit, x)
    far = k_profile(model, params, singular_orbit, np.array([-1e5, 1e5]))
    assert np.all(far == model.chi * params.u_minus * float(model.phi_prime(0.0)))
    rng = np.random.default_rng(0)
    lams = [10 ** rng.uniform(0, 3) * cmath.exp(1j * rng.uniform(-0.45, 0.45) * np.pi) for _ in range(6)]
    forcings = [smooth_forcing(rng, x) for _ in lams]
    rep = resolvent_bound_check(eps, lams, forcings, x, k)
    assert rep.C1 == resolvent_constant(eps, k)
    assert rep.passed
    assert rep.max_residual < 1e-3
