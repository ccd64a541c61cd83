import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kspulse.errors import DegenerateEquilibrium
from kspulse.model import build_model, h_prime, isocline, wave_params
from kspulse.phase_plane import (ReducedState, _equilibrium, classify_equilibria, divergence, linearization,
                                 reduced_vector_field, transversal_eigenvalue)


def test_equilibria_are_rest_points(model, params):
    for v in (params.v_plus, params.v_minus):
        assert reduced_vector_field(model, params, ReducedState(v, 0.0)) == (0.0, 0.0)


def test_vector_field_example(model, params_s2):
    assert reduced_vector_field(model, params_s2, ReducedState(1.0, 0.0)) == pytest.approx((0.0, -0.25))


def test_classification_at_speed_two(model, params_s2):
    ep, em = classify_equilibria(model, params_s2)
    assert em.is_saddle
    assert (em.eigenvalues[0] * em.eigenvalues[1]).real == pytest.approx(-1.0)
    assert ep.classification == "stable-focus"
    assert ep.eigenvalues[0].real == pytest.approx(-0.625)


def test_stable_node():
    m = build_model("tanh-quadratic", {"d": 0.1})
    p = wave_params(m, 1.02, s=2.0)
    ep, em = classify_equilibria(m, p)
    assert ep.classification == "stable-node"
    assert em.is_saddle


def test_mirrored_branch_repels(model):
    p = wave_params(model, 1.25, s=0.8)
    ep, _ = classify_equilibria(model, p)
    assert ep.classification.startswith("unstable")


def test_degenerate_equilibrium(model, params):
    with pytest.raises(DegenerateEquilibrium):
        _equilibrium(model, params, model.beta)


@given(st.floats(1.02, 1.38), st.floats(1.05, 1.9))
@settings(max_examples=40)
def test_eigen_relations(s, u):
    m = build_model("tanh-quadratic")
    p = wave_params(m, u, s=s)
    hp = h_prime(m, p, 0.0)
    for e in classify_equilibria(m, p):
        A = linearization(m, p, e.v)
        gp = m.g_prime(e.v)
        ref = np.sort_complex(np.linalg.eigvals(A))
        assert np.allclose(np.sort_complex(np.array(e.eigenvalues)), ref, atol=1e-10)
        for lam, vec in zip(e.eigenvalues, e.eigenvectors):
            assert abs(lam * lam + hp * lam - gp) < 1e-10
            assert np.allclose(A @ vec, lam * vec, atol=1e-10)


def test_transversal_eigenvalue(model, params_s2):
    assert transversal_eigenvalue(model, params_s2, 1.25) == pytest.approx(model.critical_speed - 2.0)
    assert transversal_eigenvalue(model, params_s2, 2.5) == pytest.approx(-0.5)


def test_divergence(model, params_s2, params, trap):
    assert divergence(model, params_s2, ReducedState(1.0, 0.0)) == pytest.approx(-1.25)
    c = trap.constants
    for V in np.linspace(0.0, params.v_minus, 50):
        for W in np.linspace(c.w_low, c.w_high, 50):
            assert divergence(model, params, ReducedState(V, W)) < 0.0


def test_isocline_signs(model, params, trap):
    c = trap.constants
    for V in np.linspace(0.0, params.v_minus, 41):
        iso = isocline(model, params, V)
        for W in np.linspace(c.w_low, c.w_high, 41):
            if abs(W - iso) < 1e-9:
                continue
            dv, dw = reduced_vector_field(model, params, ReducedState(V, W))
            assert (dw > 0.0) == (W < iso)
            if W != 0.0:
                assert (dv > 0.0) == (W > 0.0)
