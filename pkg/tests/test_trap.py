import numpy as np
import pytest

from kspulse.errors import GeometryMismatch
from kspulse.model import h, wave_params
from kspulse.speed_window import TrapConstants, pick_trap_constants
from kspulse.trap import build_trap, certify_flux, chebyshev_lobatto, corner_exclusion_check, curve_flux


def test_closure_and_corners(trap, params):
    c = trap.constants
    g1, g4, g3 = trap.curve("gamma1"), trap.curve("gamma4"), trap.curve("gamma3")
    assert np.allclose(g1.at(0.0), [0.0, 0.0])
    assert np.allclose(g1.at(c.v_star_low), [c.v_star_low, c.w_low])
    assert np.allclose(g4.at(c.v_star_high), [c.v_star_high, c.w_high], atol=1e-15)
    assert np.allclose(g3.at(0.0), [params.v_minus, 0.0])
    verts = trap.vertices
    assert len(verts) == 7


def test_geometry_mismatch(model, params):
    c = pick_trap_constants(model, params)
    bad = TrapConstants(c.v_star_low, params.v_minus + 0.1, c.w_low, c.w_high)
    with pytest.raises(GeometryMismatch):
        build_trap(model, params, bad)


def test_membership(trap, params):
    assert trap.contains((params.v_plus, 0.0))
    assert trap.contains((params.v_minus, 0.0))  # saddle on the boundary
    assert trap.contains((1.0, -0.1))
    assert not trap.contains((params.v_minus + 0.01, -0.01))
    assert not trap.contains((-0.01, 0.05))
    assert not trap.contains((1.0, 1.0))


def test_simple_curves(model, params, trap):
    t, f = curve_flux(model, params, trap.curve("gamma3"), 101)
    V, W = trap.curve("gamma3").point(t)
    assert np.allclose(f, W)
    t, f = curve_flux(model, params, trap.curve("gamma6"), 101)
    V, W = trap.curve("gamma6").point(t)
    assert np.allclose(f, -W)
    t, f = curve_flux(model, params, trap.curve("gamma2"), 101)
    V, W = trap.curve("gamma2").point(t)
    assert np.allclose(f, h(model, params, W) - model.g(V))


def test_chebyshev_nodes():
    t = chebyshev_lobatto(0.0, 2.0, 9)
    assert t[0] == 0.0 and t[-1] == 2.0
    assert np.all(np.diff(t) > 0)


def test_flux_all_speeds(model, window):
    for s in window.interior_speeds(10):
        p = wave_params(model, 1.25, s=s)
        trap = build_trap(model, p, pick_trap_constants(model, p))
        rep = certify_flux(model, p, trap, 10_000)
        assert rep.passed, rep.as_dict()
        assert corner_exclusion_check(model, p, trap)
        assert trap.contains((p.v_plus, 0.0))


def test_refinement_stability(model, params, trap):
    a = certify_flux(model, params, trap, 2_000)
    b = certify_flux(model, params, trap, 4_000)
    for ca, cb in zip(a.curves, b.curves):
        assert not (ca.passed and not cb.passed and cb.max_flux - ca.max_flux > 1e-12)


def test_flux_csv(tmp_path, model, params, trap):
    rep = certify_flux(model, params, trap, 50, keep_traces=True)
    path = tmp_path / "flux.csv"
    rep.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "curve,parameter,flux"
    assert len(lines) == 1 + 7 * 50


def test_violated_constants_detected(model, params):
    c = pick_trap_constants(model, params)
    # push w* far up: the corner exclusion or the flux certificate must object
    bad = TrapConstants(c.v_star_low, c.v_star_high, c.w_low, 0.9 * 0.38)
    trap = build_trap(model, params, bad)
    rep = certify_flux(model, params, trap, 2_000)
    assert not (rep.passed and corner_exclusion_check(model, params, trap))
