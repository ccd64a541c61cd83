"""Essential-spectrum dispersion curves and a direct resolvent solver for the principal part."""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter

from .errors import DomainTooShort
from .model import ModelSpec, WaveParams, h
from .numerics import golden_section_max
from .orbits import Orbit

TAU_POINTS = 401


@dataclass(frozen=True)
class AsymptoticMatrices:
    """Constant-coefficient limits at one end of the line, with weight exponent ``rho``."""

    D: np.ndarray
    M: np.ndarray
    N: np.ndarray
    rho: float
    side: str

    @property
    def M_w(self) -> np.ndarray:
        return self.M - 2.0 * self.rho * self.D

    @property
    def N_w(self) -> np.ndarray:
        return self.rho**2 * self.D - self.rho * self.M + self.N

    def symbol(self, tau: float) -> np.ndarray:
        """``-tau^2 D + i tau M_w + N_w``."""
        return -(tau**2) * self.D + 1j * tau * self.M_w + self.N_w

    def coefficients(self, tau: float) -> tuple[complex, complex]:
        """``(a, b)`` with ``det(symbol - lambda I) = lambda^2 + a lambda + b``."""
        A = self.symbol(tau)
        return complex(-(A[0, 0] + A[1, 1])), complex(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])


def asymptotic_matrices(model: ModelSpec, params: WaveParams, side: str = "+", rho: float = 0.0) -> AsymptoticMatrices:
    if side not in ("+", "-"):
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    if rho < 0.0:
        raise ValueError("rho must be nonnegative")
    eps, s, chi = params.epsilon, params.s, model.chi
    if not eps > 0.0:
        raise ValueError("the linearised operator needs epsilon > 0")
    v = params.v_plus if side == "+" else params.v_minus
    u = params.u_minus  # pulse: same u at both ends
    D = np.array([[eps, -chi * u * float(model.phi_prime(0.0))], [0.0, 1.0 / eps]])
    M = np.diag([s - model.critical_speed, s])
    N = np.array([[0.0, 0.0], [1.0 / eps, -float(model.g_prime(v)) / eps]])
    return AsymptoticMatrices(D, M, N, float(rho), side)


def quadratic_roots(a: complex, b: complex) -> tuple[complex, complex]:
    """Roots of ``z^2 + a z + b`` without cancellation: big root first, then ``b / big``."""
    r = cmath.sqrt(a * a - 4.0 * b)
    if (a.conjugate() * r).real < 0.0:
        r = -r
    big = -0.5 * (a + r)
    if big == 0.0:
        return 0j, 0j
    return big, b / big


@dataclass(frozen=True)
class DispersionPoint:
    tau: float
    rho: float
    lambda_plus: complex
    lambda_minus: complex

    @property
    def growth(self) -> float:
        return max(self.lambda_plus.real, self.lambda_minus.real)


def dispersion_roots(matrices: AsymptoticMatrices, tau: float) -> DispersionPoint:
    a, b = matrices.coefficients(tau)
    l1, l2 = quadratic_roots(a, b)
    if l2.real > l1.real:
        l1, l2 = l2, l1
    return DispersionPoint(float(tau), matrices.rho, l1, l2)


def dispersion_curve(matrices: AsymptoticMatrices, taus) -> list[DispersionPoint]:
    return [dispersion_roots(matrices, t) for t in np.asarray(taus, dtype=float)]


def write_dispersion_csv(path, curve: list[DispersionPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus"])
        for p in curve:
            w.writerow([f"{v:.17g}" for v in (p.tau, p.lambda_plus.real, p.lambda_plus.imag,
                                              p.lambda_minus.real, p.lambda_minus.imag)])


def tau_grid(tau_range: float = 2.0, n: int = TAU_POINTS) -> np.ndarray:
    """Symmetric grid, denser near 0 where the unstable root lives."""
    x = np.linspace(-1.0, 1.0, n)
    return tau_range * np.sign(x) * x**2


@dataclass(frozen=True)
class GrowthResult:
    tau: float
    lam: complex
    positive: bool

    def as_dict(self) -> dict:
        return {"tau_star": self.tau, "lambda_star": [self.lam.real, self.lam.imag], "positive": self.positive}


def max_growth(matrices: AsymptoticMatrices, taus=None) -> GrowthResult:
    """Largest real part of the dispersion roots over ``taus``, refined around the best node."""
    taus = tau_grid() if taus is None else np.asarray(taus, dtype=float)
    growth = np.array([dispersion_roots(matrices, t).growth for t in taus])
    k = int(np.argmax(growth))
    lo, hi = taus[max(k - 1, 0)], taus[min(k + 1, len(taus) - 1)]
    t_best = float(taus[k])
    if hi > lo:
        t_ref, _ = golden_section_max(lambda t: dispersion_roots(matrices, t).growth, float(lo), float(hi), 1e-12)
        if dispersion_roots(matrices, t_ref).growth > growth[k]:
            t_best = t_ref
    p = dispersion_roots(matrices, t_best)
    lam = p.lambda_plus if p.lambda_plus.real >= p.lambda_minus.real else p.lambda_minus
    return GrowthResult(t_best, lam, bool(lam.real > 0.0))


def weight_polynomial(model: ModelSpec, params: WaveParams, rho) -> np.ndarray:
    """``P(rho) = (eps + 1/eps) rho^2 - (2s - chi phi(0)) rho - g'(v+)/eps``; equals ``-a_w`` at ``tau = 0``."""
    eps = params.epsilon
    rho = np.asarray(rho, dtype=float)
    return (eps + 1.0 / eps) * rho**2 - (2.0 * params.s - model.critical_speed) * rho - float(
        model.g_prime(params.v_plus)) / eps


def weight_discriminant(model: ModelSpec, params: WaveParams) -> float:
    eps = params.epsilon
    return (2.0 * params.s - model.critical_speed) ** 2 + 4.0 / eps * (eps + 1.0 / eps) * float(
        model.g_prime(params.v_plus))


def weight_polynomial_check(model: ModelSpec, params: WaveParams, rho_grid) -> dict:
    rho_grid = np.asarray(rho_grid, dtype=float)
    P = weight_polynomial(model, params, rho_grid)
    disc = weight_discriminant(model, params)
    return {
        "epsilon": params.epsilon,
        "rho": rho_grid.tolist(),
        "P": P.tolist(),
        "P_min": float(P.min()),
        "P_positive": bool(np.all(P > 0.0)),
        "discriminant": disc,
        "discriminant_negative": bool(disc < 0.0),
        "small_epsilon_hypothesis": bool(disc < 0.0),
    }


def instability_sweep(model: ModelSpec, params: WaveParams, rhos, side: str = "+", taus=None) -> list[dict]:
    out = []
    for rho in rhos:
        res = max_growth(asymptotic_matrices(model, params, side, float(rho)), taus)
        out.append({"rho": float(rho), "side": side, **res.as_dict()})
    return out


# --------------------------------------------------------------------------- resolvent of L0


def _exp_weights(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``A = (1 - e^-z)/z`` and ``B = (1 - e^-z - z e^-z)/z^2``, series near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    A = np.empty_like(z)
    B = np.empty_like(z)
    zs = z[small]
    a = np.zeros_like(zs)
    b = np.zeros_like(zs)
    term_a = np.ones_like(zs)  # (-z)^n / (n+1)!
    term_b = np.full_like(zs, 0.5)  # (-z)^n (n+1) / (n+2)!
    for n in range(25):
        a += term_a
        b += term_b
        term_a = term_a * (-zs) / (n + 2)
        term_b = term_b * (-zs) * (n + 2) / ((n + 1) * (n + 3))
    A[small], B[small] = a, b
    zl = z[~small]
    em = -np.expm1(-zl)  # 1 - e^-z
    A[~small] = em / zl
    B[~small] = (em - zl * np.exp(-zl)) / zl**2
    return A, B


def exp_convolution(F: np.ndarray, dx: float, kappa: complex) -> np.ndarray:
    """``int e^{-kappa |x_i - y|} F(y) dy`` over the grid for piecewise-linear ``F``.

    Exact for the interpolant; two O(n) recursive sweeps.
    """
    F = np.asarray(F, dtype=complex)
    z = kappa * dx
    E = cmath.exp(-z)
    A, B = _exp_weights(np.array([z]))
    w_far, w_near = dx * B[0], dx * (A[0] - B[0])
    drive = np.zeros_like(F)
    drive[1:] = w_far * F[:-1] + w_near * F[1:]
    left = lfilter([1.0], [1.0, -E], drive)
    drive = np.zeros_like(F)
    drive[:-1] = w_far * F[1:] + w_near * F[:-1]
    right = lfilter([1.0], [1.0, -E], drive[::-1])[::-1]
    return left + right


def k_profile(model: ModelSpec, params: WaveParams, orbit: Orbit, x: np.ndarray) -> np.ndarray:
    """``chi U phi'(W)`` along the pulse, splined onto ``x``, constant beyond the orbit."""
    centred = orbit.centered()
    xi, st = centred.xi, centred.states
    if centred.dim == 3:
        U, W = st[:, 0], st[:, 1]
    else:
        W = st[:, 1]
        U = h(model, params, W)
    k_vals = model.chi * U * model.phi_prime(W)
    keep = np.concatenate([[True], np.diff(xi) > 0])
    spline = CubicSpline(xi[keep], k_vals[keep])
    k_inf = model.chi * params.u_minus * float(model.phi_prime(0.0))
    inside = (x >= xi[0]) & (x <= xi[-1])
    out = np.full_like(x, k_inf, dtype=float)
    out[inside] = spline(x[inside])
    return out


def _kernel_lengths(eps: float, lam: complex) -> tuple[float, float]:
    return 1.0 / cmath.sqrt(eps * lam).real, 1.0 / cmath.sqrt(lam / eps).real


def resolvent_apply_L0(eps: float, lam: complex, f1: np.ndarray, f2: np.ndarray, x: np.ndarray,
                       k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``D(x) (p, q)'' - lam (p, q) = f`` on a uniform grid by kernel convolution.

    ``D = [[eps, -k], [0, 1/eps]]``; principal square roots throughout.
    """
    lam = complex(lam)
    if not lam.real > 0.0:
        raise ValueError("resolvent needs Re(lambda) > 0")
    dx = float(x[1] - x[0])
    span = float(x[-1] - x[0])
    lq, lp = _kernel_lengths(eps, lam)
    if max(lq, lp) > span / 4.0:
        raise DomainTooShort(f"kernel decay length {max(lq, lp):.3g} exceeds a quarter of the span {span:.3g}")
    sq = cmath.sqrt(lam)
    q = -math.sqrt(eps) / (2.0 * sq) * exp_convolution(f2, dx, cmath.sqrt(eps * lam))
    src = eps * k * (lam * q + f2) + f1
    p = -1.0 / (2.0 * cmath.sqrt(eps * lam)) * exp_convolution(src, dx, cmath.sqrt(lam / eps))
    return p, q


def resolvent_residual(eps: float, lam: complex, p, q, f1, f2, x, k) -> float:
    """``max |D (p,q)'' - lam (p,q) - f|`` over interior nodes, second differences."""
    dx = float(x[1] - x[0])

    def d2(y):
        return (y[2:] - 2.0 * y[1:-1] + y[:-2]) / dx**2

    r1 = eps * d2(p) - k[1:-1] * d2(q) - lam * p[1:-1] - f1[1:-1]
    r2 = d2(q) / eps - lam * q[1:-1] - f2[1:-1]
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def resolvent_constant(eps: float, k: np.ndarray) -> float:
    """``C1 = 2 || [[1, 3 eps ||k||], [0, 1]] ||`` in the max-row-sum norm."""
    return 2.0 * (1.0 + 3.0 * eps * float(np.max(np.abs(k))))


@dataclass
class ResolventSample:
    lam: complex
    residual: float
    ratio: float
    bound: float

    def as_dict(self) -> dict:
        return {"lambda": [self.lam.real, self.lam.imag], "relative_residual": self.residual,
                "norm_ratio": self.ratio, "bound": self.bound, "within_bound": self.ratio <= self.bound}


@dataclass
class ResolventReport:
    C1: float
    samples: list[ResolventSample] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(s.residual for s in self.samples)

    @property
    def max_bound_ratio(self) -> float:
        return max(s.ratio / s.bound for s in self.samples)

    @property
    def passed(self) -> bool:
        return all(s.ratio <= s.bound for s in self.samples)

    def as_dict(self) -> dict:
        return {"C1": self.C1, "max_relative_residual": self.max_residual,
                "max_ratio_over_bound": self.max_bound_ratio, "pass": self.passed,
                "samples": [s.as_dict() for s in self.samples]}


def smooth_forcing(rng: np.random.Generator, x: np.ndarray, n_bumps: int = 3,
                   width=(1.0, 3.0)) -> tuple[np.ndarray, np.ndarray]:
    """Random complex Gaussian bumps kept well inside the grid."""
    lo, hi = x[0], x[-1]
    pad = 0.3 * (hi - lo)
    out = []
    for _ in range(2):
        f = np.zeros_like(x, dtype=complex)
        for _ in range(n_bumps):
            c = rng.uniform(lo + pad, hi - pad)
            w = rng.uniform(*width)
            amp = complex(rng.normal(), rng.normal())
            f += amp * np.exp(-(((x - c) / w) ** 2))
        out.append(f)
    return out[0], out[1]


def resolvent_bound_check(eps: float, lambdas, forcings, x: np.ndarray, k: np.ndarray) -> ResolventReport:
    C1 = resolvent_constant(eps, k)
    report = ResolventReport(C1)
    for lam, (f1, f2) in zip(lambdas, forcings):
        p, q = resolvent_apply_L0(eps, lam, f1, f2, x, k)
        fn = max(np.max(np.abs(f1)), np.max(np.abs(f2)))
        pn = max(np.max(np.abs(p)), np.max(np.abs(q)))
        res = resolvent_residual(eps, lam, p, q, f1, f2, x, k) / fn
        report.samples.append(ResolventSample(complex(lam), res, float(pn / fn), C1 / abs(lam)))
    return report
