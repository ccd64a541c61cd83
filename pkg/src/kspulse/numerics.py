"""Scalar numerical primitives: quadrature, bracketing roots, line searches."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import BracketFailure, QuadratureError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    rtol: float = 1e-10,
    atol: float = 1e-14,
    max_depth: int = 60,
    max_evals: int = 2_000_000,
) -> tuple[float, float]:
    """Adaptive Simpson quadrature with Richardson correction.

    Returns ``(value, error_estimate)``. The global target is
    ``max(atol, rtol * |coarse estimate|)``, split across subintervals in
    proportion to their width.
    """
    if a == b:
        return 0.0, 0.0
    if a > b:
        val, err = adaptive_simpson(f, b, a, rtol, atol, max_depth, max_evals)
        return -val, err

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    # a five-point pass keeps the target honest when the coarse rule is ~0
    q1, q3 = f(0.75 * a + 0.25 * b), f(0.25 * a + 0.75 * b)
    fine = (b - a) / 12.0 * (fa + 4.0 * q1 + 2.0 * fm + 4.0 * q3 + fb)
    target = max(atol, rtol * max(abs(whole), abs(fine)))
    width = b - a

    total = 0.0
    err_total = 0.0
    evals = 5
    stack = [(a, b, fa, fm, fb, whole, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s_whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        evals += 2
        h = hi - lo
        left = h / 12.0 * (flo + 4.0 * flm + fmid)
        right = h / 12.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - s_whole
        tol_here = target * h / width
        if abs(delta) <= 15.0 * tol_here or depth >= max_depth:
            if depth >= max_depth and abs(delta) > 15.0 * tol_here:
                raise QuadratureError(
                    f"adaptive Simpson hit depth {max_depth} on [{lo:.6g}, {hi:.6g}]"
                )
            total += left + right + delta / 15.0
            err_total += abs(delta) / 15.0
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, depth + 1))
        if evals > max_evals:
            raise QuadratureError("adaptive Simpson exceeded its evaluation budget")
    return total, err_total


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-15,
    max_iter: int = 400,
) -> float:
    """Bisection on a sign-changing bracket; returns the midpoint of the final bracket."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketFailure(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol * max(1.0, abs(mid)):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return lo if abs(flo) <= abs(fhi) else hi


def polish_ulps(residual: Callable[[float], float], x: float, n: int = 4) -> float:
    """Return the float within ``n`` ulps of ``x`` with the smallest |residual|."""
    best, best_r = x, abs(residual(x))
    for direction in (-math.inf, math.inf):
        y = x
        for _ in range(n):
            y = math.nextafter(y, direction)
            r = abs(residual(y))
            if r < best_r:
                best, best_r = y, r
    return best


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-12
) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol * max(1.0, abs(a) + abs(b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    candidates = [(f(x), x), (fc, c), (fd, d)]
    fx, x = max(candidates)
    return x, fx


def scan_then_refine_max(
    f: Callable[[float], float], lo: float, hi: float, n_grid: int = 2048, xtol: float = 1e-12
) -> tuple[float, float]:
    """Grid scan for the best node, then golden-section refinement in its neighbourhood."""
    xs = np.linspace(lo, hi, n_grid)
    vals = np.array([f(float(x)) for x in xs])
    k = int(np.argmax(vals))
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, n_grid - 1)]
    x, fx = golden_section_max(f, float(a), float(b), xtol)
    if fx < vals[k]:
        return float(xs[k]), float(vals[k])
    return x, fx


def inf_on_interval(
    f: Callable[[float], float], lo: float, hi: float, n_scan: int = 9, xtol: float = 1e-13
) -> float:
    """Infimum of a continuous ``f`` over ``[lo, hi]`` (closure of a half-open interval).

    Endpoints are always included, so monotone ``f`` is handled exactly; an
    interior minimum is found by a coarse scan plus golden-section refinement.
    """
    if hi <= lo:
        return f(lo)
    xs = np.linspace(lo, hi, n_scan)
    vals = [f(float(x)) for x in xs]
    k = int(np.argmin(vals))
    best = min(vals)
    if 0 < k < n_scan - 1:
        _, neg = golden_section_max(lambda x: -f(x), float(xs[k - 1]), float(xs[k + 1]), xtol)
        best = min(best, -neg)
    return best


def monotone_inverse(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    y: float,
    x0: float = 0.0,
    tol: float = 1e-12,
    max_grow: int = 80,
    max_iter: int = 200,
) -> float:
    """Solve ``f(x) = y`` for strictly increasing ``f``.

    Safeguarded Newton: a bracket is grown geometrically from ``x0`` and every
    Newton iterate that leaves it (or fails to shrink the residual bracket) is
    replaced by a bisection step.
    """
    g = lambda x: f(x) - y
    g0 = g(x0)
    if g0 == 0.0:
        return x0
    step = 1.0
    if g0 < 0.0:
        lo, hi = x0, x0 + step
        k = 0
        while g(hi) < 0.0:
            lo, hi = hi, x0 + step * 2.0 ** (k + 1)
            k += 1
            if k > max_grow or not math.isfinite(g(hi)):
                raise BracketFailure(f"value {y!r} outside the range of the monotone map")
    else:
        lo, hi = x0 - step, x0
        k = 0
        while g(lo) > 0.0:
            lo, hi = x0 - step * 2.0 ** (k + 1), lo
            k += 1
            if k > max_grow or not math.isfinite(g(lo)):
                raise BracketFailure(f"value {y!r} outside the range of the monotone map")

    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        gx = g(x)
        if gx == 0.0:
            return x
        if gx < 0.0:
            lo = x
        else:
            hi = x
        d = fprime(x)
        x_new = x - gx / d if d > 0.0 else math.nan
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol or hi - lo <= tol:
            return x_new
        x = x_new
    return x
