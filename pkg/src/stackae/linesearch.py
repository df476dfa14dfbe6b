"""Strong Wolfe line search (bracketing phase followed by cubic zoom)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DescentViolation, LineSearchFail

MAX_EVALS = 50


@dataclass
class LineSearchResult:
    alpha: float
    f: float
    g: np.ndarray
    nfev: int


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through two points with slopes, or None."""
    if a == b:
        return None
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if not disc >= 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (db + d2 - d1) / denom
    return t if math.isfinite(t) else None


def wolfe_line_search(value_grad, theta, d, f0, g0, c1=1e-4, c2=0.9, alpha0=1.0,
                      max_evals=MAX_EVALS, alpha_max=1e10) -> LineSearchResult:
    """Find a step satisfying the strong Wolfe conditions along ``d``.

    ``value_grad`` maps a point to ``(f, g)``. Raises :class:`DescentViolation`
    when ``g0 . d >= 0`` and :class:`LineSearchFail` once ``max_evals``
    evaluations pass without an acceptable step.
    """
    theta = np.asarray(theta, dtype=float)
    d = np.asarray(d, dtype=float)
    dphi0 = float(np.dot(g0, d))
    if not dphi0 < 0:
        raise DescentViolation(f"not a descent direction (g.d = {dphi0:g})")
    if not 0 < c1 < c2 < 1:
        raise ValueError(f"need 0 < c1 < c2 < 1, got c1={c1}, c2={c2}")

    nfev = 0

    def phi(a):
        nonlocal nfev
        nfev += 1
        f, g = value_grad(theta + a * d)
        f = float(f)
        g = np.asarray(g, dtype=float)
        dphi = float(np.dot(g, d))
        if not (math.isfinite(f) and math.isfinite(dphi)):
            return math.inf, g, math.nan
        return f, g, dphi

    def armijo_ok(a, f):
        return f <= f0 + c1 * a * dphi0

    def curvature_ok(dphi):
        return abs(dphi) <= -c2 * dphi0

    def zoom(lo, hi):
        # lo = (a, f, g, dphi) satisfies sufficient decrease; hi brackets it
        while nfev < max_evals:
            a_lo, f_lo, _, d_lo = lo
            a_hi, f_hi, _, d_hi = hi
            width = a_hi - a_lo
            if abs(width) <= 1e-16 * max(1.0, abs(a_lo)):
                break
            t = None
            if math.isfinite(f_hi) and math.isfinite(d_hi):
                t = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            lo_b, hi_b = sorted((a_lo + 0.1 * width, a_hi - 0.1 * width))
            if t is None or not lo_b <= t <= hi_b:
                t = a_lo + 0.5 * width
            f, g, dphi = phi(t)
            if not armijo_ok(t, f) or f >= f_lo:
                hi = (t, f, g, dphi)
            else:
                if curvature_ok(dphi):
                    return LineSearchResult(t, f, g, nfev)
                if dphi * (a_hi - a_lo) >= 0:
                    hi = lo
                lo = (t, f, g, dphi)
        raise LineSearchFail(f"zoom did not converge in {nfev} evaluations", nfev=nfev)

    prev = (0.0, float(f0), np.asarray(g0, dtype=float), dphi0)
    a = float(min(alpha0, alpha_max))
    if not a > 0:
        raise ValueError("initial step must be positive")
    first = True
    while nfev < max_evals:
        f, g, dphi = phi(a)
        cur = (a, f, g, dphi)
        if not armijo_ok(a, f) or (not first and f >= prev[1]):
            return zoom(prev, cur)
        if curvature_ok(dphi):
            return LineSearchResult(a, f, g, nfev)
        if dphi >= 0:
            return zoom(cur, prev)
        if a >= alpha_max:
            break
        t = _cubic_min(prev[0], prev[1], prev[3], a, f, dphi)
        if t is None or t <= a:
            t = 10.0 * a
        a_next = min(max(t, 2.0 * a), 10.0 * a, alpha_max)
        prev, a, first = cur, a_next, False
    raise LineSearchFail(f"no acceptable step in {nfev} evaluations", nfev=nfev)
