"""Adaptive quadrature for smooth, rapidly decaying integrands.

Half-line integrals are truncated where the integrand falls below
``FLOOR * peak`` and the remaining interval is handed to QUADPACK's
adaptive Gauss-Kronrod rule, split at the located peak.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from .errors import DivergenceError, QuadratureError

FLOOR = 1e-16
ABS_TOL = 1e-12
REL_TOL = 1e-12


def _scan(f, lo=1e-8, hi=1e12, factor=1.25):
    xs = lo * factor ** np.arange(int(math.log(hi / lo) / math.log(factor)) + 1)
    vals = np.array([abs(f(x)) for x in xs])
    return xs, vals


def truncation_point(f, start: float = 0.0, floor: float = FLOOR):
    """Return (x_peak, x_cut) for the decaying integrand ``f`` on [start, inf).

    Raises DivergenceError if ``f`` has not fallen below ``floor * peak`` by
    the end of the scan.
    """
    xs, vals = _scan(lambda s: f(start + s))
    if not np.all(np.isfinite(vals)):
        raise DivergenceError("integrand is not finite on the scan")
    head = abs(f(start))
    peak_i = int(np.argmax(vals))
    peak = max(vals[peak_i], head)
    if peak == 0:
        return start, start
    below = np.nonzero(vals[peak_i:] < floor * peak)[0]
    if below.size == 0:
        raise DivergenceError("integrand tail does not decay below the truncation floor")
    x_peak = start + (xs[peak_i] if vals[peak_i] >= head else 0.0)
    return x_peak, start + xs[peak_i + below[0]]


def _quad(f, a, b, epsabs, epsrel):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=500, full_output=1)[:3]
    return val, err


def integrate_interval(f, a: float, b: float, *, epsabs: float = ABS_TOL, epsrel: float = REL_TOL,
                       points=(), accept: float = 1e-9):
    """Adaptive integral of ``f`` over [a, b] with breakpoints ``points``.

    Returns ``(value, error_estimate)``; raises QuadratureError when the
    error estimate exceeds ``accept`` relative (or ``epsabs`` absolute).
    """
    cuts = sorted({a, b, *[p for p in points if a < p < b]})
    total = 0.0
    err = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        v, e = _quad(f, lo, hi, epsabs, epsrel)
        total += v
        err += e
    if not math.isfinite(total) or err > max(accept * abs(total), epsabs * 10):
        raise QuadratureError(f"quadrature did not converge: value={total!r}, error={err!r}")
    return total, err


def integrate_half_line(f, start: float = 0.0, *, epsabs: float = 0.0, epsrel: float = REL_TOL,
                        accept: float = 1e-9):
    """Integral of ``f`` over [start, inf) for a decaying integrand."""
    x_peak, x_cut = truncation_point(f, start)
    if x_cut <= start:
        return 0.0, 0.0
    pts = [x_peak] if start < x_peak < x_cut else []
    return integrate_interval(f, start, x_cut, epsabs=epsabs, epsrel=epsrel, points=pts, accept=accept)


def integrate_line(f, *, epsabs: float = 0.0, epsrel: float = REL_TOL, accept: float = 1e-9):
    """Integral of ``f`` over the real line (two half-line pieces)."""
    right, e1 = integrate_half_line(f, 0.0, epsabs=epsabs, epsrel=epsrel, accept=accept)
    left, e2 = integrate_half_line(lambda s: f(-s), 0.0, epsabs=epsabs, epsrel=epsrel, accept=accept)
    return right + left, e1 + e2


def simpson_weights(n_intervals: int, step: float) -> np.ndarray:
    """Composite Simpson weights for an even number of intervals."""
    if n_intervals < 2 or n_intervals % 2:
        raise ValueError("Simpson's rule needs an even number of intervals >= 2")
    w = np.ones(n_intervals + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (step / 3.0)
