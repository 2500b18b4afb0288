"""Independent reference values, computed with mpmath at high precision.

None of these routines import polyheat; they are the second route against
which the library is checked.
"""

from __future__ import annotations

import functools
import math

import mpmath as mp
import numpy as np

mp.mp.dps = 40


@functools.lru_cache(maxsize=None)
def beam_k(n: int) -> float:
    """n-th positive root of cos k cosh k = 1, by Newton from (2n + 1) pi / 2 on cos k - sech k."""
    f = lambda k: mp.cos(k) - mp.sech(k)
    return float(mp.findroot(f, (2 * n + 1) * mp.pi / 2))


def beam_alpha(n: int) -> float:
    return beam_k(n) ** 4


def _beam_dps(n):
    return 30 + int(beam_k(n) / 2.3)


def _beam_phi(n):
    k = mp.findroot(lambda s: mp.cos(s) - mp.sech(s), mp.mpf(beam_k(n)))
    sig = (mp.cosh(k) - mp.cos(k)) / (mp.sinh(k) - mp.sin(k))
    return lambda s: mp.cosh(k * s) - mp.cos(k * s) - sig * (mp.sinh(k * s) - mp.sin(k * s))


def beam_shape(n: int, y: float) -> float:
    """Classical clamped-beam shape cosh - cos - sigma (sinh - sin).

    This combination has unit L^2(0, 1) norm exactly; ``beam_norm2`` checks that by quadrature.
    """
    with mp.workdps(_beam_dps(n)):
        return float(_beam_phi(n)(mp.mpf(y)))


def beam_norm2(n: int) -> float:
    with mp.workdps(_beam_dps(n)):
        phi = _beam_phi(n)
        return float(mp.quad(lambda s: phi(s) ** 2, mp.linspace(0, 1, n + 2)))


def gaussian_hat(w):
    """Fourier transform of exp(-x^2) with the (2 pi)^(-1/2) convention."""
    return np.exp(-np.asarray(w) ** 2 / 4) / math.sqrt(2)


def heat_gaussian(x, t, width=1.0, amplitude=1.0):
    """exp(-x^2 / w^2) evolved by u_t = u_xx."""
    s2 = width ** 2 + 4 * t
    return amplitude * width / np.sqrt(s2) * np.exp(-np.asarray(x) ** 2 / s2)


def m_alpha(alpha: float, dim: int = 1) -> float:
    """Integral of exp(-|s|^(2 alpha)) over R^dim by direct radial quadrature."""
    area = 2 * mp.pi ** (mp.mpf(dim) / 2) / mp.gamma(mp.mpf(dim) / 2)
    return float(area * mp.quad(lambda r: r ** (dim - 1) * mp.exp(-r ** (2 * alpha)), [0, 1, mp.inf]))


def polynomial_integral_2d(coeffs) -> float:
    """Integral of exp(-P) over R^2 for homogeneous P of degree 2m, via polar coordinates."""
    deg = sum(next(iter(coeffs)))

    def p_theta(th):
        c, s = mp.cos(th), mp.sin(th)
        return sum(v * c ** a * s ** b for (a, b), v in coeffs.items())

    ang = mp.quad(lambda th: p_theta(th) ** (-mp.mpf(2) / deg), [0, mp.pi / 2, mp.pi, 3 * mp.pi / 2, 2 * mp.pi])
    return float(mp.gamma(mp.mpf(2) / deg) / deg * ang)


def f_alpha(alpha, n, t) -> float:
    return float(mp.quad(lambda x: x ** alpha * mp.exp(-t * x ** n), [0, t ** (-1.0 / n), mp.inf]))


def g_poly(coeffs, t) -> float:
    k = min(coeffs)
    return float(mp.quad(lambda x: mp.exp(-t * sum(c * x ** j for j, c in coeffs.items())),
                         [0, t ** (-1.0 / k), mp.inf]))


def quartic_tail(t, delta) -> float:
    """Integral_delta^inf exp(-t w^4) over integral_0^inf exp(-t w^4)."""
    return float(mp.gammainc(mp.mpf(1) / 4, t * delta ** 4, mp.inf, regularized=True))


def sandwich_upper_integral(alpha1, t) -> float:
    """Integral over R of exp(-t (2 alpha1^(1/2) w^2 + w^4)) by direct quadrature."""
    beta = 2 * mp.sqrt(alpha1)
    scale = 1 / mp.sqrt(t * beta)
    return float(2 * mp.quad(lambda w: mp.exp(-t * (beta * w ** 2 + w ** 4)), [0, scale, 10 * scale, mp.inf]))
