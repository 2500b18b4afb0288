"""Approximate identities as t -> infinity and the f/g integral ratio.

A kernel family rho_t >= 0 with unit mass is an approximate identity when
its mass outside every ball |w| < delta tends to zero. Convolving such a
family with a function continuous at w0 recovers the value at w0. The
families used here are exp(-t |w|^(2 alpha)) (closed-form normaliser) and
exp(-t mu_1(w)) built from the clamped cross-section spectrum (normalised
by quadrature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from . import quadrature
from .errors import ValidationError
from .spectral_core import unit_sphere_area

UNIT_MASS_TOL = 1e-8
CLOSED_FORM_TOL = 1e-8
SLOPE_MARGIN = 0.05


def _check_schedule(ts, minimum=0.0, strict_min=True):
    ts = np.asarray([float(t) for t in ts])
    if ts.size == 0:
        raise ValidationError("t_schedule must not be empty")
    if np.any(ts <= minimum) if strict_min else np.any(ts < minimum):
        raise ValidationError(f"scheduled times must be {'>' if strict_min else '>='} {minimum}")
    if np.any(np.diff(ts) <= 0):
        raise ValidationError("t_schedule must be strictly increasing")
    return ts


def loglog_slope(ts, values) -> float:
    """Least-squares slope of log(values) against log(ts) on the last half of the points."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.size < 2:
        raise ValidationError("need at least two points to fit a slope")
    start = ts.size // 2 if ts.size >= 4 else 0
    x, y = np.log(ts[start:]), np.log(values[start:])
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# kernel families


@dataclass(frozen=True)
class KernelFamily:
    """Kernel family rho_t, given by an unnormalised evaluator.

    For ``dim == 1`` the evaluator takes w on the real line; for ``dim >= 2``
    it is a radial profile in r = |w| >= 0. ``normalizer`` selects whether
    ``mass`` uses ``analytic_mass`` or adaptive quadrature.
    """

    evaluator: Callable[[float, np.ndarray], np.ndarray]
    dim: int = 1
    normalizer: str = "quadrature"
    analytic_mass: Callable[[float], float] | None = None
    analytic_tail: Callable[[float, float], float] | None = None
    even: bool = False
    name: str = "kernel"

    def __post_init__(self):
        if self.normalizer not in ("analytic", "quadrature"):
            raise ValidationError("normalizer must be 'analytic' or 'quadrature'")
        if self.normalizer == "analytic" and self.analytic_mass is None:
            raise ValidationError("analytic normalizer needs analytic_mass")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")

    def _f(self, t):
        return lambda w: float(self.evaluator(t, np.asarray(w, dtype=float)))

    def _radial(self, t):
        f = self._f(t)
        d = self.dim
        return lambda r: r ** (d - 1) * f(r)

    def quadrature_mass(self, t: float) -> float:
        if self.dim >= 2:
            val, _ = quadrature.integrate_half_line(self._radial(t))
            return unit_sphere_area(self.dim) * val
        if self.even:
            val, _ = quadrature.integrate_half_line(self._f(t))
            return 2 * val
        return quadrature.integrate_line(self._f(t))[0]

    def mass(self, t: float) -> float:
        if self.normalizer == "analytic":
            return float(self.analytic_mass(t))
        return self.quadrature_mass(t)

    def density(self, t: float, w) -> np.ndarray:
        return np.asarray(self.evaluator(t, np.asarray(w, dtype=float))) / self.mass(t)

    def tail_integral(self, t: float, delta: float) -> float:
        """Unnormalised mass of |w| >= delta, by quadrature started at delta."""
        if self.dim >= 2:
            val, _ = quadrature.integrate_half_line(self._radial(t), delta)
            return unit_sphere_area(self.dim) * val
        right, _ = quadrature.integrate_half_line(self._f(t), delta)
        if self.even:
            return 2 * right
        f = self._f(t)
        left, _ = quadrature.integrate_half_line(lambda s: f(-s), delta)
        return right + left

    def head_integral(self, t: float, delta: float) -> float:
        """Unnormalised mass of |w| < delta."""
        if self.dim >= 2:
            g = self._radial(t)
            val, _ = quadrature.integrate_interval(g, 0.0, delta, epsabs=0.0)
            return unit_sphere_area(self.dim) * val
        f = self._f(t)
        right, _ = quadrature.integrate_interval(f, 0.0, delta, epsabs=0.0)
        if self.even:
            return 2 * right
        left, _ = quadrature.integrate_interval(lambda s: f(-s), 0.0, delta, epsabs=0.0)
        return right + left

    def tail_mass(self, t: float, delta: float) -> float:
        """Normalised mass outside the ball of radius delta."""
        if not delta > 0:
            raise ValidationError("delta must be positive")
        if self.normalizer == "analytic" and self.analytic_tail is not None:
            return float(self.analytic_tail(t, delta))
        return self.tail_integral(t, delta) / self.mass(t)

    def tail_mass_quadrature(self, t: float, delta: float) -> float:
        return self.tail_integral(t, delta) / self.mass(t)


def power_family(alpha: float, dim: int = 1, normalizer: str = "analytic") -> KernelFamily:
    """phi_t(w) = t^(N / 2 alpha) exp(-t |w|^(2 alpha)) / M_alpha."""
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    a = float(alpha)
    s = dim / (2 * a)
    m_alpha = unit_sphere_area(dim) * math.gamma(s) / (2 * a)

    def ev(t, w):
        return np.exp(-t * np.abs(w) ** (2 * a))

    return KernelFamily(
        evaluator=ev, dim=dim, normalizer=normalizer,
        analytic_mass=lambda t: m_alpha * t ** (-s),
        analytic_tail=lambda t, d: special.gammaincc(s, t * d ** (2 * a)),
        even=True, name=f"power(alpha={a}, N={dim})")


def _validate_mu1(mu1, omega_max, samples):
    w = np.linspace(0.0, omega_max, samples)
    v = np.asarray(mu1(w), dtype=float)
    vm = np.asarray(mu1(-w), dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValidationError("mu_1 must be finite and positive")
    if np.max(np.abs(vm - v)) > 1e-12 * np.max(np.abs(v)):
        raise ValidationError("mu_1 must be even")
    bad = np.nonzero(np.diff(v) <= 0)[0]
    if bad.size:
        raise ValidationError(f"mu_1 is not strictly increasing near |w| = {w[bad[0] + 1]:.6g}")
    return float(v[0])


def mu1_family(mu1_evaluator: Callable, omega_max: float = 8.0, samples: int = 801) -> KernelFamily:
    """phi_t(w) = exp(-t mu_1(w)) / integral of exp(-t mu_1).

    The evaluator is shifted by mu_1(0) so that exp does not underflow;
    the shift cancels in the normalised density.
    """
    shift = _validate_mu1(mu1_evaluator, omega_max, samples)

    def ev(t, w):
        return np.exp(-t * (np.asarray(mu1_evaluator(w), dtype=float) - shift))

    return KernelFamily(evaluator=ev, dim=1, normalizer="quadrature", even=True, name="mu1")


def discrete_mu1(points: int = 400, omega_max: float = 8.0, samples: int = 401):
    """Cubic spline of the discrete mu_1(w) on [0, omega_max].

    Beyond omega_max the curve continues as mu_1(omega_max) + w^4 - omega_max^4,
    which keeps the lower two-sided bound slope.
    """
    from .clamped_spectrum import EigenCache

    grid = np.linspace(0.0, omega_max, samples)
    values = EigenCache(points, 1).mu(grid)
    spline = CubicSpline(grid, values, bc_type=((1, 0.0), "not-a-knot"))
    top = float(values[-1])

    def mu1(w):
        a = np.abs(np.asarray(w, dtype=float))
        inside = spline(np.minimum(a, omega_max))
        return np.where(a <= omega_max, inside, top + a ** 4 - omega_max ** 4)

    mu1.alpha1 = float(values[0])
    return mu1


def lower_sandwich_tail(alpha1: float, t: float, delta: float) -> float:
    """J_delta(t) for mu_1 = alpha_1 + w^4: Gamma(1/4, t delta^4) / Gamma(1/4)."""
    return float(special.gammaincc(0.25, t * delta ** 4))


# ---------------------------------------------------------------------------
# definition checks


@dataclass
class ApproxIdentityReport:
    deltas: list
    t_schedule: list
    nonneg_ok: bool
    norm_ok: bool
    decay_ok: bool
    final_ok: bool
    masses: list
    tail_masses: dict
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.nonneg_ok and self.norm_ok and self.decay_ok and self.final_ok


def check_approx_identity(fam: KernelFamily, deltas: Sequence[float], t_schedule,
                          final_tol: float = 1e-2, sample_points: int = 2001,
                          sample_extent: float = 10.0) -> ApproxIdentityReport:
    """Nonnegativity, unit mass and decay of the tail mass along ``t_schedule``."""
    ts = _check_schedule(t_schedule)
    deltas = [float(d) for d in deltas]
    if not deltas or any(d <= 0 for d in deltas):
        raise ValidationError("deltas must be positive")
    failures = []
    w = np.linspace(-sample_extent if fam.dim == 1 else 0.0, sample_extent, sample_points)
    nonneg = True
    masses = []
    norm = True
    for t in ts:
        vals = np.asarray(fam.evaluator(t, w))
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            nonneg = False
            failures.append(("nonnegativity", float(t), None, float(np.min(vals))))
        z = fam.mass(t)
        if fam.normalizer == "analytic":
            unit = fam.quadrature_mass(t) / z
        else:
            d0 = deltas[0]
            unit = (fam.head_integral(t, d0) + fam.tail_integral(t, d0)) / z
        masses.append(unit)
        if abs(unit - 1) > UNIT_MASS_TOL:
            norm = False
            failures.append(("unit_mass", float(t), None, unit))
    tails = {}
    decay = True
    final = True
    for d in deltas:
        row = [fam.tail_mass(t, d) for t in ts]
        tails[d] = row
        for i in range(1, len(row)):
            if row[i - 1] > 0 and not row[i] < row[i - 1]:
                decay = False
                failures.append(("tail_decrease", float(ts[i]), d, row[i]))
        if row[-1] > final_tol:
            final = False
            failures.append(("final_tail", float(ts[-1]), d, row[-1]))
    return ApproxIdentityReport(deltas, list(ts), nonneg, norm, decay, final, masses, tails, failures)


@dataclass
class ConvolutionResult:
    t_schedule: list
    u_samples: list
    values: np.ndarray        # (len(t), len(U)) complex
    targets: np.ndarray       # f(w0, u)
    deviations: np.ndarray    # sup over U per t

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.deviations) < 0))


def _convolve_at(fam, t, f, w0, u, z):
    f_t = fam._f(t)
    _, cut = quadrature.truncation_point(f_t, 0.0)
    left_cut = cut
    if not fam.even:
        _, left_cut = quadrature.truncation_point(lambda s: f_t(-s), 0.0)

    def part(fn):
        re, _ = quadrature.integrate_interval(lambda s: (f_t(s) * fn(w0 + s)).real, -left_cut, cut,
                                              epsabs=1e-14, epsrel=1e-12, points=(0.0,))
        im, _ = quadrature.integrate_interval(lambda s: (f_t(s) * fn(w0 + s)).imag, -left_cut, cut,
                                              epsabs=1e-14, epsrel=1e-12, points=(0.0,))
        return complex(re, im)

    # reflected kernel: (rho_t(-.) * f)(w0) = integral rho_t(s) f(w0 + s) ds
    return part(lambda w: complex(f(w, u))) / z


def convolution_limit(fam: KernelFamily, f: Callable, omega0: float, t_schedule,
                      U: Sequence = (None,)) -> ConvolutionResult:
    """(rho_t reflected * f(., u))(omega0) for each t and each sample u in U."""
    if fam.dim != 1:
        raise ValidationError("convolution_limit supports one-dimensional families")
    ts = _check_schedule(t_schedule)
    us = list(U)
    targets = np.array([complex(f(omega0, u)) for u in us])
    vals = np.zeros((len(ts), len(us)), dtype=complex)
    for i, t in enumerate(ts):
        z = fam.mass(t)
        for j, u in enumerate(us):
            vals[i, j] = _convolve_at(fam, t, f, omega0, u, z)
    dev = np.max(np.abs(vals - targets[None, :]), axis=1)
    return ConvolutionResult(list(ts), us, vals, targets, dev)


@dataclass
class LemmaBoundRow:
    t: float
    delta: float
    deviation: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.deviation <= self.bound


def lemma_bound_check(fam: KernelFamily, f: Callable, omega0: float, t_schedule, deltas,
                      U: Sequence = (None,), modulus_samples: int = 401) -> list:
    """deviation <= 2 sup|f| tail_mass(delta) + sup_{|s|<delta, u} |f(w0+s,u) - f(w0,u)|.

    sup|f| and the modulus of continuity are measured on finite samples.
    """
    conv = convolution_limit(fam, f, omega0, t_schedule, U)
    rows = []
    for d in deltas:
        s = np.linspace(-d, d, modulus_samples)
        modulus = 0.0
        sup_f = 0.0
        for u, target in zip(conv.u_samples, conv.targets):
            fv = np.array([complex(f(omega0 + si, u)) for si in s])
            modulus = max(modulus, float(np.max(np.abs(fv - target))))
            wide = np.linspace(omega0 - 50 * d - 50, omega0 + 50 * d + 50, 4001)
            sup_f = max(sup_f, float(np.max(np.abs([complex(f(x, u)) for x in wide]))))
        for t, dev in zip(conv.t_schedule, conv.deviations):
            rows.append(LemmaBoundRow(t, d, float(dev), 2 * sup_f * fam.tail_mass(t, d) + modulus))
    return rows


# ---------------------------------------------------------------------------
# the f / g ratio


@dataclass(frozen=True)
class RatioInstance:
    """f_alpha(t) = int_0^inf x^alpha exp(-t x^n) dx over g(t) = int_0^inf exp(-t p(x)) dx.

    ``coefficients`` maps powers j to c_j for p(x) = sum c_j x^j.
    """

    alpha: float
    n: int
    coefficients: Mapping[int, float]

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValidationError("alpha must be >= 0")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError("n must be an integer >= 1")
        coeffs = {int(j): float(c) for j, c in dict(self.coefficients).items() if c != 0}
        if not coeffs:
            raise ValidationError("p must have a nonzero coefficient")
        if min(coeffs) < 1:
            raise ValidationError("powers of p must be >= 1")
        if coeffs[min(coeffs)] <= 0 or coeffs[max(coeffs)] <= 0:
            raise ValidationError("lowest and highest coefficients of p must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "coefficients", dict(sorted(coeffs.items())))

    @property
    def k(self) -> int:
        return min(self.coefficients)

    @property
    def m(self) -> int:
        return max(self.coefficients)

    @property
    def bound_exponent(self) -> float:
        return 1.0 / self.k - (self.alpha + 1) / self.n

    def p(self, x):
        return sum(c * x ** j for j, c in self.coefficients.items())

    def f_closed(self, t: float) -> float:
        s = (self.alpha + 1) / self.n
        return math.gamma(s) * t ** (-s) / self.n

    def f_quadrature(self, t: float) -> float:
        a, n = self.alpha, self.n
        return quadrature.integrate_half_line(lambda x: x ** a * math.exp(-t * x ** n))[0]

    def g(self, t: float) -> float:
        return quadrature.integrate_half_line(lambda x: math.exp(-t * self.p(x)))[0]

    def label(self) -> str:
        p = " + ".join(f"{c:g}x^{j}" for j, c in self.coefficients.items())
        return f"alpha={self.alpha:g}, n={self.n}, p={p}"


@dataclass
class RatioResult:
    instance: RatioInstance
    t_schedule: list
    f_closed: np.ndarray
    f_quadrature: np.ndarray
    g: np.ndarray
    ratio: np.ndarray
    slope: float

    @property
    def max_rel_diff(self) -> float:
        return float(np.max(np.abs(self.f_quadrature / self.f_closed - 1)))

    @property
    def closed_form_ok(self) -> bool:
        return self.max_rel_diff <= CLOSED_FORM_TOL

    @property
    def slope_ok(self) -> bool:
        return self.slope <= self.instance.bound_exponent + SLOPE_MARGIN


def f_over_g_ratio(inst: RatioInstance, t_schedule) -> RatioResult:
    ts = _check_schedule(t_schedule, minimum=1.0, strict_min=False)
    fc = np.array([inst.f_closed(t) for t in ts])
    fq = np.array([inst.f_quadrature(t) for t in ts])
    g = np.array([inst.g(t) for t in ts])
    ratio = fc / g
    return RatioResult(inst, list(ts), fc, fq, g, ratio, loglog_slope(ts, ratio))


def default_ratio_schedule(count: int = 33, t_max: float = 1e8):
    return list(np.geomspace(1.0, t_max, count))


def builtin_ratio_instances(alpha1: float | None = None) -> list:
    """Ten instances; the first is the cross-section case p = beta x^2 + x^4, beta = 2 alpha_1^(1/2)."""
    if alpha1 is None:
        from .clamped_spectrum import beam_wavenumbers

        alpha1 = beam_wavenumbers(1)[0].alpha
    beta = 2 * math.sqrt(alpha1)
    return [
        RatioInstance(2, 4, {2: beta, 4: 1}),
        RatioInstance(0, 1, {1: 1}),
        RatioInstance(0, 4, {4: 1}),
        RatioInstance(1, 2, {1: 1, 3: 1}),
        RatioInstance(3, 6, {2: 1, 3: 0.5}),
        RatioInstance(6, 8, {1: 3, 8: 1}),
        RatioInstance(0.5, 3, {3: 1, 5: 2}),
        RatioInstance(4, 5, {4: 1, 6: 1}),
        RatioInstance(2.5, 7, {1: 0.1, 2: 1}),
        RatioInstance(5, 2, {2: 1}),
    ]


# ---------------------------------------------------------------------------
# tail mass of the mu_1 family


@dataclass
class TailDecay:
    delta: float
    t_schedule: list
    tail: np.ndarray
    envelope: np.ndarray     # delta^-2 f_2(t) / g(t)
    slope: float             # fitted on the last decade of the schedule
    envelope_slope: float

    @property
    def envelope_ok(self) -> bool:
        return bool(np.all(self.tail <= self.envelope))


def _last_decade(ts):
    ts = np.asarray(ts)
    return ts >= ts[-1] / 10.0 * (1 - 1e-12)


def tail_decay(fam: KernelFamily, alpha1: float, delta: float, t_schedule) -> TailDecay:
    """J_delta(t) along the schedule with its fitted slope and the f/g envelope."""
    ts = _check_schedule(t_schedule)
    tail = np.array([fam.tail_mass(t, delta) for t in ts])
    inst = RatioInstance(2, 4, {2: 2 * math.sqrt(alpha1), 4: 1})
    env = np.array([inst.f_closed(t) / inst.g(t) for t in ts]) / delta ** 2
    sel = _last_decade(ts)
    if np.count_nonzero(sel) < 2:
        raise ValidationError("schedule must contain at least two points in its last decade")
    with np.errstate(divide="ignore"):
        slope = float(np.polyfit(np.log(ts[sel]), np.log(tail[sel]), 1)[0]) if np.all(tail[sel] > 0) else -math.inf
    env_slope = float(np.polyfit(np.log(ts[sel]), np.log(env[sel]), 1)[0])
    return TailDecay(float(delta), list(ts), tail, env, slope, env_slope)
