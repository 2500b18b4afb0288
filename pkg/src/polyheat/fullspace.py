"""Polyharmonic and fractional heat flows on (a periodic truncation of) R^N.

Provides initial data, the normalisation integral of exp(-symbol), the
blow-up factors c_t that counteract the decay of solutions, the rescaled
profile c_t u(t, .) on a compact window, and a schedule-quantised estimate of
the time after which the solution stays positive on that window.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from . import quadrature
from .errors import DivergenceError, HypothesisError, ResolutionWarning, ValidationError
from .spectral_core import (
    FractionalPower,
    Grid,
    Polynomial,
    SpectralField,
    SymbolSpec,
    evaluate_symbol,
    propagate,
    unit_sphere_area,
)

MASS_CROSSCHECK_TOL = 1e-8
MIN_HALF_MAX_SAMPLES = 8


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class Gaussian:
    """amplitude * exp(-|x - center|^2 / width^2)."""

    center: tuple
    width: float
    amplitude: float = 1.0

    def __call__(self, *xs):
        r2 = sum((x - c) ** 2 for x, c in zip(xs, self.center))
        return self.amplitude * np.exp(-r2 / self.width ** 2)

    def mass(self) -> float:
        return self.amplitude * (math.sqrt(math.pi) * self.width) ** len(self.center)


@dataclass(frozen=True)
class InitialDatum:
    """Initial function u0 for the whole-space problems.

    kind is one of ``gaussian``, ``bump_indicator``, ``signed_mix`` or
    ``samples``. Use the classmethod constructors rather than building the
    payload by hand.
    """

    kind: str
    dim: int
    gaussians: tuple = ()
    center: tuple = ()
    radius: float = 0.0
    amplitude: float = 1.0
    sample_axes: tuple = ()
    sample_values: np.ndarray | None = field(default=None, compare=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def gaussian(cls, center=0.0, width=1.0, amplitude=1.0, dim=1):
        center = _as_point(center, dim)
        if width <= 0:
            raise ValidationError("gaussian width must be positive")
        return cls("gaussian", dim, gaussians=(Gaussian(center, float(width), float(amplitude)),))

    @classmethod
    def unit_mass_gaussian(cls, width=1.0, dim=1, center=0.0):
        amp = 1.0 / (math.sqrt(math.pi) * width) ** dim
        return cls.gaussian(center, width, amp, dim)

    @classmethod
    def bump_indicator(cls, center=0.0, radius=0.5, amplitude=1.0, dim=1):
        """Indicator of the cube |x_i - c_i| <= radius, cell-averaged on the grid."""
        if radius <= 0:
            raise ValidationError("bump radius must be positive")
        return cls("bump_indicator", dim, center=_as_point(center, dim), radius=float(radius),
                   amplitude=float(amplitude))

    @classmethod
    def signed_mix(cls, terms, dim=1):
        """Sum of Gaussians; ``terms`` is an iterable of (center, width, amplitude)."""
        gs = []
        for c, w, a in terms:
            if w <= 0:
                raise ValidationError("gaussian width must be positive")
            gs.append(Gaussian(_as_point(c, dim), float(w), float(a)))
        if not gs:
            raise ValidationError("signed_mix needs at least one term")
        return cls("signed_mix", dim, gaussians=tuple(gs))

    @classmethod
    def samples(cls, axes, values):
        """Tabulated datum on a tensor grid; zero outside the sampled box."""
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        values = np.asarray(values, dtype=float)
        if len(axes) not in (1, 2) or values.shape != tuple(len(a) for a in axes):
            raise ValidationError("sample values must match the axes shape")
        if not np.all(np.isfinite(values)):
            raise ValidationError("sampled datum must be finite")
        for a in axes:
            if len(a) < 2 or np.any(np.diff(a) <= 0):
                raise ValidationError("sample axes must be strictly increasing")
        values.setflags(write=False)
        return cls("samples", len(axes), sample_axes=axes, sample_values=values)

    @classmethod
    def from_csv(cls, path) -> "InitialDatum":
        axes, values = read_samples_csv(path, ("x", "y"))
        return cls.samples(axes, values)

    # -- evaluation ---------------------------------------------------------

    def sample(self, grid: Grid) -> np.ndarray:
        if grid.dim != self.dim:
            raise ValidationError(f"datum dim {self.dim} != grid dim {grid.dim}")
        if self.kind in ("gaussian", "signed_mix"):
            xs = grid.mesh()
            return sum(g(*xs) for g in self.gaussians)
        if self.kind == "bump_indicator":
            h = grid.spacing
            out = self.amplitude
            for axis, c in enumerate(self.center):
                x = grid.x
                lo = np.maximum(x - h / 2, c - self.radius)
                hi = np.minimum(x + h / 2, c + self.radius)
                frac = np.clip(hi - lo, 0, None) / h
                shape = [1] * self.dim
                shape[axis] = grid.points
                out = out * frac.reshape(shape)
            return np.broadcast_to(out, grid.shape).copy()
        if self.dim == 1:
            return np.interp(grid.x, self.sample_axes[0], self.sample_values, left=0.0, right=0.0)
        interp = RegularGridInterpolator(self.sample_axes, self.sample_values, bounds_error=False,
                                         fill_value=0.0)
        pts = np.stack([m.ravel() for m in grid.mesh()], axis=-1)
        return interp(pts).reshape(grid.shape)

    def closed_form_mass(self) -> float | None:
        if self.kind in ("gaussian", "signed_mix"):
            return float(sum(g.mass() for g in self.gaussians))
        if self.kind == "bump_indicator":
            return self.amplitude * (2 * self.radius) ** self.dim
        return None

    def riemann_mass(self, grid: Grid | None = None) -> float:
        if grid is None:
            if self.kind != "samples":
                raise ValidationError("riemann_mass needs a grid for analytic data")
            w = [_trapezoid_weights(a) for a in self.sample_axes]
            weights = w[0] if self.dim == 1 else np.multiply.outer(w[0], w[1])
            return float(np.sum(weights * self.sample_values))
        return float(np.sum(self.sample(grid)) * grid.spacing ** grid.dim)

    def mass(self, grid: Grid | None = None) -> float:
        """Closed-form mass when available (cross-checked on ``grid``), else Riemann sum."""
        closed = self.closed_form_mass()
        if closed is None:
            return self.riemann_mass(grid)
        if grid is not None:
            riemann = self.riemann_mass(grid)
            if abs(riemann - closed) > MASS_CROSSCHECK_TOL * max(1.0, abs(closed)):
                warnings.warn(f"Riemann mass {riemann!r} differs from closed form {closed!r}",
                              ResolutionWarning, stacklevel=2)
        return closed


def _as_point(center, dim):
    if np.isscalar(center):
        return (float(center),) * dim
    pt = tuple(float(c) for c in center)
    if len(pt) != dim:
        raise ValidationError(f"center must have {dim} components")
    return pt


def _trapezoid_weights(a):
    w = np.zeros_like(a)
    d = np.diff(a)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def read_samples_csv(path, coord_names):
    """Read ``coord[, coord2], value`` CSV into tensor-grid axes and values."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    if header[-1] != "value" or len(header) not in (2, 3) or header[:-1] != list(coord_names[:len(header) - 1]):
        raise ValidationError(f"{path}: header must be {','.join(coord_names[:1])}[,{coord_names[1]}],value")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValidationError(f"{path}: need at least two data rows")
    ncoord = len(header) - 1
    axes = [np.unique(data[:, i]) for i in range(ncoord)]
    shape = tuple(len(a) for a in axes)
    if np.prod(shape) != data.shape[0]:
        raise ValidationError(f"{path}: samples do not form a complete tensor grid")
    values = np.full(shape, np.nan)
    idx = tuple(np.searchsorted(axes[i], data[:, i]) for i in range(ncoord))
    values[idx] = data[:, -1]
    if np.any(np.isnan(values)):
        raise ValidationError(f"{path}: duplicate or missing grid points")
    return axes, values


# ---------------------------------------------------------------------------
# windows and grids


@dataclass(frozen=True)
class CompactWindow:
    """Box K = prod [a_i, b_i]; ``stride`` subsamples the grid nodes in K."""

    intervals: tuple
    stride: int = 1

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs or any(not a < b for a, b in ivs):
            raise ValidationError("window intervals need a < b")
        if self.stride < 1:
            raise ValidationError("stride must be >= 1")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def interval(cls, a, b, stride=1):
        return cls(((a, b),), stride)

    @property
    def dim(self):
        return len(self.intervals)

    def contains(self, other: "CompactWindow") -> bool:
        return all(a <= c and d <= b for (a, b), (c, d) in zip(self.intervals, other.intervals))

    def index(self, grid: Grid):
        """Index tuple selecting the grid nodes inside the window."""
        if grid.dim != self.dim:
            raise ValidationError("window and grid dimensions differ")
        sel = []
        x = grid.x
        eps = 1e-12 * grid.extent
        for a, b in self.intervals:
            if not (-grid.extent < a and b < grid.extent):
                raise ValidationError(f"window [{a}, {b}] not strictly inside the box (+-{grid.extent})")
            idx = np.nonzero((x >= a - eps) & (x <= b + eps))[0]
            idx = idx[(np.rint(x[idx] / grid.spacing).astype(np.int64) % self.stride) == 0]
            if idx.size == 0:
                raise ValidationError("window contains no grid nodes")
            sel.append(idx)
        return np.ix_(*sel)

    def points(self, grid: Grid):
        ix = self.index(grid)
        return [m[ix] for m in grid.mesh()]


@dataclass(frozen=True)
class GridPolicy:
    """Time-dependent box: R(t) = base_extent * max(1, t)^(1/homogeneity).

    The node spacing stays fixed so grid nodes coincide across times; the
    number of points is rounded up to a power of two and R adjusted to match.
    """

    base_extent: float = 64.0
    spacing: float = 0.125
    dim: int = 1
    scale_with_time: bool = True

    def grid_for(self, spec: SymbolSpec, t: float) -> Grid:
        r = self.base_extent
        if self.scale_with_time and t > 1:
            r *= t ** (1.0 / spec.homogeneity)
        m = 8
        while m * self.spacing < 2 * r:
            m *= 2
        return Grid(self.dim, m * self.spacing / 2, m)


def half_max_samples(spec: SymbolSpec, grid: Grid, t: float) -> int:
    """Frequency nodes per axis where exp(-t symbol) exceeds one half (axis cut)."""
    if t <= 0:
        return grid.points
    w = grid.omega
    cut = [w] + [np.zeros_like(w)] * (grid.dim - 1)
    if isinstance(spec, FractionalPower):
        vals = np.abs(w) ** (2 * spec.alpha)
    else:
        vals = spec(*cut)
    return int(np.count_nonzero(t * vals <= math.log(2)))


# ---------------------------------------------------------------------------
# normalisation and rescaling


def normalization_M(spec: SymbolSpec, dim: int) -> float:
    """Integral of exp(-symbol(s)) over R^dim."""
    if isinstance(spec, FractionalPower):
        a = spec.alpha
        radial, _ = quadrature.integrate_half_line(lambda r: r ** (dim - 1) * math.exp(-r ** (2 * a)))
        return unit_sphere_area(dim) * radial
    if spec.dim != dim:
        raise ValidationError(f"symbol dim {spec.dim} != {dim}")
    sphere = spec.sphere_samples()
    if sphere.min() < 0:
        raise ValidationError("polynomial symbol takes negative values")
    if sphere.min() <= 1e-14 * max(sphere.max(), 1.0):
        raise DivergenceError("symbol vanishes in some direction: integral of exp(-P) diverges")
    if dim == 1:
        total, _ = quadrature.integrate_line(lambda s: math.exp(-float(spec(s))))
        return total
    # tensor quadrature on a box outside which exp(-P) < floor
    pmin = float(sphere.min())
    cut = (math.log(1 / quadrature.FLOOR) / pmin) ** (1.0 / spec.degree)
    edge = np.linspace(-cut, cut, 64)
    if np.exp(-spec(edge, np.full_like(edge, cut))).max() > quadrature.FLOOR * 10:
        raise DivergenceError("integrand tail does not decay on the quadrature box")
    val, err = integrate.dblquad(lambda y, x: math.exp(-float(spec(x, y))), -cut, cut, -cut, cut,
                                 epsabs=0, epsrel=1e-11)
    return val


def rescale_factor(spec: SymbolSpec, dim: int, t: float, M: float | None = None) -> float:
    """c_t = (2 pi)^N t^(N / homogeneity) / M, M = integral of exp(-symbol)."""
    if not t > 0:
        raise ValidationError(f"t must be positive, got {t}")
    if M is None:
        M = normalization_M(spec, dim)
    return (2 * math.pi) ** dim * t ** (dim / spec.homogeneity) / M


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ProfileResult:
    t: float
    c_t: float
    mass: float
    points: list
    profile: np.ndarray
    sup_deviation: float
    min_value: float
    grid: Grid


def solve(u0: InitialDatum, spec: SymbolSpec, t: float, grid: Grid) -> SpectralField:
    field0 = SpectralField.from_values(grid, u0.sample(grid))
    return propagate(field0, spec, t)


def rescaled_profile(u0: InitialDatum, spec: SymbolSpec, t: float, K: CompactWindow,
                     grid: Grid, M: float | None = None) -> ProfileResult:
    """c_t u(t, x) on K and its sup-distance from the mass of u0."""
    if not t > 0:
        raise ValidationError(f"t must be positive, got {t}")
    n_half = half_max_samples(spec, grid, t)
    if n_half < MIN_HALF_MAX_SAMPLES:
        warnings.warn(f"exp(-t*symbol) at t={t} has only {n_half} frequency samples inside its "
                      f"half-maximum width; enlarge the box", ResolutionWarning, stacklevel=2)
    mass = u0.mass(grid)
    ct = rescale_factor(spec, grid.dim, t, M)
    u = solve(u0, spec, t, grid).values.real
    ix = K.index(grid)
    prof = ct * u[ix]
    return ProfileResult(t=t, c_t=ct, mass=mass, points=[m[ix] for m in grid.mesh()], profile=prof,
                         sup_deviation=float(np.max(np.abs(prof - mass))),
                         min_value=float(np.min(u[ix])), grid=grid)


def _check_schedule(ts):
    ts = [float(t) for t in ts]
    if not ts:
        raise ValidationError("t_schedule must not be empty")
    if any(not t > 0 for t in ts):
        raise ValidationError("scheduled times must be positive")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValidationError("t_schedule must be strictly increasing")
    return ts


def geometric_schedule(t0: float, factor: float, count: int):
    if count < 1:
        raise ValidationError("schedule count must be >= 1")
    if not (t0 > 0 and factor > 1):
        raise ValidationError("need t0 > 0 and factor > 1")
    return [t0 * factor ** j for j in range(count)]


def convergence_experiment(u0: InitialDatum, spec: SymbolSpec, K: CompactWindow, t_schedule,
                           policy: GridPolicy):
    """Rescaled profiles along ``t_schedule``; each time gets its own grid."""
    ts = _check_schedule(t_schedule)
    M = normalization_M(spec, policy.dim)
    return [rescaled_profile(u0, spec, t, K, policy.grid_for(spec, t), M) for t in ts]


@dataclass
class PositivityResult:
    t_schedule: list
    min_values: list
    T_estimate: float | None


def time_to_positivity(u0: InitialDatum, spec: SymbolSpec, K: CompactWindow, t_schedule,
                       policy: GridPolicy) -> PositivityResult:
    """First scheduled t from which min_K u(t) > 0 for every later scheduled t."""
    ts = _check_schedule(t_schedule)
    mass = u0.mass(policy.grid_for(spec, ts[0]))
    if not mass > 0:
        raise HypothesisError(f"initial datum must have positive mass, got {mass!r}")
    mins = []
    for t in ts:
        grid = policy.grid_for(spec, t)
        u = solve(u0, spec, t, grid).values.real
        mins.append(float(np.min(u[K.index(grid)])))
    T = None
    for i in range(len(ts) - 1, -1, -1):
        if mins[i] > 0:
            T = ts[i]
        else:
            break
    return PositivityResult(ts, mins, T)


def kernel_check(spec: SymbolSpec, grid: Grid, t: float, M: float | None = None) -> float:
    """c_t times the solution at x = 0 for delta data (u0_hat = (2 pi)^(-N/2))."""
    mult = np.exp(-t * evaluate_symbol(spec, grid))
    u_at_0 = (2 * math.pi) ** (-grid.dim) * float(np.sum(mult)) * grid.dw ** grid.dim
    return rescale_factor(spec, grid.dim, t, M) * u_at_0


def gaussian_heat_solution(u0: InitialDatum, t: float, points) -> np.ndarray:
    """Closed-form heat-equation (alpha = 1) solution for Gaussian-family data."""
    if u0.kind not in ("gaussian", "signed_mix"):
        raise ValidationError("closed-form heat solution needs Gaussian data")
    out = 0.0
    for g in u0.gaussians:
        s2 = g.width ** 2 + 4 * t
        r2 = sum((x - c) ** 2 for x, c in zip(points, g.center))
        out = out + g.amplitude * (g.width ** 2 / s2) ** (u0.dim / 2) * np.exp(-r2 / s2)
    return out
