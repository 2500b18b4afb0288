"""Biharmonic heat flow on the cylinder R x (0, 1) with clamped walls.

After a Fourier transform in x the problem decouples into one cross-section
eigenproblem per frequency w:

    eta(t, w, y) = sum_n exp(-t mu_n(w)) A_n(w) phi_n(w, y),
    A_n(w)       = <u0_hat(w, .), phi_n(w, .)>,

and u(t, x, y) is the inverse transform of eta in w. Two inversion routes are
provided: the periodic x-box frequencies (FFT) and Simpson quadrature on
dyadic w-nodes refined until the kernel exp(-t mu_1) is resolved. Large t is
handled in scaled form: everything is multiplied by exp(t alpha_1), with
alpha_1 = mu_1(0) of the discrete operator, so nothing underflows.
"""

from __future__ import annotations

import functools
import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp

from .clamped_spectrum import EigenCache, OmegaSpectrum, beam_wavenumbers, mesh
from .errors import (HypothesisError, NumericalError, ResolutionError, TruncationWarning,
                     ValidationError)
from .fullspace import read_samples_csv
from .quadrature import simpson_weights
from .spectral_core import Grid, forward_values, inverse_values

SQRT2PI = math.sqrt(2 * math.pi)
BESSEL_TOL = 1e-8
CT_REL_TOL = 1e-8
KERNEL_CUTOFF = 40.0          # integrate while t (mu_1 - alpha_1) <= this
HALF_MAX_SAMPLES = 32
MAX_REFINEMENTS = 10
TAIL_WARN = 1e-6
ENVELOPE_MODES = 50


# ---------------------------------------------------------------------------
# data


def _bump(y):
    return 30.0 * y ** 2 * (1 - y) ** 2


@dataclass(frozen=True)
class CylinderDatum:
    """Initial datum u0(x, y) sampled on the x-box and the interior y-mesh.

    Either ``f`` and ``g`` (separable u0 = f(x) g(y)) or ``values`` (shape
    (points_x, points_y)) must be supplied.
    """

    extent: float = 20.0
    points_x: int = 256
    points_y: int = 200
    f: Callable | None = None
    g: Callable | None = None
    values: np.ndarray | None = field(default=None, compare=False)
    name: str = "datum"

    def __post_init__(self):
        Grid(1, self.extent, self.points_x)  # validates the box
        if self.points_y < 16:
            raise ValidationError("points_y must be >= 16")
        if self.values is None and (self.f is None or self.g is None):
            raise ValidationError("datum needs f and g or a sample array")
        arr = self.sampled()
        if not np.all(np.isfinite(arr)):
            raise ValidationError("datum samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    # -- constructors -------------------------------------------------------

    @classmethod
    def separable(cls, f, g, extent=20.0, points_x=256, points_y=200, name="separable"):
        return cls(extent, points_x, points_y, f=f, g=g, name=name)

    @classmethod
    def gaussian_bump(cls, scale=1.0, **kw):
        """scale * exp(-x^2) * 30 y^2 (1 - y)^2 (the y-factor has unit integral)."""
        return cls.separable(lambda x: scale * np.exp(-x ** 2), _bump, name="gaussian-bump", **kw)

    @classmethod
    def sign_changing(cls, **kw):
        """(2 exp(-(x - 3)^2) - exp(-x^2)) * 30 y^2 (1 - y)^2: positive projection, negative near x = 0."""
        return cls.separable(lambda x: 2 * np.exp(-(x - 3) ** 2) - np.exp(-x ** 2), _bump,
                             name="sign-changing", **kw)

    @classmethod
    def mode_product(cls, f, n, **kw):
        """f(x) times the n-th discrete cross-section mode at w = 0."""
        extent = kw.get("extent", 20.0)
        points_x = kw.get("points_x", 256)
        points_y = kw.get("points_y", 200)
        phi = EigenCache(points_y, n).get(0.0).eigenvectors[:, n - 1]
        fx = np.asarray(f(Grid(1, extent, points_x).x), dtype=float)
        return cls(extent, points_x, points_y, values=np.multiply.outer(fx, phi), name=f"mode-{n}")

    @classmethod
    def from_csv(cls, path, extent=20.0, points_x=256, points_y=200):
        axes, vals = read_samples_csv(path, ("x", "y"))
        if len(axes) != 2:
            raise ValidationError(f"{path}: cylinder data need columns x,y,value")
        interp = RegularGridInterpolator(axes, vals, bounds_error=False, fill_value=0.0)
        grid = Grid(1, extent, points_x)
        xx, yy = np.meshgrid(grid.x, mesh(points_y)[1], indexing="ij")
        arr = interp(np.stack([xx.ravel(), yy.ravel()], axis=-1)).reshape(xx.shape)
        return cls(extent, points_x, points_y, values=arr, name=str(path))

    # -- sampling -----------------------------------------------------------

    @property
    def grid(self) -> Grid:
        return Grid(1, self.extent, self.points_x)

    @property
    def y(self) -> np.ndarray:
        return mesh(self.points_y)[1]

    @property
    def hy(self) -> float:
        return mesh(self.points_y)[0]

    def sampled(self) -> np.ndarray:
        if self.values is not None:
            arr = np.array(self.values, dtype=float)
            if arr.shape != (self.points_x, self.points_y):
                raise ValidationError(f"values must have shape ({self.points_x}, {self.points_y})")
            return arr
        fx = np.asarray(self.f(self.grid.x), dtype=float)
        gy = np.asarray(self.g(self.y), dtype=float)
        return np.multiply.outer(fx, gy)

    def scaled(self, factor: float) -> "CylinderDatum":
        return CylinderDatum(self.extent, self.points_x, self.points_y, values=factor * self.values,
                             name=f"{factor:g}*{self.name}")

    def __add__(self, other: "CylinderDatum") -> "CylinderDatum":
        if (self.extent, self.points_x, self.points_y) != (other.extent, other.points_x, other.points_y):
            raise ValidationError("data live on different grids")
        return CylinderDatum(self.extent, self.points_x, self.points_y, values=self.values + other.values,
                             name=f"{self.name}+{other.name}")

    def l1_l2(self) -> float:
        col = np.sqrt(self.hy * np.sum(self.values ** 2, axis=1))
        return float(self.grid.spacing * np.sum(col))

    def l2_l2(self) -> float:
        return float(math.sqrt(self.grid.spacing * self.hy * np.sum(self.values ** 2)))

    def hat(self, omegas) -> np.ndarray:
        """u0_hat(w, y) by the Riemann-sum transform in x; shape (len(w), points_y)."""
        w = np.atleast_1d(np.asarray(omegas, dtype=float))
        phase = np.exp(-1j * np.multiply.outer(w, self.grid.x))
        return (self.grid.spacing / SQRT2PI) * (phase @ self.values)


# ---------------------------------------------------------------------------
# per-frequency modal data


@dataclass(frozen=True)
class ModalEntry:
    omega: float
    spectrum: OmegaSpectrum
    coeffs: np.ndarray      # A_n(w), n = 1..N_modes
    hat_norm2: float        # ||u0_hat(w, .)||^2 in L^2(0, 1)

    @property
    def bessel_gap(self) -> float:
        return self.hat_norm2 - float(np.sum(np.abs(self.coeffs) ** 2))


class CylinderSolver:
    """Modal data for one datum with memoised per-frequency coefficients."""

    def __init__(self, datum: CylinderDatum, n_modes: int = 12, cache: EigenCache | None = None):
        if n_modes > datum.points_y:
            raise ValidationError(f"N_modes = {n_modes} exceeds the {datum.points_y} y-nodes")
        if n_modes < 1:
            raise ValidationError("N_modes must be >= 1")
        if cache is None:
            cache = EigenCache(datum.points_y, n_modes)
        if cache.points != datum.points_y or cache.n_keep < n_modes:
            raise ValidationError("eigen cache does not match the datum mesh")
        self.datum = datum
        self.n_modes = n_modes
        self.cache = cache
        self._entries = {}
        self._lock = threading.Lock()

    @property
    def alpha1(self) -> float:
        return float(self.cache.get(0.0).eigenvalues[0])

    def entries(self, omegas) -> list:
        omegas = [float(w) for w in np.atleast_1d(omegas)]
        with self._lock:
            missing = sorted({w for w in omegas if w.hex() not in self._entries})
        if missing:
            spectra = self.cache.sweep(missing)
            hats = self.datum.hat(missing)
            hy = self.datum.hy
            new = {}
            for w, spec, hat in zip(missing, spectra, hats):
                phi = spec.eigenvectors[:, : self.n_modes]
                coeffs = hy * (hat @ phi)
                norm2 = hy * float(np.sum(np.abs(hat) ** 2))
                entry = ModalEntry(w, spec, coeffs, norm2)
                if entry.bessel_gap < -BESSEL_TOL * max(1.0, norm2):
                    raise NumericalError(f"Bessel inequality violated at w={w}: gap {entry.bessel_gap:.3e}")
                new[w.hex()] = entry
            with self._lock:
                self._entries.update(new)
        with self._lock:
            return [self._entries[w.hex()] for w in omegas]

    def projection(self) -> float:
        """Pi = integral of u0 against e_1 = sqrt(2 pi) A_1(0)."""
        return float(SQRT2PI * self.entries([0.0])[0].coeffs[0].real)

    def e1(self) -> np.ndarray:
        return self.cache.get(0.0).eigenvectors[:, 0].copy()

    def mu(self, omegas, n: int = 1) -> np.ndarray:
        return self.cache.mu(np.atleast_1d(omegas), n)


@dataclass
class ModalTable:
    """A_n(w) and mu_n(w) on a frequency grid."""

    omegas: np.ndarray
    coeffs: np.ndarray       # (len(w), N_modes)
    mu: np.ndarray           # (len(w), N_modes)
    phi: np.ndarray          # (len(w), M_y, N_modes)
    hat_norm2: np.ndarray
    grid: Grid | None = None
    hy: float = 0.0

    @property
    def n_modes(self) -> int:
        return self.coeffs.shape[1]

    def bessel_ok(self) -> bool:
        gap = self.hat_norm2 - np.sum(np.abs(self.coeffs) ** 2, axis=1)
        return bool(np.all(gap >= -BESSEL_TOL * np.maximum(1.0, self.hat_norm2)))

    def eta(self, t: float, shift: float = 0.0) -> np.ndarray:
        """exp(t shift) eta(t, w, y); shape (len(w), M_y)."""
        damp = np.exp(-t * (self.mu - shift)) * self.coeffs
        return np.einsum("wn,wyn->wy", damp, self.phi)

    def eta_norm2(self, t: float) -> np.ndarray:
        return self.hy * np.sum(np.abs(self.eta(t)) ** 2, axis=1)


def build_modal_table(datum: CylinderDatum, n_modes: int = 12, solver: CylinderSolver | None = None,
                      omegas=None) -> ModalTable:
    """Modal table on the x-box frequencies (or on ``omegas``)."""
    solver = solver or CylinderSolver(datum, n_modes)
    grid = datum.grid
    ws = grid.omega if omegas is None else np.asarray(omegas, dtype=float)
    ents = solver.entries(ws)
    n = n_modes
    table = ModalTable(
        omegas=np.asarray(ws, dtype=float),
        coeffs=np.array([e.coeffs[:n] for e in ents]),
        mu=np.array([e.spectrum.eigenvalues[:n] for e in ents]),
        phi=np.array([e.spectrum.eigenvectors[:, :n] for e in ents]),
        hat_norm2=np.array([e.hat_norm2 for e in ents]),
        grid=grid if omegas is None else None,
        hy=datum.hy,
    )
    if omegas is None:
        # the FFT route must agree with the direct transform used for the coefficients
        fft_hat = forward_values(grid, datum.values.astype(complex))
        direct = datum.hat(ws)
        if np.max(np.abs(fft_hat - direct)) > 1e-10 * max(1.0, float(np.max(np.abs(direct)))):
            raise NumericalError("FFT and direct x-transforms disagree")
    return table


# ---------------------------------------------------------------------------
# synthesis on the x-box


@functools.lru_cache(maxsize=None)
def _oracle_alphas(n_max):
    out = np.array([m.alpha for m in beam_wavenumbers(n_max)])
    out.setflags(write=False)
    return out


@dataclass
class BoxSolution:
    t: float
    x: np.ndarray
    y: np.ndarray
    scaled_values: np.ndarray   # exp(t alpha_1) u(t, x, y)
    log_scale: float            # -t alpha_1
    imag_residue: float
    tail_bound: float           # truncation envelope, same scaling as scaled_values
    l2_truncation: float        # sqrt of the Bessel gap integrated over w (t = 0 energy)

    @property
    def values(self) -> np.ndarray:
        return self.scaled_values * math.exp(self.log_scale)


def _truncation_envelope(table: ModalTable, t: float, shift: float, n_max: int = ENVELOPE_MODES):
    n0 = table.n_modes
    if n_max <= n0:
        return 0.0
    alpha = _oracle_alphas(n_max)[n0:]
    # growth constant measured on the computed modes, doubled for safety
    computed = _oracle_alphas(n0)
    sups = np.max(np.abs(table.phi), axis=1)
    growth = 1 + (np.sqrt(computed)[None, :] + table.omegas[:, None] ** 2) ** 2
    sup_const = 2 * float(np.max(sups / growth))
    w2 = table.omegas ** 2
    env = (1 + (np.sqrt(alpha)[None, :] + w2[:, None]) ** 2)
    with np.errstate(over="ignore"):
        expo = np.exp(-t * (alpha[None, :] - shift + w2[:, None] ** 2))
    per_w = np.sqrt(table.hat_norm2) * np.sum(sup_const * env * expo, axis=1)
    dw = table.grid.dw if table.grid is not None else float(np.mean(np.diff(table.omegas)))
    return float(np.sum(per_w) * dw / SQRT2PI)


def synthesize_solution(table: ModalTable, t: float, x_window=None, y_nodes=None) -> BoxSolution:
    """u(t, x, y) on the x-box by inverse FFT of eta, restricted to the window."""
    if not t >= 0:
        raise ValidationError("t must be >= 0")
    if table.grid is None:
        raise ValidationError("box synthesis needs a table on the x-box frequencies")
    grid = table.grid
    i0 = int(np.argmin(np.abs(table.omegas)))
    shift = float(table.mu[i0, 0])
    eta = table.eta(t, shift)
    u = inverse_values(grid, eta)
    x = grid.x
    sel = np.ones(x.size, dtype=bool)
    if x_window is not None:
        a, b = x_window
        sel = (x >= a) & (x <= b)
    y = mesh(table.phi.shape[1])[1]
    ysel = np.ones(y.size, dtype=bool) if y_nodes is None else np.isin(np.arange(y.size), y_nodes)
    u = u[np.ix_(sel, ysel)]
    imag = float(np.max(np.abs(u.imag))) if u.size else 0.0
    scale = float(np.max(np.abs(u.real))) if u.size else 0.0
    tail = _truncation_envelope(table, t, shift) if t > 0 else math.inf
    gap = np.clip(table.hat_norm2 - np.sum(np.abs(table.coeffs) ** 2, axis=1), 0, None)
    l2_trunc = math.sqrt(float(np.sum(gap)) * grid.dw)
    if tail > TAIL_WARN * max(scale, 1e-300):
        warnings.warn(f"modal truncation envelope {tail:.3e} exceeds {TAIL_WARN:g} x sup|u| at t={t}",
                      TruncationWarning, stacklevel=2)
    return BoxSolution(float(t), x[sel], y[ysel], u.real, -t * shift, imag, tail, l2_trunc)


# ---------------------------------------------------------------------------
# dyadic Simpson integration in w


@dataclass
class DyadicResult:
    value: np.ndarray | float
    error: float
    level: int
    half_width: float
    nodes: int


def _bisect_width(fn, target, lo=0.0, hi=1.0, iters=200):
    while fn(hi) < target:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise ResolutionError("kernel does not decay in w")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def _simpson_symmetric(values_at, W, level):
    h = 2.0 ** (-level)
    j = int(round(W / h))
    nodes = h * np.arange(-j, j + 1)
    w = simpson_weights(2 * j, h)
    vals = values_at(nodes)
    return np.tensordot(w, vals, axes=(0, 0)), nodes.size


def dyadic_integral(values_at, W, level0, tol=CT_REL_TOL, max_refine=MAX_REFINEMENTS) -> DyadicResult:
    """Composite Simpson on nodes j 2^-p in [-W, W], refined until the Richardson estimate meets ``tol``."""
    W = math.ceil(W * 2.0 ** (level0 - 1)) / 2.0 ** (level0 - 1)
    prev, _ = _simpson_symmetric(values_at, W, level0)
    for level in range(level0 + 1, level0 + max_refine + 1):
        cur, count = _simpson_symmetric(values_at, W, level)
        err = float(np.max(np.abs(cur - prev))) / 15.0
        scale = float(np.max(np.abs(cur)))
        if err <= tol * scale:
            return DyadicResult(cur, err / scale if scale else 0.0, level, W, count)
        prev = cur
    raise ResolutionError(f"w-quadrature not converged after {max_refine} refinements (rel. error {err / scale:.2e})")


def _kernel_layout(mu1: Callable, t: float, shift: float, cutoff: float = KERNEL_CUTOFF):
    gap = lambda w: t * (float(np.atleast_1d(mu1(np.array([w])))[0]) - shift)
    w_half = _bisect_width(gap, math.log(2.0), hi=(math.log(2.0) / t) ** 0.25)
    w_max = _bisect_width(gap, cutoff, hi=(cutoff / t) ** 0.25)
    level = max(0, math.ceil(math.log2(HALF_MAX_SAMPLES / (2 * w_half))))
    return w_max, w_half, level


@dataclass
class CtResult:
    t: float
    log_ct: float
    rel_error: float
    shift: float
    half_width: float
    level: int

    @property
    def ct(self) -> float:
        return math.exp(self.log_ct)


def ct_cylinder(mu1: Callable, t: float, shift: float | None = None) -> CtResult:
    """c_t = 2 pi / integral of exp(-t mu_1), returned as log c_t.

    ``mu1`` maps an array of frequencies to mu_1 values (even in w).
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    if shift is None:
        shift = float(np.atleast_1d(mu1(np.array([0.0])))[0])
    w_max, w_half, level = _kernel_layout(mu1, t, shift)
    res = dyadic_integral(lambda w: np.exp(-t * (np.asarray(mu1(w)) - shift)), w_max, level)
    log_ct = math.log(2 * math.pi) + t * shift - math.log(float(res.value))
    return CtResult(float(t), log_ct, res.error, shift, res.half_width, res.level)


def ct_lower_sandwich(alpha1: float, t: float) -> float:
    """log c_t for mu_1 = alpha_1 + w^4."""
    return math.log(2 * math.pi) + t * alpha1 + 0.25 * math.log(t) - math.log(2 * math.gamma(1.25))


def ct_upper_sandwich(alpha1: float, t: float) -> float:
    """log c_t for mu_1 = alpha_1 + 2 alpha_1^(1/2) w^2 + w^4 (Bessel-K closed form)."""
    beta = 2 * math.sqrt(alpha1)
    z = t * beta ** 2 / 8
    integral = 0.5 * math.sqrt(beta) * special.kve(0.25, z)
    return math.log(2 * math.pi) + t * alpha1 - math.log(integral)


# ---------------------------------------------------------------------------
# rescaled profile and sign pattern


def _window_nodes(values, interval, name):
    a, b = interval
    if not a < b:
        raise ValidationError(f"{name} needs a < b")
    idx = np.nonzero((values >= a - 1e-12) & (values <= b + 1e-12))[0]
    if idx.size == 0:
        raise ValidationError(f"{name} contains no nodes")
    return idx


@dataclass
class ScaledField:
    t: float
    x: np.ndarray
    y: np.ndarray
    scaled_u: np.ndarray      # exp(t alpha_1) u on x times y
    ct: CtResult
    quad_error: float

    @property
    def ct_u(self) -> np.ndarray:
        # c_t u = 2 pi (exp(t a1) u) / (exp(t a1) integral exp(-t mu_1))
        return self.scaled_u * math.exp(self.ct.log_ct - self.t * self.ct.shift)


def rescaled_field(solver: CylinderSolver, t: float, x_nodes, y_index) -> ScaledField:
    """exp(t alpha_1) u(t, x, y) and c_t by Simpson quadrature on shared dyadic w-nodes."""
    if not t > 0:
        raise ValidationError("t must be positive")
    shift = solver.alpha1
    mu1 = lambda w: solver.mu(w, 1)
    w_max, w_half, level = _kernel_layout(mu1, t, shift)
    nyquist = solver.datum.grid.points * solver.datum.grid.dw / 2
    w_max = min(w_max, nyquist * (1 - 1e-12))
    x = np.asarray(x_nodes, dtype=float)
    n = solver.n_modes

    def integrand(ws):
        ents = solver.entries(ws)
        out = np.empty((len(ws), x.size + 1, len(y_index)), dtype=complex)
        for i, (w, e) in enumerate(zip(ws, ents)):
            damp = np.exp(-t * (e.spectrum.eigenvalues[:n] - shift))
            eta = e.spectrum.eigenvectors[y_index, :n] @ (damp * e.coeffs)
            out[i, :-1] = np.exp(1j * w * x)[:, None] * eta[None, :]
            out[i, -1] = damp[0]
        return out

    res = dyadic_integral(integrand, w_max, level)
    num = res.value[:-1] / SQRT2PI
    den = float(res.value[-1, 0].real)
    log_ct = math.log(2 * math.pi) + t * shift - math.log(den)
    ct = CtResult(float(t), log_ct, res.error, shift, res.half_width, res.level)
    return ScaledField(float(t), x, solver.datum.y[y_index], num.real, ct, res.error)


@dataclass
class ProfileReport:
    t_schedule: list
    projection: float
    target: np.ndarray         # Pi e_1 on the K nodes
    target_max: float          # max |Pi e_1| over the whole mesh
    fields: list
    sup_deviation: np.ndarray
    flatness: np.ndarray       # max over y of (max_x - min_x) c_t u

    def tail_decreasing(self, start=None) -> bool:
        start = len(self.t_schedule) // 2 if start is None else start
        return bool(np.all(np.diff(self.sup_deviation[start:]) < 0))

    def flatness_decreasing(self, start=None) -> bool:
        start = len(self.t_schedule) // 2 if start is None else start
        return bool(np.all(np.diff(self.flatness[start:]) < 0))


def _schedule(ts):
    ts = [float(t) for t in ts]
    if not ts:
        raise ValidationError("t_schedule must not be empty")
    if any(t <= 0 for t in ts):
        raise ValidationError("scheduled times must be positive")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValidationError("t_schedule must be strictly increasing")
    return ts


def asymptotic_profile(solver: CylinderSolver, t_schedule, I=(-1.0, 1.0), K=(0.2, 0.8)) -> ProfileReport:
    """sup over I x K of |c_t u - Pi e_1(y)| along the schedule."""
    ts = _schedule(t_schedule)
    datum = solver.datum
    xi = _window_nodes(datum.grid.x, I, "I")
    yi = _window_nodes(datum.y, K, "K")
    pi_ = solver.projection()
    e1 = solver.e1()
    target = pi_ * e1[yi]
    fields, dev, flat = [], [], []
    for t in ts:
        fld = rescaled_field(solver, t, datum.grid.x[xi], yi)
        ctu = fld.ct_u
        fields.append(fld)
        dev.append(float(np.max(np.abs(ctu - target[None, :]))))
        flat.append(float(np.max(ctu.max(axis=0) - ctu.min(axis=0))))
    return ProfileReport(ts, pi_, target, float(np.max(np.abs(pi_ * e1))), fields, np.array(dev),
                         np.array(flat))


@dataclass
class SignReport:
    t_schedule: list
    projection: float
    T_estimate: float | None
    sign_maps: list            # boolean arrays: sgn u == sgn e_1 on I x K
    min_scaled: list

    @property
    def final_all_match(self) -> bool:
        return bool(np.all(self.sign_maps[-1]))


def sign_pattern(solver: CylinderSolver, t_schedule, I=(-1.0, 1.0), K=(0.2, 0.8),
                 e1_override: Callable | None = None, zero_tol: float = 1e-8) -> SignReport:
    """First scheduled t from which sgn u = sgn e_1 on I x K for all later scheduled t.

    ``e1_override`` replaces e_1 in the comparison (used to exercise the
    sign-matching logic with a sign-changing profile).
    """
    ts = _schedule(t_schedule)
    pi_ = solver.projection()
    if not pi_ > 0:
        raise HypothesisError(f"projection onto e_1 must be positive, got {pi_!r}")
    datum = solver.datum
    xi = _window_nodes(datum.grid.x, I, "I")
    yi = _window_nodes(datum.y, K, "K")
    e1 = solver.e1() if e1_override is None else np.asarray(e1_override(datum.y), dtype=float)
    ref = e1[yi]
    # a sign change between neighbouring nodes also puts a zero of e_1 inside K
    if np.any(np.abs(ref) <= zero_tol * np.max(np.abs(e1))) or np.any(ref[1:] * ref[:-1] < 0):
        raise ValidationError("K meets the zero set of e_1")
    maps, mins = [], []
    for t in ts:
        fld = rescaled_field(solver, t, datum.grid.x[xi], yi)
        maps.append(np.sign(fld.scaled_u) == np.sign(ref)[None, :])
        mins.append(float(np.min(fld.scaled_u * np.sign(ref)[None, :])))
    T = None
    for i in range(len(ts) - 1, -1, -1):
        if np.all(maps[i]):
            T = ts[i]
        else:
            break
    return SignReport(ts, pi_, T, maps, mins)


# ---------------------------------------------------------------------------
# remainder of the modal expansion


@dataclass
class RemainderReport:
    t_schedule: list
    k: float
    ell: float
    log_values: np.ndarray        # log of c_t * integral of S(t, w)
    fitted_order: float
    series_partial_sums: np.ndarray
    cauchy_increment: float
    spectral_gap: float

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.log_values) < 0))

    @property
    def order_ok(self) -> bool:
        return self.fitted_order <= -(self.ell - 0.25) + 0.1

    @property
    def cauchy_ok(self) -> bool:
        return self.cauchy_increment <= 1e-10


def envelope_series(k: float, ell: float, n_max: int = ENVELOPE_MODES) -> np.ndarray:
    """Partial sums over n = 2..n_max of (2 + alpha_n^k) / alpha_n^ell."""
    alpha = _oracle_alphas(n_max)[1:]
    return np.cumsum((2 + alpha ** k) / alpha ** ell)


def remainder_diagnostic(solver: CylinderSolver, t_schedule, k: float = 1, ell: float = 2,
                         n_max: int = ENVELOPE_MODES) -> RemainderReport:
    """c_t times the integral of S(t, w) = sum_{n>=2} [1 + alpha_n^k + w^(4k)] exp(-t mu_n(w)).

    Modes up to N_modes use the discrete mu_n(w); higher modes use the lower
    bound alpha_n + w^4 for mu_n, which overestimates their contribution.
    """
    if not ell - k > 0.25:
        raise ValidationError("need ell - k > 1/4")
    ts = _schedule(t_schedule)
    alpha = _oracle_alphas(n_max)
    n0 = solver.n_modes
    logs = []
    for t in ts:
        ct = ct_cylinder(lambda w: solver.mu(w, 1), t, solver.alpha1)
        a1 = ct.shift
        w_max = (KERNEL_CUTOFF / t) ** 0.25
        w_half = (math.log(2.0) / t) ** 0.25
        level = max(0, math.ceil(math.log2(HALF_MAX_SAMPLES / (2 * w_half))))
        terms = []
        if n0 >= 2:
            mu0 = np.array(solver.cache.get(0.0).eigenvalues[1:n0])

            def discrete(ws, _mu0=mu0):
                mus = np.array([s.eigenvalues[1:n0] for s in solver.cache.sweep(ws)])
                weight = 1 + alpha[1:n0][None, :] ** k + ws[:, None] ** (4 * k)
                return weight * np.exp(-t * (mus - _mu0[None, :]))

            res = dyadic_integral(discrete, w_max, level)
            terms += list(np.log(res.value) - t * (mu0 - a1))
        hi = alpha[max(n0, 1):]
        if hi.size:
            def envelope(ws, _hi=hi):
                weight = 1 + _hi[None, :] ** k + ws[:, None] ** (4 * k)
                return weight * np.exp(-t * ws[:, None] ** 4)

            res = dyadic_integral(envelope, w_max, level)
            terms += list(np.log(res.value) - t * (hi - a1))
        log_int = float(logsumexp(terms))
        logs.append(ct.log_ct + log_int - t * a1)
    logs = np.array(logs)
    start = len(ts) // 2 if len(ts) >= 4 else 0
    order = float(np.polyfit(np.log(ts[start:]), logs[start:], 1)[0])
    sums = envelope_series(k, ell, n_max)
    return RemainderReport(ts, float(k), float(ell), logs, order, sums, float(abs(sums[-1] - sums[-2])),
                           float(alpha[1] - alpha[0]))
