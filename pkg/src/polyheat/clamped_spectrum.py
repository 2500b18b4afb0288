"""Clamped-beam modes on (0, 1) and the spectrum of Delta^2 - 2 w^2 Delta + w^4.

The continuous modes solve cos k cosh k = 1 with eigenvalue alpha_n = k_n^4.
The discrete operator acts on the M interior nodes y_j = j h, h = 1/(M + 1),
with u_0 = u_{M+1} = 0 and the ghost reflection u_{-1} = u_1 encoding
u'(0) = 0 (and likewise at y = 1). Grid functions are normalised in the
discrete inner product <u, v> = h sum u_j v_j.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import optimize

from . import _io
from ._parallel import pmap
from .errors import BracketError, ValidationError

ROOT_TOL = 1e-13
MIN_POINTS = 16
RICHARDSON_FACTOR = 10.0


# ---------------------------------------------------------------------------
# continuous beam modes


def _root_function(k):
    # cos k cosh k - 1 divided by cosh k; finite for every k
    return math.cos(k) - 1.0 / math.cosh(k) if k < 700 else math.cos(k)


def _sigma(k):
    e = math.exp(-k)
    return (1 + e * e - 2 * math.cos(k) * e) / (1 - e * e - 2 * math.sin(k) * e)


@dataclass(frozen=True)
class BeamMode:
    """Clamped-beam eigenpair on (0, 1).

    phi(y) = cosh(ky) - cos(ky) - sigma (sinh(ky) - sin(ky)), scaled by
    ``norm`` so that its L^2(0, 1) norm is one.
    """

    n: int
    k: float
    sigma: float
    norm: float = 1.0

    @property
    def alpha(self) -> float:
        return self.k ** 4

    @property
    def residual(self) -> float:
        """|cos k - sech k|, the overflow-free form of |cos k cosh k - 1| / cosh k."""
        return abs(_root_function(self.k))

    @property
    def interval(self) -> tuple:
        """((4n - 1) pi / 2, (4n + 1) pi / 2)."""
        return ((4 * self.n - 1) * math.pi / 2, (4 * self.n + 1) * math.pi / 2)

    def in_interval(self) -> bool:
        a, b = self.interval
        return a < self.k < b


def beam_wavenumbers(n_max: int) -> list:
    """First ``n_max`` roots of cos k cosh k = 1 (k > 0), by bisection.

    Root n is bracketed by (2n + 1) pi / 2 -+ pi / 4, where cos k - sech k
    changes sign because sech k < 1/sqrt(2) there.
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    modes = []
    for n in range(1, n_max + 1):
        c = (2 * n + 1) * math.pi / 2
        a, b = c - math.pi / 4, c + math.pi / 4
        if _root_function(a) * _root_function(b) >= 0:
            raise BracketError(f"no sign change for root {n} on [{a}, {b}]")
        k = optimize.bisect(_root_function, a, b, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps,
                            maxiter=200)
        mode = BeamMode(n, k, _sigma(k))
        modes.append(BeamMode(n, k, mode.sigma, _l2_norm(mode)))
    return modes


def _shape(mode: BeamMode, y):
    k = mode.k
    y = np.asarray(y, dtype=float)
    ky = k * y
    e = math.exp(-k)
    # delta = 1 - sigma and sinh(ky) / (sinh k - sin k), both without overflow
    denom = 1 - e * e - 2 * math.sin(k) * e
    delta = (math.cos(k) - math.sin(k) - e) / denom
    sinh_ratio = np.exp(k * (y - 1)) * (1 - np.exp(-2 * ky))
    return np.exp(-ky) - np.cos(ky) + mode.sigma * np.sin(ky) + delta * sinh_ratio


@functools.lru_cache(maxsize=None)
def _gauss_rule(order: int):
    return np.polynomial.legendre.leggauss(order)


def _l2_norm(mode: BeamMode) -> float:
    # Gauss-Legendre is exact to rounding for these entire functions
    nodes, weights = _gauss_rule(max(64, 1 << (8 * mode.n + 32 - 1).bit_length()))
    y = 0.5 * (nodes + 1)
    return math.sqrt(0.5 * float(np.sum(weights * _shape(mode, y) ** 2)))


def beam_eigenfunction(mode: BeamMode, y):
    """L^2-normalised mode shape at ``y`` in [0, 1]."""
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr < 0) | (y_arr > 1)):
        raise ValidationError("y must lie in [0, 1]")
    out = _shape(mode, y_arr) / mode.norm
    return float(out) if np.ndim(y) == 0 else out


# ---------------------------------------------------------------------------
# discretisation


def mesh(points: int) -> tuple:
    """(h, interior nodes) for ``points`` interior nodes on (0, 1)."""
    h = 1.0 / (points + 1)
    return h, h * np.arange(1, points + 1)


@dataclass(frozen=True)
class BandedOperator:
    """Symmetric pentadiagonal matrix in LAPACK upper banded storage (3 x M)."""

    bands: np.ndarray
    h: float

    @property
    def size(self) -> int:
        return self.bands.shape[1]

    def toarray(self) -> np.ndarray:
        m = self.size
        a = np.diag(self.bands[2])
        for off in (1, 2):
            d = self.bands[2 - off, off:]
            a += np.diag(d, off) + np.diag(d, -off)
        return a

    def matvec(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.bands[2][:, None] * u if u.ndim == 2 else self.bands[2] * u
        for off in (1, 2):
            d = self.bands[2 - off, off:]
            if u.ndim == 2:
                d = d[:, None]
            out[:-off] += d * u[off:]
            out[off:] += d * u[:-off]
        return out


def _check_points(points):
    if int(points) != points or points < MIN_POINTS:
        raise ValidationError(f"need at least {MIN_POINTS} interior points, got {points}")
    return int(points)


def laplacian_matrix(points: int) -> np.ndarray:
    """Dirichlet second difference tridiag(1, -2, 1) / h^2 (dense)."""
    m = _check_points(points)
    h, _ = mesh(m)
    return (np.diag(np.full(m, -2.0)) + np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)) / h ** 2


def discretize_L_omega(omega: float, points: int) -> BandedOperator:
    """Matrix of Delta^2 - 2 w^2 Delta + w^4 with clamped ends.

    Built from w^2 only, so +w and -w give bitwise identical matrices.
    """
    m = _check_points(points)
    h, _ = mesh(m)
    w2 = float(omega) * float(omega)
    h2, h4 = h * h, h ** 4
    bands = np.zeros((3, m))
    bands[2] = 6.0 / h4 + 2 * w2 * (2.0 / h2) + w2 * w2
    bands[2, 0] += 1.0 / h4
    bands[2, -1] += 1.0 / h4
    bands[1, 1:] = -4.0 / h4 + 2 * w2 * (-1.0 / h2)
    bands[0, 2:] = 1.0 / h4
    bands.setflags(write=False)
    return BandedOperator(bands, h)


@dataclass(frozen=True)
class OmegaSpectrum:
    """Lowest eigenpairs of the discrete operator at one frequency."""

    omega: float
    h: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # shape (M, n_keep), h * sum phi^2 = 1
    sign_convention: str = "n=1: positive mean; n>=2: positive first node"

    @property
    def y(self) -> np.ndarray:
        return mesh(self.eigenvectors.shape[0])[1]

    @property
    def n_keep(self) -> int:
        return len(self.eigenvalues)

    def gram(self) -> np.ndarray:
        return self.h * self.eigenvectors.T @ self.eigenvectors


def _rayleigh(vecs, w2, h):
    # Rayleigh quotients from differences of the eigenvectors: the solver's
    # eigenvalues carry absolute errors of order eps / h^4, these do not
    z = np.zeros((1, vecs.shape[1]))
    p = np.concatenate([vecs[:1], z, vecs, z, vecs[-1:]])
    d2 = (p[:-2] - 2 * p[1:-1] + p[2:]) / h ** 2
    d2[0] *= math.sqrt(0.5)
    d2[-1] *= math.sqrt(0.5)
    d1 = np.diff(p[1:-1], axis=0) / h
    n2 = np.sum(vecs ** 2, axis=0)
    return (np.sum(d2 ** 2, axis=0) + 2 * w2 * np.sum(d1 ** 2, axis=0)) / n2 + w2 * w2


def solve_spectrum(omega: float, points: int, n_keep: int) -> OmegaSpectrum:
    """Lowest ``n_keep`` eigenpairs from the symmetric banded eigensolver.

    Eigenvalues are refined by their Rayleigh quotients, which are accurate
    to rounding in the eigenvalue, not in the matrix norm.
    """
    op = discretize_L_omega(omega, points)
    if not 1 <= n_keep <= op.size:
        raise ValidationError(f"n_keep must lie in [1, {op.size}], got {n_keep}")
    vals, vecs = scipy.linalg.eig_banded(op.bands, lower=False, select="i",
                                         select_range=(0, n_keep - 1), check_finite=False)
    vecs = vecs / math.sqrt(op.h)
    signs = np.sign(vecs[0])
    signs[0] = np.sign(vecs[:, 0].sum())
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    vals = _rayleigh(vecs, float(omega) * float(omega), op.h)
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return OmegaSpectrum(float(omega), op.h, vals, vecs)


class EigenCache:
    """Thread-safe memo of solve_spectrum keyed by (|w| bit pattern, M, n_keep)."""

    def __init__(self, points: int, n_keep: int):
        self.points = _check_points(points)
        if not 1 <= n_keep <= self.points:
            raise ValidationError(f"n_keep must lie in [1, {self.points}]")
        self.n_keep = int(n_keep)
        self._store = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _key(self, omega):
        return (abs(float(omega)).hex(), self.points, self.n_keep)

    def get(self, omega: float) -> OmegaSpectrum:
        key = self._key(omega)
        with self._lock:
            spec = self._store.get(key)
            if spec is not None:
                self.hits += 1
                return spec
        spec = solve_spectrum(abs(float(omega)), self.points, self.n_keep)
        with self._lock:
            self.misses += 1
            return self._store.setdefault(key, spec)

    def sweep(self, omegas) -> list:
        """Spectra for every frequency; distinct |w| values are solved in parallel."""
        todo = sorted({abs(float(w)) for w in omegas} - {float.fromhex(k[0]) for k in self._store})
        pmap(self.get, todo)
        return [self.get(w) for w in omegas]

    def mu(self, omegas, n: int = 1) -> np.ndarray:
        return np.array([s.eigenvalues[n - 1] for s in self.sweep(omegas)])

    def __len__(self):
        return len(self._store)


# ---------------------------------------------------------------------------
# quadratic forms


@dataclass(frozen=True)
class FormEvaluator:
    """Discrete a_0(u) = ||u''||^2, q(u) = ||u'||^2 and a_w = a_0 + 2 w^2 q + w^4 ||u||^2.

    ``u`` holds interior values; the clamped extension is applied internally.
    """

    points: int

    @property
    def h(self):
        return mesh(self.points)[0]

    def _pad(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.points:
            raise ValidationError(f"grid function must have {self.points} entries")
        z = np.zeros((1,) + u.shape[1:])
        return np.concatenate([u[:1], z, u, z, u[-1:]])  # ghost, boundary, interior, boundary, ghost

    def second_difference(self, u):
        """Second differences at nodes 0..M+1 (ghost reflection at the ends)."""
        p = self._pad(u)
        return (p[:-2] - 2 * p[1:-1] + p[2:]) / self.h ** 2

    def a0(self, u) -> float:
        d2 = self.second_difference(u)
        w = np.ones(d2.shape[0])
        w[0] = w[-1] = 0.5
        return float(self.h * np.sum(w * (d2 ** 2).T))

    def q(self, u) -> float:
        p = self._pad(u)[1:-1]
        return float(self.h * np.sum(((p[1:] - p[:-1]) / self.h) ** 2))

    def norm2(self, u) -> float:
        return float(self.h * np.sum(np.asarray(u, dtype=float) ** 2))

    def a_omega(self, u, omega: float) -> float:
        w2 = omega * omega
        return self.a0(u) + 2 * w2 * self.q(u) + w2 * w2 * self.norm2(u)

    def matrix_form(self, u, omega: float) -> float:
        """h u^T A(w) u from the assembled banded matrix (second route to a_w)."""
        u = np.asarray(u, dtype=float)
        return float(self.h * u @ discretize_L_omega(omega, self.points).matvec(u))

    def h2_norm2(self, u) -> float:
        return self.norm2(u) + self.q(u) + self.a0(u)


def h2_equivalence_constants(points: int) -> tuple:
    """(c1, c2) with c1 ||u||_{H^2}^2 <= a_0(u) <= c2 ||u||_{H^2}^2 on the mesh."""
    m = _check_points(points)
    b = discretize_L_omega(0.0, m).toarray()
    t = -laplacian_matrix(m)
    g = scipy.linalg.eigh(b, np.eye(m) + t + b, eigvals_only=True)
    return float(g[0]), float(g[-1])


# ---------------------------------------------------------------------------
# verification reports


@dataclass
class LemmaMuReport:
    omegas: np.ndarray
    n_max: int
    points: int
    mu: np.ndarray         # (len(omegas), n_max) at the base mesh
    mu_fine: np.ndarray    # same on the doubled mesh
    alpha: np.ndarray      # continuous alpha_n
    slack: np.ndarray      # RICHARDSON_FACTOR * |mu - mu_fine| / 3
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def lower(self):
        return self.alpha[None, :] + self.omegas[:, None] ** 4

    def upper(self):
        w2 = self.omegas[:, None] ** 2
        return self.alpha[None, :] + 2 * np.sqrt(self.alpha[None, :]) * w2 + w2 * w2

    def rows(self):
        lo, hi = self.lower(), self.upper()
        for i, w in enumerate(self.omegas):
            for n in range(self.n_max):
                yield (w, n + 1, self.mu[i, n], lo[i, n], hi[i, n])


def verify_lemma_mu(omega_grid, n_max: int, points: int = 400) -> LemmaMuReport:
    """Evenness, monotonicity in |w|, the two-sided bound and (n pi)^4 <= alpha_n."""
    omegas = np.asarray(omega_grid, dtype=float)
    if omegas.ndim != 1 or omegas.size == 0:
        raise ValidationError("omega grid must be a nonempty 1-D array")
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    modes = beam_wavenumbers(n_max)
    alpha = np.array([m.alpha for m in modes])
    base = EigenCache(points, n_max)
    fine = EigenCache(2 * points + 1, n_max)  # h halves exactly
    mu = np.array([s.eigenvalues for s in base.sweep(omegas)])
    mu_fine = np.array([s.eigenvalues for s in fine.sweep(omegas)])
    slack = RICHARDSON_FACTOR * np.abs(mu - mu_fine) / 3.0
    report = LemmaMuReport(omegas, n_max, points, mu, mu_fine, alpha, slack)
    v = report.violations

    # (i) evenness (bitwise) and strict increase in |w|
    for i, w in enumerate(omegas):
        mirror = solve_spectrum(-w, points, n_max).eigenvalues
        if not np.array_equal(mirror, mu[i]):
            v.append(("even", float(w), None, float(np.max(np.abs(mirror - mu[i])))))
    order = np.argsort(np.abs(omegas), kind="stable")
    for a, b in zip(order[:-1], order[1:]):
        if abs(omegas[b]) > abs(omegas[a]):
            d = mu[b] - mu[a]
            for n in np.nonzero(d <= 0)[0]:
                v.append(("increase", float(omegas[b]), int(n + 1), float(d[n])))

    # (ii) two-sided bound with discretisation slack
    lo_margin = mu - report.lower() + slack
    hi_margin = report.upper() + slack - mu
    for i, w in enumerate(omegas):
        for n in range(n_max):
            if lo_margin[i, n] < 0:
                v.append(("lower", float(w), n + 1, float(lo_margin[i, n])))
            if hi_margin[i, n] < 0:
                v.append(("upper", float(w), n + 1, float(hi_margin[i, n])))

    # (iii) Dirichlet comparison on the continuous values
    for n in range(n_max):
        margin = alpha[n] - ((n + 1) * math.pi) ** 4
        if margin < 0:
            v.append(("dirichlet", None, n + 1, float(margin)))
    return report


@dataclass
class WeylSeries:
    k: float
    partial_sums: np.ndarray
    tail_bound: float
    remark_rhs: float | None
    terms: np.ndarray

    @property
    def upper_estimate(self) -> float:
        return float(self.partial_sums[-1] + self.tail_bound)

    @property
    def remark_bound_holds(self) -> bool | None:
        """Whether the partial sum obeys the bound built from k_n >= (4n - 1) pi / 2."""
        if self.remark_rhs is None:
            return None
        return bool(self.partial_sums[-1] <= self.remark_rhs)


def weyl_series(n_max: int, k: float) -> WeylSeries:
    """Partial sums of sum alpha_n^(-k) with a tail bound from (n pi)^4 <= alpha_n."""
    if not k > 0.25:
        raise ValidationError(f"exponent must exceed 1/4, got {k}")
    alpha = np.array([m.alpha for m in beam_wavenumbers(n_max)])
    terms = alpha ** (-k)
    tail = math.pi ** (-4 * k) * n_max ** (1 - 4 * k) / (4 * k - 1)
    nn = np.arange(1, 200001, dtype=float)
    rhs = float(np.sum(((4 * nn - 1) * math.pi / 2) ** (-4 * k)))
    rhs += ((4 * nn[-1] + 3) * math.pi / 2) ** (1 - 4 * k) / (2 * math.pi * (4 * k - 1))
    return WeylSeries(float(k), np.cumsum(terms), tail, rhs, terms)


@dataclass
class SupnormReport:
    k: float
    table: list  # (omega, n, sup|phi|, envelope, ratio)

    @property
    def ratios(self):
        return np.array([r[4] for r in self.table])

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min())


def supnorm_growth_check(omega_grid, n_range, k: float = 1, points: int = 400) -> SupnormReport:
    """||phi_n(w)||_inf / [1 + (alpha_n^(1/2) + w^2)^2]^k over the sampled (n, w)."""
    n_list = sorted(int(n) for n in n_range)
    if not n_list or n_list[0] < 1:
        raise ValidationError("mode indices must be >= 1")
    alpha = np.array([m.alpha for m in beam_wavenumbers(n_list[-1])])
    cache = EigenCache(points, n_list[-1])
    rows = []
    for w, spec in zip(omega_grid, cache.sweep(omega_grid)):
        for n in n_list:
            sup = float(np.max(np.abs(spec.eigenvectors[:, n - 1])))
            env = (1 + (math.sqrt(alpha[n - 1]) + w * w) ** 2) ** k
            rows.append((float(w), n, sup, env, sup / env))
    return SupnormReport(float(k), rows)


def eigenvalue_table_csv(path, report: LemmaMuReport):
    return _io.write_csv(path, ["omega", "n", "mu_n", "lower_bound", "upper_bound"], report.rows())


def mode_shapes_csv(path, spectrum: OmegaSpectrum):
    header = ["y"] + [f"phi_{n}" for n in range(1, spectrum.n_keep + 1)]
    rows = [(y, *vec) for y, vec in zip(spectrum.y, spectrum.eigenvectors)]
    return _io.write_csv(path, header, rows)
