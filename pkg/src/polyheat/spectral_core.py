"""Periodic grids, the symmetric Fourier transform, symbols and the exact propagator.

The whole space R^N (N = 1, 2) is replaced by the periodic box [-R, R)^N with
M points per axis. Fourier coefficients follow the unitary convention

    u_hat(w) = (2 pi)^(-N/2) * integral u(x) exp(-i w.x) dx,

approximated by the Riemann sum on the grid, so that the zero-frequency
coefficient times (2 pi)^(N/2) is the Riemann-sum mass of u. Coefficient
arrays are stored in centred order: index 0 is the frequency -M/2 * pi / R.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np
import scipy.fft

from ._parallel import thread_count
from .errors import ValidationError

IMAG_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-R, R)^dim with ``points`` nodes per axis."""

    dim: int
    extent: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}")
        if not (self.extent > 0 and math.isfinite(self.extent)):
            raise ValidationError(f"extent must be positive, got {self.extent}")
        if self.points < 8 or self.points % 2:
            raise ValidationError(f"points must be an even integer >= 8, got {self.points}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def dw(self) -> float:
        """Frequency spacing pi / R."""
        return math.pi / self.extent

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @property
    def x(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return -self.extent + self.spacing * np.arange(self.points)

    @property
    def omega(self) -> np.ndarray:
        """Frequencies along one axis, centred order."""
        j = np.arange(-self.points // 2, self.points // 2)
        return j * self.dw

    def mesh(self):
        return np.meshgrid(*([self.x] * self.dim), indexing="ij")

    def omega_mesh(self):
        return np.meshgrid(*([self.omega] * self.dim), indexing="ij")

    def omega_norm2(self) -> np.ndarray:
        return sum(w * w for w in self.omega_mesh())


# ---------------------------------------------------------------------------
# symbols


@dataclass(frozen=True)
class FractionalPower:
    """Symbol |w|^(2 alpha) of the fractional power (-Laplacian)^alpha."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValidationError(f"alpha must be positive, got {self.alpha}")

    @property
    def homogeneity(self) -> float:
        """Degree of homogeneity of the symbol (2 alpha)."""
        return 2.0 * self.alpha

    def __call__(self, *omega):
        r2 = sum(np.asarray(w, dtype=float) ** 2 for w in omega)
        return r2 ** self.alpha


@dataclass(frozen=True)
class Polynomial:
    """Homogeneous even-degree symbol P(w) = sum_b c_b w^b, |b| = 2m.

    ``coefficients`` maps multi-index tuples (length = dim) to c_b >= 0.
    """

    coefficients: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        coeffs = {tuple(int(i) for i in k): float(v) for k, v in dict(self.coefficients).items()}
        if not coeffs:
            raise ValidationError("polynomial symbol needs at least one coefficient")
        dims = {len(k) for k in coeffs}
        if len(dims) != 1 or dims.pop() not in (1, 2):
            raise ValidationError("multi-indices must all have length 1 or 2")
        degrees = {sum(k) for k in coeffs}
        if len(degrees) != 1:
            raise ValidationError(f"symbol must be homogeneous, found degrees {sorted(degrees)}")
        d = degrees.pop()
        if d < 2 or d % 2:
            raise ValidationError(f"degree must be even and >= 2, got {d}")
        if any(min(k) < 0 for k in coeffs):
            raise ValidationError("multi-index entries must be nonnegative")
        if any(v < 0 or not math.isfinite(v) for v in coeffs.values()):
            raise ValidationError("coefficients must be finite and >= 0")
        if not any(v > 0 for v in coeffs.values()):
            raise ValidationError("coefficients must not all vanish")
        object.__setattr__(self, "coefficients", dict(sorted(coeffs.items())))

    @property
    def dim(self) -> int:
        return len(next(iter(self.coefficients)))

    @property
    def degree(self) -> int:
        return sum(next(iter(self.coefficients)))

    @property
    def homogeneity(self) -> float:
        return float(self.degree)

    def __call__(self, *omega):
        if len(omega) != self.dim:
            raise ValidationError(f"symbol has dim {self.dim}, got {len(omega)} components")
        ws = [np.asarray(w, dtype=float) for w in omega]
        out = np.zeros(np.broadcast(*ws).shape)
        for beta, c in self.coefficients.items():
            term = c
            for w, p in zip(ws, beta):
                term = term * w ** p
            out = out + term
        return out

    def sphere_samples(self, n: int = 720) -> np.ndarray:
        """P on a sample of the unit sphere (two points for dim 1)."""
        if self.dim == 1:
            return self(np.array([-1.0, 1.0]))
        theta = 2 * math.pi * np.arange(n) / n
        return self(np.cos(theta), np.sin(theta))


SymbolSpec = Union[FractionalPower, Polynomial]


def evaluate_symbol(spec: SymbolSpec, grid: Grid) -> np.ndarray:
    """Symbol values on the frequency grid (centred order)."""
    ws = grid.omega_mesh()
    if isinstance(spec, FractionalPower):
        return grid.omega_norm2() ** spec.alpha
    if spec.dim != grid.dim:
        raise ValidationError(f"symbol dim {spec.dim} does not match grid dim {grid.dim}")
    vals = spec(*ws)
    sphere = spec.sphere_samples()
    if vals.min() < 0 or sphere.min() < 0:
        raise ValidationError("polynomial symbol takes negative values: evolution is not dissipative")
    return vals


# ---------------------------------------------------------------------------
# transforms


def _axis_signs(m: int) -> np.ndarray:
    j = np.arange(-m // 2, m // 2)
    return np.where(j % 2 == 0, 1.0, -1.0)


def _phase(grid: Grid, ndim_extra: int = 0) -> np.ndarray:
    s = _axis_signs(grid.points)
    out = s
    for _ in range(grid.dim - 1):
        out = np.multiply.outer(out, s)
    return out.reshape(out.shape + (1,) * ndim_extra)


def forward_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Coefficients of ``values``; extra trailing axes are batch axes."""
    values = np.asarray(values)
    axes = tuple(range(grid.dim))
    extra = values.ndim - grid.dim
    raw = scipy.fft.fftn(values, axes=axes, workers=thread_count())
    raw = scipy.fft.fftshift(raw, axes=axes)
    scale = (grid.spacing / math.sqrt(2 * math.pi)) ** grid.dim
    return raw * (_phase(grid, extra) * scale)


def inverse_values(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Values from centred coefficients; extra trailing axes are batch axes."""
    coeffs = np.asarray(coeffs)
    axes = tuple(range(grid.dim))
    extra = coeffs.ndim - grid.dim
    shifted = scipy.fft.ifftshift(coeffs * _phase(grid, extra), axes=axes)
    raw = scipy.fft.ifftn(shifted, axes=axes, workers=thread_count())
    scale = (grid.dw * grid.points / math.sqrt(2 * math.pi)) ** grid.dim
    return raw * scale


@dataclass(frozen=True)
class SpectralField:
    """Field sampled on ``grid`` together with its Fourier coefficients.

    Either array may be ``None`` until the corresponding transform is applied.
    ``real`` marks fields whose physical values are real; such fields keep a
    complex array whose imaginary part is zero.
    """

    grid: Grid
    values: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    real: bool = False

    def __post_init__(self):
        for name in ("values", "coeffs"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.array(arr, dtype=complex)
            if arr.shape != self.grid.shape:
                raise ValidationError(f"{name} shape {arr.shape} != grid shape {self.grid.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.values is None and self.coeffs is None:
            raise ValidationError("SpectralField needs values or coeffs")

    @classmethod
    def from_values(cls, grid: Grid, values) -> "SpectralField":
        """Field with values and coefficients both populated."""
        values = np.asarray(values)
        real = not np.iscomplexobj(values)
        return forward_transform(cls(grid, values=values, real=real))

    def l2_norm2(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.spacing ** self.grid.dim)

    def coeff_norm2(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2) * self.grid.dw ** self.grid.dim)

    def mass(self) -> float:
        """Riemann-sum integral of the values."""
        return float(np.sum(self.values).real * self.grid.spacing ** self.grid.dim)

    def real_values(self) -> np.ndarray:
        return self.values.real.copy()


def forward_transform(field: SpectralField) -> SpectralField:
    if field.values is None:
        raise ValidationError("forward_transform needs values")
    coeffs = forward_values(field.grid, field.values)
    return SpectralField(field.grid, values=field.values, coeffs=coeffs, real=field.real)


def inverse_transform(field: SpectralField) -> SpectralField:
    if field.coeffs is None:
        raise ValidationError("inverse_transform needs coeffs")
    values = inverse_values(field.grid, field.coeffs)
    if field.real:
        values = _strip_imag(values)
    return SpectralField(field.grid, values=values, coeffs=field.coeffs, real=field.real)


def _strip_imag(values: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(values))), 1e-300)
    resid = float(np.max(np.abs(values.imag)))
    if resid > IMAG_TOL * max(scale, 1.0):
        raise ValidationError(f"imaginary residue {resid:.3e} after inversion of a real field")
    return values.real.astype(complex)


def propagator(spec: SymbolSpec, grid: Grid, t: float) -> np.ndarray:
    """Multiplier exp(-t * symbol) on the frequency grid."""
    if not t >= 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    return np.exp(-t * evaluate_symbol(spec, grid))


def propagate(u0: SpectralField, spec: SymbolSpec, t: float) -> SpectralField:
    """Exact Fourier-space solution of u_t + A u = 0 at time ``t``."""
    if u0.coeffs is None:
        u0 = forward_transform(u0)
    if t == 0:
        coeffs = u0.coeffs
    else:
        coeffs = u0.coeffs * propagator(spec, u0.grid, t)
    return inverse_transform(SpectralField(u0.grid, coeffs=coeffs, real=u0.real))


def hermitian_defect(grid: Grid, coeffs: np.ndarray) -> float:
    """max |c(-w) - conj c(w)| over frequencies whose mirror lies on the grid."""
    c = np.asarray(coeffs)
    sl = (slice(1, None),) * grid.dim
    inner = c[sl]
    mirrored = inner[(slice(None, None, -1),) * grid.dim]
    return float(np.max(np.abs(mirrored - np.conj(inner))))


def unit_sphere_area(dim: int) -> float:
    """Surface measure of S^(dim-1); equals 2 for dim 1."""
    return 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def multi_indices(dim: int, degree: int):
    """All multi-indices of length ``dim`` and total degree ``degree``."""
    return [b for b in itertools.product(range(degree + 1), repeat=dim) if sum(b) == degree]
