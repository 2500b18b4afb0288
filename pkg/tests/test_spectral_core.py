import math

import numpy as np
import pytest

import oracles
from polyheat import ValidationError
from polyheat.spectral_core import (
    FractionalPower,
    Grid,
    Polynomial,
    SpectralField,
    evaluate_symbol,
    forward_transform,
    hermitian_defect,
    inverse_transform,
    multi_indices,
    propagate,
    propagator,
)


class TestGrid:
    def test_frequencies(self):
        g = Grid(1, math.pi, 64)
        assert g.spacing == pytest.approx(2 * math.pi / 64)
        assert g.omega[0] == -32 and g.omega[-1] == 31
        assert g.x[0] == -math.pi and len(g.x) == 64

    def test_two_dimensional_shape(self):
        g = Grid(2, 5.0, 16)
        assert g.shape == (16, 16)
        assert g.omega_norm2().shape == (16, 16)

    @pytest.mark.parametrize("dim,extent,points", [(3, 1.0, 16), (1, 0.0, 16), (1, 1.0, 7), (1, 1.0, 6),
                                                  (1, -2.0, 16)])
    def test_rejects_invalid(self, dim, extent, points):
        with pytest.raises(ValidationError):
            Grid(dim, extent, points)


class TestSymbols:
    def test_fractional_power_values(self):
        assert FractionalPower(2)(2.0, 0.0) == pytest.approx(16.0)
        assert FractionalPower(0.5)(3.0) == pytest.approx(3.0)

    def test_polynomial_value(self):
        p = Polynomial({(4, 0): 1.0, (0, 4): 1.0})
        assert p(1.0, 1.0) == pytest.approx(2.0)
        assert p.degree == 4 and p.dim == 2

    @pytest.mark.parametrize("coeffs", [
        {(3,): 1.0},                    # odd degree
        {(4, 0): 1.0, (0, 2): 1.0},     # inhomogeneous
        {(4,): -1.0},                   # negative coefficient
        {(4,): 0.0},                    # all zero
        {},
    ])
    def test_polynomial_rejects(self, coeffs):
        with pytest.raises(ValidationError):
            Polynomial(coeffs)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValidationError):
            FractionalPower(0.0)

    def test_evaluate_on_grid_nonnegative(self):
        g = Grid(2, 4.0, 16)
        vals = evaluate_symbol(Polynomial({(2, 2): 1.0, (4, 0): 1.0, (0, 4): 2.0}), g)
        assert vals.min() >= 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            evaluate_symbol(Polynomial({(4, 0): 1.0, (0, 4): 1.0}), Grid(1, 4.0, 16))

    def test_multi_indices(self):
        assert sorted(multi_indices(2, 2)) == [(0, 2), (1, 1), (2, 0)]


class TestTransform:
    def test_constant_field_is_dc_only(self):
        g = Grid(1, math.pi, 64)
        f = forward_transform(SpectralField(g, values=np.ones(64)))
        c = f.coeffs
        assert c[32] == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)
        rest = np.delete(c, 32)
        assert np.max(np.abs(rest)) <= 1e-12

    def test_gaussian_closed_form(self):
        g = Grid(1, 20.0, 1024)
        f = SpectralField.from_values(g, np.exp(-g.x ** 2))
        assert np.max(np.abs(f.coeffs - oracles.gaussian_hat(g.omega))) <= 1e-10

    def test_round_trip(self, rng):
        g = Grid(1, 3.0, 128)
        v = rng.standard_normal(128)
        back = inverse_transform(SpectralField(g, coeffs=forward_transform(SpectralField(g, values=v)).coeffs,
                                               real=True))
        assert np.max(np.abs(back.values - v)) <= 1e-12 * np.max(np.abs(v))

    def test_round_trip_2d_complex(self, rng):
        g = Grid(2, 3.0, 32)
        v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        f = SpectralField.from_values(g, v)
        back = inverse_transform(SpectralField(g, coeffs=f.coeffs))
        assert np.max(np.abs(back.values - v)) <= 1e-12 * np.max(np.abs(v))

    def test_mass_from_zero_frequency(self):
        g = Grid(1, 10.0, 256)
        v = np.exp(-(g.x - 1) ** 2)
        f = SpectralField.from_values(g, v)
        assert f.coeffs[128].real * math.sqrt(2 * math.pi) == pytest.approx(f.mass(), rel=1e-13)

    def test_hermitian_for_real(self, rng):
        g = Grid(2, 2.0, 16)
        f = SpectralField.from_values(g, rng.standard_normal(g.shape))
        assert hermitian_defect(g, f.coeffs) <= 1e-13

    def test_shape_checked(self):
        with pytest.raises(ValidationError):
            SpectralField(Grid(1, 1.0, 16), values=np.zeros(8))

    def test_needs_data(self):
        with pytest.raises(ValidationError):
            SpectralField(Grid(1, 1.0, 16))


class TestPropagate:
    def test_zero_time_is_identity(self, rng):
        g = Grid(1, 5.0, 64)
        f = SpectralField.from_values(g, rng.standard_normal(64))
        out = propagate(f, FractionalPower(2), 0.0)
        assert np.array_equal(out.coeffs, f.coeffs)

    def test_heat_gaussian(self):
        g = Grid(1, 40.0, 2048)
        f = SpectralField.from_values(g, np.exp(-g.x ** 2))
        out = propagate(f, FractionalPower(1), 1.0)
        assert np.max(np.abs(out.values.real - np.exp(-g.x ** 2 / 5) / math.sqrt(5))) <= 1e-8

    def test_semigroup(self, rng):
        g = Grid(1, 5.0, 64)
        f = SpectralField.from_values(g, rng.standard_normal(64))
        spec = FractionalPower(1.5)
        two = propagate(propagate(f, spec, 0.3), spec, 0.4)
        one = propagate(f, spec, 0.7)
        assert np.max(np.abs(two.coeffs - one.coeffs)) <= 1e-11 * np.max(np.abs(one.coeffs))

    def test_negative_time_rejected(self):
        with pytest.raises(ValidationError):
            propagator(FractionalPower(1), Grid(1, 1.0, 16), -1.0)

    def test_real_output_for_real_input(self, rng):
        g = Grid(2, 4.0, 32)
        f = SpectralField.from_values(g, rng.standard_normal(g.shape))
        out = propagate(f, Polynomial({(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0}), 0.1)
        assert out.real and np.all(out.values.imag == 0)

    @pytest.mark.parametrize("t", [0.01, 0.5, 3.0])
    def test_heat_preserves_positivity(self, t):
        g = Grid(1, 10.0, 256)
        u0 = np.where(np.abs(g.x) < 1, 1.0, 0.0)
        out = propagate(SpectralField.from_values(g, u0), FractionalPower(1), t)
        assert out.values.real.min() >= -1e-9 * u0.max()
