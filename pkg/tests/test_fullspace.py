import math

import numpy as np
import pytest

import oracles
from polyheat import DivergenceError, HypothesisError, ResolutionWarning, ValidationError
from polyheat.fullspace import (
    CompactWindow,
    GridPolicy,
    InitialDatum,
    convergence_experiment,
    gaussian_heat_solution,
    geometric_schedule,
    kernel_check,
    normalization_M,
    rescale_factor,
    rescaled_profile,
    solve,
    time_to_positivity,
)
from polyheat.spectral_core import FractionalPower, Grid, Polynomial


class TestNormalization:
    @pytest.mark.parametrize("alpha,dim", [(1, 1), (2, 1), (0.5, 1), (0.75, 1), (1, 2), (2, 2), (1.5, 2)])
    def test_fractional_against_oracle(self, alpha, dim):
        assert normalization_M(FractionalPower(alpha), dim) == pytest.approx(oracles.m_alpha(alpha, dim),
                                                                            rel=1e-10)

    def test_closed_forms(self):
        assert normalization_M(FractionalPower(1), 1) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
        assert normalization_M(FractionalPower(2), 1) == pytest.approx(2 * math.gamma(1.25), rel=1e-12)

    def test_quartic_polynomial_matches_alpha_two(self):
        assert normalization_M(Polynomial({(4,): 1.0}), 1) == pytest.approx(
            normalization_M(FractionalPower(2), 1), rel=1e-12)

    @pytest.mark.parametrize("coeffs", [
        {(4, 0): 1.0, (0, 4): 1.0},
        {(4, 0): 1.0, (2, 2): 3.0, (0, 4): 2.0},
        {(2, 0): 1.0, (0, 2): 4.0},
    ])
    def test_two_dimensional_polynomials(self, coeffs):
        assert normalization_M(Polynomial(coeffs), 2) == pytest.approx(oracles.polynomial_integral_2d(coeffs),
                                                                      rel=1e-9)

    def test_non_coercive_diverges(self):
        with pytest.raises(DivergenceError):
            normalization_M(Polynomial({(2, 2): 1.0}), 2)


class TestRescaleFactor:
    def test_heat(self):
        assert rescale_factor(FractionalPower(1), 1, 4.0) == pytest.approx(
            2 * math.pi * 2 / math.sqrt(math.pi), rel=1e-12)

    def test_biharmonic(self):
        assert rescale_factor(FractionalPower(2), 1, 1.0) == pytest.approx(
            2 * math.pi / (2 * math.gamma(1.25)), rel=1e-12)

    def test_scaling(self):
        s = FractionalPower(2)
        assert rescale_factor(s, 1, 16.0) / rescale_factor(s, 1, 1.0) == pytest.approx(2.0, rel=1e-14)

    def test_positive_time_required(self):
        with pytest.raises(ValidationError):
            rescale_factor(FractionalPower(2), 1, 0.0)


class TestInitialDatum:
    def test_gaussian_mass(self):
        u0 = InitialDatum.gaussian(0.3, 0.7, 2.0)
        g = Grid(1, 20.0, 512)
        assert u0.riemann_mass(g) == pytest.approx(u0.closed_form_mass(), rel=1e-10)

    def test_bump_mass_exact(self):
        u0 = InitialDatum.bump_indicator(0.1, 0.33, 2.0)
        g = Grid(1, 8.0, 256)
        assert u0.riemann_mass(g) == pytest.approx(2 * 0.66, rel=1e-12)

    def test_signed_mix_mass_zero(self):
        u0 = InitialDatum.signed_mix([(0.5, 1.0, 1.0), (-0.5, 1.0, -1.0)])
        assert u0.closed_form_mass() == 0.0

    def test_two_dimensional_gaussian(self):
        u0 = InitialDatum.unit_mass_gaussian(1.0, dim=2)
        g = Grid(2, 10.0, 128)
        assert u0.riemann_mass(g) == pytest.approx(1.0, rel=1e-10)

    def test_csv_round_trip(self, tmp_path):
        x = np.linspace(-3, 3, 61)
        path = tmp_path / "u0.csv"
        path.write_text("x,value\n" + "\n".join(f"{float(a)!r},{math.exp(-a * a)!r}" for a in x) + "\n")
        u0 = InitialDatum.from_csv(path)
        g = Grid(1, 8.0, 256)
        vals = u0.sample(g)
        inside = np.abs(g.x) <= 3
        assert np.max(np.abs(vals[inside] - np.exp(-g.x[inside] ** 2))) < 5e-3
        assert u0.closed_form_mass() is None

    def test_csv_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,4\n")
        with pytest.raises(ValidationError):
            InitialDatum.from_csv(path)

    def test_csv_incomplete_grid(self, tmp_path):
        path = tmp_path / "bad2.csv"
        path.write_text("x,y,value\n0,0,1\n0,1,1\n1,0,1\n")
        with pytest.raises(ValidationError):
            InitialDatum.from_csv(path)

    def test_invalid_width(self):
        with pytest.raises(ValidationError):
            InitialDatum.gaussian(0.0, -1.0)


class TestWindow:
    def test_index(self):
        g = Grid(1, 4.0, 64)
        K = CompactWindow.interval(-1, 1)
        (x,) = K.points(g)
        assert x.min() >= -1 and x.max() <= 1 and len(x) == 17

    def test_stride(self):
        g = Grid(1, 4.0, 64)
        (x,) = CompactWindow.interval(-1, 1, stride=2).points(g)
        assert len(x) == 9

    def test_outside_box(self):
        with pytest.raises(ValidationError):
            CompactWindow.interval(-5, 1).index(Grid(1, 4.0, 64))

    def test_empty_interval(self):
        with pytest.raises(ValidationError):
            CompactWindow.interval(1, 1)


class TestPolicy:
    def test_grid_grows_with_time(self):
        pol = GridPolicy(32.0, 0.125)
        g1 = pol.grid_for(FractionalPower(2), 1.0)
        g2 = pol.grid_for(FractionalPower(2), 4096.0)
        assert g2.extent >= 8 * 32.0 and g2.spacing == g1.spacing == 0.125


class TestProfile:
    def test_heat_deviation_at_t100(self):
        u0 = InitialDatum.unit_mass_gaussian()
        res = rescaled_profile(u0, FractionalPower(1), 100.0, CompactWindow.interval(-1, 1), Grid(1, 200.0, 4096))
        exact = rescale_factor(FractionalPower(1), 1, 100.0) * oracles.heat_gaussian(res.points[0], 100.0) / math.sqrt(math.pi)
        assert res.sup_deviation <= 2e-2
        assert np.max(np.abs(res.profile - exact)) <= 1e-10

    def test_mass_zero_profile_decays(self):
        u0 = InitialDatum.signed_mix([(0.5, 1.0, 1.0), (-0.5, 1.0, -1.0)])
        spec = FractionalPower(2)
        res = convergence_experiment(u0, spec, CompactWindow.interval(-1, 1), geometric_schedule(1.0, 4.0, 8),
                                     GridPolicy(32.0))
        sups = [float(np.max(np.abs(r.profile))) for r in res]
        assert all(b < a for a, b in zip(sups, sups[1:]))
        assert sups[-1] <= 1e-2

    def test_bump_deviation_decreases(self):
        u0 = InitialDatum.bump_indicator(0.0, 0.5, 1.0)
        res = convergence_experiment(u0, FractionalPower(2), CompactWindow.interval(-2, 2), [10.0, 100.0, 1000.0],
                                     GridPolicy(32.0))
        devs = [r.sup_deviation for r in res]
        assert devs[0] > devs[1] > devs[2]

    def test_under_resolution_warns(self):
        u0 = InitialDatum.unit_mass_gaussian()
        with pytest.warns(ResolutionWarning):
            rescaled_profile(u0, FractionalPower(2), 1e6, CompactWindow.interval(-1, 1), Grid(1, 16.0, 128))

    def test_polynomial_symbol_limit(self):
        u0 = InitialDatum.unit_mass_gaussian(dim=2)
        spec = Polynomial({(4, 0): 1.0, (2, 2): 1.0, (0, 4): 1.0})
        g = GridPolicy(16.0, 0.25, 2).grid_for(spec, 256.0)
        res = rescaled_profile(u0, spec, 256.0, CompactWindow(((-1, 1), (-1, 1))), g)
        assert res.sup_deviation < 0.1

    @pytest.mark.parametrize("t", [1.0, 64.0, 1024.0])
    def test_box_doubling_stable(self, t):
        u0 = InitialDatum.unit_mass_gaussian()
        spec = FractionalPower(2)
        K = CompactWindow.interval(-2, 2)
        g = GridPolicy(32.0).grid_for(spec, t)
        big = Grid(1, 2 * g.extent, 2 * g.points)
        a = rescaled_profile(u0, spec, t, K, g).profile
        b = rescaled_profile(u0, spec, t, K, big).profile
        assert np.max(np.abs(a - b)) <= 1e-6

    @pytest.mark.parametrize("t", [0.5, 2.0, 10.0])
    def test_gaussian_heat_closed_form(self, t):
        u0 = InitialDatum.gaussian(0.5, 1.0, 2.0)
        g = Grid(1, 40.0, 1024)
        u = solve(u0, FractionalPower(1), t, g).values.real
        assert np.max(np.abs(u - gaussian_heat_solution(u0, t, [g.x]))) <= 1e-10


class TestPositivity:
    def test_heat_immediately_positive(self):
        u0 = InitialDatum.unit_mass_gaussian()
        ts = geometric_schedule(0.01, 2.0, 6)
        res = time_to_positivity(u0, FractionalPower(1), CompactWindow.interval(2, 3), ts, GridPolicy(32.0))
        assert res.T_estimate == ts[0]

    def test_biharmonic_dip_then_positive(self):
        u0 = InitialDatum.bump_indicator(0.0, 0.1, 5.0)
        res = time_to_positivity(u0, FractionalPower(2), CompactWindow.interval(4, 5),
                                 geometric_schedule(0.01, 2.0, 20), GridPolicy(32.0))
        assert min(res.min_values) < 0
        assert res.T_estimate is not None and res.T_estimate > res.t_schedule[0]

    def test_nested_windows_monotone(self):
        u0 = InitialDatum.bump_indicator(0.0, 0.1, 5.0)
        ts = geometric_schedule(0.01, 2.0, 20)
        small = time_to_positivity(u0, FractionalPower(2), CompactWindow.interval(4, 4.5), ts, GridPolicy(32.0))
        large = time_to_positivity(u0, FractionalPower(2), CompactWindow.interval(3, 5), ts, GridPolicy(32.0))
        assert large.T_estimate >= small.T_estimate

    def test_mass_zero_rejected(self):
        u0 = InitialDatum.signed_mix([(0.5, 1.0, 1.0), (-0.5, 1.0, -1.0)])
        with pytest.raises(HypothesisError):
            time_to_positivity(u0, FractionalPower(2), CompactWindow.interval(-1, 1), [1.0, 2.0], GridPolicy())

    @pytest.mark.parametrize("ts", [[1.0, 1.0], [2.0, 1.0], [], [-1.0, 1.0]])
    def test_bad_schedules(self, ts):
        with pytest.raises(ValidationError):
            time_to_positivity(InitialDatum.unit_mass_gaussian(), FractionalPower(2), CompactWindow.interval(-1, 1),
                               ts, GridPolicy())


class TestKernel:
    @pytest.mark.parametrize("spec", [FractionalPower(2), FractionalPower(1), FractionalPower(0.5),
                                      Polynomial({(4,): 2.0})])
    def test_kernel_limit(self, spec):
        t = 1e4
        g = GridPolicy(32.0).grid_for(spec, t)
        assert kernel_check(spec, g, t) == pytest.approx(1.0, abs=1e-2)

    def test_kernel_limit_two_dimensional(self):
        spec = Polynomial({(4, 0): 1.0, (0, 4): 1.0})
        g = GridPolicy(16.0, 0.25, 2).grid_for(spec, 100.0)
        assert kernel_check(spec, g, 100.0) == pytest.approx(1.0, abs=1e-2)
