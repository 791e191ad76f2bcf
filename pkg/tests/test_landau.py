import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinetic_selfsim.densities import random_mixture
from kinetic_selfsim.errors import DensityError, GridError, ParameterError
from kinetic_selfsim.grid import CutoffFamily, GridSpec, ScalarField
from kinetic_selfsim.landau import (
    LandauOperator,
    coeff_a,
    collision_invariant_moments,
    cutoff_limit,
    cutoff_limit_energy,
    cutoff_limit_entropy,
    cutoff_limit_mass,
    entropy_dissipation,
    q_bilinear,
    q_landau,
    q_landau_divergence,
    q_landau_trace,
)
from kinetic_selfsim.models import LandauParams, VerdictStatus


GAMMAS = (-3.0, -2.5, -2.0)


class TestCoefficients:
    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_a_against_closed_form(self, grid32, two_gaussian, gamma):
        params = LandauParams(gamma=gamma)
        a_bar = coeff_a(two_gaussian.on_grid(grid32), params, workers=1).values
        idx = grid32.origin_index
        for node in [(idx, idx, idx), (idx + 3, idx - 2, idx + 1)]:
            exact = two_gaussian.landau_coefficient(grid32.nodes()[node], gamma + 2.0)
            numeric = a_bar[(slice(None), slice(None)) + node]
            assert np.max(np.abs(numeric - exact)) <= 2e-2 * np.max(np.abs(exact))

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_a_is_positive_semidefinite(self, seed):
        grid = GridSpec(n=16, extent=4.0)
        rng = np.random.default_rng(seed)
        f = random_mixture(rng, components=3, width_range=(0.5, 1.0)).on_grid(grid)
        eig = LandauOperator(LandauParams(gamma=-3.0), workers=1).coeff_a(f).eigenvalues()
        assert eig.min() >= -1e-10 * eig.max()

    def test_coulomb_c_is_local(self, grid16, maxwellian):
        f = maxwellian.on_grid(grid16)
        c_bar = LandauOperator(LandauParams(gamma=-3.0, a_const=0.5)).coeff_c(f)
        np.testing.assert_allclose(c_bar.values, 4.0 * np.pi * f.values)

    def test_derived_c_constant(self):
        assert LandauParams(gamma=-3.0).c_value == pytest.approx(8.0 * np.pi)
        assert LandauParams(gamma=-2.5, a_const=2.0).c_value == pytest.approx(2.0)
        assert LandauParams(gamma=-2.0, c_const=3.0).c_value == 3.0

    def test_gamma_window(self):
        with pytest.raises(ValueError):
            LandauParams(gamma=-1.5)
        with pytest.raises(ValueError):
            LandauParams(gamma=-3.5)

    def test_drift_matches_kernel_gradient(self, grid32, maxwellian):
        op = LandauOperator(LandauParams(gamma=-2.5), workers=1)
        f = maxwellian.on_grid(grid32)
        b_fd = op.coeff_b(f)
        grad = op.coeff_a_gradient(f)
        b_kernel = np.einsum("jij...->i...", grad)
        interior = (slice(None),) + (slice(8, -8),) * 3
        assert np.max(np.abs(b_fd[interior] - b_kernel[interior])) <= 5e-2 * np.max(np.abs(b_kernel))


class TestCollisionOperator:
    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_conservation(self, grid32, two_gaussian, gamma):
        params = LandauParams(gamma=gamma)
        f = two_gaussian.on_grid(grid32)
        q = q_landau(f, params, workers=1)
        moments = collision_invariant_moments(f, params, workers=1)
        scale = float(np.sum(np.abs(q.values)) * grid32.cell_volume)
        assert abs(moments["mass"]) <= 1e-12 * scale
        energy_scale = float(np.sum(np.abs(q.values) * grid32.radius() ** 2) * grid32.cell_volume)
        for name in ("momentum_x", "momentum_y", "momentum_z"):
            assert abs(moments[name]) <= 1e-2 * energy_scale
        assert abs(moments["energy"]) <= 1e-2 * energy_scale

    def test_mass_sum_vanishes_for_any_field(self, grid16, rng):
        f = ScalarField(grid=grid16, values=rng.random(grid16.shape))
        q = q_landau(f, LandauParams(gamma=-2.5), workers=1)
        assert abs(q.values.sum()) <= 1e-12 * np.abs(q.values).sum()

    def test_maxwellian_is_equilibrium(self, grid32, maxwellian):
        f = maxwellian.on_grid(grid32)
        for gamma in GAMMAS:
            q = q_landau(f, LandauParams(gamma=gamma), workers=1)
            assert q.sup() <= 1e-2 * f.sup()

    def test_trace_and_divergence_forms_agree(self, grid32, two_gaussian):
        f = two_gaussian.on_grid(grid32)
        params = LandauParams(gamma=-2.5)
        q_div = q_landau(f, params, "divergence", workers=1)
        q_trace = q_landau(f, params, "trace", workers=1)
        assert np.max(np.abs(q_div.values - q_trace.values)) <= 5e-2 * q_div.sup()

    def test_bilinear_is_linear_in_second_slot(self, grid16, maxwellian, two_gaussian):
        f1 = maxwellian.on_grid(grid16)
        f2 = two_gaussian.on_grid(grid16)
        params = LandauParams(gamma=-3.0)
        lhs = q_bilinear(f1, f2.like(2.0 * f2.values + f1.values), params, workers=1).values
        rhs = 2.0 * q_bilinear(f1, f2, params, workers=1).values + q_bilinear(f1, f1, params, workers=1).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())

    def test_mismatched_grids(self, grid16, maxwellian):
        other = GridSpec(n=16, extent=5.0)
        with pytest.raises(GridError):
            q_bilinear(maxwellian.on_grid(grid16), maxwellian.on_grid(other), LandauParams())

    def test_unknown_form(self, grid16, maxwellian):
        with pytest.raises(ParameterError):
            q_landau(maxwellian.on_grid(grid16), LandauParams(), form="weak")


class TestEntropy:
    def test_maxwellian_dissipation_vanishes(self, grid32, maxwellian):
        d = entropy_dissipation(maxwellian.on_grid(grid32), LandauParams(gamma=-3.0), workers=1)
        assert abs(d) <= 1e-6

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_dissipation_nonnegative(self, seed):
        grid = GridSpec(n=16, extent=5.0)
        mix = random_mixture(np.random.default_rng(seed), components=2, width_range=(0.6, 1.2))
        f = mix.on_grid(grid)
        d = entropy_dissipation(f.like(f.values + 1e-6), LandauParams(gamma=-2.5), workers=1)
        assert d >= -1e-8

    def test_two_forms_agree(self, grid32, two_gaussian):
        op = LandauOperator(LandauParams(gamma=-2.5), workers=1)
        f = two_gaussian.on_grid(grid32)
        d = op.entropy_dissipation(f)
        assert d > 0
        assert op.entropy_dissipation_alt(f) == pytest.approx(d, rel=0.1)

    def test_negative_density_rejected(self, grid16, maxwellian):
        f = maxwellian.on_grid(grid16)
        with pytest.raises(DensityError):
            entropy_dissipation(f.like(f.values - 1e-3), LandauParams())


class TestCutoffLimits:
    RADII = [2.5, 2.9, 3.3, 3.7]

    @pytest.fixture
    def wide_grid(self) -> GridSpec:
        return GridSpec(n=40, extent=7.5)

    @pytest.mark.parametrize("weight, tolerance", [("one", 2e-2), ("energy", 5e-2)])
    def test_conserved_weights_vanish(self, wide_grid, two_gaussian, weight, tolerance):
        f = two_gaussian.on_grid(wide_grid)
        report = cutoff_limit(f, LandauParams(gamma=-2.5), self.RADII, weight, workers=1)
        assert report.limit is not None
        assert report.predicted == 0.0
        assert report.relative_error <= tolerance
        assert report.status == VerdictStatus.PASS

    def test_log_weight_gives_minus_dissipation(self, wide_grid, two_gaussian):
        f = two_gaussian.on_grid(wide_grid)
        report = cutoff_limit(f, LandauParams(gamma=-2.5), self.RADII, "log", tolerance=0.05, workers=1)
        assert report.predicted < 0
        assert report.status == VerdictStatus.PASS

    def test_non_conservative_field_fails(self, grid16, maxwellian, mocker):
        mocker.patch.object(LandauOperator, "collide", lambda self, f, form="divergence": f)
        f = maxwellian.on_grid(grid16)
        report = cutoff_limit_mass(f, LandauParams(gamma=-2.5), [8.0, 9.0, 10.0], workers=1)
        assert report.limit == pytest.approx(f.integrate())
        assert report.relative_error == pytest.approx(1.0)
        assert report.status == VerdictStatus.FAIL

    def test_tolerance_override(self, grid16, maxwellian, mocker):
        mocker.patch.object(LandauOperator, "collide", lambda self, f, form="divergence": f)
        f = maxwellian.on_grid(grid16)
        report = cutoff_limit_mass(f, LandauParams(gamma=-2.5), [8.0, 9.0, 10.0], workers=1, tolerance=2.0)
        assert report.status == VerdictStatus.PASS

    def test_bilinear_field_is_symmetrised(self, grid16, maxwellian, two_gaussian):
        params = LandauParams(gamma=-2.5)
        op = LandauOperator(params, workers=1)
        f, g = maxwellian.on_grid(grid16), two_gaussian.on_grid(grid16)
        radii = [2.0, 2.5, 3.0]
        report = cutoff_limit_energy(f, params, radii, second=g, op=op)
        q = 0.5 * (op.divergence_form(f, g).values + op.divergence_form(g, f).values)
        energy = np.sum(grid16.nodes() ** 2, axis=-1)
        expected = [
            float(np.sum(CutoffFamily(radius=r).values(grid16) * energy * q) * grid16.cell_volume) for r in radii
        ]
        np.testing.assert_allclose(report.values, expected, rtol=1e-12, atol=1e-15)
        assert cutoff_limit_mass(f, params, radii, second=f, op=op).values == cutoff_limit_mass(f, params, radii, op=op).values

    def test_log_weight_needs_one_density(self, grid16, maxwellian, two_gaussian):
        with pytest.raises(ParameterError):
            cutoff_limit(maxwellian.on_grid(grid16), LandauParams(), [1.0, 2.0], "log", second=two_gaussian.on_grid(grid16))

    def test_unknown_weight(self, grid16, maxwellian):
        with pytest.raises(ParameterError):
            cutoff_limit(maxwellian.on_grid(grid16), LandauParams(), [1.0, 2.0], "cubic")

    def test_named_limits(self, grid16, two_gaussian):
        f = two_gaussian.on_grid(grid16)
        params = LandauParams(gamma=-2.5)
        radii = [2.0, 2.5, 3.0]
        assert cutoff_limit_mass(f, params, radii, workers=1).values == cutoff_limit(f, params, radii, "one", workers=1).values
        assert cutoff_limit_energy(f, params, radii, workers=1).values == cutoff_limit(f, params, radii, "energy", workers=1).values
        entropy = cutoff_limit_entropy(f, params, radii, floor=1e-20, workers=1)
        assert entropy.values == cutoff_limit(f, params, radii, "log", workers=1, floor=1e-20).values


def test_named_forms_match_collide(grid16, two_gaussian):
    f = two_gaussian.on_grid(grid16)
    params = LandauParams(gamma=-2.5)
    np.testing.assert_array_equal(q_landau_trace(f, params, workers=1).values, q_landau(f, params, "trace", workers=1).values)
    np.testing.assert_array_equal(q_landau_divergence(f, params, workers=1).values, q_landau(f, params, workers=1).values)
