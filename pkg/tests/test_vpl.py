import numpy as np
import pytest

from kinetic_selfsim.densities import GaussianMixture
from kinetic_selfsim.errors import ParameterError
from kinetic_selfsim.grid import GridSpec, SeparableField
from kinetic_selfsim.models import RefutationOutcome, ThetaCase, VerdictStatus
from kinetic_selfsim.profile import ProfileDecomposition, from_mixtures, named_profile
from kinetic_selfsim.vpl import (
    RESIDUAL_TERMS,
    ForceField,
    compute_force,
    enclosed_mass,
    gauss_law,
    profile_density,
    rescaled_force_identity,
    sphere_rule,
    vpl_entropy_functional,
    vpl_profile_residual,
    vpl_refutation,
    vpl_residual_terms,
)


@pytest.fixture
def space_grid() -> GridSpec:
    return GridSpec(n=40, extent=5.0)


@pytest.fixture
def profile_grids():
    return GridSpec(n=16, extent=8.0), GridSpec(n=16, extent=12.0)


@pytest.fixture
def bump(profile_grids) -> ProfileDecomposition:
    w_grid, y_grid = profile_grids
    return from_mixtures(
        w_grid, y_grid, h_terms=[(GaussianMixture.maxwellian(width=1.5), GaussianMixture.maxwellian())]
    )


def separable_integral(field: SeparableField) -> float:
    a = field.y_factors.reshape(field.rank, -1).sum(axis=1)
    b = field.w_factors.reshape(field.rank, -1).sum(axis=1)
    return float(np.dot(a, b) * field.y_grid.cell_volume * field.w_grid.cell_volume)


class TestForce:
    def test_sphere_rule_weights(self):
        normals, weights = sphere_rule()
        assert weights.sum() == pytest.approx(4.0 * np.pi)
        np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0)

    def test_gauss_law(self, space_grid):
        rho = GaussianMixture.maxwellian(width=0.5).on_grid(space_grid)
        report = gauss_law(rho, radii=(1.0, 2.0, 4.0))
        assert report.status == VerdictStatus.PASS
        assert report.enclosed[-1] == pytest.approx(4.0 * np.pi, rel=1e-2)

    def test_enclosed_mass_of_gaussian(self, space_grid):
        mixture = GaussianMixture.maxwellian(width=0.5)
        rho = mixture.on_grid(space_grid)
        assert enclosed_mass(rho, 0.75) == pytest.approx(mixture.enclosed_mass(0.75), rel=1e-2)

    def test_matches_closed_form(self, space_grid):
        mixture = GaussianMixture.maxwellian(width=0.5)
        force = compute_force(mixture.on_grid(space_grid))
        node = (24, 21, 20)
        expected = mixture.coulomb_field(space_grid.nodes()[node])
        np.testing.assert_allclose(force.values[(slice(None),) + node], expected, atol=2e-2 * np.linalg.norm(expected))

    def test_concentrated_mass_acts_as_point_charge(self, space_grid):
        force = compute_force(GaussianMixture.maxwellian(width=0.3).on_grid(space_grid), c_force=2.0)
        point = np.array([2.0, 0.0, 0.0])
        np.testing.assert_allclose(force.at(point[None])[0], 2.0 * point / 8.0, rtol=1e-2, atol=1e-4)

    def test_translation_equivariance(self, space_grid):
        base = compute_force(GaussianMixture.maxwellian(width=0.5).on_grid(space_grid)).values
        # a shift by 0.5 moves the density by exactly two nodes along x
        moved = compute_force(GaussianMixture.maxwellian(width=0.5, center=(0.5, 0.0, 0.0)).on_grid(space_grid)).values
        np.testing.assert_allclose(moved[:, 6:-2], base[:, 4:-4], atol=1e-10)

    def test_shape_checked(self, grid16):
        with pytest.raises(ValueError):
            ForceField(grid=grid16, values=np.zeros((3, 8, 8, 8)))


class TestRescaledForce:
    def test_identity_holds_on_mapped_grid(self, grid16, maxwellian, two_gaussian):
        mismatch = rescaled_force_identity(two_gaussian.on_grid(grid16), maxwellian.on_grid(grid16), t=-0.5)
        assert mismatch <= 1e-10

    def test_nonnegative_time_rejected(self, grid16, maxwellian):
        rho = maxwellian.on_grid(grid16)
        with pytest.raises(ParameterError):
            rescaled_force_identity(rho, rho, t=0.0)


class TestResidual:
    def test_profile_density_integrates_to_mass(self, bump):
        rho = profile_density(bump)
        assert rho.integrate() == pytest.approx(separable_integral(bump.h), rel=1e-12)

    def test_terms_and_rank(self, bump):
        terms = vpl_residual_terms(bump, workers=1)
        assert tuple(terms) == RESIDUAL_TERMS
        assert [terms[name].rank for name in RESIDUAL_TERMS] == [1, 1, 1, 3, 3, 1]
        assert vpl_profile_residual(bump, workers=1).rank == 10

    def test_term_integrals(self, bump):
        terms = vpl_residual_terms(bump, workers=1)
        mass = separable_integral(bump.h)
        assert separable_integral(terms["identity"]) == pytest.approx(mass)
        # -3 theta and -3 (1 + theta) after summation by parts
        assert separable_integral(terms["w_dilation"]) == pytest.approx(mass, rel=1e-3)
        assert separable_integral(terms["y_transport"]) == pytest.approx(-2.0 * mass, rel=1e-3)
        for name in ("free_transport", "force", "collision"):
            assert abs(separable_integral(terms[name])) <= 1e-3 * mass

    def test_requires_integrable_profile(self, grid16):
        g = named_profile("gaussian", grid16, GridSpec(n=8, extent=4.0))
        with pytest.raises(ParameterError):
            vpl_residual_terms(g)


class TestEntropyPairing:
    RADII_W = [3.0, 3.9]
    RADII_Y = [4.5, 5.9]

    def test_mass_and_gap(self, bump):
        report = vpl_entropy_functional(bump, self.RADII_W, self.RADII_Y, workers=1)
        assert report.mass == pytest.approx(separable_integral(bump.h), rel=2e-2)
        assert report.gap == pytest.approx(report.mass + report.dissipation, rel=1e-12)
        assert set(report.terms) == set(RESIDUAL_TERMS)

    def test_zero_profile(self, profile_grids):
        w_grid, y_grid = profile_grids
        report = vpl_entropy_functional(ProfileDecomposition(w_grid=w_grid, y_grid=y_grid))
        assert report.mass == 0.0
        assert report.gap == 0.0
        assert report.limit.limit == 0.0


class TestRefutation:
    def test_zero_profile_is_trivial(self, profile_grids):
        w_grid, y_grid = profile_grids
        verdict = vpl_refutation(ProfileDecomposition(w_grid=w_grid, y_grid=y_grid))
        assert verdict.verdict == RefutationOutcome.TRIVIAL
        assert verdict.case == ThetaCase.MINUS_THIRD

    def test_positive_profile_is_refuted(self, bump):
        verdict = vpl_refutation(bump, radii_w=TestEntropyPairing.RADII_W, radii_y=TestEntropyPairing.RADII_Y, workers=1)
        assert verdict.verdict == RefutationOutcome.REFUTED
        assert verdict.details["mass"] > 0
        assert verdict.measured > 0

    def test_negative_profile_is_inconclusive(self, bump):
        flipped = SeparableField(
            y_grid=bump.y_grid, w_grid=bump.w_grid, y_factors=bump.h.y_factors, w_factors=-bump.h.w_factors
        )
        verdict = vpl_refutation(ProfileDecomposition(w_grid=bump.w_grid, y_grid=bump.y_grid, h=flipped))
        assert verdict.verdict == RefutationOutcome.INCONCLUSIVE
        assert "g >= 0" in verdict.details["failed"]

    def test_profile_with_q_rejected(self, profile_grids):
        w_grid, y_grid = profile_grids
        with pytest.raises(ParameterError):
            vpl_refutation(named_profile("mixed", w_grid, y_grid))
