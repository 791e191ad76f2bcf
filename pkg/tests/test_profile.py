import numpy as np
import pytest

from kinetic_selfsim.errors import ParameterError
from kinetic_selfsim.grid import GridSpec, SeparableField
from kinetic_selfsim.models import (
    LandauParams,
    MomentTestKind,
    MomentWeight,
    PlateauShape,
    RefutationOutcome,
    SelfSimParams,
    ThetaCase,
    VerdictStatus,
)
from kinetic_selfsim.profile import (
    LandauMoments,
    ProfileDecomposition,
    check_profile_admissibility,
    cutoff_test,
    functional_table,
    landau_profile_residual,
    moment_coefficient,
    moment_functional,
    named_profile,
    plateau,
    refutation_verdict,
)


@pytest.fixture
def w_grid() -> GridSpec:
    return GridSpec(n=32, extent=8.0)


@pytest.fixture
def small_y_grid() -> GridSpec:
    return GridSpec(n=8, extent=4.0)


class TestDecomposition:
    def test_named_profiles(self, grid16):
        y_grid = GridSpec(n=8, extent=4.0)
        assert named_profile("zero", grid16, y_grid).is_zero()
        gaussian = named_profile("gaussian", grid16, y_grid)
        assert gaussian.has_q and not gaussian.has_h
        h_only = named_profile("gaussian-h", grid16, y_grid)
        assert h_only.has_h and not h_only.has_q
        assert h_only.h.rank == 1
        with pytest.raises(ParameterError):
            named_profile("cauchy", grid16, y_grid)

    def test_q_shape_checked(self, grid16):
        with pytest.raises(ValueError):
            ProfileDecomposition(w_grid=grid16, y_grid=grid16, q=np.zeros((8, 8, 8)))


class TestPlateau:
    @pytest.mark.parametrize("shape", list(PlateauShape))
    def test_unit_integral(self, shape):
        grid = GridSpec(n=48, extent=2.0)
        values = plateau(grid.nodes(), 1.5, shape)
        assert float(values.sum() * grid.cell_volume) == pytest.approx(1.0, rel=1e-3)
        assert np.all(values[grid.radius() >= 1.5] == 0.0)

    def test_coefficients(self):
        assert moment_coefficient(0.2, MomentTestKind.PLATEAU, MomentWeight.ONE) == pytest.approx(0.4)
        assert moment_coefficient(0.2, MomentTestKind.PLATEAU, MomentWeight.ENERGY) == pytest.approx(0.0)
        assert moment_coefficient(0.2, MomentTestKind.CUTOFF_Y, MomentWeight.ONE) == pytest.approx(-3.2)
        assert moment_coefficient(0.2, MomentTestKind.CUTOFF_Y, MomentWeight.ENERGY) == pytest.approx(-3.6)


class TestResidual:
    def test_homogeneous_mass_identity(self, grid32, small_y_grid):
        g = named_profile("gaussian", grid32, small_y_grid)
        residual = landau_profile_residual(g, SelfSimParams(gamma=-2.5, theta=0.2), homogeneous=True, workers=1)
        assert residual.integrate() == pytest.approx(0.4, rel=1e-3)

    def test_homogeneous_rejects_h(self, grid16, small_y_grid):
        g = named_profile("gaussian-h", grid16, small_y_grid)
        with pytest.raises(ParameterError):
            landau_profile_residual(g, SelfSimParams(gamma=-2.5, theta=0.2), homogeneous=True, workers=1)

    def test_separable_rows(self, grid16, small_y_grid):
        g = named_profile("gaussian-h", grid16, small_y_grid)
        residual = landau_profile_residual(g, SelfSimParams(gamma=-2.5, theta=0.2), workers=1)
        assert isinstance(residual, SeparableField)
        # one identity/dilation row, one y-dilation row, three transport rows, one collision row
        assert residual.rank == 6

    def test_zero_profile_has_zero_residual(self, grid16, small_y_grid):
        g = named_profile("zero", grid16, small_y_grid)
        residual = landau_profile_residual(g, SelfSimParams(gamma=-2.5, theta=0.2), workers=1)
        assert residual.is_zero()


class TestMomentFunctionals:
    def test_plateau_test_matches_mass(self, w_grid, small_y_grid):
        g = named_profile("gaussian", w_grid, small_y_grid)
        report = moment_functional(g, SelfSimParams(gamma=-2.5, theta=0.2), tolerance=0.05)
        assert report.predicted == pytest.approx(0.4, rel=1e-6)
        assert report.status == VerdictStatus.PASS

    def test_y_cutoff_test_matches_h_mass(self, w_grid):
        g = named_profile("gaussian-h", w_grid, GridSpec(n=32, extent=12.0))
        report = moment_functional(
            g, SelfSimParams(gamma=-2.5, theta=0.2), MomentTestKind.CUTOFF_Y, tolerance=0.05
        )
        assert report.predicted < 0
        assert report.status == VerdictStatus.PASS

    @pytest.mark.parametrize("weight", [MomentWeight.ONE, MomentWeight.ENERGY])
    def test_landau_columns_come_from_cutoff_limits(self, grid16, small_y_grid, weight, mocker):
        g = named_profile("mixed", grid16, small_y_grid)
        collision = LandauMoments(LandauParams(gamma=-2.5), workers=1)
        spy = mocker.spy(collision, "cutoff_moments")
        radii = [1.0, 2.0, 3.0]
        y_tests = [(np.ones(small_y_grid.shape), 1.0)]
        w_tests = [cutoff_test(r, weight) for r in radii]
        routed = functional_table(g, 0.2, collision, y_tests, w_tests, radii=radii, weight=weight)
        assert spy.call_count > 0
        direct = functional_table(g, 0.2, collision, y_tests, w_tests)
        np.testing.assert_allclose(routed, direct, rtol=1e-10, atol=1e-12)

    def test_y_cutoff_notes_nonintegrable_q(self, grid16, small_y_grid):
        g = named_profile("mixed", grid16, small_y_grid)
        report = moment_functional(g, SelfSimParams(gamma=-2.5, theta=0.2), MomentTestKind.CUTOFF_Y)
        assert "q is not integrable in y; the y-cutoff test diverges" in report.notes


class TestAdmissibility:
    def test_gaussian_is_admissible(self, w_grid, small_y_grid):
        report = check_profile_admissibility(named_profile("gaussian", w_grid, small_y_grid), SelfSimParams(gamma=-2.5, theta=0.2))
        assert report.status == VerdictStatus.PASS
        assert [n.name for n in report.norms] == ["|q|_1"]

    def test_third_adds_weighted_norms(self, grid16, small_y_grid):
        g = named_profile("mixed", grid16, small_y_grid)
        report = check_profile_admissibility(g, SelfSimParams(gamma=-3.0, theta=1.0 / 3.0))
        names = [n.name for n in report.norms]
        assert "|(1+|w|^2)q|_1" in names
        assert "|(1+|y||w|^2+|w|^3)h|_1" in names

    def test_negative_profile_fails(self, w_grid, small_y_grid):
        g = named_profile("gaussian", w_grid, small_y_grid)
        negative = ProfileDecomposition(w_grid=w_grid, y_grid=small_y_grid, q=-g.q)
        report = check_profile_admissibility(negative, SelfSimParams(gamma=-2.5, theta=0.2))
        assert report.status == VerdictStatus.FAIL
        assert "g >= 0" in report.failed


class TestRefutation:
    def test_zero_profile_is_trivial(self, grid16, small_y_grid):
        verdict = refutation_verdict(named_profile("zero", grid16, small_y_grid), SelfSimParams(gamma=-2.5, theta=0.2))
        assert verdict.verdict == RefutationOutcome.TRIVIAL

    def test_gaussian_is_refuted(self, w_grid, small_y_grid):
        verdict = refutation_verdict(named_profile("gaussian", w_grid, small_y_grid), SelfSimParams(gamma=-2.5, theta=0.2))
        assert verdict.case == ThetaCase.GENERIC
        assert verdict.verdict == RefutationOutcome.REFUTED
        assert verdict.test == "plateau/1"
        assert verdict.measured == pytest.approx(0.4, rel=0.05)

    def test_third_uses_energy_moment(self, small_y_grid):
        wide = GridSpec(n=32, extent=16.0)
        verdict = refutation_verdict(
            named_profile("gaussian", wide, small_y_grid), SelfSimParams(gamma=-3.0, theta=1.0 / 3.0)
        )
        assert verdict.case == ThetaCase.PLUS_THIRD
        assert verdict.verdict == RefutationOutcome.REFUTED
        assert verdict.details["message"].endswith("(via |w|^2 moment)")

    def test_negative_profile_is_inconclusive(self, w_grid, small_y_grid):
        g = named_profile("gaussian", w_grid, small_y_grid)
        negative = ProfileDecomposition(w_grid=w_grid, y_grid=small_y_grid, q=-g.q)
        verdict = refutation_verdict(negative, SelfSimParams(gamma=-2.5, theta=0.2))
        assert verdict.verdict == RefutationOutcome.INCONCLUSIVE
        assert verdict.test == "admissibility"
