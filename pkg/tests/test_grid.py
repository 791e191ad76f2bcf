import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinetic_selfsim.errors import ParameterError, UnsupportedWeightError
from kinetic_selfsim.grid import (
    WEIGHT_ENERGY,
    CutoffFamily,
    GridSpec,
    ScalarField,
    SeparableField,
    cutoff_profile,
    dyadic_annuli,
    gradient,
    integrate,
    interpolate,
    load_snapshot,
    make_cutoff,
    measure_cutoff_constants,
    save_snapshot,
    weight_momentum,
)


class TestGridSpec:
    def test_origin_is_a_node(self):
        grid = GridSpec(n=16, extent=4.0)
        assert grid.spacing == pytest.approx(0.5)
        assert grid.axis()[grid.origin_index] == 0.0
        assert grid.nodes().shape == (16, 16, 16, 3)
        assert grid.points().shape == (16 ** 3, 3)

    def test_points_follow_c_order(self):
        grid = GridSpec(n=8, extent=2.0)
        pts = grid.points()
        np.testing.assert_allclose(pts[1], [-2.0, -2.0, -1.5])
        np.testing.assert_allclose(pts[8], [-2.0, -1.5, -2.0])

    def test_odd_or_tiny_n_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(n=15, extent=4.0)
        with pytest.raises(ValueError):
            GridSpec(n=6, extent=4.0)
        with pytest.raises(ValueError):
            GridSpec(n=16, extent=0.0)

    def test_scaled_grid_maps_nodes(self):
        grid = GridSpec(n=16, extent=4.0)
        np.testing.assert_allclose(grid.scaled(0.5).nodes(), 0.5 * grid.nodes())


class TestQuadrature:
    def test_maxwellian_moments(self, grid32, maxwellian):
        f = maxwellian.on_grid(grid32)
        assert integrate(f) == pytest.approx(1.0, abs=1e-8)
        assert integrate(f, WEIGHT_ENERGY) == pytest.approx(3.0, abs=1e-6)
        assert integrate(f, weight_momentum(0)) == pytest.approx(0.0, abs=1e-7)

    def test_weight_degree_limit(self, grid16, maxwellian):
        f = maxwellian.on_grid(grid16)
        with pytest.raises(UnsupportedWeightError):
            integrate(f, {(5, 0, 0): 1.0})

    def test_shifted_mixture_mass_and_momentum(self, grid32, two_gaussian):
        f = two_gaussian.on_grid(grid32)
        assert f.integrate() == pytest.approx(two_gaussian.mass(), rel=1e-7)
        momentum = [f.integrate(weight_momentum(k)) for k in range(3)]
        np.testing.assert_allclose(momentum, two_gaussian.momentum(), atol=1e-7)


class TestDifferences:
    def test_gradient_matches_closed_form(self, grid32, maxwellian):
        f = maxwellian.on_grid(grid32)
        grad = gradient(f.values, grid32.spacing)
        exact = np.moveaxis(maxwellian.gradient(grid32.nodes()), -1, 0)
        assert np.max(np.abs(grad - exact)) <= 2e-2 * np.max(np.abs(exact))

    def test_fourth_order_convergence(self, maxwellian):
        errors = []
        for n in (24, 48):
            grid = GridSpec(n=n, extent=6.0)
            grad = gradient(maxwellian.on_grid(grid).values, grid.spacing)
            exact = np.moveaxis(maxwellian.gradient(grid.nodes()), -1, 0)
            errors.append(np.max(np.abs(grad - exact)))
        assert np.log2(errors[0] / errors[1]) >= 3.0


class TestCutoffs:
    def test_profile_plateau_and_support(self):
        r = np.linspace(0.0, 3.0, 301)
        chi, d1, _ = cutoff_profile(r)
        assert np.all(chi[r <= 1.0] == 1.0)
        assert np.all(chi[r >= 2.0] == 0.0)
        assert np.all(np.diff(chi) <= 0.0)
        assert np.all(d1 <= 0.0)

    def test_cutoff_gradient_scales_with_radius(self, grid32):
        g2 = CutoffFamily(radius=2.0).gradient(grid32)
        g1 = CutoffFamily(radius=1.0).gradient(GridSpec(n=32, extent=3.0))
        np.testing.assert_allclose(2.0 * g2, g1, atol=1e-12)

    def test_measured_constants_are_finite(self, grid32):
        c1, c2 = measure_cutoff_constants(grid32, 2.0)
        assert 0.0 < c1 < 10.0
        assert 0.0 < c2 < 50.0

    def test_nonpositive_radius_rejected(self, grid16):
        with pytest.raises(ParameterError):
            make_cutoff(grid16, 0.0)

    def test_dyadic_shells_partition(self, grid16, caplog):
        shells = dyadic_annuli(0.01, 0, 12, grid16)
        assert shells[0].empty
        total = sum(s.count for s in shells)
        r = grid16.radius()
        assert total == int(np.sum((r >= 0.01) & (r < 0.01 * 2 ** 13)))
        assert "contains no grid nodes" in caplog.text

    def test_empty_shell_range_rejected(self, grid16):
        with pytest.raises(ParameterError):
            dyadic_annuli(1.0, 3, 2, grid16)


class TestInterpolation:
    def test_reproduces_nodes(self, grid16, maxwellian):
        f = maxwellian.on_grid(grid16)
        vals, outside = interpolate(grid16, f.values, grid16.nodes()[2:-2, 2:-2, 2:-2])
        np.testing.assert_allclose(vals, f.values[2:-2, 2:-2, 2:-2], atol=1e-12)
        assert not outside.any()

    def test_modes_outside_domain(self, grid16):
        values = np.ones(grid16.shape)
        point = np.array([[10.0, 0.0, 0.0]])
        const, outside = interpolate(grid16, values, point)
        nearest, _ = interpolate(grid16, values, point, mode="nearest")
        assert outside[0] and const[0] == 0.0
        assert nearest[0] == pytest.approx(1.0)
        with pytest.raises(ParameterError):
            interpolate(grid16, values, point, mode="wrap")

    @settings(max_examples=20, deadline=None)
    @given(st.tuples(*[st.floats(-1.5, 1.5)] * 3))
    def test_smooth_field_accuracy(self, point):
        grid = GridSpec(n=32, extent=4.0)
        f = ScalarField(grid=grid, values=np.exp(-0.5 * grid.radius() ** 2))
        vals, _ = interpolate(grid, f.values, np.array([point]))
        assert vals[0] == pytest.approx(np.exp(-0.5 * np.dot(point, point)), abs=2e-3)


class TestSnapshots:
    def test_layout_is_x_fastest(self, tmp_path, grid16, two_gaussian):
        f = two_gaussian.on_grid(grid16)
        path = save_snapshot(f, tmp_path / "f.bin")
        raw = np.fromfile(path, dtype="<f8")
        assert raw[0] == f.values[0, 0, 0]
        assert raw[1] == f.values[1, 0, 0]
        meta = json.loads(path.with_suffix(".json").read_text())
        assert meta == {"n": 16, "extent": 4.0, "order": "row-major", "dtype": "f64"}
        np.testing.assert_array_equal(load_snapshot(path).values, f.values)


class TestSeparableField:
    def test_shape_mismatch_rejected(self, grid16):
        other = GridSpec(n=8, extent=4.0)
        with pytest.raises(ValueError):
            SeparableField(
                y_grid=other, w_grid=grid16,
                y_factors=np.zeros((1,) + grid16.shape), w_factors=np.zeros((1,) + grid16.shape),
            )

    def test_at_y_sums_products(self, grid16):
        a = np.stack([np.full(grid16.shape, 2.0), np.full(grid16.shape, 3.0)])
        b = np.stack([np.ones(grid16.shape), np.full(grid16.shape, -1.0)])
        h = SeparableField(y_grid=grid16, w_grid=grid16, y_factors=a, w_factors=b)
        np.testing.assert_allclose(h.at_y((0, 0, 0)), -1.0)
        assert h.rank == 2
        assert not h.is_zero()
