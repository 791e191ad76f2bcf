import logging
from typing import Dict, Literal, Optional, Sequence

import numpy as np

from kinetic_selfsim.errors import DensityError, GridError, ParameterError
from kinetic_selfsim.grid import (
    CutoffFamily,
    GridSpec,
    MatrixField,
    ScalarField,
    WEIGHT_ENERGY,
    diff1,
    evaluate_weight,
    gradient,
    hessian,
    weight_momentum,
)
from kinetic_selfsim.kernels import KernelSpec, convolve, symmetric_from_components
from kinetic_selfsim.limits import extrapolate
from kinetic_selfsim.models import LandauParams, LimitReport, VerdictStatus

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-30
CutoffWeight = Literal["one", "energy", "log"]


def _pad_axis(u: np.ndarray, axis: int, width: int) -> np.ndarray:
    pad = [(0, 0)] * u.ndim
    pad[axis] = (width, width)
    return np.pad(u, pad, mode="constant")


def _take(u: np.ndarray, axis: int, start: int, length: int) -> np.ndarray:
    index = [slice(None)] * u.ndim
    index[axis] = slice(start, start + length)
    return u[tuple(index)]


def _face_value(u: np.ndarray, axis: int) -> np.ndarray:
    """Fourth-order interpolation to the n+1 faces (between nodes j-1 and j)."""
    n = u.shape[axis]
    p = _pad_axis(u, axis, 2)
    s = lambda q: _take(p, axis, q, n + 1)
    return (-s(0) + 9.0 * s(1) + 9.0 * s(2) - s(3)) / 16.0


def _face_derivative(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    n = u.shape[axis]
    p = _pad_axis(u, axis, 2)
    s = lambda q: _take(p, axis, q, n + 1)
    return (s(0) - 27.0 * s(1) + 27.0 * s(2) - s(3)) / (24.0 * h)


class LandauOperator:
    """Landau collision operator and its coefficients on a uniform velocity grid"""

    def __init__(self, params: LandauParams, workers: Optional[int] = None):
        self.params = params
        self.workers = workers
        if params.c_const is not None:
            derived = LandauParams(gamma=params.gamma, a_const=params.a_const).c_value
            if not np.isclose(params.c_const, derived):
                logger.warning(
                    f"c_const={params.c_const} differs from {derived:.6g}; trace and divergence "
                    "forms will not coincide and Maxwellians are not exact equilibria"
                )

    @property
    def a_kernel(self) -> KernelSpec:
        return KernelSpec(
            kind="projected",
            exponent=self.params.gamma + 2.0,
            scale=self.params.a_const,
            cell_rule=self.params.cell_rule,
        )

    @property
    def c_kernel(self) -> KernelSpec:
        return KernelSpec(
            kind="power",
            exponent=self.params.gamma,
            scale=self.params.c_value,
            cell_rule=self.params.cell_rule,
        )

    def coeff_a(self, f: ScalarField) -> MatrixField:
        comps = convolve(self.a_kernel, f.values, f.grid, self.workers)
        return MatrixField(grid=f.grid, values=symmetric_from_components(comps))

    def coeff_c(self, f: ScalarField) -> ScalarField:
        if self.params.is_coulomb:
            return f.like(self.params.c_value * f.values)
        return f.like(convolve(self.c_kernel, f.values, f.grid, self.workers)[0])

    def coeff_b(self, f: ScalarField, a_bar: Optional[MatrixField] = None) -> np.ndarray:
        """Drift b_i = sum_j d_j a_ij by fourth-order differences of the computed a."""
        a_bar = a_bar if a_bar is not None else self.coeff_a(f)
        h = f.grid.spacing
        return np.stack([sum(diff1(a_bar.values[i, j], j, h) for j in range(3)) for i in range(3)])

    def coeff_a_gradient(self, f: ScalarField) -> np.ndarray:
        """d_k a_ij as an array [k, i, j, ...], by convolution with the differentiated kernel."""
        spec = KernelSpec(
            kind="projected_gradient",
            exponent=self.params.gamma + 2.0,
            scale=self.params.a_const,
            cell_rule=self.params.cell_rule,
        )
        comps = convolve(spec, f.values, f.grid, self.workers)
        return np.stack([symmetric_from_components(comps[6 * k:6 * k + 6]) for k in range(3)])

    def trace_form(self, f1: ScalarField, f2: ScalarField) -> ScalarField:
        a_bar = self.coeff_a(f1)
        c_bar = self.coeff_c(f1)
        hess = hessian(f2.values, f2.grid.spacing)
        out = np.einsum("ij...,ij...->...", a_bar.values, hess) + c_bar.values * f2.values
        return f2.like(out)

    def divergence_form(self, f1: ScalarField, f2: ScalarField, a_bar: Optional[MatrixField] = None) -> ScalarField:
        """
        Conservative face-flux discretisation of div(a grad f2 - b f2), coefficients from f1

        Face fluxes F = sum_l a_kl d_l f2 - b_k f2 are built from fourth-order face
        values, corrected to G = F - (h^2/24) F'' and differenced. Both outer
        faces carry zero flux, so the grid sum of the result vanishes for any data.
        A precomputed a_bar must be the coefficient of f1.
        """
        _check_same_grid(f1, f2)
        h = f2.grid.spacing
        a_bar = a_bar if a_bar is not None else self.coeff_a(f1)
        b_bar = self.coeff_b(f1, a_bar)
        nodal_grad = gradient(f2.values, h)
        out = np.zeros(f2.grid.shape)
        for k in range(3):
            flux = -_face_value(b_bar[k], k) * _face_value(f2.values, k)
            for l in range(3):
                d_l = _face_derivative(f2.values, k, h) if l == k else _face_value(nodal_grad[l], k)
                flux += _face_value(a_bar.values[k, l], k) * d_l
            padded = _pad_axis(flux, k, 1)
            n1 = flux.shape[k]
            corrected = (
                -_take(padded, k, 2, n1) + 26.0 * _take(padded, k, 1, n1) - _take(padded, k, 0, n1)
            ) / 24.0
            edge = [slice(None)] * 3
            edge[k] = 0
            corrected[tuple(edge)] = 0.0
            edge[k] = -1
            corrected[tuple(edge)] = 0.0
            out += (_take(corrected, k, 1, n1 - 1) - _take(corrected, k, 0, n1 - 1)) / h
        return f2.like(out)

    def collide(self, f: ScalarField, form: str = "divergence") -> ScalarField:
        if form == "trace":
            return self.trace_form(f, f)
        if form == "divergence":
            return self.divergence_form(f, f)
        raise ParameterError(f"unknown form {form!r}, expected 'trace' or 'divergence'")

    def entropy_dissipation(self, g: ScalarField, floor: float = LOG_FLOOR) -> float:
        """
        Discrete entropy dissipation in expanded form

        D = sum g u.(a u) h^3 - sum g u.(A * (g u)) h^3 with u = grad log g and A the
        projected kernel table, which equals half the double sum of
        g_i g_j (u_i - u_j).A(i-j)(u_i - u_j) h^6.
        """
        if np.any(g.values < 0):
            raise DensityError("entropy dissipation needs a nonnegative density")
        h = g.grid.spacing
        u = gradient(np.log(np.maximum(g.values, floor)), h, pad="linear")
        a_bar = self.coeff_a(g).values
        local = np.einsum("i...,ij...,j...->...", u, a_bar, u)
        gu = g.values[None] * u
        mixed = np.zeros(g.grid.shape)
        for l in range(3):
            comps = symmetric_from_components(convolve(self.a_kernel, gu[l], g.grid, self.workers))
            mixed += np.einsum("i...,i...->...", gu, comps[:, l])
        return float(np.sum(g.values * local - mixed) * g.grid.cell_volume)

    def entropy_dissipation_alt(self, g: ScalarField) -> float:
        """Single-integral form: integral of <a grad g, grad g>/g minus integral of c g."""
        h = g.grid.spacing
        grad = gradient(g.values, h)
        a_bar = self.coeff_a(g).values
        c_bar = self.coeff_c(g).values
        safe = np.maximum(g.values, LOG_FLOOR)
        quad = np.einsum("i...,ij...,j...->...", grad, a_bar, grad) / safe
        return float(np.sum(quad - c_bar * g.values) * g.grid.cell_volume)


def _check_same_grid(f1: ScalarField, f2: ScalarField) -> None:
    if f1.grid != f2.grid:
        raise GridError("fields live on different grids")


def coeff_a(f: ScalarField, params: LandauParams, workers: Optional[int] = None) -> MatrixField:
    return LandauOperator(params, workers).coeff_a(f)


def coeff_c(f: ScalarField, params: LandauParams, workers: Optional[int] = None) -> ScalarField:
    return LandauOperator(params, workers).coeff_c(f)


def q_landau(f: ScalarField, params: LandauParams, form: str = "divergence", workers: Optional[int] = None) -> ScalarField:
    return LandauOperator(params, workers).collide(f, form)


def q_landau_trace(f: ScalarField, params: LandauParams, workers: Optional[int] = None) -> ScalarField:
    return q_landau(f, params, "trace", workers)


def q_landau_divergence(f: ScalarField, params: LandauParams, workers: Optional[int] = None) -> ScalarField:
    return q_landau(f, params, "divergence", workers)


def q_bilinear(f1: ScalarField, f2: ScalarField, params: LandauParams, workers: Optional[int] = None) -> ScalarField:
    return LandauOperator(params, workers).divergence_form(f1, f2)


def entropy_dissipation(g: ScalarField, params: LandauParams, workers: Optional[int] = None) -> float:
    return LandauOperator(params, workers).entropy_dissipation(g)


def collision_invariant_moments(f: ScalarField, params: LandauParams, workers: Optional[int] = None) -> Dict[str, float]:
    q = q_landau(f, params, workers=workers)
    moments = {"mass": q.integrate(), "energy": q.integrate(WEIGHT_ENERGY)}
    for k, name in enumerate(("momentum_x", "momentum_y", "momentum_z")):
        moments[name] = q.integrate(weight_momentum(k))
    return moments


CUTOFF_TOLERANCES: Dict[str, float] = {"one": 2e-2, "energy": 5e-2, "log": 1e-2}


def cutoff_limit(
    f: ScalarField,
    params: LandauParams,
    radii: Sequence[float],
    weight: CutoffWeight = "one",
    tolerance: Optional[float] = None,
    workers: Optional[int] = None,
    floor: float = LOG_FLOOR,
    second: Optional[ScalarField] = None,
    op: Optional[LandauOperator] = None,
) -> LimitReport:
    """
    Limit of the integral chi_R * weight * Q(f, f) as R grows

    Args:
        f: Density on the velocity grid
        params: Landau parameters
        radii: Increasing cutoff radii
        weight: "one" and "energy" are predicted to vanish; "log" is predicted to
            equal minus the entropy dissipation
        tolerance: Relative tolerance of the prediction, CUTOFF_TOLERANCES by default.
            For the vanishing weights the error is relative to the integral of |weight Q|
        floor: Lower clamp of f inside the logarithm
        second: With a second field the symmetrised (Q(f, second) + Q(second, f)) / 2
            replaces Q(f, f)
        op: Operator to reuse; built from params when omitted

    Returns:
        LimitReport over the radii
    """
    op = op or LandauOperator(params, workers)
    tol = CUTOFF_TOLERANCES.get(weight, 1e-2) if tolerance is None else tolerance
    if second is None or second is f:
        q = op.collide(f).values
    else:
        if weight == "log":
            raise ParameterError("the log weight needs a single density")
        q = 0.5 * (op.divergence_form(f, second).values + op.divergence_form(second, f).values)
    grid = f.grid
    if weight == "one":
        w = np.ones(grid.shape)
        predicted = 0.0
    elif weight == "energy":
        w = evaluate_weight(grid, WEIGHT_ENERGY)
        predicted = 0.0
    elif weight == "log":
        w = np.log(np.maximum(f.values, floor))
        predicted = -op.entropy_dissipation(f, floor)
    else:
        raise ParameterError(f"unknown cutoff weight {weight!r}")

    values = [
        float(np.sum(CutoffFamily(radius=r).values(grid) * w * q) * grid.cell_volume) for r in radii
    ]
    if predicted != 0.0:
        return extrapolate(radii, values, predicted=predicted, tolerance=tol)

    scale = float(np.sum(np.abs(w * q)) * grid.cell_volume) or 1.0
    report = extrapolate(radii, values)
    report.predicted = 0.0
    if report.limit is not None:
        report.relative_error = abs(report.limit) / scale
        report.status = VerdictStatus.PASS if report.relative_error <= tol else VerdictStatus.FAIL
    if report.status == VerdictStatus.FAIL:
        logger.warning(
            f"Cutoff limit for weight {weight} is {report.limit:.4g}, "
            f"{report.relative_error:.3g} of the integral of |weight Q|"
        )
    return report


def cutoff_limit_mass(
    f: ScalarField,
    params: LandauParams,
    radii: Sequence[float],
    workers: Optional[int] = None,
    tolerance: Optional[float] = None,
    second: Optional[ScalarField] = None,
    op: Optional[LandauOperator] = None,
) -> LimitReport:
    return cutoff_limit(f, params, radii, "one", tolerance=tolerance, workers=workers, second=second, op=op)


def cutoff_limit_energy(
    f: ScalarField,
    params: LandauParams,
    radii: Sequence[float],
    workers: Optional[int] = None,
    tolerance: Optional[float] = None,
    second: Optional[ScalarField] = None,
    op: Optional[LandauOperator] = None,
) -> LimitReport:
    return cutoff_limit(f, params, radii, "energy", tolerance=tolerance, workers=workers, second=second, op=op)


def cutoff_limit_entropy(
    f: ScalarField,
    params: LandauParams,
    radii: Sequence[float],
    floor: float = LOG_FLOOR,
    tolerance: Optional[float] = None,
    workers: Optional[int] = None,
) -> LimitReport:
    """Cutoff integrals of log(max(f, floor)) Q(f, f); the limit should equal minus the dissipation."""
    return cutoff_limit(f, params, radii, "log", tolerance=tolerance, workers=workers, floor=floor)
