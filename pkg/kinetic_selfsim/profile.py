"""
Limiting profile equation

    g + (1+theta) y.grad_y g + theta w.grad_w g + w.grad_y g - Q_w(g, g) = 0

for profiles g(y, w) = q(w) + h(y, w) with h a short sum of products a_k(y) b_k(w),
and the moment tests that show a nonnegative admissible profile must vanish.

Every quantity is assembled from rows (y-factor, w-factor). A missing y-factor
stands for the constant 1, whose integral against the normalised plateau is 1.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import integrate, special

from kinetic_selfsim.densities import GaussianMixture
from kinetic_selfsim.errors import GridError, ParameterError
from kinetic_selfsim.grid import GridSpec, ScalarField, SeparableField, cutoff_profile, gradient
from kinetic_selfsim.landau import LandauOperator, cutoff_limit_energy, cutoff_limit_mass
from kinetic_selfsim.limits import extrapolate, extrapolate_table
from kinetic_selfsim.models import (
    AdmissibilityNorm,
    AdmissibilityReport,
    LandauParams,
    LimitReport,
    MomentTestKind,
    MomentWeight,
    PlateauShape,
    RefutationOutcome,
    RefutationVerdict,
    SelfSimParams,
    ThetaCase,
    VerdictStatus,
)

logger = logging.getLogger(__name__)

TestFunction = Callable[[np.ndarray], np.ndarray]
Row = Tuple[Optional[np.ndarray], np.ndarray]

MAX_RANK = 8
MOMENT_TOLERANCE = 0.02
NONZERO_FRACTION = 0.05
NEGATIVITY_SLACK = 1e-12
TRUNCATION_FRACTIONS = (0.25, 0.5, 0.75, 1.0)
OFFSET_MULTIPLES = (4.0, 8.0, 16.0)
CHUNK_NODES = 64


class CollisionMoments(Protocol):
    """Collision operator seen through the symmetric part (Q(f1, f2) + Q(f2, f1)) / 2."""

    def symmetric_field(self, f1: ScalarField, f2: ScalarField) -> ScalarField:
        ...

    def symmetric_moments(self, f1: ScalarField, f2: ScalarField, tests: Sequence[TestFunction]) -> List[float]:
        ...


class LandauMoments:
    """Landau collisions in divergence form, moments by grid quadrature"""

    def __init__(self, params: LandauParams, workers: Optional[int] = None):
        self.op = LandauOperator(params, workers)

    def symmetric_field(self, f1: ScalarField, f2: ScalarField) -> ScalarField:
        if f1 is f2:
            return self.op.divergence_form(f1, f1)
        return f1.like(0.5 * (self.op.divergence_form(f1, f2).values + self.op.divergence_form(f2, f1).values))

    def symmetric_moments(self, f1: ScalarField, f2: ScalarField, tests: Sequence[TestFunction]) -> List[float]:
        q = self.symmetric_field(f1, f2)
        pts = q.grid.nodes()
        return [float(np.sum(test(pts) * q.values) * q.grid.cell_volume) for test in tests]

    def cutoff_moments(self, f1: ScalarField, f2: ScalarField, radii: Sequence[float], weight: MomentWeight) -> LimitReport:
        """Cutoff integrals of weight(w) times the symmetric collision field, predicted to vanish."""
        limit = cutoff_limit_energy if weight == MomentWeight.ENERGY else cutoff_limit_mass
        return limit(f1, self.op.params, radii, second=f2, op=self.op)


class ProfileDecomposition(BaseModel):
    """g(y, w) = q(w) + sum_k a_k(y) b_k(w) on a y-grid times a w-grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w_grid: GridSpec
    y_grid: GridSpec
    q: Optional[np.ndarray] = None
    h: Optional[SeparableField] = None

    @model_validator(mode="after")
    def _check(self) -> "ProfileDecomposition":
        if self.q is not None and self.q.shape != self.w_grid.shape:
            raise GridError(f"q shape {self.q.shape} does not match the w-grid")
        if self.h is not None:
            if self.h.w_grid != self.w_grid or self.h.y_grid != self.y_grid:
                raise GridError("h lives on different grids than the profile")
            if self.h.rank > MAX_RANK:
                raise ParameterError(f"h has rank {self.h.rank}, at most {MAX_RANK} is supported")
        return self

    @property
    def has_q(self) -> bool:
        return self.q is not None and bool(np.any(self.q))

    @property
    def has_h(self) -> bool:
        return self.h is not None and not self.h.is_zero()

    def is_zero(self) -> bool:
        return not (self.has_q or self.has_h)

    def w_field(self, values: np.ndarray) -> ScalarField:
        return ScalarField(grid=self.w_grid, values=values)


def from_mixtures(
    w_grid: GridSpec,
    y_grid: GridSpec,
    q: Optional[GaussianMixture] = None,
    h_terms: Sequence[Tuple[GaussianMixture, GaussianMixture]] = (),
) -> ProfileDecomposition:
    """Profile with q and every h factor sampled from closed-form Gaussian mixtures."""
    h = None
    if h_terms:
        h = SeparableField(
            y_grid=y_grid,
            w_grid=w_grid,
            y_factors=np.stack([a.on_grid(y_grid).values for a, _ in h_terms]),
            w_factors=np.stack([b.on_grid(w_grid).values for _, b in h_terms]),
        )
    return ProfileDecomposition(
        w_grid=w_grid,
        y_grid=y_grid,
        q=q.on_grid(w_grid).values if q is not None else None,
        h=h,
    )


def named_profile(name: str, w_grid: GridSpec, y_grid: GridSpec) -> ProfileDecomposition:
    """Trial profiles addressable from the command line."""
    maxwellian = GaussianMixture.maxwellian()
    bump_y = GaussianMixture.maxwellian(width=1.5)
    if name == "zero":
        return ProfileDecomposition(w_grid=w_grid, y_grid=y_grid)
    if name == "gaussian":
        return from_mixtures(w_grid, y_grid, q=maxwellian)
    if name == "gaussian-h":
        return from_mixtures(w_grid, y_grid, h_terms=[(bump_y, maxwellian)])
    if name == "mixed":
        half = GaussianMixture.maxwellian(mass=0.5, width=0.8, center=(0.5, 0.0, 0.0))
        return from_mixtures(w_grid, y_grid, q=maxwellian, h_terms=[(bump_y, half)])
    raise ParameterError(f"unknown profile {name!r}; expected zero, gaussian, gaussian-h or mixed")


def _contract(vectors: np.ndarray, field_gradient: np.ndarray) -> np.ndarray:
    return np.einsum("i...,i...->...", vectors, field_gradient)


def _linear_rows(g: ProfileDecomposition, theta: float, homogeneous: bool) -> List[Row]:
    rows: List[Row] = []
    hw = g.w_grid.spacing
    w_mesh = np.stack(g.w_grid.mesh())
    if g.q is not None:
        rows.append((None, g.q + theta * _contract(w_mesh, gradient(g.q, hw))))
    if g.h is None:
        return rows
    if homogeneous:
        if g.has_h:
            raise ParameterError("a homogeneous profile has no y-dependent part")
        return rows
    hy = g.y_grid.spacing
    y_mesh = np.stack(g.y_grid.mesh())
    for a, b in zip(g.h.y_factors, g.h.w_factors):
        grad_a = gradient(a, hy)
        rows.append((a, b + theta * _contract(w_mesh, gradient(b, hw))))
        rows.append(((1.0 + theta) * _contract(y_mesh, grad_a), b))
        for i in range(3):
            rows.append((grad_a[i], w_mesh[i] * b))
    return rows


def _multiply(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is None:
        return b
    if b is None:
        return a
    return a * b


def _collision_pairs(g: ProfileDecomposition, homogeneous: bool) -> List[Tuple[Optional[np.ndarray], float, np.ndarray, np.ndarray]]:
    """(y-factor, multiplicity, f1, f2) over unordered pairs of the parts of g."""
    parts: List[Tuple[Optional[np.ndarray], np.ndarray]] = []
    if g.q is not None:
        parts.append((None, g.q))
    if g.h is not None and not homogeneous:
        parts.extend(zip(g.h.y_factors, g.h.w_factors))
    pairs = []
    for i, (ya, fa) in enumerate(parts):
        for j in range(i, len(parts)):
            yb, fb = parts[j]
            pairs.append((_multiply(ya, yb), 1.0 if i == j else 2.0, fa, fb))
    return pairs


def _pair_fields(g: ProfileDecomposition, fa: np.ndarray, fb: np.ndarray) -> Tuple[ScalarField, ScalarField]:
    f1 = g.w_field(fa)
    return f1, (f1 if fa is fb else g.w_field(fb))


def profile_residual(
    g: ProfileDecomposition,
    theta: float,
    collision: CollisionMoments,
    homogeneous: bool = False,
) -> Union[ScalarField, SeparableField]:
    """
    Residual of the profile equation

    The transport terms act on the factors (y-derivatives on a_k, w-operators on
    b_k and q). The collision term is expanded bilinearly, so the residual is
    again separable, with y-factors a_k a_l for the quadratic part.

    Args:
        g: Profile
        theta: Self-similar exponent
        collision: Collision operator
        homogeneous: Drop every y-term; g must then be y-independent

    Returns:
        ScalarField in w for homogeneous profiles, SeparableField otherwise
    """
    rows = _linear_rows(g, theta, homogeneous)
    for y_factor, mult, fa, fb in _collision_pairs(g, homogeneous):
        f1, f2 = _pair_fields(g, fa, fb)
        rows.append((y_factor, -mult * collision.symmetric_field(f1, f2).values))

    if homogeneous:
        total = sum((w for _, w in rows), np.zeros(g.w_grid.shape))
        return g.w_field(total)
    if not rows:
        rows = [(None, np.zeros(g.w_grid.shape))]
    ones = np.ones(g.y_grid.shape)
    return SeparableField(
        y_grid=g.y_grid,
        w_grid=g.w_grid,
        y_factors=np.stack([ones if y is None else y for y, _ in rows]),
        w_factors=np.stack([w for _, w in rows]),
    )


def landau_profile_residual(
    g: ProfileDecomposition,
    params: SelfSimParams,
    landau: Optional[LandauParams] = None,
    homogeneous: bool = False,
    workers: Optional[int] = None,
) -> Union[ScalarField, SeparableField]:
    collision = LandauMoments(landau or LandauParams(gamma=params.gamma), workers)
    return profile_residual(g, params.theta, collision, homogeneous)


@lru_cache(maxsize=4)
def plateau_norm(shape: PlateauShape) -> float:
    """Integral over R^3 of the unnormalised plateau profile on the unit ball."""
    if shape == PlateauShape.POLYNOMIAL:
        return 2.0 * math.pi * float(special.beta(1.5, 5.0))
    value, _ = integrate.quad(lambda r: r * r * math.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0)
    return 4.0 * math.pi * value


def plateau(points: np.ndarray, radius: float, shape: PlateauShape = PlateauShape.BUMP) -> np.ndarray:
    """Smooth plateau function supported in the ball of the given radius, unit integral."""
    r = np.sqrt(np.sum(np.asarray(points, dtype=float) ** 2, axis=-1)) / radius
    inside = r < 1.0
    u = np.where(inside, 1.0 - r * r, 1.0)
    if shape == PlateauShape.POLYNOMIAL:
        raw = np.where(inside, u ** 4, 0.0)
    else:
        raw = np.where(inside, np.exp(-1.0 / u), 0.0)
    return raw / (plateau_norm(shape) * radius ** 3)


def weight_values(points: np.ndarray, weight: MomentWeight) -> np.ndarray:
    if weight == MomentWeight.ONE:
        return np.ones(points.shape[:-1])
    return np.sum(points * points, axis=-1)


def cutoff_test(radius: float, weight: MomentWeight) -> TestFunction:
    def test(points: np.ndarray) -> np.ndarray:
        r = np.sqrt(np.sum(points * points, axis=-1))
        return cutoff_profile(r / radius)[0] * weight_values(points, weight)

    return test


def moment_coefficient(theta: float, test: MomentTestKind, weight: MomentWeight) -> float:
    """Coefficient multiplying the q-moment (plateau test) or the h-moment (y-cutoff test)."""
    if test == MomentTestKind.PLATEAU:
        return 1.0 - 3.0 * theta if weight == MomentWeight.ONE else 1.0 - 5.0 * theta
    return -2.0 * (1.0 + 3.0 * theta) if weight == MomentWeight.ONE else -2.0 - 8.0 * theta


def _q_moment(g: ProfileDecomposition, weight: MomentWeight) -> float:
    if g.q is None:
        return 0.0
    w = weight_values(g.w_grid.nodes(), weight)
    return float(np.sum(w * g.q) * g.w_grid.cell_volume)


def _h_moment(g: ProfileDecomposition, weight: MomentWeight) -> float:
    if g.h is None:
        return 0.0
    w = weight_values(g.w_grid.nodes(), weight)
    y_int = g.h.y_factors.sum(axis=(1, 2, 3)) * g.y_grid.cell_volume
    w_int = (g.h.w_factors * w[None]).sum(axis=(1, 2, 3)) * g.w_grid.cell_volume
    return float(y_int @ w_int)


def _y_tests(g: ProfileDecomposition, test: MomentTestKind, outer: Sequence[float], shape: PlateauShape, plateau_radius: float) -> List[Tuple[np.ndarray, float]]:
    """Test functions of y on the y-grid with the integral used for constant y-factors."""
    tests = []
    pts = g.y_grid.nodes()
    for value in outer:
        if test == MomentTestKind.PLATEAU:
            # phi(y + y0) is centered at -y0
            shifted = pts + np.array([value, 0.0, 0.0])
            tests.append((plateau(shifted, plateau_radius, shape), 1.0))
        else:
            chi = cutoff_profile(np.sqrt(np.sum(pts * pts, axis=-1)) / value)[0]
            tests.append((chi, float(chi.sum() * g.y_grid.cell_volume)))
    return tests


def functional_table(
    g: ProfileDecomposition,
    theta: float,
    collision: CollisionMoments,
    y_tests: Sequence[Tuple[np.ndarray, float]],
    w_tests: Sequence[TestFunction],
    threads: int = 1,
    radii: Optional[Sequence[float]] = None,
    weight: MomentWeight = MomentWeight.ONE,
) -> np.ndarray:
    """
    Integral of psi_y(y) psi_w(w) times the residual for every pair of tests

    When w_tests are the cutoffs chi(w/R) weight(w) over radii, Landau collision
    columns come from the cutoff limits of the collision invariants.

    Returns:
        Array of shape (len(y_tests), len(w_tests))
    """
    w_pts = g.w_grid.nodes()
    w_vals = np.stack([test(w_pts) for test in w_tests])
    hy3, hw3 = g.y_grid.cell_volume, g.w_grid.cell_volume

    def y_integrals(y_factor: Optional[np.ndarray]) -> np.ndarray:
        if y_factor is None:
            return np.array([mass for _, mass in y_tests])
        return np.array([float(np.sum(psi * y_factor) * hy3) for psi, _ in y_tests])

    table = np.zeros((len(y_tests), len(w_tests)))
    for y_factor, w_factor in _linear_rows(g, theta, homogeneous=False):
        w_int = np.sum(w_vals * w_factor[None], axis=(1, 2, 3)) * hw3
        table += np.outer(y_integrals(y_factor), w_int)

    pairs = _collision_pairs(g, homogeneous=False)

    def pair_moments(pair) -> np.ndarray:
        _, mult, fa, fb = pair
        f1, f2 = _pair_fields(g, fa, fb)
        if radii is not None and isinstance(collision, LandauMoments):
            return mult * np.asarray(collision.cutoff_moments(f1, f2, radii, weight).values)
        return mult * np.asarray(collision.symmetric_moments(f1, f2, w_tests))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        moments = list(pool.map(pair_moments, pairs))
    for (y_factor, _, _, _), m in zip(pairs, moments):
        table -= np.outer(y_integrals(y_factor), m)
    return table


def _compare(report: LimitReport, predicted: float, scale: float, tolerance: float) -> LimitReport:
    report.predicted = predicted
    if report.limit is None:
        return report
    denom = max(abs(predicted), scale, 1e-300)
    report.relative_error = abs(report.limit - predicted) / denom
    report.status = VerdictStatus.PASS if report.relative_error <= tolerance else VerdictStatus.FAIL
    return report


def moment_functional(
    g: ProfileDecomposition,
    params: SelfSimParams,
    test: MomentTestKind = MomentTestKind.PLATEAU,
    weight: MomentWeight = MomentWeight.ONE,
    radii: Optional[Sequence[float]] = None,
    outer: Optional[Sequence[float]] = None,
    shape: PlateauShape = PlateauShape.BUMP,
    collision: Optional[CollisionMoments] = None,
    plateau_radius: Optional[float] = None,
    y_scale: float = 1.0,
    tolerance: float = MOMENT_TOLERANCE,
    threads: int = 1,
) -> LimitReport:
    """
    Cutoff-weighted integral of the profile residual, extrapolated in two stages

    Plateau test: psi = phi(y + y0) chi(w/R) weight(w); the limit R -> inf is taken
    first, then |y0| -> inf, and the result is compared with
    (1 - 3 theta) int q (weight 1) or (1 - 5 theta) int |w|^2 q (weight |w|^2).
    Y-cutoff test: psi = chi(y/R1) chi(w/R2) weight(w); R2 -> inf first, then R1,
    compared with -2(1 + 3 theta) int h or (-2 - 8 theta) int |w|^2 h.

    Args:
        g: Profile
        params: theta (and gamma for the default Landau collisions)
        radii: w-cutoff radii, increasing; default spans up to half the w-extent
        outer: |y0| values (plateau) or y-cutoff radii; defaults {4, 8, 16} y_scale
            and up to half the y-extent
        collision: Collision operator, Landau by default
        plateau_radius: Support radius of phi, default two y-grid spacings

    Returns:
        LimitReport of the outer stage with the predicted value filled in
    """
    theta = params.theta
    collision = collision or LandauMoments(LandauParams(gamma=params.gamma))
    radii = list(radii) if radii is not None else [f * g.w_grid.extent / 2.0 for f in TRUNCATION_FRACTIONS]
    if outer is None:
        if test == MomentTestKind.PLATEAU:
            outer = [m * y_scale for m in OFFSET_MULTIPLES]
        else:
            outer = [f * g.y_grid.extent / 2.0 for f in TRUNCATION_FRACTIONS]
    plateau_radius = plateau_radius or 2.0 * g.y_grid.spacing

    y_tests = _y_tests(g, test, outer, shape, plateau_radius)
    w_tests = [cutoff_test(r, weight) for r in radii]
    table = functional_table(g, theta, collision, y_tests, w_tests, threads, radii=radii, weight=weight)

    report = extrapolate_table(list(outer), radii, table, outer_label=test.value)

    coefficient = moment_coefficient(theta, test, weight)
    if test == MomentTestKind.PLATEAU:
        moment = _q_moment(g, weight)
    else:
        moment = _h_moment(g, weight)
        if g.has_q:
            report.notes.append("q is not integrable in y; the y-cutoff test diverges")
    scale = NONZERO_FRACTION * (abs(_q_moment(g, weight)) + abs(_h_moment(g, weight)))
    report = _compare(report, coefficient * moment, scale, tolerance)
    logger.info(
        f"Moment functional {test.value}/{weight.value} theta={theta}: limit {report.limit}, "
        f"predicted {report.predicted:.6g}, status {report.status.value}"
    )
    return report


def _truncated_norm(name: str, fractions: Sequence[float], values: List[float]) -> AdmissibilityNorm:
    report = extrapolate(list(fractions), values)
    return AdmissibilityNorm(
        name=name,
        truncations=list(fractions),
        values=values,
        cauchy=report.cauchy,
        value=report.limit if report.limit is not None else values[-1],
    )


def check_profile_admissibility(
    g: ProfileDecomposition,
    params: SelfSimParams,
    fractions: Sequence[float] = TRUNCATION_FRACTIONS,
) -> AdmissibilityReport:
    """
    Measure the decay norms required of the profile on nested truncations

    Norms: |q|_1 and |(1+|y|+|w|) h|_1, plus |(1+|w|^2) q|_1 and
    |(1+|y||w|^2+|w|^3) h|_1 when theta = +-1/3. Truncation k keeps nodes with
    |y| <= f_k L_y and |w| <= f_k L_w. A norm fails when its truncated values
    are not Cauchy. A negative node value of g also fails the report.
    """
    third = _theta_case(params.theta) != ThetaCase.GENERIC
    r_w = g.w_grid.radius().ravel()
    r_y = g.y_grid.radius().ravel()
    y_limits = [f * g.y_grid.extent for f in fractions]
    w_limits = [f * g.w_grid.extent for f in fractions]

    q_weights = {"|q|_1": np.ones_like(r_w)}
    h_names = ["|(1+|y|+|w|)h|_1"]
    if third:
        q_weights["|(1+|w|^2)q|_1"] = 1.0 + r_w ** 2
        h_names.append("|(1+|y||w|^2+|w|^3)h|_1")

    series: Dict[str, List[float]] = {}
    q_flat = g.q.ravel() if g.q is not None else np.zeros_like(r_w)
    for name, weight in q_weights.items():
        series[name] = [float(np.sum((weight * np.abs(q_flat))[r_w <= lim]) * g.w_grid.cell_volume) for lim in w_limits]
    g_min = float(q_flat.min())

    if g.h is not None:
        sums = np.zeros((len(h_names), len(fractions)))
        a = g.h.y_factors.reshape(g.h.rank, -1)
        b = g.h.w_factors.reshape(g.h.rank, -1)
        for start in range(0, r_y.size, CHUNK_NODES):
            block = a[:, start:start + CHUNK_NODES].T @ b
            g_min = min(g_min, float(np.min(block + q_flat[None])))
            absb = np.abs(block)
            ry = r_y[start:start + CHUNK_NODES, None]
            weights = [1.0 + ry + r_w[None]]
            if third:
                weights.append(1.0 + ry * r_w[None] ** 2 + r_w[None] ** 3)
            for k, (ly, lw) in enumerate(zip(y_limits, w_limits)):
                mask = (ry <= ly) & (r_w[None] <= lw)
                for i, weight in enumerate(weights):
                    sums[i, k] += np.sum(np.where(mask, weight * absb, 0.0))
        sums *= g.y_grid.cell_volume * g.w_grid.cell_volume
        for name, row in zip(h_names, sums):
            series[name] = row.tolist()

    norms = [_truncated_norm(name, fractions, values) for name, values in series.items()]
    failed = [n.name for n in norms if not n.cauchy]
    scale = max(float(np.max(np.abs(q_flat))), 1.0)
    if g_min < -NEGATIVITY_SLACK * scale:
        failed.append("g >= 0")
    if failed:
        logger.warning(f"Profile admissibility failed: {failed}")
    return AdmissibilityReport(
        status=VerdictStatus.FAIL if failed else VerdictStatus.PASS,
        norms=norms,
        failed=failed,
    )


def _theta_case(theta: float) -> ThetaCase:
    if math.isclose(theta, 1.0 / 3.0, abs_tol=1e-12):
        return ThetaCase.PLUS_THIRD
    if math.isclose(theta, -1.0 / 3.0, abs_tol=1e-12):
        return ThetaCase.MINUS_THIRD
    return ThetaCase.GENERIC


def refutation_verdict(
    g: ProfileDecomposition,
    params: SelfSimParams,
    collision: Optional[CollisionMoments] = None,
    threads: int = 1,
) -> RefutationVerdict:
    """
    Decide whether a trial profile can solve the profile equation

    A nonzero nonnegative admissible profile is refuted when the moment test of
    its theta case has a nonzero limit, which the equation requires to be zero.
    The plateau test is tried first; when q vanishes the y-cutoff test follows.
    """
    case = _theta_case(params.theta)
    weight = MomentWeight.ONE if case == ThetaCase.GENERIC else MomentWeight.ENERGY
    base = dict(theta=params.theta, gamma=params.gamma, case=case)

    if g.is_zero():
        return RefutationVerdict(**base, test="none", verdict=RefutationOutcome.TRIVIAL, details={"message": "g vanishes identically"})

    admissibility = check_profile_admissibility(g, params)
    if admissibility.status != VerdictStatus.PASS:
        return RefutationVerdict(
            **base,
            test="admissibility",
            verdict=RefutationOutcome.INCONCLUSIVE,
            details={"failed": admissibility.failed},
        )

    tests = [MomentTestKind.PLATEAU] if g.has_q else [MomentTestKind.CUTOFF_Y]
    last: Optional[LimitReport] = None
    for kind in tests:
        report = moment_functional(g, params, kind, weight, collision=collision, threads=threads)
        last = report
        label = f"{kind.value}/{weight.value}"
        if report.limit is None:
            return RefutationVerdict(
                **base, test=label, predicted=report.predicted, verdict=RefutationOutcome.INCONCLUSIVE,
                details={"notes": report.notes},
            )
        moment = _q_moment(g, weight) if kind == MomentTestKind.PLATEAU else _h_moment(g, weight)
        if abs(report.limit) > NONZERO_FRACTION * abs(moment):
            message = f"refuted: residual functional {report.limit:.6g} ≠ 0 required"
            if weight == MomentWeight.ENERGY:
                message += " (via |w|^2 moment)"
            return RefutationVerdict(
                **base,
                test=label,
                predicted=report.predicted,
                measured=report.limit,
                verdict=RefutationOutcome.REFUTED,
                details={"message": message, "moment": moment, "status": report.status.value},
            )
    return RefutationVerdict(
        **base,
        test="exhausted",
        predicted=last.predicted if last else None,
        measured=last.limit if last else None,
        verdict=RefutationOutcome.INCONCLUSIVE,
        details={"message": "every moment functional vanished for a nonzero profile"},
    )
