import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from kinetic_selfsim.densities import random_mixture
from kinetic_selfsim.errors import ParameterError
from kinetic_selfsim.grid import GridSpec, ScalarField
from kinetic_selfsim.kernels import KernelSpec, convolve
from kinetic_selfsim.landau import LandauOperator
from kinetic_selfsim.models import BoundKind, BoundReport, BoundSample, LandauParams, VerdictStatus

logger = logging.getLogger(__name__)

MAX_SPREAD = 50.0


def lp_norm(field: ScalarField, p: float) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(field.values)))
    return float((np.sum(np.abs(field.values) ** p) * field.grid.cell_volume) ** (1.0 / p))


def conjugate(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def exponent_window(kind: BoundKind, gamma: float) -> Tuple[float, float]:
    """Half-open admissible exponent interval [1, upper) of each interpolation bound."""
    if kind == BoundKind.A1HI:
        upper = math.inf if gamma == -2.0 else -3.0 / (gamma + 2.0)
    elif kind == BoundKind.ALOINF:
        upper = 3.0 / (gamma + 5.0)
    elif kind == BoundKind.AGRAD:
        upper = -3.0 / (gamma + 1.0)
    elif kind == BoundKind.C:
        if not -3.0 < gamma <= -2.0:
            raise ParameterError(f"bound c needs gamma in (-3, -2], got {gamma}")
        upper = -3.0 / gamma
    else:
        raise ParameterError(f"no interpolation window for bound kind {kind.value}")
    return 1.0, upper


def check_exponent(kind: BoundKind, exponent: float, gamma: float) -> None:
    lower, upper = exponent_window(kind, gamma)
    if not lower <= exponent < upper:
        raise ParameterError(
            f"exponent {exponent} outside the admissible interval [{lower}, {upper}) "
            f"for {kind.value} at gamma={gamma}"
        )


def bound_rhs(kind: BoundKind, h: ScalarField, exponent: float, gamma: float) -> float:
    """Right-hand side of the bound without its constant."""
    if kind == BoundKind.ALOINF:
        q = exponent
        power = q * (gamma + 5.0) / 3.0
        return lp_norm(h, q) ** power * lp_norm(h, math.inf) ** (1.0 - power)
    degree = {BoundKind.A1HI: gamma + 2.0, BoundKind.AGRAD: gamma + 1.0, BoundKind.C: gamma}[kind]
    p = exponent
    return lp_norm(h, 1.0) ** (1.0 + p * degree / 3.0) * lp_norm(h, conjugate(p)) ** (-degree * p / 3.0)


def bound_lhs(kind: BoundKind, h: ScalarField, gamma: float, workers: Optional[int] = None) -> float:
    op = LandauOperator(LandauParams(gamma=gamma, a_const=1.0), workers)
    if kind in (BoundKind.A1HI, BoundKind.ALOINF):
        return op.coeff_a(h).spectral_sup()
    if kind == BoundKind.AGRAD:
        grad = op.coeff_a_gradient(h)
        return float(np.max(np.sqrt(np.sum(grad * grad, axis=(0, 1, 2)))))
    if kind == BoundKind.C:
        spec = KernelSpec(kind="power", exponent=gamma)
        return float(np.max(np.abs(convolve(spec, h.values, h.grid, workers)[0])))
    raise ParameterError(f"no left-hand side for bound kind {kind.value}")


def verify_bound(
    kind: BoundKind,
    h: ScalarField,
    exponent: float,
    params: LandauParams,
    sample_id: int = 0,
    workers: Optional[int] = None,
) -> BoundReport:
    """
    Evaluate one interpolation bound on one field

    Args:
        kind: a1hi, aloinf, agrad or c
        h: Field the coefficient is built from
        exponent: p (or q for aloinf) inside the admissible window
        params: Landau parameters, only gamma is used
        sample_id: Identifier stored with the sample

    Returns:
        BoundReport with a single sample
    """
    check_exponent(kind, exponent, params.gamma)
    lhs = bound_lhs(kind, h, params.gamma, workers)
    rhs = bound_rhs(kind, h, exponent, params.gamma)
    ratio = lhs / rhs if rhs > 0 else 0.0
    sample = BoundSample(kind=kind, exponent=exponent, sample_id=sample_id, lhs=lhs, rhs=rhs, ratio=ratio)
    return summarize_samples(kind, exponent, params.gamma, [sample])


def verify_bound_a1hi(h: ScalarField, p: float, params: LandauParams) -> BoundReport:
    return verify_bound(BoundKind.A1HI, h, p, params)


def verify_bound_aloinf(h: ScalarField, q: float, params: LandauParams) -> BoundReport:
    return verify_bound(BoundKind.ALOINF, h, q, params)


def verify_bound_agrad(h: ScalarField, p: float, params: LandauParams) -> BoundReport:
    return verify_bound(BoundKind.AGRAD, h, p, params)


def verify_bound_c(h: ScalarField, p: float, params: LandauParams) -> BoundReport:
    return verify_bound(BoundKind.C, h, p, params)


def summarize_samples(
    kind: BoundKind, exponent: float, gamma: float, samples: List[BoundSample], max_spread: float = MAX_SPREAD
) -> BoundReport:
    ratios = np.array([s.ratio for s in samples if s.rhs > 0])
    report = BoundReport(kind=kind, exponent=exponent, gamma=gamma, samples=samples)
    if ratios.size == 0:
        report.status = VerdictStatus.PASS
        report.notes.append("all samples vanish identically")
        return report
    report.ratio_min = float(ratios.min())
    report.ratio_max = float(ratios.max())
    report.fitted_constant = report.ratio_max
    report.spread = report.ratio_max / report.ratio_min if report.ratio_min > 0 else math.inf
    finite = bool(np.all(np.isfinite(ratios)) and np.all(ratios > 0))
    report.status = VerdictStatus.PASS if finite and report.spread <= max_spread else VerdictStatus.FAIL
    return report


def sweep_bounds(
    kind: BoundKind,
    exponent: float,
    gamma: float,
    grid: GridSpec,
    samples: int = 100,
    seed: int = 0,
    threads: int = 1,
) -> BoundReport:
    """Evaluate a bound over random nonnegative Gaussian-sum fields in a thread pool."""
    check_exponent(kind, exponent, gamma)
    params = LandauParams(gamma=gamma)

    def one(sample_id: int) -> BoundSample:
        rng = np.random.default_rng([seed, sample_id])
        mixture = random_mixture(
            rng,
            components=int(rng.integers(1, 5)),
            center_scale=grid.extent / 4.0,
            width_range=(0.4, 1.2),
        )
        report = verify_bound(kind, mixture.on_grid(grid), exponent, params, sample_id, workers=1)
        return report.samples[0]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(one, range(samples)))
    report = summarize_samples(kind, exponent, gamma, results)
    logger.info(
        f"Bound {kind.value} exponent={exponent} gamma={gamma}: {samples} samples, "
        f"ratio range [{report.ratio_min:.4g}, {report.ratio_max:.4g}], spread {report.spread:.3g}"
    )
    return report


def check_splitting_window(s: float, p: float, r: float) -> None:
    if not -3.0 < s < 0.0:
        raise ParameterError(f"kernel exponent s must lie in (-3, 0), got {s}")
    critical = 3.0 / (3.0 + s)
    if not (1.0 <= p < critical < r):
        raise ParameterError(
            f"exponents must satisfy 1 <= p < {critical:.6g} < r <= inf, got p={p}, r={r}"
        )


def splitting_rhs(h: ScalarField, s: float, p: float, r: float, radius: float) -> float:
    return radius ** (s + 3.0 - 3.0 / p) * lp_norm(h, p) + radius ** (s + 3.0 - (0.0 if math.isinf(r) else 3.0 / r)) * lp_norm(h, r)


def optimal_splitting_radius(h: ScalarField, s: float, p: float, r: float) -> Tuple[float, float]:
    """Minimiser R* of A R^a + B R^b over R > 0 and the minimum value."""
    a = s + 3.0 - 3.0 / p
    b = s + 3.0 - (0.0 if math.isinf(r) else 3.0 / r)
    A, B = lp_norm(h, p), lp_norm(h, r)
    if A == 0.0 or B == 0.0:
        return math.nan, 0.0
    radius = (-a * A / (b * B)) ** (1.0 / (b - a))
    return radius, A * radius ** a + B * radius ** b


def verify_splitting(
    h: ScalarField,
    s: float,
    p: float,
    r: float,
    radii: Sequence[float],
    workers: Optional[int] = None,
) -> BoundReport:
    """
    Splitting estimate |int h(v - z)|z|^s dz| <= R^(s+3-3/p)|h|_p + R^(s+3-3/r)|h|_r

    Args:
        h: Field on the grid
        s: Kernel exponent in (-3, 0)
        p, r: Exponents with 1 <= p < 3/(3+s) < r <= inf
        radii: Splitting radii swept

    Returns:
        BoundReport with one sample per radius and, in details, the analytic
        optimum over R and the ratio of the sampled minimum to it
    """
    check_splitting_window(s, p, r)
    lhs = float(np.max(np.abs(convolve(KernelSpec(kind="power", exponent=s), h.values, h.grid, workers)[0])))
    samples = []
    for i, radius in enumerate(radii):
        if radius <= 0:
            raise ParameterError(f"splitting radius must be positive, got {radius}")
        rhs = splitting_rhs(h, s, p, r, radius)
        samples.append(
            BoundSample(
                kind=BoundKind.SPLITTING, exponent=p, sample_id=i, lhs=lhs, rhs=rhs,
                ratio=lhs / rhs if rhs > 0 else 0.0,
            )
        )
    report = summarize_samples(BoundKind.SPLITTING, p, s, samples)
    r_star, best = optimal_splitting_radius(h, s, p, r)
    sampled_min = min((smp.rhs for smp in samples), default=0.0)
    report.details = {
        "optimal_radius": r_star,
        "optimal_rhs": best,
        "sampled_min_rhs": sampled_min,
        "sampled_over_optimal": sampled_min / best if best > 0 else 0.0,
    }
    # ratios vary with R; only finiteness is checked
    finite = all(np.isfinite(smp.ratio) and (smp.ratio > 0 or smp.rhs == 0.0) for smp in samples)
    report.status = VerdictStatus.PASS if finite else VerdictStatus.FAIL
    return report
