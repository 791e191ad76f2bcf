"""
Vlasov-Poisson-Landau coupling with no background density

F[rho](x) = C integral (x - z)/|x - z|^3 rho(z) dz, the profile equation at theta = -1/3

    g + (2/3) y.grad_y g - (1/3) w.grad_w g + w.grad_y g + F[rho_g].grad_w g = Q(g, g)

and the log-weighted pairing that forces the mass of a solution to vanish.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from kinetic_selfsim.errors import GridError, ParameterError
from kinetic_selfsim.grid import GridSpec, ScalarField, SeparableField, cutoff_profile, gradient, interpolate
from kinetic_selfsim.kernels import KernelSpec, convolve
from kinetic_selfsim.landau import LOG_FLOOR, LandauOperator
from kinetic_selfsim.limits import extrapolate, extrapolate_table
from kinetic_selfsim.models import (
    EntropyFunctionalReport,
    GaussLawReport,
    LandauParams,
    RefutationOutcome,
    RefutationVerdict,
    SelfSimParams,
    ThetaCase,
    VerdictStatus,
)
from kinetic_selfsim.profile import ProfileDecomposition, TRUNCATION_FRACTIONS, check_profile_admissibility

logger = logging.getLogger(__name__)

VPL_THETA = -1.0 / 3.0
GAUSS_TOLERANCE = 0.02
CHUNK_NODES = 64
RESIDUAL_TERMS = ("identity", "y_transport", "w_dilation", "free_transport", "force", "collision")


class ForceField(BaseModel):
    """Force vector per node, values[k, ix, iy, iz]."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: GridSpec
    values: np.ndarray
    c_force: float = 1.0

    @model_validator(mode="after")
    def _check_shape(self) -> "ForceField":
        if self.values.shape != (3,) + self.grid.shape:
            raise GridError(f"force shape {self.values.shape} does not match grid")
        return self

    def at(self, points: np.ndarray) -> np.ndarray:
        """Spline-interpolated force at (..., 3) points, shape (..., 3)."""
        return np.stack([interpolate(self.grid, self.values[k], points)[0] for k in range(3)], axis=-1)

    def sup(self) -> float:
        return float(np.max(np.sqrt(np.sum(self.values ** 2, axis=0))))


def compute_force(rho: ScalarField, c_force: float = 1.0, workers: Optional[int] = None) -> ForceField:
    """Coulomb force of a spatial density; the singular cell contributes nothing by symmetry."""
    spec = KernelSpec(kind="odd", exponent=-3.0, scale=c_force)
    return ForceField(grid=rho.grid, values=convolve(spec, rho.values, rho.grid, workers), c_force=c_force)


def sphere_rule(polar: int = 16, azimuth: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre in cos(theta) times uniform azimuth on the unit sphere; weights sum to 4 pi."""
    x, w = np.polynomial.legendre.leggauss(polar)
    psi = 2.0 * np.pi * (np.arange(azimuth) + 0.5) / azimuth
    MU, PSI = np.meshgrid(x, psi, indexing="ij")
    st = np.sqrt(1.0 - MU ** 2)
    normals = np.stack([st * np.cos(PSI), st * np.sin(PSI), MU], axis=-1).reshape(-1, 3)
    return normals, np.repeat(w, azimuth) * (2.0 * np.pi / azimuth)


def force_flux(force: ForceField, radius: float, center: Sequence[float] = (0.0, 0.0, 0.0)) -> float:
    normals, weights = sphere_rule()
    values = force.at(np.asarray(center, dtype=float) + radius * normals)
    return float(radius * radius * np.sum(weights * np.sum(values * normals, axis=-1)))


def enclosed_mass(rho: ScalarField, radius: float, center: Sequence[float] = (0.0, 0.0, 0.0), radial: int = 48) -> float:
    """Mass inside a sphere by radial Gauss-Legendre times the sphere rule on interpolated values."""
    normals, weights = sphere_rule()
    x, w = np.polynomial.legendre.leggauss(radial)
    r = 0.5 * radius * (x + 1.0)
    pts = np.asarray(center, dtype=float) + r[:, None, None] * normals[None]
    vals, _ = interpolate(rho.grid, rho.values, pts)
    return float(np.sum(0.5 * radius * w * r * r * (vals @ weights)))


def gauss_law(
    rho: ScalarField,
    radii: Sequence[float] = (1.0, 2.0, 4.0),
    c_force: float = 1.0,
    force: Optional[ForceField] = None,
    tolerance: float = GAUSS_TOLERANCE,
) -> GaussLawReport:
    """Flux of F through spheres against 4 pi C times the enclosed mass."""
    force = force or compute_force(rho, c_force)
    flux, enclosed, errors = [], [], []
    for r in radii:
        phi = force_flux(force, r)
        m = 4.0 * math.pi * c_force * enclosed_mass(rho, r)
        flux.append(phi)
        enclosed.append(m)
        errors.append(abs(phi - m) / abs(m) if m != 0.0 else abs(phi))
    status = VerdictStatus.PASS if all(e <= tolerance for e in errors) else VerdictStatus.FAIL
    logger.info(f"Gauss law C={c_force}: relative errors {[round(e, 6) for e in errors]}")
    return GaussLawReport(c_force=c_force, radii=list(radii), flux=flux, enclosed=enclosed, relative_errors=errors, status=status)


def rescaled_force_identity(
    phi_rho: ScalarField,
    g_rho: ScalarField,
    t: float,
    c_force: float = 1.0,
    mapped_grid: bool = True,
    window: Optional[float] = None,
    workers: Optional[int] = None,
) -> float:
    """
    Mismatch of F[phi + g/(-t)](lambda y) = F[phi](lambda y) + (-t)^(-4/3) F[g](y), lambda = (-t)^(2/3)

    The profile part enters physical space as the density (-t)^(-2) rho_g(x / lambda).
    On the mapped grid the y-nodes land on nodes of the scaled grid and both sides
    agree to rounding; otherwise everything is resampled onto the phi grid.

    Args:
        phi_rho: Background density in x
        g_rho: Profile density in y
        t: Negative time
        window: Only y with |y| <= window are compared, default half the y-extent

    Returns:
        Max relative mismatch over the window
    """
    if t >= 0:
        raise ParameterError(f"t must be negative, got {t}")
    tau = -t
    lam = tau ** (2.0 / 3.0)
    kappa = tau ** -2.0
    window = window if window is not None else 0.5 * g_rho.grid.extent

    y_nodes = g_rho.grid.nodes()
    inside = np.sqrt(np.sum(y_nodes ** 2, axis=-1)) <= window
    profile_force = compute_force(g_rho, c_force, workers).values
    rhs_profile = tau ** (-4.0 / 3.0) * np.moveaxis(profile_force, 0, -1)[inside]

    if mapped_grid:
        grid = g_rho.grid.scaled(lam)
        background = interpolate(phi_rho.grid, phi_rho.values, grid.nodes())[0] if phi_rho.grid != grid else phi_rho.values
        profile = kappa * g_rho.values
    else:
        grid = phi_rho.grid
        background = phi_rho.values
        profile = kappa * interpolate(g_rho.grid, g_rho.values, grid.nodes() / lam)[0]

    lhs_field = compute_force(ScalarField(grid=grid, values=background + profile), c_force, workers)
    rhs_field = compute_force(ScalarField(grid=grid, values=background), c_force, workers)
    if mapped_grid:
        lhs = np.moveaxis(lhs_field.values, 0, -1)[inside]
        rhs = np.moveaxis(rhs_field.values, 0, -1)[inside] + rhs_profile
    else:
        points = lam * y_nodes[inside]
        lhs = lhs_field.at(points)
        rhs = rhs_field.at(points) + rhs_profile
    scale = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    if scale == 0.0:
        return float(np.max(np.abs(lhs))) if lhs.size else 0.0
    return float(np.max(np.abs(lhs - rhs)) / scale)


def _require_integrable(g: ProfileDecomposition) -> None:
    if g.has_q:
        raise ParameterError("the force needs a spatially integrable profile; q must vanish")


def profile_density(g: ProfileDecomposition) -> ScalarField:
    """rho_g(y) = integral of g over w."""
    values = np.zeros(g.y_grid.shape)
    if g.h is not None:
        masses = g.h.w_factors.sum(axis=(1, 2, 3)) * g.w_grid.cell_volume
        values = np.tensordot(masses, g.h.y_factors, axes=(0, 0))
    return ScalarField(grid=g.y_grid, values=values)


def _separable(g: ProfileDecomposition, rows: List[Tuple[np.ndarray, np.ndarray]]) -> SeparableField:
    if not rows:
        rows = [(np.zeros(g.y_grid.shape), np.zeros(g.w_grid.shape))]
    return SeparableField(
        y_grid=g.y_grid,
        w_grid=g.w_grid,
        y_factors=np.stack([a for a, _ in rows]),
        w_factors=np.stack([b for _, b in rows]),
    )


def vpl_residual_terms(
    g: ProfileDecomposition,
    c_force: float = 1.0,
    landau: Optional[LandauParams] = None,
    workers: Optional[int] = None,
) -> Dict[str, SeparableField]:
    """
    Every term of the VPL profile residual as its own separable field

    Keys: identity, y_transport, w_dilation, free_transport, force and collision,
    the last one carrying the minus sign of -Q(g, g).
    """
    _require_integrable(g)
    landau = landau or LandauParams(gamma=-3.0)
    rows: Dict[str, List[Tuple[np.ndarray, np.ndarray]]] = {name: [] for name in RESIDUAL_TERMS}
    if g.h is not None and not g.h.is_zero():
        hy, hw = g.y_grid.spacing, g.w_grid.spacing
        y_mesh = np.stack(g.y_grid.mesh())
        w_mesh = np.stack(g.w_grid.mesh())
        force = compute_force(profile_density(g), c_force, workers).values
        pairs = list(zip(g.h.y_factors, g.h.w_factors))
        for a, b in pairs:
            grad_a = gradient(a, hy)
            grad_b = gradient(b, hw)
            rows["identity"].append((a, b))
            rows["y_transport"].append(((1.0 + VPL_THETA) * np.einsum("i...,i...->...", y_mesh, grad_a), b))
            rows["w_dilation"].append((a, VPL_THETA * np.einsum("i...,i...->...", w_mesh, grad_b)))
            for i in range(3):
                rows["free_transport"].append((grad_a[i], w_mesh[i] * b))
                rows["force"].append((force[i] * a, grad_b[i]))
        op = LandauOperator(landau, workers)
        for k, (a, b) in enumerate(pairs):
            for m in range(k, len(pairs)):
                c, d = pairs[m]
                fb, fd = ScalarField(grid=g.w_grid, values=b), ScalarField(grid=g.w_grid, values=d)
                if k == m:
                    q = op.divergence_form(fb, fb).values
                else:
                    q = op.divergence_form(fb, fd).values + op.divergence_form(fd, fb).values
                rows["collision"].append((a * c, -q))
    return {name: _separable(g, r) for name, r in rows.items()}


def vpl_profile_residual(
    g: ProfileDecomposition,
    c_force: float = 1.0,
    landau: Optional[LandauParams] = None,
    workers: Optional[int] = None,
) -> SeparableField:
    terms = vpl_residual_terms(g, c_force, landau, workers)
    return SeparableField(
        y_grid=g.y_grid,
        w_grid=g.w_grid,
        y_factors=np.concatenate([t.y_factors for t in terms.values()]),
        w_factors=np.concatenate([t.w_factors for t in terms.values()]),
    )


def _fit_decay(radii: Sequence[float], values: Sequence[float]) -> Optional[float]:
    r = np.asarray(radii, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    ok = v > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(r[ok]), np.log(v[ok]), 1)[0])


def vpl_entropy_functional(
    g: ProfileDecomposition,
    radii_w: Optional[Sequence[float]] = None,
    radii_y: Optional[Sequence[float]] = None,
    c_force: float = 1.0,
    floor: Optional[float] = LOG_FLOOR,
    landau: Optional[LandauParams] = None,
    workers: Optional[int] = None,
) -> EntropyFunctionalReport:
    """
    Pair the residual with chi(w/R1) chi(y/R2) log g and take R1, then R2, to infinity

    For a solution the pairing vanishes, while integration by parts turns it into
    the mass of g plus the entropy dissipation plus cutoff remainders; so a
    positive profile cannot solve the equation. Reports the three parts and the gap
    mass + dissipation, which a solution would need to be nonpositive.

    Args:
        g: Profile without the y-independent part
        radii_w, radii_y: Increasing cutoff radii, default fractions of half the extents
        floor: Lower bound inside the logarithm, None to disable

    Returns:
        EntropyFunctionalReport with the LimitReport of the whole pairing
    """
    radii_w = list(radii_w) if radii_w is not None else [f * g.w_grid.extent / 2.0 for f in TRUNCATION_FRACTIONS]
    radii_y = list(radii_y) if radii_y is not None else [f * g.y_grid.extent / 2.0 for f in TRUNCATION_FRACTIONS]
    if g.is_zero():
        zeros = [0.0] * len(radii_y)
        return EntropyFunctionalReport(
            limit=extrapolate(radii_y, zeros), mass=0.0, dissipation=0.0, remainder=0.0, gap=0.0,
            terms={name: 0.0 for name in RESIDUAL_TERMS},
        )
    terms = vpl_residual_terms(g, c_force, landau, workers)

    chi_w = np.stack([cutoff_profile(g.w_grid.radius() / r)[0].ravel() for r in radii_w])
    chi_y = np.stack([cutoff_profile(g.y_grid.radius() / r)[0].ravel() for r in radii_y])
    a = g.h.y_factors.reshape(g.h.rank, -1)
    b = g.h.w_factors.reshape(g.h.rank, -1)
    dv = g.y_grid.cell_volume * g.w_grid.cell_volume
    shape = (len(radii_y), len(radii_w))

    tables = {name: np.zeros(shape) for name in RESIDUAL_TERMS}
    mass = np.zeros(shape)
    tested = {
        name: (t.y_factors.reshape(t.rank, -1), (chi_w[:, None, :] * t.w_factors.reshape(t.rank, -1)[None]))
        for name, t in terms.items()
    }
    for start in range(0, a.shape[1], CHUNK_NODES):
        values = a[:, start:start + CHUNK_NODES].T @ b
        if floor is not None:
            log_g = np.log(np.maximum(values, floor))
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                log_g = np.log(values)
        cy = chi_y[:, start:start + CHUNK_NODES]
        mass += cy @ values @ chi_w.T
        for name, (ty, tw) in tested.items():
            # (chunk, rows, radii_w): integral over w of chi(w/R1) log g B_r
            inner = np.einsum("cw,jrw->crj", log_g, tw)
            tables[name] += np.einsum("yc,rc,crj->yj", cy, ty[:, start:start + CHUNK_NODES], inner)
    mass *= dv
    for name in tables:
        tables[name] *= dv

    total = sum(tables.values())
    dissipation = tables["collision"]
    remainder = total - mass - dissipation

    report = extrapolate_table(radii_y, radii_w, total, outer_label="R_y")
    mass_limit = extrapolate_table(radii_y, radii_w, mass, outer_label="R_y").limit
    dissipation_limit = extrapolate_table(radii_y, radii_w, dissipation, outer_label="R_y").limit
    gap = None
    if mass_limit is not None and dissipation_limit is not None:
        gap = mass_limit + dissipation_limit
        report.predicted = gap
        if report.limit is not None:
            report.relative_error = abs(report.limit - gap) / max(abs(gap), 1e-300)
    diagonal = [float(remainder[k, k]) for k in range(min(shape))]
    result = EntropyFunctionalReport(
        limit=report,
        mass=mass_limit,
        dissipation=dissipation_limit,
        remainder=float(remainder[-1, -1]),
        gap=gap,
        remainder_slope=_fit_decay([radii_y[k] for k in range(len(diagonal))], diagonal),
        terms={name: float(tab[-1, -1]) for name, tab in tables.items()},
    )
    logger.info(
        f"VPL entropy pairing: mass {result.mass}, dissipation {result.dissipation}, "
        f"remainder {result.remainder:.3g}, gap {result.gap}"
    )
    return result


def entropy_norm(g: ProfileDecomposition) -> float:
    """|| (1+|w|)(g log g - g) ||_1, finite for admissible profiles."""
    if g.h is None:
        return 0.0
    a = g.h.y_factors.reshape(g.h.rank, -1)
    b = g.h.w_factors.reshape(g.h.rank, -1)
    weight = 1.0 + g.w_grid.radius().ravel()
    total = 0.0
    for start in range(0, a.shape[1], CHUNK_NODES):
        values = np.maximum(a[:, start:start + CHUNK_NODES].T @ b, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            entropy = np.where(values > 0, values * np.log(np.where(values > 0, values, 1.0)), 0.0) - values
        total += float(np.sum(weight[None] * np.abs(entropy)))
    return total * g.y_grid.cell_volume * g.w_grid.cell_volume


def vpl_refutation(
    g: ProfileDecomposition,
    c_force: float = 1.0,
    landau: Optional[LandauParams] = None,
    radii_w: Optional[Sequence[float]] = None,
    radii_y: Optional[Sequence[float]] = None,
    workers: Optional[int] = None,
) -> RefutationVerdict:
    """A positive admissible profile is refuted when the entropy pairing leaves a positive mass."""
    base = dict(theta=VPL_THETA, gamma=-3.0, case=ThetaCase.MINUS_THIRD, test="entropy")
    if g.is_zero():
        return RefutationVerdict(**base, verdict=RefutationOutcome.TRIVIAL, details={"message": "g vanishes identically"})
    _require_integrable(g)
    admissibility = check_profile_admissibility(g, SelfSimParams(gamma=-3.0, theta=VPL_THETA))
    norm = entropy_norm(g)
    if admissibility.status != VerdictStatus.PASS or not math.isfinite(norm):
        return RefutationVerdict(
            **base, verdict=RefutationOutcome.INCONCLUSIVE, details={"failed": admissibility.failed, "entropy_norm": norm}
        )
    report = vpl_entropy_functional(g, radii_w, radii_y, c_force=c_force, landau=landau, workers=workers)
    details: Dict[str, object] = {
        "mass": report.mass,
        "dissipation": report.dissipation,
        "remainder": report.remainder,
        "entropy_norm": norm,
    }
    if report.mass is None or report.gap is None:
        details["notes"] = report.limit.notes
        return RefutationVerdict(**base, verdict=RefutationOutcome.INCONCLUSIVE, details=details)
    if report.mass > 0 and report.gap > 0:
        details["message"] = f"refuted: integral of g is {report.mass:.6g} > 0 while a solution needs it ≤ 0"
        return RefutationVerdict(
            **base, predicted=0.0, measured=report.gap, verdict=RefutationOutcome.REFUTED, details=details
        )
    return RefutationVerdict(**base, measured=report.gap, verdict=RefutationOutcome.INCONCLUSIVE, details=details)
