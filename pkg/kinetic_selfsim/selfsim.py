"""
Self-similar variables y = x/(-t)^(1+theta), w = v/(-t)^theta and the error terms of
the expanded Landau equation.

Backgrounds phi are closed-form products of a Gaussian in x and a Gaussian in v
(PhiModel), so every phi-dependent coefficient is evaluated exactly at the
rescaled velocities (-t)^theta w.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from kinetic_selfsim.densities import GaussianMixture
from kinetic_selfsim.errors import InsufficientHistoryError, ParameterError
from kinetic_selfsim.grid import GridSpec, ScalarField, SeparableField, hessian, interpolate
from kinetic_selfsim.landau import LandauOperator
from kinetic_selfsim.models import (
    DecayReport,
    DecayTerm,
    LandauParams,
    SelfSimParams,
    SymmetryReport,
    ThetaMode,
    ThetaVerdict,
    VerdictStatus,
)

logger = logging.getLogger(__name__)

SLOPE_FRACTION = 0.9
SYMMETRY_TOLERANCE = 3.0
HYPOTHESIS_EXPONENTS = (1.0, 2.0, math.inf)

E1_TERMS = ("E1:a_phi", "E1:c_phi", "E1:c_g")
E2_TERMS = ("E2:a_g", "E2:transport", "E2:collision")


def check_theta_admissible(params: SelfSimParams, mode: ThetaMode) -> ThetaVerdict:
    """
    Check the self-similar exponent against the constraints of each setting

    Args:
        params: gamma, theta and, for Boltzmann modes, s_exp
        mode: Equation and homogeneity

    Returns:
        ThetaVerdict listing every violated constraint by name
    """
    theta, gamma = params.theta, params.gamma
    violations: List[str] = []
    if not theta > -1.0:
        violations.append("θ > −1")
    if not 1.0 + theta * (3.0 + gamma) > 0.0:
        violations.append("1 + θ(3+γ) > 0")

    if mode in (ThetaMode.LANDAU_INHOMOGENEOUS, ThetaMode.LANDAU_HOMOGENEOUS):
        if not theta < 0.5:
            violations.append("θ < 1/2")
    elif mode in (ThetaMode.BOLTZMANN_INHOMOGENEOUS, ThetaMode.BOLTZMANN_HOMOGENEOUS):
        s = params.s_exp
        if s is None or not 0.0 < s < 1.0:
            violations.append("s ∈ (0, 1)")
        elif not theta < 1.0 / (2.0 * s):
            violations.append("θ < 1/(2s)")
    elif mode == ThetaMode.VPL:
        if gamma != -3.0:
            violations.append("γ = −3")
        if not math.isclose(theta, -1.0 / 3.0, abs_tol=1e-12):
            violations.append("θ = −1/3")

    if mode in (ThetaMode.LANDAU_HOMOGENEOUS, ThetaMode.BOLTZMANN_HOMOGENEOUS):
        if gamma == 0.0 or not theta >= 1.0 / abs(gamma):
            violations.append("θ ≥ 1/|γ|")

    if violations:
        logger.info(f"theta={theta} gamma={gamma} rejected for {mode.value}: {', '.join(violations)}")
    return ThetaVerdict(
        mode=mode,
        theta=theta,
        gamma=gamma,
        s_exp=params.s_exp,
        admissible=not violations,
        violations=violations,
    )


def _tau(params: SelfSimParams) -> float:
    if params.t >= 0:
        raise ParameterError(f"self-similar variables need t < 0, got {params.t}")
    return -params.t


def to_selfsim(x: np.ndarray, v: np.ndarray, params: SelfSimParams) -> Tuple[np.ndarray, np.ndarray]:
    tau = _tau(params)
    return (
        np.asarray(x, dtype=float) / tau ** (1.0 + params.theta),
        np.asarray(v, dtype=float) / tau ** params.theta,
    )


def from_selfsim(y: np.ndarray, w: np.ndarray, params: SelfSimParams) -> Tuple[np.ndarray, np.ndarray]:
    tau = _tau(params)
    return (
        np.asarray(y, dtype=float) * tau ** (1.0 + params.theta),
        np.asarray(w, dtype=float) * tau ** params.theta,
    )


def expansion_exponents(theta: float, gamma: float, s_exp: Optional[float] = None) -> Dict[str, float]:
    """
    Powers of (-t) multiplying the error terms of the expanded equation

    Without s_exp these are the Landau powers; with s_exp the Boltzmann ones,
    which reduce to the Landau powers at s = 1.
    """
    if s_exp is None:
        return {
            "a_phi_D2g": 1.0 - 2.0 * theta,
            "c_phi_g": 1.0,
            "c_g_phi": 1.0 + theta * (3.0 + gamma),
            "a_g_D2phi": 1.0 + theta * (5.0 + gamma),
            "phi_equation": 2.0 + theta * (3.0 + gamma),
        }
    return {
        "phi_g_angular": 1.0 - 2.0 * s_exp * theta,
        "g_phi_angular": 1.0 + theta * (gamma + 2.0 * s_exp + 3.0),
        "phi_g_cancellation": 1.0,
        "g_phi_cancellation": 1.0 + theta * (3.0 + gamma),
        "phi_equation": 2.0 + theta * (3.0 + gamma),
    }


class PhiModel(BaseModel):
    """
    Background phi(t, x, v) = amplitude (-t)^(-beta) exp(-|x - x0|^2 / 2 sigma_x^2) M(v)

    M is the unit-mass Maxwellian of width sigma_v.
    """

    model_config = ConfigDict(frozen=True)

    beta: float = Field(0.0, ge=0.0)
    amplitude: float = Field(1.0, ge=0.0)
    sigma_x: float = Field(1.0, gt=0.0)
    sigma_v: float = Field(3.0, gt=0.0)
    x0: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def velocity_mixture(self) -> GaussianMixture:
        return GaussianMixture.maxwellian(mass=1.0, width=self.sigma_v)

    def amplitude_at(self, t: float, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - np.asarray(self.x0)
        return float(self.amplitude * (-t) ** (-self.beta) * np.exp(-0.5 * (d @ d) / self.sigma_x ** 2))

    def amplitude_gradient(self, t: float, x: np.ndarray) -> np.ndarray:
        d = np.asarray(x, dtype=float) - np.asarray(self.x0)
        return -self.amplitude_at(t, x) * d / self.sigma_x ** 2

    def __call__(self, t: float, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.amplitude_at(t, x) * self.velocity_mixture()(v)

    def decay_exponents(self, theta: float, gamma: float) -> Dict[str, float]:
        """
        Net power of (-t) in each weighted norm of the decay hypothesis

        For every (p, i, l, j) with 1 + theta(3+gamma) - 3 theta/p >= 0 the weighted
        norm behaves like (-t)^e; the hypothesis holds exactly when every e > 0.
        A time derivative of a time-independent model vanishes identically (e = inf).
        """
        base0 = 1.0 + theta * (3.0 + gamma)
        out: Dict[str, float] = {}
        for p in HYPOTHESIS_EXPONENTS:
            base = base0 - (0.0 if math.isinf(p) else 3.0 * theta / p)
            if base < 0.0:
                continue
            for i in (0, 1):
                for l in (0, 1):
                    for j in (0, 1, 2):
                        key = f"p={p:g},i={i},l={l},j={j}"
                        if i == 1 and self.beta == 0.0:
                            out[key] = math.inf
                        else:
                            out[key] = base + (1.0 + theta) * l + theta * j - self.beta
        return out

    def critical_beta(self, theta: float, gamma: float) -> float:
        """Largest blow-up rate beta for which the decay hypothesis still holds (exclusive)."""
        steady = self.model_copy(update={"beta": 0.0})
        finite = [e for e in steady.decay_exponents(theta, gamma).values() if math.isfinite(e)]
        return min(finite) if finite else math.inf


def check_decay_hypothesis(phi: PhiModel, params: SelfSimParams) -> DecayReport:
    exponents = phi.decay_exponents(params.theta, params.gamma)
    terms = [
        DecayTerm(name=name, predicted_exponent=e, decaying=e > 0.0) for name, e in exponents.items()
    ]
    offending = [t.name for t in terms if not t.decaying]
    return DecayReport(
        theta=params.theta,
        gamma=params.gamma,
        beta=phi.beta,
        terms=terms,
        offending=offending,
        status=VerdictStatus.FAIL if offending else VerdictStatus.PASS,
    )


class RescaledField(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    field: Union[ScalarField, SeparableField]
    time: float
    prefactor: float
    outside_fraction: float = 0.0


def _resample(grid: GridSpec, values: np.ndarray, factor: float) -> Tuple[np.ndarray, float]:
    """Values at factor * node on the same grid, zero outside the source domain."""
    out, outside = interpolate(grid, values, factor * grid.nodes(), order=3)
    return out, float(outside.mean())


def rescale_solution(
    f: Union[ScalarField, SeparableField],
    params: SelfSimParams,
    time: float,
    mapped_grid: bool = True,
) -> RescaledField:
    """
    Scaling symmetry f_{lambda,alpha}(t, x, v) = lambda^(alpha+3+gamma) f(lambda^alpha t, lambda^(1+alpha) x, lambda v)

    Args:
        f: Velocity field (homogeneous) or separable field in (x, v)
        params: lambda_, alpha and gamma are used
        time: Time of the snapshot f; the result lives at time / lambda^alpha
        mapped_grid: Put the result on the grid scaled by 1/lambda, which is exact;
            otherwise resample onto the source grid by cubic splines

    Returns:
        RescaledField; points resampled from outside the source domain are zero
        and counted in outside_fraction
    """
    lam, alpha = params.lambda_, params.alpha
    prefactor = lam ** (alpha + 3.0 + params.gamma)
    new_time = time / lam ** alpha
    outside = 0.0

    if isinstance(f, ScalarField):
        if mapped_grid:
            out: Union[ScalarField, SeparableField] = ScalarField(
                grid=f.grid.scaled(1.0 / lam), values=prefactor * f.values
            )
        else:
            vals, outside = _resample(f.grid, f.values, lam)
            out = f.like(prefactor * vals)
    else:
        x_factor = lam ** (1.0 + alpha)
        if mapped_grid:
            out = SeparableField(
                y_grid=f.y_grid.scaled(1.0 / x_factor),
                w_grid=f.w_grid.scaled(1.0 / lam),
                y_factors=f.y_factors.copy(),
                w_factors=prefactor * f.w_factors,
            )
        else:
            ys, ws, fractions = [], [], []
            for k in range(f.rank):
                y_vals, y_out = _resample(f.y_grid, f.y_factors[k], x_factor)
                w_vals, w_out = _resample(f.w_grid, f.w_factors[k], lam)
                ys.append(y_vals)
                ws.append(prefactor * w_vals)
                fractions.append(max(y_out, w_out))
            outside = max(fractions, default=0.0)
            out = SeparableField(
                y_grid=f.y_grid, w_grid=f.w_grid, y_factors=np.stack(ys), w_factors=np.stack(ws)
            )

    if outside > 0:
        logger.warning(f"{outside:.1%} of nodes were resampled from outside the source domain")
    return RescaledField(field=out, time=new_time, prefactor=prefactor, outside_fraction=outside)


def rescale_history(history: Sequence[Tuple[float, ScalarField]], params: SelfSimParams) -> List[Tuple[float, ScalarField]]:
    out = []
    for time, field in history:
        rescaled = rescale_solution(field, params, time)
        out.append((rescaled.time, rescaled.field))
    return out


def _centered_residual(history: Sequence[Tuple[float, ScalarField]], op: LandauOperator) -> float:
    """sup over interior snapshots of |(f_{k+1} - f_{k-1}) / (t_{k+1} - t_{k-1}) - Q(f_k, f_k)|."""
    worst = 0.0
    for k in range(1, len(history) - 1):
        (t0, f0), (_, f1), (t2, f2) = history[k - 1], history[k], history[k + 1]
        rate = (f2.values - f0.values) / (t2 - t0)
        worst = max(worst, float(np.max(np.abs(rate - op.divergence_form(f1, f1).values))))
    return worst


def symmetry_residual(
    history: Sequence[Tuple[float, ScalarField]],
    landau: LandauParams,
    params: SelfSimParams,
    workers: Optional[int] = None,
) -> SymmetryReport:
    """
    Compare the time residual of a homogeneous history with that of its rescaling

    Both sides of the homogeneous equation pick up lambda^(2 alpha + 3 + gamma), so
    after dividing by it the two residuals should agree.
    """
    if len(history) < 3:
        raise InsufficientHistoryError("the centered time residual needs at least three snapshots")
    if landau.gamma != params.gamma:
        raise ParameterError(f"gamma differs: Landau {landau.gamma}, self-similar {params.gamma}")
    op = LandauOperator(landau, workers)
    original = _centered_residual(history, op)
    rescaled = _centered_residual(rescale_history(history, params), op)
    factor = params.lambda_ ** (2.0 * params.alpha + 3.0 + params.gamma)
    normalized = rescaled / factor
    ratio = normalized / original if original > 0 else (0.0 if normalized == 0 else math.inf)
    status = VerdictStatus.PASS if ratio <= SYMMETRY_TOLERANCE else VerdictStatus.FAIL
    logger.info(f"Symmetry residual: original {original:.3e}, rescaled/factor {normalized:.3e}, ratio {ratio:.3f}")
    return SymmetryReport(
        lambda_=params.lambda_,
        alpha=params.alpha,
        factor=factor,
        original=original,
        rescaled=rescaled,
        ratio=ratio,
        status=status,
    )


def _closed_form_c(mix: GaussianMixture, points: np.ndarray, landau: LandauParams) -> np.ndarray:
    if landau.is_coulomb:
        return landau.c_value * mix(points)
    return landau.c_value * mix.riesz_potential(points, landau.gamma)


def _node_points(grid: GridSpec, factor: float = 1.0) -> np.ndarray:
    return factor * grid.nodes()


def _as_landau(params: SelfSimParams, landau: Optional[LandauParams]) -> LandauParams:
    if landau is None:
        return LandauParams(gamma=params.gamma)
    if landau.gamma != params.gamma:
        raise ParameterError(f"gamma differs: Landau {landau.gamma}, self-similar {params.gamma}")
    return landau


def rescaled_coeff_identities(
    g: ScalarField,
    phi: PhiModel,
    params: SelfSimParams,
    landau: Optional[LandauParams] = None,
    y: Sequence[float] = (0.0, 0.0, 0.0),
    workers: Optional[int] = None,
) -> Dict[str, float]:
    """
    Check a^f = a^phi + (-t)^(2 theta - 1) a^g and c^f = c^phi + (-t)^(-1) c^g

    The left side convolves the physical profile (-t)^(-1-theta(3+gamma)) g(v/(-t)^theta)
    on the grid of physical velocities (-t)^theta w; the right side convolves g on
    the w-grid. The phi part is closed-form on both sides.

    Returns:
        Maximum relative mismatch of each identity at the nodes of g's grid
    """
    landau = _as_landau(params, landau)
    tau = _tau(params)
    theta, gamma = params.theta, params.gamma
    op = LandauOperator(landau, workers)

    x = tau ** (1.0 + theta) * np.asarray(y, dtype=float)
    amp = phi.amplitude_at(params.t, x)
    mix = phi.velocity_mixture()
    v_pts = _node_points(g.grid, tau ** theta)
    a_phi = np.moveaxis(amp * landau.a_const * mix.landau_coefficient(v_pts, gamma + 2.0), (-2, -1), (0, 1))
    c_phi = amp * _closed_form_c(mix, v_pts, landau)

    physical = ScalarField(
        grid=g.grid.scaled(tau ** theta),
        values=tau ** (-1.0 - theta * (3.0 + gamma)) * g.values,
    )
    a_lhs = a_phi + op.coeff_a(physical).values
    c_lhs = c_phi + op.coeff_c(physical).values
    a_rhs = a_phi + tau ** (2.0 * theta - 1.0) * op.coeff_a(g).values
    c_rhs = c_phi + op.coeff_c(g).values / tau

    def mismatch(lhs: np.ndarray, rhs: np.ndarray) -> float:
        scale = float(np.max(np.abs(rhs)))
        return float(np.max(np.abs(lhs - rhs))) / scale if scale > 0 else float(np.max(np.abs(lhs)))

    return {"a": mismatch(a_lhs, a_rhs), "c": mismatch(c_lhs, c_rhs)}


def error_terms(
    g: ScalarField,
    phi: PhiModel,
    params: SelfSimParams,
    landau: Optional[LandauParams] = None,
    y: Sequence[float] = (0.0, 0.0, 0.0),
    workers: Optional[int] = None,
) -> Dict[str, np.ndarray]:
    """
    The six terms of E1 and E2 at time params.t and position y, on g's w-grid

    phi and its coefficients are evaluated at (t, (-t)^(1+theta) y, (-t)^theta w).
    """
    landau = _as_landau(params, landau)
    tau = _tau(params)
    theta, gamma = params.theta, params.gamma
    op = LandauOperator(landau, workers)
    h = g.grid.spacing

    x = tau ** (1.0 + theta) * np.asarray(y, dtype=float)
    amp = phi.amplitude_at(params.t, x)
    mix = phi.velocity_mixture()
    w_pts = _node_points(g.grid)
    v_pts = tau ** theta * w_pts

    phi_v = amp * mix(v_pts)
    hess_phi = np.moveaxis(amp * mix.hessian(v_pts), (-2, -1), (0, 1))
    a_phi = np.moveaxis(amp * landau.a_const * mix.landau_coefficient(v_pts, gamma + 2.0), (-2, -1), (0, 1))
    c_phi = amp * _closed_form_c(mix, v_pts, landau)
    hess_g = hessian(g.values, h)
    a_g = op.coeff_a(g).values
    c_g = op.coeff_c(g).values

    dt_phi = phi.beta / tau * phi_v
    transport = np.einsum("...i,i->...", v_pts, phi.amplitude_gradient(params.t, x)) * mix(v_pts)
    # a^M : D2 M + c_derived(M) M vanishes identically for a Maxwellian M
    derived = LandauParams(gamma=landau.gamma, a_const=landau.a_const).c_value
    q_phi = (1.0 - derived / landau.c_value) * c_phi * phi_v

    return {
        "E1:a_phi": -tau ** (1.0 - 2.0 * theta) * np.einsum("ij...,ij...->...", a_phi, hess_g),
        "E1:c_phi": -tau * c_phi * g.values,
        "E1:c_g": -tau ** (1.0 + theta * (3.0 + gamma)) * c_g * phi_v,
        "E2:a_g": -tau ** (1.0 + theta * (5.0 + gamma)) * np.einsum("ij...,ij...->...", a_g, hess_phi),
        "E2:transport": tau ** (2.0 + theta * (3.0 + gamma)) * (dt_phi + transport),
        "E2:collision": -tau ** (2.0 + theta * (3.0 + gamma)) * q_phi,
    }


def error_E1(g: ScalarField, phi: PhiModel, params: SelfSimParams, landau: Optional[LandauParams] = None, y: Sequence[float] = (0.0, 0.0, 0.0)) -> ScalarField:
    terms = error_terms(g, phi, params, landau, y)
    return g.like(sum(terms[name] for name in E1_TERMS))


def error_E2(g: ScalarField, phi: PhiModel, params: SelfSimParams, landau: Optional[LandauParams] = None, y: Sequence[float] = (0.0, 0.0, 0.0)) -> ScalarField:
    terms = error_terms(g, phi, params, landau, y)
    return g.like(sum(terms[name] for name in E2_TERMS))


def predicted_error_exponents(phi: PhiModel, theta: float, gamma: float) -> Dict[str, float]:
    """Power of (-t) of every error term for the model background, after the (-t)^(-beta) growth."""
    b = phi.beta
    transport = 2.0 + theta * (4.0 + gamma) - b
    if b > 0:
        transport = min(transport, 1.0 + theta * (3.0 + gamma) - b)
    out = {
        "E1:a_phi": 1.0 - 2.0 * theta - b,
        "E1:c_phi": 1.0 - b,
        "E1:c_g": 1.0 + theta * (3.0 + gamma) - b,
        "E2:a_g": 1.0 + theta * (5.0 + gamma) - b,
        "E2:transport": transport,
        "E2:collision": 2.0 + theta * (3.0 + gamma) - 2.0 * b,
    }
    out["E1"] = min(out[name] for name in E1_TERMS)
    out["E2"] = min(out[name] for name in E2_TERMS)
    return out


def _sample_positions(radius: float) -> List[np.ndarray]:
    positions = [np.zeros(3)]
    for k in range(3):
        for sign in (1.0, -1.0):
            e = np.zeros(3)
            e[k] = sign * radius
            positions.append(e)
    return positions


def _fit_slope(taus: np.ndarray, sups: np.ndarray) -> Optional[float]:
    if not np.any(sups > 0):
        return None
    logs = np.log(np.maximum(sups, np.finfo(float).tiny))
    return float(np.polyfit(np.log(taus), logs, 1)[0])


def verify_error_decay(
    g: ScalarField,
    phi: PhiModel,
    params: SelfSimParams,
    t_sequence: Sequence[float],
    landau: Optional[LandauParams] = None,
    y_radius: float = 1.0,
    w_radius: float = 4.0,
    threads: int = 1,
) -> DecayReport:
    """
    Fit the decay of sup|E1|, sup|E2| and of each of their terms as t -> 0

    Suprema run over |y| <= y_radius (the origin and six axis points) and grid
    nodes with |w| <= w_radius. A term decays when its fitted log-log slope is
    positive and at least 0.9 times the predicted power.

    Args:
        g: Profile on the w-grid (taken y-independent)
        phi: Background model
        params: gamma and theta; params.t is ignored
        t_sequence: Negative times approaching zero

    Returns:
        DecayReport whose offending list names every non-decaying term
    """
    if len(t_sequence) < 2:
        raise ParameterError("at least two times are needed to fit a decay rate")
    if any(t >= 0 for t in t_sequence):
        raise ParameterError("all times must be negative")
    landau = _as_landau(params, landau)
    mask = g.grid.radius() <= w_radius
    positions = _sample_positions(y_radius)
    names = list(E1_TERMS) + list(E2_TERMS)

    def sups_at(t: float) -> Dict[str, float]:
        at_t = params.model_copy(update={"t": t})
        out = {name: 0.0 for name in names + ["E1", "E2"]}
        for y in positions:
            terms = error_terms(g, phi, at_t, landau, y, workers=1)
            for name in names:
                out[name] = max(out[name], float(np.max(np.abs(terms[name][mask]))))
            e1 = sum(terms[name] for name in E1_TERMS)
            e2 = sum(terms[name] for name in E2_TERMS)
            out["E1"] = max(out["E1"], float(np.max(np.abs(e1[mask]))))
            out["E2"] = max(out["E2"], float(np.max(np.abs(e2[mask]))))
        return out

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(sups_at, t_sequence))

    taus = -np.asarray(t_sequence, dtype=float)
    predicted = predicted_error_exponents(phi, params.theta, params.gamma)
    terms = []
    for name in ["E1", "E2"] + names:
        sups = np.array([row[name] for row in rows])
        slope = _fit_slope(taus, sups)
        expected = predicted[name]
        if slope is None:
            decaying = True
        else:
            decaying = slope > 0.0 and (expected <= 0.0 or slope >= SLOPE_FRACTION * expected)
        terms.append(DecayTerm(name=name, predicted_exponent=expected, measured_slope=slope, decaying=decaying))
        logger.debug(f"{name}: sups {sups.tolist()}, slope {slope}, predicted {expected:.4g}")

    offending = [t.name for t in terms if not t.decaying]
    if offending:
        logger.warning(f"Non-decaying error terms at theta={params.theta}, beta={phi.beta}: {offending}")
    return DecayReport(
        theta=params.theta,
        gamma=params.gamma,
        beta=phi.beta,
        terms=terms,
        offending=offending,
        status=VerdictStatus.FAIL if offending else VerdictStatus.PASS,
    )
