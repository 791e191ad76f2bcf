"""
Explicit time stepping of the homogeneous Landau equation df/dt = Q(f, f)
with conservation monitors and a Type I blow-up rate fit.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize_scalar

from kinetic_selfsim.errors import InsufficientHistoryError, ParameterError, StabilityError
from kinetic_selfsim.grid import WEIGHT_ENERGY, MatrixField, ScalarField, weight_momentum
from kinetic_selfsim.landau import LandauOperator
from kinetic_selfsim.models import BlowupReport, BlowupTrend, LandauParams, MonitorRecord

logger = logging.getLogger(__name__)

CFL_FRACTION = 0.2
MIN_HISTORY = 10
NORM_ORDERS = (2.0, 3.0, math.inf)
FIT_TOLERANCE = 0.05
OFFSET_SCAN = 64


class EvolutionState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    f: ScalarField
    time: float = 0.0
    dt: float = Field(..., gt=0)
    step: int = 0
    clipped_mass: float = 0.0
    records: List[MonitorRecord] = []


def monitor(f: ScalarField, step: int = 0, time: float = 0.0, clipped_mass: float = 0.0) -> MonitorRecord:
    """Mass, momentum, energy, entropy and L^q norms of one snapshot."""
    v = f.values
    dv = f.grid.cell_volume
    positive = v > 0
    entropy = float(np.sum(v[positive] * np.log(v[positive])) * dv)
    absv = np.abs(v)
    return MonitorRecord(
        step=step,
        time=time,
        mass=f.integrate(),
        momentum=[f.integrate(weight_momentum(k)) for k in range(3)],
        energy=f.integrate(WEIGHT_ENERGY),
        entropy=entropy,
        sup_norm=float(absv.max()),
        l2_norm=float(np.sqrt(np.sum(absv ** 2) * dv)),
        l3_norm=float(np.cbrt(np.sum(absv ** 3) * dv)),
        clipped_mass=clipped_mass,
    )


def stability_bound(f: ScalarField, op: LandauOperator, a_bar: Optional[MatrixField] = None) -> float:
    """Largest explicit step CFL_FRACTION h^2 / sup|a| for the current coefficient."""
    a_bar = a_bar if a_bar is not None else op.coeff_a(f)
    sup_a = a_bar.spectral_sup()
    if sup_a == 0.0:
        return math.inf
    return CFL_FRACTION * f.grid.spacing ** 2 / sup_a


def step(state: EvolutionState, params: LandauParams, op: Optional[LandauOperator] = None) -> EvolutionState:
    """
    Advance one forward Euler step of the divergence form

    The grid sum of Q vanishes, so the mass changes only through clipping of
    negative undershoots, which is added to the state's clipped_mass.

    Raises:
        StabilityError: if dt exceeds the stability bound of the current field
    """
    op = op or LandauOperator(params)
    a_bar = op.coeff_a(state.f)
    bound = stability_bound(state.f, op, a_bar)
    if state.dt > bound:
        raise StabilityError(f"dt={state.dt:.3g} exceeds the stability bound {bound:.3g}")
    values = state.f.values + state.dt * op.divergence_form(state.f, state.f, a_bar).values
    negative = values < 0
    clipped = 0.0
    if np.any(negative):
        clipped = float(-np.sum(values[negative]) * state.f.grid.cell_volume)
        values = np.where(negative, 0.0, values)
        logger.warning(f"Step {state.step + 1}: clipped {clipped:.3e} of negative mass")
    f_new = state.f.like(values)
    time = state.time + state.dt
    total_clipped = state.clipped_mass + clipped
    return EvolutionState(
        f=f_new,
        time=time,
        dt=state.dt,
        step=state.step + 1,
        clipped_mass=total_clipped,
        records=state.records + [monitor(f_new, state.step + 1, time, total_clipped)],
    )


def run(
    f0: ScalarField,
    params: LandauParams,
    dt: float,
    steps: int,
    workers: Optional[int] = None,
    keep_snapshots: bool = False,
) -> Tuple[EvolutionState, List[Tuple[float, ScalarField]]]:
    """
    Integrate for a fixed number of steps

    Args:
        f0: Initial density
        params: Landau parameters
        dt: Step size
        steps: Number of steps
        keep_snapshots: Also return every (time, field) pair

    Returns:
        Final state (with the monitor records of every step) and the snapshots
    """
    if steps < 1:
        raise ParameterError(f"steps must be positive, got {steps}")
    op = LandauOperator(params, workers)
    state = EvolutionState(f=f0, dt=dt, records=[monitor(f0)])
    snapshots = [(0.0, f0)] if keep_snapshots else []
    for _ in range(steps):
        state = step(state, params, op)
        if keep_snapshots:
            snapshots.append((state.time, state.f))
    first, last = state.records[0], state.records[-1]
    logger.info(
        f"Evolved {steps} steps to t={state.time:.4g}: mass drift {last.mass - first.mass:.3e}, "
        f"entropy {first.entropy:.6g} -> {last.entropy:.6g}, clipped {state.clipped_mass:.3e}"
    )
    return state, snapshots


def rate_slopes(theta: float, gamma: float) -> Dict[float, float]:
    """Growth exponent 1 + theta(3+gamma) - 3 theta/q of the L^q norm, keyed by q."""
    return {q: 1.0 + theta * (3.0 + gamma) - (3.0 * theta / q if math.isfinite(q) else 0.0) for q in NORM_ORDERS}


def _norm_series(records: Sequence[MonitorRecord]) -> Dict[float, np.ndarray]:
    return {
        2.0: np.array([r.l2_norm for r in records]),
        3.0: np.array([r.l3_norm for r in records]),
        math.inf: np.array([r.sup_norm for r in records]),
    }


def _fit_at(blowup_time: float, times: np.ndarray, logs: Dict[float, np.ndarray], gamma: float) -> Tuple[float, float]:
    """Least squares over the constants and theta for a fixed blow-up time; returns (theta, rms)."""
    lt = np.log(blowup_time - times)
    rows, rhs = [], []
    for i, (q, log_norm) in enumerate(logs.items()):
        k = 3.0 + gamma - (3.0 / q if math.isfinite(q) else 0.0)
        block = np.zeros((len(times), len(logs) + 1))
        block[:, i] = 1.0
        block[:, -1] = -k * lt
        rows.append(block)
        rhs.append(log_norm + lt)
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    rms = float(np.sqrt(np.mean((A @ sol - b) ** 2)))
    return float(sol[-1]), rms


def blowup_indicator(records: Sequence[MonitorRecord], gamma: float, min_steps: int = MIN_HISTORY) -> BlowupReport:
    """
    Fit the L^2, L^3 and sup-norm histories to (T - t)^-(1 + theta(3+gamma) - 3 theta/q)

    The blow-up time T is scanned over log-spaced offsets past the last record and
    refined with a bounded scalar minimisation; theta and the constants come from
    linear least squares at each T. A history whose sup norm does not grow has no
    blow-up trend.

    Raises:
        InsufficientHistoryError: with fewer than min_steps records
    """
    if len(records) < min_steps:
        raise InsufficientHistoryError(f"blow-up fitting needs at least {min_steps} records, got {len(records)}")
    times = np.array([r.time for r in records])
    norms = _norm_series(records)
    sup = norms[math.inf]
    if sup[-1] <= sup[0] * (1.0 + 1e-9) or np.any(sup <= 0):
        logger.info("Sup norm does not grow; no blow-up trend")
        return BlowupReport(trend=BlowupTrend.NONE, notes=["sup norm is non-increasing"])

    logs = {q: np.log(v) for q, v in norms.items() if np.all(v > 0)}
    span = float(times[-1] - times[0])
    offsets = np.geomspace(1e-6 * span, 10.0 * span, OFFSET_SCAN)
    scan = [_fit_at(times[-1] + d, times, logs, gamma)[1] for d in offsets]
    best = int(np.argmin(scan))
    lo = offsets[max(best - 1, 0)]
    hi = offsets[min(best + 1, len(offsets) - 1)]
    result = minimize_scalar(
        lambda u: _fit_at(times[-1] + math.exp(u), times, logs, gamma)[1],
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": 1e-10},
    )
    offset = math.exp(result.x)
    blowup_time = float(times[-1] + offset)
    theta, rms = _fit_at(blowup_time, times, logs, gamma)
    rates = {("inf" if not math.isfinite(q) else f"{q:g}"): s for q, s in rate_slopes(theta, gamma).items()}

    notes = []
    trend = BlowupTrend.TYPE_I
    if rms > FIT_TOLERANCE:
        trend = BlowupTrend.INCONCLUSIVE
        notes.append(f"fit residual {rms:.3g} exceeds {FIT_TOLERANCE}")
    if best in (0, len(offsets) - 1):
        trend = BlowupTrend.INCONCLUSIVE
        notes.append("blow-up time at the edge of the scanned range")
    logger.info(f"Blow-up fit: theta={theta:.4f}, T={blowup_time:.6g}, rms={rms:.3g}, trend {trend.value}")
    return BlowupReport(trend=trend, theta=theta, blowup_time=blowup_time, rates=rates, residual=rms, notes=notes)


def manufactured_history(
    theta: float,
    gamma: float,
    blowup_time: float = 1.0,
    times: Optional[Sequence[float]] = None,
    constants: Tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> List[MonitorRecord]:
    """Monitor records whose norms follow the Type I rates exactly."""
    if times is None:
        times = np.linspace(0.0, 0.9 * blowup_time, 20)
    if any(t >= blowup_time for t in times):
        raise ParameterError("every time must precede the blow-up time")
    slopes = rate_slopes(theta, gamma)
    records = []
    for i, t in enumerate(times):
        tau = blowup_time - t
        l2, l3, sup = (c * tau ** -slopes[q] for c, q in zip(constants, NORM_ORDERS))
        records.append(
            MonitorRecord(
                step=i, time=float(t), mass=1.0, momentum=[0.0, 0.0, 0.0], energy=3.0, entropy=0.0,
                sup_norm=sup, l2_norm=l2, l3_norm=l3,
            )
        )
    return records
