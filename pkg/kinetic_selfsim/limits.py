import logging
from typing import Optional, Sequence

import numpy as np

from kinetic_selfsim.errors import ParameterError
from kinetic_selfsim.models import LimitReport, VerdictStatus

logger = logging.getLogger(__name__)

CAUCHY_SLACK = 1e-12


def extrapolate(
    radii: Sequence[float],
    values: Sequence[float],
    predicted: Optional[float] = None,
    tolerance: float = 0.02,
    absolute_floor: float = 1e-12,
) -> LimitReport:
    """
    Limit of a sequence of cutoff integrals as the cutoff radius grows

    The sequence passes the Cauchy test when the magnitudes of successive
    differences do not increase. The limit is the last value plus a geometric
    (Aitken) tail when the last two differences have ratio in (-1, 1).

    Args:
        radii: Increasing cutoff radii
        values: Functional value at each radius
        predicted: Optional predicted limit; sets status pass/fail
        tolerance: Relative tolerance against the prediction
        absolute_floor: Differences below this count as converged

    Returns:
        LimitReport
    """
    if len(radii) != len(values):
        raise ParameterError("radii and values must have the same length")
    if len(values) < 2:
        raise ParameterError("at least two radii are needed to extrapolate")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be strictly increasing")

    vals = np.asarray(values, dtype=float)
    diffs = np.diff(vals)
    mags = np.abs(diffs)
    scale = max(float(np.max(np.abs(vals))), absolute_floor)
    cauchy = bool(np.all(mags[1:] <= mags[:-1] * (1.0 + 1e-9) + CAUCHY_SLACK * scale + absolute_floor))
    notes = []

    tail = 0.0
    if len(diffs) >= 2 and mags[-2] > absolute_floor:
        ratio = diffs[-1] / diffs[-2]
        if -1.0 < ratio < 1.0:
            tail = float(diffs[-1] * ratio / (1.0 - ratio))
        else:
            notes.append(f"difference ratio {ratio:.3g} outside (-1, 1); no tail added")
    limit = float(vals[-1] + tail)

    report = LimitReport(
        radii=list(map(float, radii)),
        values=vals.tolist(),
        differences=diffs.tolist(),
        limit=limit if cauchy else None,
        tail=tail,
        cauchy=cauchy,
        predicted=predicted,
        notes=notes,
    )
    if not cauchy:
        logger.warning(f"Cutoff sequence failed the Cauchy test: differences {mags.tolist()}")
        report.status = VerdictStatus.INCONCLUSIVE
        report.notes.append("successive differences increase")
        return report

    if predicted is None:
        report.status = VerdictStatus.PASS
        return report
    denom = max(abs(predicted), absolute_floor)
    report.relative_error = abs(limit - predicted) / denom
    report.status = VerdictStatus.PASS if report.relative_error <= tolerance else VerdictStatus.FAIL
    return report


def extrapolate_table(
    outer: Sequence[float],
    inner: Sequence[float],
    table: np.ndarray,
    outer_label: str = "outer",
) -> LimitReport:
    """
    Two-stage limit: each row over the inner radii first, then over the outer values

    Any row that fails the Cauchy test makes the whole report inconclusive.

    Args:
        outer: Increasing outer values, one per row of table
        inner: Increasing inner radii, one per column
        table: Array of shape (len(outer), len(inner))

    Returns:
        LimitReport of the outer stage
    """
    inner_limits, notes = [], []
    for value, row in zip(outer, np.asarray(table, dtype=float)):
        stage = extrapolate(inner, row.tolist())
        if stage.limit is None:
            notes.append(f"inner sequence at {outer_label}={value:g} failed the Cauchy test")
            inner_limits.append(float(row[-1]))
        else:
            inner_limits.append(stage.limit)
    report = extrapolate(outer, inner_limits)
    if notes:
        report.notes.extend(notes)
        report.limit = None
        report.status = VerdictStatus.INCONCLUSIVE
    return report
