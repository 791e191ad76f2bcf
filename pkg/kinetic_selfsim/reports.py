"""Writers for JSON verdicts, CSV tables and SVG line plots under an output directory."""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel  # noqa: E402

from kinetic_selfsim.models import LimitReport, MonitorRecord  # noqa: E402

logger = logging.getLogger(__name__)

MONITOR_COLUMNS = [
    "step", "time", "mass", "momentum_x", "momentum_y", "momentum_z", "energy", "entropy",
    "sup_norm", "l2_norm", "l3_norm", "clipped_mass",
]


def _jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _jsonable(value.model_dump(mode="python"))
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, np.integer):
        return int(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def write_json(payload: Union[BaseModel, Dict[str, Any], List[Any]], path: Union[str, Path]) -> Path:
    """Write a report as indented JSON; infinities become strings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True), encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(list(header))
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    logger.debug(f"Wrote {path}")
    return path


def write_monitor_csv(records: Sequence[MonitorRecord], path: Union[str, Path]) -> Path:
    rows = (
        [r.step, r.time, r.mass, *r.momentum, r.energy, r.entropy, r.sup_norm, r.l2_norm, r.l3_norm, r.clipped_mass]
        for r in records
    )
    return write_csv(MONITOR_COLUMNS, rows, path)


def write_limit_csv(report: LimitReport, path: Union[str, Path]) -> Path:
    diffs = [math.nan] + list(report.differences)
    return write_csv(["radius", "value", "difference"], zip(report.radii, report.values, diffs), path)


def plot_series(
    x: Sequence[float],
    series: Dict[str, Sequence[float]],
    path: Union[str, Path],
    xlabel: str = "",
    ylabel: str = "",
    title: Optional[str] = None,
    log_x: bool = False,
    log_y: bool = False,
) -> Path:
    """Line plot of one or more sequences against x, saved as SVG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, ys in series.items():
        ys = np.asarray(ys, dtype=float)
        if log_y:
            ys = np.abs(ys)
        ax.plot(x, ys, marker="o", label=label)
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Wrote {path}")
    return path
