import csv
import json
import math

import numpy as np

from kinetic_selfsim.evolve import manufactured_history
from kinetic_selfsim.limits import extrapolate
from kinetic_selfsim.models import BlowupReport, BlowupTrend
from kinetic_selfsim.reports import (
    MONITOR_COLUMNS,
    plot_series,
    write_json,
    write_limit_csv,
    write_monitor_csv,
)


def read_rows(path):
    with path.open(newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_json_handles_enums_arrays_and_infinities(tmp_path):
    report = BlowupReport(trend=BlowupTrend.TYPE_I, theta=0.25, rates={"inf": math.inf})
    path = write_json({"report": report, "grid": np.arange(3), "count": np.int64(4)}, tmp_path / "nested" / "out.json")
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["report"]["trend"] == "type_i"
    assert data["report"]["rates"]["inf"] == "inf"
    assert data["grid"] == [0, 1, 2]
    assert data["count"] == 4


def test_monitor_csv_columns(tmp_path):
    records = manufactured_history(0.2, -2.5)
    rows = read_rows(write_monitor_csv(records, tmp_path / "monitor.csv"))
    assert rows[0] == MONITOR_COLUMNS
    assert len(rows) == len(records) + 1
    assert float(rows[1][MONITOR_COLUMNS.index("energy")]) == 3.0


def test_limit_csv_starts_without_difference(tmp_path):
    report = extrapolate([1.0, 2.0, 3.0], [0.5, 0.75, 0.875])
    rows = read_rows(write_limit_csv(report, tmp_path / "limit.csv"))
    assert rows[0] == ["radius", "value", "difference"]
    assert rows[1][2] == "nan"
    assert float(rows[3][2]) == 0.125


def test_plot_is_written_as_svg(tmp_path):
    path = plot_series([1.0, 2.0, 4.0], {"a": [1.0, 0.5, 0.25], "b": [2.0, 1.0, -0.5]}, tmp_path / "p.svg", log_x=True, log_y=True)
    assert path.exists()
    assert path.read_text(encoding="utf-8").lstrip().startswith("<?xml")
