"""Delimited output for runs and summary tables."""
import csv

import numpy as np

from .errors import ParseError
from .harness import CoordStats, RunResult, SummaryStats

RESULT_COLUMNS = ("run", "step", "t", "truth_x", "truth_y", "est_x", "est_y", "error_x", "error_y")
PLOT_COLUMNS = ("t", "truth_x", "est_x", "truth_y", "est_y")
STAT_FIELDS = ("min", "median", "max", "mean", "rmse")
STAT_COLUMNS = ("label",) + tuple(f"{c}_{f}" for c in "xy" for f in STAT_FIELDS)
TIMING_COLUMNS = ("mean_wall_time", "mean_selection_time")
SELECTION_COLUMNS = ("run", "epoch", "sweep", "bands")


def fmt(v):
    return format(float(v), ".17g")


def _write(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_results_csv(results, path):
    """One row per time step of every run."""
    rows = []
    for r in results:
        for i in range(len(r.t)):
            rows.append(
                [r.run_index, i]
                + [fmt(v) for v in (r.t[i], r.truth[i, 0], r.truth[i, 1], r.est_trajectory[i, 0],
                                    r.est_trajectory[i, 1], r.error_x[i], r.error_y[i])]
            )
    _write(path, RESULT_COLUMNS, rows)


def write_plot_data(result, path):
    """``t,truth_x,est_x,truth_y,est_y`` for a single run."""
    rows = [
        [fmt(result.t[i]), fmt(result.truth[i, 0]), fmt(result.est_trajectory[i, 0]),
         fmt(result.truth[i, 1]), fmt(result.est_trajectory[i, 1])]
        for i in range(len(result.t))
    ]
    _write(path, PLOT_COLUMNS, rows)


def write_selections_csv(results, path):
    rows = []
    for r in results:
        for e, (sweep, bands) in enumerate(zip(r.selection_sweeps, r.chosen_bands)):
            rows.append([r.run_index, e, sweep, " ".join(str(int(b)) for b in bands)])
    _write(path, SELECTION_COLUMNS, rows)


def write_stats_csv(stats, path, timing=True):
    """One row per policy. Timing columns are optional because they are not reproducible."""
    header = STAT_COLUMNS + (TIMING_COLUMNS if timing else ())
    rows = []
    for s in stats:
        row = [s.label] + [fmt(getattr(c, f)) for c in (s.x, s.y) for f in STAT_FIELDS]
        if timing:
            row += [fmt(s.mean_wall_time), fmt(s.mean_selection_time)]
        rows.append(row)
    _write(path, header, rows)


def read_stats_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        timing = header == STAT_COLUMNS + TIMING_COLUMNS
        if header != STAT_COLUMNS and not timing:
            raise ParseError("unrecognized stats header", line=1, path=path)
        out = []
        for row in reader:
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} columns", line=reader.line_num, path=path)
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise ParseError("non-numeric value", line=reader.line_num, path=path) from None
            x = CoordStats(*vals[0:5])
            y = CoordStats(*vals[5:10])
            extra = vals[10:] if timing else [0.0, 0.0]
            out.append(SummaryStats(row[0], x, y, *extra))
    return out


def emit_csv(obj, path, plot=False):
    """Write run results, a single run's plot data (``plot=True``) or summary stats."""
    if isinstance(obj, RunResult):
        obj = [obj]
    obj = list(obj)
    if plot:
        if len(obj) != 1:
            raise ValueError("plot-data mode takes exactly one run")
        write_plot_data(obj[0], path)
    elif obj and isinstance(obj[0], SummaryStats):
        write_stats_csv(obj, path)
    else:
        write_results_csv(obj, path)


def read_results_csv(path):
    """Load a results file as a structured array keyed by column name."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float, encoding="utf-8")
    return np.atleast_1d(data)
