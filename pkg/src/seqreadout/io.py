"""CSV emission and parsing for every documented output schema.

Floats are written with ``repr`` so a parse-emit cycle is lossless and
repeated runs produce byte-identical files.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .calibration import DecayCurve, DetuningSeries
from .discrimination import AmplitudeHistogram
from .errors import ValidationError
from .release import ModeTrajectory
from .signal import VoltageTrace, WeightFunction
from .tomography import WignerMap

TRAJECTORY_COLUMNS = ("t_s", "re_r", "im_r", "re_b", "im_b")
TRACE_COLUMNS = ("t_s", "volts")
WEIGHT_COLUMNS = ("t_s", "re", "im")
BETA_COLUMNS = ("re_beta", "im_beta", "branch", "run_id")
HISTOGRAM_COLUMNS = ("re_center", "im_center", "density")
WIGNER_COLUMNS = ("re_alpha", "im_alpha", "w_value")
DECAY_COLUMNS = ("t_s", "p0", "p1")
DETUNING_COLUMNS = ("nbar", "detuning_g_rad_per_s", "detuning_e_rad_per_s")
RELEASE_COLUMNS = ("sigma_s", "g_max_rad_per_s", "remaining_fraction", "internal_loss",
                   "emitted", "in_validated_range")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def read_csv(path, columns: Sequence[str] = None):
    """Header and rows as strings; checks the header when ``columns`` is given."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [row for row in r]
    if columns is not None and tuple(header) != tuple(columns):
        raise ValidationError(f"{path}: header {header} != {list(columns)}")
    return header, rows


def _floats(rows: List[List[str]], k: int) -> np.ndarray:
    return np.array([float(r[k]) for r in rows])


def write_trajectory(path, traj: ModeTrajectory) -> Path:
    return write_csv(path, TRAJECTORY_COLUMNS, zip(
        traj.times, traj.r_amp.real, traj.r_amp.imag, traj.b_amp.real, traj.b_amp.imag))


def read_trajectory(path) -> ModeTrajectory:
    _, rows = read_csv(path, TRAJECTORY_COLUMNS)
    c = [_floats(rows, k) for k in range(5)]
    return ModeTrajectory(c[0], c[1] + 1j * c[2], c[3] + 1j * c[4])


def write_trace(path, trace: VoltageTrace) -> Path:
    return write_csv(path, TRACE_COLUMNS, zip(trace.times, trace.samples))


def read_trace(path) -> VoltageTrace:
    _, rows = read_csv(path, TRACE_COLUMNS)
    t, v = _floats(rows, 0), _floats(rows, 1)
    rate = (t.size - 1) / (t[-1] - t[0])
    return VoltageTrace(float(np.round(rate, 6)), float(t[0]), v)


def write_weight(path, w: WeightFunction) -> Path:
    return write_csv(path, WEIGHT_COLUMNS, zip(w.times, w.re, w.im))


def read_weight(path) -> WeightFunction:
    _, rows = read_csv(path, WEIGHT_COLUMNS)
    t = _floats(rows, 0)
    rate = (t.size - 1) / (t[-1] - t[0])
    return WeightFunction(float(np.round(rate, 6)), _floats(rows, 1), _floats(rows, 2),
                          1.0, float(t[0]))


def write_beta_samples(path, samples_by_branch: dict) -> Path:
    def rows():
        for branch in sorted(samples_by_branch):
            for i, b in enumerate(np.asarray(samples_by_branch[branch])):
                yield (b.real, b.imag, branch, i)
    return write_csv(path, BETA_COLUMNS, rows())


def read_beta_samples(path) -> dict:
    _, rows = read_csv(path, BETA_COLUMNS)
    out = {}
    for r in rows:
        out.setdefault(r[2], []).append(complex(float(r[0]), float(r[1])))
    return {k: np.array(v) for k, v in out.items()}


def write_histogram(path, h: AmplitudeHistogram) -> Path:
    xc, yc = h.x_centers, h.y_centers
    return write_csv(path, HISTOGRAM_COLUMNS, (
        (xc[i], yc[j], h.density[i, j]) for i in range(xc.size) for j in range(yc.size)))


def read_histogram_density(path):
    """Centers and density matrix of a histogram CSV."""
    _, rows = read_csv(path, HISTOGRAM_COLUMNS)
    x, y, d = (_floats(rows, k) for k in range(3))
    xc, yc = np.unique(x), np.unique(y)
    return xc, yc, d.reshape(xc.size, yc.size)


def write_wigner(path, m: WignerMap) -> Path:
    return write_csv(path, WIGNER_COLUMNS, (
        (m.x[i], m.y[j], m.values[i, j]) for i in range(m.x.size) for j in range(m.y.size)))


def read_wigner(path) -> WignerMap:
    _, rows = read_csv(path, WIGNER_COLUMNS)
    x, y, v = (_floats(rows, k) for k in range(3))
    xc, yc = np.unique(x), np.unique(y)
    return WignerMap(xc, yc, v.reshape(xc.size, yc.size))


def write_matrix(path, row_name: str, row_values, col_name: str, col_values, matrix) -> Path:
    """Matrix CSV: first column holds ``row_values``, header holds ``col_values``."""
    header = [f"{row_name}\\{col_name}"] + [_cell(float(c)) for c in col_values]
    m = np.asarray(matrix)
    return write_csv(path, header, ([float(r)] + list(m[i]) for i, r in enumerate(row_values)))


def read_matrix(path):
    header, rows = read_csv(path)
    cols = np.array([float(c) for c in header[1:]])
    rv = np.array([float(r[0]) for r in rows])
    m = np.array([[float(v) for v in r[1:]] for r in rows])
    return rv, cols, m


def write_release_table(path, table: Sequence[dict]) -> Path:
    return write_csv(path, RELEASE_COLUMNS, ([row[c] for c in RELEASE_COLUMNS] for row in table))


def read_release_table(path) -> List[dict]:
    _, rows = read_csv(path, RELEASE_COLUMNS)
    out = []
    for r in rows:
        d = {c: float(v) for c, v in zip(RELEASE_COLUMNS[:-1], r[:-1])}
        d["in_validated_range"] = r[-1] == "true"
        out.append(d)
    return out


def write_decay_curve(path, c: DecayCurve) -> Path:
    return write_csv(path, DECAY_COLUMNS, zip(c.times, c.p0, c.p1))


def read_decay_curve(path) -> DecayCurve:
    _, rows = read_csv(path, DECAY_COLUMNS)
    return DecayCurve(*(_floats(rows, k) for k in range(3)))


def write_detuning_series(path, s: DetuningSeries) -> Path:
    return write_csv(path, DETUNING_COLUMNS, zip(s.nbar, s.detuning_g, s.detuning_e))


def read_detuning_series(path) -> DetuningSeries:
    _, rows = read_csv(path, DETUNING_COLUMNS)
    return DetuningSeries(*(_floats(rows, k) for k in range(3)))


def write_report(path, mapping: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{k} = {_cell(v)}\n" for k, v in mapping.items()))
    return path


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
