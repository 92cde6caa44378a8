"""CSV artifacts exchanged between pipeline stages.

Every file has a fixed header. Floats are written with ``repr`` so a write
followed by a read reproduces them exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import CalibrationRow, CalibrationTable
from .pca import DataMatrix
from .phasor import wrap_phase
from .spe import QSeries

REF = "REF"
PHASOR_COLUMNS = ("t_s", "unit_id", "amplitude", "phase_rad", "kind_source")
CALIBRATION_COLUMNS = ("unit", "xi", "phi", "nonlinearity", "phase_std", "intercept")
QSERIES_COLUMNS = ("row", "q", "threshold", "exceeded")


class SchemaError(ValueError):
    pass


def _num(x) -> str:
    return repr(float(x))


def write_csv(path: str | Path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_rows(path: str | Path, required):
    """Yield ``(line_number, row_dict)`` after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: line 1: missing columns {', '.join(missing)}")
        for row in reader:
            yield reader.line_num, row


def parse_float(path, line: int, column: str, text) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: line {line}: column {column!r}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise SchemaError(f"{path}: line {line}: column {column!r}: non-finite value {text!r}")
    return value


# -- phasors ---------------------------------------------------------------

@dataclass
class PhasorTable:
    t: np.ndarray
    unit_ids: tuple[str, ...]
    amplitude: np.ndarray  # (rows, units)
    phase: np.ndarray  # (rows, units), wrapped
    ref_amplitude: np.ndarray
    ref_phase: np.ndarray

    @classmethod
    def from_complex(cls, t, unit_ids, unit_z, reference_z) -> PhasorTable:
        unit_z = np.asarray(unit_z, dtype=complex)
        reference_z = np.asarray(reference_z, dtype=complex)
        return cls(np.asarray(t, dtype=float), tuple(unit_ids), np.abs(unit_z),
                   wrap_phase(np.angle(unit_z)), np.abs(reference_z),
                   wrap_phase(np.angle(reference_z)))

    @property
    def units(self) -> np.ndarray:
        return self.amplitude * np.exp(1j * self.phase)

    @property
    def reference(self) -> np.ndarray:
        return self.ref_amplitude * np.exp(1j * self.ref_phase)

    def matrices(self) -> dict[str, DataMatrix]:
        return {
            "amplitude": DataMatrix(self.amplitude, "amplitude", self.unit_ids),
            "phase": DataMatrix.from_phases(self.phase, self.unit_ids),
        }


def write_phasors(path, table: PhasorTable) -> None:
    def rows():
        for i, ti in enumerate(table.t):
            for j, uid in enumerate(table.unit_ids):
                yield (float(ti), uid, float(table.amplitude[i, j]), float(table.phase[i, j]), "mmu")
            yield (float(ti), REF, float(table.ref_amplitude[i]), float(table.ref_phase[i]),
                   "reference")

    write_csv(path, PHASOR_COLUMNS, rows())


def read_phasors(path) -> PhasorTable:
    """Long-format phasor CSV to a (time x unit) table, columns found by name."""
    times: list[float] = []
    index: dict[float, int] = {}
    unit_ids: list[str] = []
    cells: dict[tuple[int, str], tuple[float, float]] = {}
    for line, row in read_rows(path, PHASOR_COLUMNS[:4]):
        t = parse_float(path, line, "t_s", row["t_s"])
        uid = (row["unit_id"] or "").strip()
        if not uid:
            raise SchemaError(f"{path}: line {line}: empty unit_id")
        amp = parse_float(path, line, "amplitude", row["amplitude"])
        ph = parse_float(path, line, "phase_rad", row["phase_rad"])
        if amp < 0:
            raise SchemaError(f"{path}: line {line}: column 'amplitude': negative value")
        if t not in index:
            index[t] = len(times)
            times.append(t)
        if uid != REF and uid not in unit_ids:
            unit_ids.append(uid)
        key = (index[t], uid)
        if key in cells:
            raise SchemaError(f"{path}: line {line}: duplicate entry for unit {uid} at t={t!r}")
        cells[key] = (amp, ph)

    order = np.argsort(times, kind="stable")
    n, m = len(times), len(unit_ids)
    amp, ph = np.empty((n, m)), np.empty((n, m))
    ref_amp, ref_ph = np.empty(n), np.empty(n)
    for out_i, i in enumerate(order):
        for j, uid in enumerate(unit_ids + [REF]):
            try:
                a, p = cells[(i, uid)]
            except KeyError:
                raise SchemaError(f"{path}: unit {uid} has no entry at t={times[i]!r}") from None
            if uid == REF:
                ref_amp[out_i], ref_ph[out_i] = a, p
            else:
                amp[out_i, j], ph[out_i, j] = a, p
    return PhasorTable(np.asarray(times)[order], tuple(unit_ids), amp, ph, ref_amp, ref_ph)


def ingest_phasors(path) -> tuple[DataMatrix, DataMatrix]:
    """Amplitude and (unwrapped) phase matrices of the units in a phasor CSV."""
    m = read_phasors(path).matrices()
    return m["amplitude"], m["phase"]


# -- calibration -------------------------------------------------------------

def write_calibration(path, table: CalibrationTable) -> None:
    write_csv(path, CALIBRATION_COLUMNS,
              ((r.unit_id, r.xi, r.phi, r.nonlinearity, r.phase_std, r.intercept)
               for r in table.rows))


def read_calibration(path) -> CalibrationTable:
    rows = []
    for line, row in read_rows(path, CALIBRATION_COLUMNS[:5]):
        vals = {c: parse_float(path, line, c, row[c]) for c in CALIBRATION_COLUMNS[1:5]}
        intercept = parse_float(path, line, "intercept", row["intercept"]) if row.get("intercept") else 0.0
        rows.append(CalibrationRow(row["unit"], vals["xi"], vals["phi"], vals["nonlinearity"],
                                   vals["phase_std"], intercept))
    return CalibrationTable(tuple(rows))


# -- Q series ----------------------------------------------------------------

def write_qseries(path, q: QSeries) -> None:
    write_csv(path, QSERIES_COLUMNS,
              ((i, float(v), q.threshold, int(e)) for i, (v, e) in enumerate(zip(q.values, q.exceeded))))


def read_qseries(path, alpha: float = math.nan, model_id: str = "") -> QSeries:
    values, threshold = [], None
    for line, row in read_rows(path, QSERIES_COLUMNS):
        values.append(parse_float(path, line, "q", row["q"]))
        threshold = parse_float(path, line, "threshold", row["threshold"])
    return QSeries(np.asarray(values), threshold if threshold is not None else math.nan, alpha, model_id)
