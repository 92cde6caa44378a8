"""Per-unit scale factor and phase offset against a reference current."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phasor import Phasor, wrap_phase


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationRow:
    unit_id: str
    xi: float  # A/V
    phi: float  # rad, reference phase minus unit phase
    nonlinearity: float
    phase_std: float
    intercept: float = 0.0  # A, fitted but unused

    def __post_init__(self):
        if not self.xi > 0:
            raise CalibrationError(f"{self.unit_id}: scale factor must be > 0, got {self.xi}")
        if self.nonlinearity < 0 or self.phase_std < 0:
            raise CalibrationError(f"{self.unit_id}: fit metrics must be >= 0")


@dataclass(frozen=True)
class CalibrationTable:
    rows: tuple[CalibrationRow, ...]

    def __getitem__(self, unit_id: str) -> CalibrationRow:
        for row in self.rows:
            if row.unit_id == unit_id:
                return row
        raise KeyError(unit_id)

    @property
    def unit_ids(self) -> tuple[str, ...]:
        return tuple(r.unit_id for r in self.rows)

    def xi(self, unit_ids) -> np.ndarray:
        return np.array([self[u].xi for u in unit_ids])

    def phi(self, unit_ids) -> np.ndarray:
        return np.array([self[u].phi for u in unit_ids])


def circular_mean(angles) -> float:
    z = np.exp(1j * np.asarray(angles, dtype=float)).mean()
    return math.atan2(z.imag, z.real)


def circular_std(angles) -> float:
    """sqrt(-2 ln R), with 1-R formed from half-angle sines to survive tiny spreads."""
    a = np.asarray(angles, dtype=float)
    dev = wrap_phase(a - circular_mean(a))
    one_minus_r = float(np.mean(2 * np.sin(dev / 2) ** 2))
    if one_minus_r >= 1:
        return math.inf
    return math.sqrt(-2 * math.log1p(-one_minus_r))


def calibrate(unit_id: str, unit_z, reference_z, *, max_nonlinearity: float = 1e-2,
              level_tolerance: float = 1e-6) -> CalibrationRow:
    """Fit one unit from time-aligned complex phasor series.

    ``xi`` is the slope of reference amplitude against unit amplitude, with a
    free intercept. Nonlinearity is the worst fit residual over full scale.
    """
    u = np.asarray(unit_z, dtype=complex)
    r = np.asarray(reference_z, dtype=complex)
    if u.shape != r.shape or u.ndim != 1:
        raise CalibrationError(f"{unit_id}: unit and reference series must be aligned 1-D")
    x, y = np.abs(u), np.abs(r)
    full_scale = float(y.max(initial=0.0))
    span = np.ptp(y) if y.size else 0.0
    if y.size < 2 or full_scale <= 0 or span <= level_tolerance * full_scale:
        raise CalibrationError(f"{unit_id}: sweep needs at least 2 distinct current levels")

    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx <= 0:
        raise CalibrationError(f"{unit_id}: unit amplitude does not vary over the sweep")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    if slope <= 0:
        raise CalibrationError(f"{unit_id}: fitted slope {slope} is not positive")
    residual = y - (slope * x + intercept)
    nonlinearity = float(np.max(np.abs(residual)) / full_scale)
    if nonlinearity > max_nonlinearity:
        raise CalibrationError(
            f"{unit_id}: nonlinearity {nonlinearity:.3g} exceeds bound {max_nonlinearity:.3g}")

    offsets = np.angle(r) - np.angle(u)
    return CalibrationRow(unit_id, slope, wrap_phase(circular_mean(offsets)), nonlinearity,
                          circular_std(offsets), intercept)


def calibrate_all(unit_ids, unit_z, reference_z, **kwargs) -> CalibrationTable:
    unit_z = np.asarray(unit_z)
    return CalibrationTable(tuple(
        calibrate(uid, unit_z[:, j], reference_z, **kwargs) for j, uid in enumerate(unit_ids)))


def reference_phasor(row: CalibrationRow, current: Phasor) -> Phasor:
    """Voltage the unit should read for ``current`` if its error had not drifted."""
    return Phasor(current.amplitude / row.xi, current.phase - row.phi)


def reference_voltages(table: CalibrationTable, unit_ids, current_z) -> np.ndarray:
    """Vectorized :func:`reference_phasor`, shape (rows, units)."""
    current_z = np.asarray(current_z, dtype=complex)[:, np.newaxis]
    return current_z * np.exp(-1j * table.phi(unit_ids)) / table.xi(unit_ids)


def unit_errors(measured, reference):
    """Relative amplitude error and wrapped phase error of ``measured``.

    Accepts :class:`Phasor` pairs or complex arrays. A zero reference
    amplitude has no defined error and raises.
    """
    if isinstance(measured, Phasor):
        if reference.amplitude <= 0:
            raise ZeroDivisionError("reference amplitude is zero; error undefined")
        return (measured.amplitude / reference.amplitude - 1.0,
                wrap_phase(measured.phase - reference.phase))
    m = np.asarray(measured, dtype=complex)
    r = np.asarray(reference, dtype=complex)
    if np.any(np.abs(r) <= 0):
        raise ZeroDivisionError("reference amplitude is zero; error undefined")
    return np.abs(m) / np.abs(r) - 1.0, wrap_phase(np.angle(m) - np.angle(r))
