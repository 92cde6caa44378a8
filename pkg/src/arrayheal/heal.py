"""Current estimate from calibrated unit phasors, with abnormal units left out."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationTable, unit_errors
from .phasor import Phasor


def estimate_current(unit_z, table: CalibrationTable, unit_ids, included=None):
    """Complex mean of ``xi_k * U_k * exp(i*phi_k)`` over the included units.

    ``unit_z`` is either a 1-D sequence (one reading per unit) giving a
    :class:`Phasor`, or a (rows, units) array giving a complex series.
    """
    unit_ids = tuple(unit_ids)
    included = unit_ids if included is None else tuple(included)
    if not included:
        raise ValueError("at least one unit must be included in the current estimate")
    missing = set(included) - set(unit_ids)
    if missing:
        raise ValueError(f"included units not present: {sorted(missing)}")
    idx = [unit_ids.index(u) for u in included]
    z = np.asarray(unit_z, dtype=complex)
    scaled = table.xi(included) * np.exp(1j * table.phi(included))
    if z.ndim == 1:
        return Phasor.from_complex(complex(np.mean(z[idx] * scaled)))
    return np.mean(z[:, idx] * scaled, axis=1)


@dataclass
class HealedEstimate:
    t: np.ndarray
    reference: np.ndarray
    conventional: np.ndarray
    healed: np.ndarray
    excluded: frozenset[str]
    conventional_amp_error: np.ndarray
    conventional_phase_error: np.ndarray
    healed_amp_error: np.ndarray
    healed_phase_error: np.ndarray


def compare(t, conventional, healed, reference, excluded=frozenset()) -> HealedEstimate:
    ca, cp = unit_errors(conventional, reference)
    ha, hp = unit_errors(healed, reference)
    return HealedEstimate(np.asarray(t, dtype=float), np.asarray(reference, dtype=complex),
                          np.asarray(conventional, dtype=complex), np.asarray(healed, dtype=complex),
                          frozenset(excluded), ca, cp, ha, hp)


def heal(t, unit_z, reference_z, table: CalibrationTable, unit_ids, excluded) -> HealedEstimate:
    unit_ids = tuple(unit_ids)
    excluded = frozenset(excluded)
    if not excluded < set(unit_ids) and excluded:
        raise ValueError("excluded set must be a proper subset of the units")
    kept = tuple(u for u in unit_ids if u not in excluded)
    if not kept:
        raise ValueError("every unit is excluded; nothing left to measure with")
    conventional = estimate_current(unit_z, table, unit_ids)
    healed = estimate_current(unit_z, table, unit_ids, kept)
    return compare(t, conventional, healed, reference_z, excluded)
