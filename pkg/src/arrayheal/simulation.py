"""Synthetic magnetic-array current sensor.

The conductor is an infinite straight line; each unit sits at radius ``r_k``
and senses the tangential field, scaled by an alignment factor. Unit outputs
are voltages ``gain_k * B_k`` with an electronics phase lag, plus white noise.
A reference channel carries the ideal conductor current (in amperes) and
stands in for a zero-flux current sensor.

All times are absolute scenario seconds. The timeline is laid out as
``calibration sweep | training run | test run``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .phasor import Phasor, extract_series

MU0 = 4e-7 * math.pi

# zero-flux sensor error class: 0.01 % amplitude, 1e-4 rad phase
REFERENCE_AMPLITUDE_BIAS = 1e-4
REFERENCE_PHASE_BIAS = 1e-4


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear function of time, held constant outside its knots.

    With ``period`` set, time is folded into ``[0, period)`` first.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]
    period: float | None = None

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ScenarioError("piecewise-linear profile needs matching, nonempty knots")
        if any(b < a for a, b in zip(self.times, self.times[1:])):
            raise ScenarioError("profile knot times must be nondecreasing")
        if self.period is not None and not self.period > 0:
            raise ScenarioError("profile period must be > 0")

    @classmethod
    def constant(cls, value: float = 0.0) -> PiecewiseLinear:
        return cls((0.0,), (float(value),))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.period is not None:
            t = np.mod(t, self.period)
        return np.interp(t, self.times, self.values)

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)


@dataclass(frozen=True)
class GeometryModel:
    unit_ids: tuple[str, ...]
    radii: tuple[float, ...]
    angles: tuple[float, ...]
    alignment: tuple[float, ...]

    def __post_init__(self):
        n = len(self.unit_ids)
        if n < 3:
            raise ScenarioError(f"need at least 3 units, got {n}")
        if len(set(self.unit_ids)) != n:
            raise ScenarioError("unit ids must be unique")
        if not (len(self.radii) == len(self.angles) == len(self.alignment) == n):
            raise ScenarioError("geometry tables must have one entry per unit")
        if any(r <= 0 for r in self.radii):
            raise ScenarioError("all radii must be > 0")
        if any(not 0 < a <= 1 for a in self.alignment):
            raise ScenarioError("alignment factors must lie in (0, 1]")

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    def tesla_per_ampere(self, k: int) -> float:
        return MU0 * self.alignment[k] / (2 * math.pi * self.radii[k])

    def amperes_per_tesla(self, k: int) -> float:
        """The per-unit factor ``c_k`` with ``c_k * B_k = I``."""
        return 1.0 / self.tesla_per_ampere(k)


@dataclass(frozen=True)
class UnitDrift:
    eps: float = 0.0
    delta: float = 0.0
    d_eps: PiecewiseLinear = field(default_factory=PiecewiseLinear.constant)
    d_delta: PiecewiseLinear = field(default_factory=PiecewiseLinear.constant)

    def gain_factor(self, t):
        return 1.0 + self.eps + self.d_eps(t)

    def phase_shift(self, t):
        return self.delta + self.d_delta(t)


@dataclass(frozen=True)
class DriftSchedule:
    units: tuple[UnitDrift, ...]

    def __getitem__(self, k: int) -> UnitDrift:
        return self.units[k]

    def __len__(self) -> int:
        return len(self.units)


@dataclass(frozen=True)
class Excitation:
    amplitude: PiecewiseLinear
    frequency: float = 60.0
    base_phase: float = 0.0
    # slow wander of the source phase relative to the sampling clock
    phase: PiecewiseLinear = field(default_factory=PiecewiseLinear.constant)


@dataclass(frozen=True)
class CalibrationSweep:
    levels: tuple[float, ...]
    dwell_s: float = 1.0

    @property
    def duration(self) -> float:
        return len(self.levels) * self.dwell_s


@dataclass(frozen=True)
class ArrayScenario:
    geometry: GeometryModel
    excitation: Excitation
    drift: DriftSchedule
    noise_v: tuple[float, ...]
    gains: tuple[float, ...]
    electronics_phase: tuple[float, ...]
    sweep: CalibrationSweep
    train_s: float = 20.0
    test_s: float = 60.0
    sample_rate: float = 20_000.0
    seed: int = 0
    reference_bias: bool = False

    def __post_init__(self):
        n = self.geometry.n_units
        for name in ("noise_v", "gains", "electronics_phase"):
            if len(getattr(self, name)) != n:
                raise ScenarioError(f"{name} must have one entry per unit")
        if len(self.drift) != n:
            raise ScenarioError("drift schedule must have one entry per unit")
        if any(g <= 0 for g in self.gains):
            raise ScenarioError("gains must be > 0")
        if any(s < 0 for s in self.noise_v):
            raise ScenarioError("noise levels must be >= 0")
        if not self.excitation.frequency > 0:
            raise ScenarioError("frequency must be > 0")
        if not (self.train_s > 0 and self.test_s > 0 and self.sample_rate > 0):
            raise ScenarioError("durations and sample rate must be > 0")
        t = np.linspace(0.0, self.duration, 2001)
        for k, unit in enumerate(self.drift.units):
            if np.any(unit.gain_factor(t) <= 0):
                raise ScenarioError(
                    f"unit {self.geometry.unit_ids[k]}: amplitude factor 1+eps+d_eps must stay > 0")

    @property
    def unit_ids(self) -> tuple[str, ...]:
        return self.geometry.unit_ids

    @property
    def duration(self) -> float:
        return self.sweep.duration + self.train_s + self.test_s

    def segment_bounds(self) -> dict[str, tuple[float, float]]:
        t0 = self.sweep.duration
        t1 = t0 + self.train_s
        return {
            "calibration": (0.0, t0),
            "train": (t0, t1),
            "test": (t1, t1 + self.test_s),
        }

    def with_seed(self, seed: int) -> ArrayScenario:
        return replace(self, seed=seed)

    def without_drift(self) -> ArrayScenario:
        units = tuple(UnitDrift(eps=u.eps, delta=u.delta) for u in self.drift.units)
        return replace(self, drift=DriftSchedule(units))


def theoretical_field(geometry: GeometryModel, k: int, current: Phasor) -> Phasor:
    """Tangential field at unit ``k`` (0-based) from a line current."""
    return Phasor(geometry.tesla_per_ampere(k) * current.amplitude, current.phase)


def apply_drift(field_: Phasor, k: int, t: float, drift: DriftSchedule) -> Phasor:
    unit = drift[k]
    factor = float(unit.gain_factor(t))
    if factor <= 0:
        raise ScenarioError(f"unit {k}: amplitude factor {factor} <= 0 at t={t}")
    return Phasor(factor * field_.amplitude, field_.phase + float(unit.phase_shift(t)))


@dataclass
class Segment:
    name: str
    start_time: float
    sample_rate: float
    units: np.ndarray  # (n_units, n_samples) volts
    reference: np.ndarray  # (n_samples,) amperes

    @property
    def n_samples(self) -> int:
        return self.reference.size


@dataclass
class Synthesis:
    unit_ids: tuple[str, ...]
    frequency: float
    segments: dict[str, Segment]


def _segment_excitation(scenario: ArrayScenario, name: str, t: np.ndarray):
    exc = scenario.excitation
    if name == "calibration":
        idx = np.minimum((t / scenario.sweep.dwell_s).astype(int), len(scenario.sweep.levels) - 1)
        return np.asarray(scenario.sweep.levels, dtype=float)[idx], np.zeros_like(t)
    return exc.amplitude(t), exc.phase(t)


def _carrier_phase(f: float, t: np.ndarray) -> np.ndarray:
    return 2 * np.pi * np.mod(f * t, 1.0)


def synthesize(scenario: ArrayScenario) -> Synthesis:
    """Sampled unit voltages and reference current for every segment.

    Noise for unit ``k`` comes from a generator seeded with ``(seed, k)`` so
    units are independent and a change to one unit never touches another.
    """
    fs = scenario.sample_rate
    f = scenario.excitation.frequency
    bounds = scenario.segment_bounds()
    n_units = scenario.geometry.n_units
    rngs = [np.random.default_rng([scenario.seed, k]) for k in range(n_units)]

    segments = {}
    for name, (t_start, t_end) in bounds.items():
        n = int(round((t_end - t_start) * fs))
        t = t_start + np.arange(n) / fs
        amp, wander = _segment_excitation(scenario, name, t)
        theta = _carrier_phase(f, t) + scenario.excitation.base_phase + wander

        ref_amp, ref_phase = amp, theta
        if scenario.reference_bias:
            ref_amp = amp * (1 + REFERENCE_AMPLITUDE_BIAS)
            ref_phase = theta + REFERENCE_PHASE_BIAS
        reference = ref_amp * np.cos(ref_phase)

        units = np.empty((n_units, n))
        for k in range(n_units):
            drift = scenario.drift[k]
            b = scenario.geometry.tesla_per_ampere(k) * amp * drift.gain_factor(t)
            phase = theta + drift.phase_shift(t) - scenario.electronics_phase[k]
            units[k] = scenario.gains[k] * b * np.cos(phase)
            if scenario.noise_v[k] > 0:
                units[k] += rngs[k].normal(0.0, scenario.noise_v[k], n)
        segments[name] = Segment(name, t_start, fs, units, reference)
    return Synthesis(scenario.unit_ids, f, segments)


def demodulate_segment(segment: Segment, frequency: float, window_s: float):
    """Phasors of every unit and of the reference, one row per window.

    Returns ``(t_start, unit_z, ref_z)`` with ``unit_z`` shaped (windows, units).
    """
    t, ref_z = extract_series(segment.reference, segment.sample_rate, frequency,
                              window_s, segment.start_time)
    cols = [extract_series(row, segment.sample_rate, frequency, window_s,
                           segment.start_time)[1] for row in segment.units]
    return t, np.column_stack(cols), ref_z


def _triangle(low: float, high: float, period: float) -> PiecewiseLinear:
    return PiecewiseLinear((0.0, period / 2, period), (low, high, low), period)


def _ramp(t0: float, t1: float, value: float) -> PiecewiseLinear:
    return PiecewiseLinear((t0, t1), (0.0, value))


def paper_twin_scenario(seed: int = 0, *, drift: bool = True,
                        sample_rate: float = 20_000.0) -> ArrayScenario:
    """Eight-unit synthetic twin of the bench experiment.

    Calibration sweep of 10 levels up to 10.5 A, 20 s training run and 80 s
    test run, both under a triangular 3-10.5 A amplitude ramp at 60 Hz. In the
    test run S1 then S2 drift negative in amplitude and phase, then S3 drifts
    positive in amplitude only.
    """
    ids = tuple(f"S{k + 1}" for k in range(8))
    geometry = GeometryModel(
        unit_ids=ids,
        radii=(0.0500, 0.0502, 0.0498, 0.0501, 0.0499, 0.0503, 0.0497, 0.0500),
        angles=tuple(2 * math.pi * k / 8 for k in range(8)),
        alignment=(0.9995, 0.9990, 0.9998, 0.9985, 0.9993, 0.9997, 0.9988, 0.9999),
    )
    gains = (2.38e4, 2.41e4, 2.35e4, 2.44e4, 2.37e4, 2.40e4, 2.33e4, 2.39e4)
    electronics_phase = (2.1e-3, -1.4e-3, 0.8e-3, -2.6e-3, 1.7e-3, -0.5e-3, 2.9e-3, -1.9e-3)
    eps = (4e-4, -3e-4, 6e-4, -5e-4, 2e-4, -7e-4, 3e-4, -1e-4)
    delta = (3e-4, -2e-4, 1e-4, -4e-4, 5e-4, -1e-4, 2e-4, -3e-4)

    sweep = CalibrationSweep(levels=tuple(1.05 * i for i in range(1, 11)), dwell_s=1.0)
    train_s, test_s = 20.0, 80.0
    t_test = sweep.duration + train_s

    units = [UnitDrift(eps=e, delta=d) for e, d in zip(eps, delta)]
    if drift:
        units[0] = replace(units[0], d_eps=_ramp(t_test + 5, t_test + 20, -0.022),
                           d_delta=_ramp(t_test + 5, t_test + 20, -0.15))
        units[1] = replace(units[1], d_eps=_ramp(t_test + 20, t_test + 35, -0.022),
                           d_delta=_ramp(t_test + 20, t_test + 35, -0.14))
        # slow ramp: a fast gain ramp leaks into the lock-in phase estimate
        units[2] = replace(units[2], d_eps=_ramp(t_test + 40, t_test + 75, 0.08))

    return ArrayScenario(
        geometry=geometry,
        excitation=Excitation(
            amplitude=_triangle(3.0, 10.5, 20.0),
            frequency=60.0,
            base_phase=0.6,
            phase=_triangle(-0.25, 0.25, 12.0),
        ),
        drift=DriftSchedule(tuple(units)),
        noise_v=(1.5e-4,) * 8,
        gains=gains,
        electronics_phase=electronics_phase,
        sweep=sweep,
        train_s=train_s,
        test_s=test_s,
        sample_rate=sample_rate,
        seed=seed,
    )
