"""Phasors and single-frequency lock-in extraction.

Phase convention: a phasor ``A∠φ`` stands for the waveform ``A*cos(2*pi*f*t + φ)``
with ``t`` the absolute sample time. A pure ``sin(2*pi*f*t)`` therefore has phase
``-pi/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class RejectedInputError(ValueError):
    """Window or frequency unusable for single-bin extraction."""


def wrap_phase(phase):
    """Wrap radians into the half-open interval (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phase, dtype=float), 2 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def unwrap_phase(series) -> np.ndarray:
    """Remove 2*pi jumps so successive differences fall in (-pi, pi].

    The first element is kept as is; every later element moves by a multiple
    of 2*pi.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        return x.copy()
    steps = np.diff(x)
    corrections = wrap_phase(steps) - steps
    out = x.copy()
    out[1:] += np.cumsum(corrections)
    return out


@dataclass(frozen=True)
class Phasor:
    amplitude: float
    phase: float

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError(f"phasor amplitude must be >= 0, got {self.amplitude}")
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", wrap_phase(self.phase))

    @classmethod
    def from_complex(cls, z: complex) -> Phasor:
        return cls(abs(z), math.atan2(z.imag, z.real))

    def to_complex(self) -> complex:
        return complex(self.amplitude * math.cos(self.phase),
                       self.amplitude * math.sin(self.phase))

    def scale(self, factor: float) -> Phasor:
        if factor < 0:
            return Phasor(-factor * self.amplitude, self.phase + math.pi)
        return Phasor(factor * self.amplitude, self.phase)

    def rotate(self, radians: float) -> Phasor:
        return Phasor(self.amplitude, self.phase + radians)

    def __add__(self, other: Phasor) -> Phasor:
        return Phasor.from_complex(self.to_complex() + other.to_complex())

    def __mul__(self, other):
        if isinstance(other, Phasor):
            return Phasor.from_complex(self.to_complex() * other.to_complex())
        return Phasor.from_complex(self.to_complex() * other)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SampledWindow:
    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise RejectedInputError(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _check_grid(n_samples: int, sample_rate: float, f: float) -> None:
    if not f > 0:
        raise RejectedInputError(f"frequency must be > 0, got {f}")
    # exactly 2 samples/period leaves the quadrature component unobservable
    if sample_rate <= 2 * f:
        raise RejectedInputError(
            f"need more than 2 samples per period: fs={sample_rate} Hz, f={f} Hz")
    cycles = f * n_samples / sample_rate
    if round(cycles) < 1 or abs(cycles - round(cycles)) > 1e-9 * max(1.0, cycles):
        raise RejectedInputError(
            f"window of {n_samples} samples at {sample_rate} Hz spans {cycles:.6g} "
            f"periods of {f} Hz; an integer number >= 1 is required")


def _demodulate(block: np.ndarray, sample_rate: float, f: float, t0) -> np.ndarray:
    """Single-bin DFT of the rows of ``block`` (windows x samples)."""
    n = block.shape[-1]
    # reduce f*t modulo 1 before multiplying by 2*pi to keep long runs accurate
    cycles0 = np.mod(f * np.asarray(t0, dtype=float), 1.0)
    local = np.mod(f * np.arange(n) / sample_rate, 1.0)
    kernel = np.exp(-2j * np.pi * local)
    rotation = np.exp(-2j * np.pi * cycles0)
    return (2.0 / n) * (block @ kernel) * rotation


def extract_phasor(window: SampledWindow, f: float) -> Phasor:
    """Amplitude and cosine-phase of the ``f`` component of one window.

    Exact (to rounding) for a pure tone when the window holds an integer
    number of periods.
    """
    _check_grid(window.samples.size, window.sample_rate, f)
    z = _demodulate(window.samples[np.newaxis, :], window.sample_rate, f,
                    np.array([window.start_time]))[0]
    return Phasor.from_complex(complex(z))


def extract_series(samples, sample_rate: float, f: float, window_s: float,
                   start_time: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Chop a stream into consecutive windows and demodulate each.

    Returns ``(t_start, z)`` where ``z`` holds complex phasors, one per window.
    A trailing partial window is dropped.
    """
    x = np.asarray(samples, dtype=float)
    per_window = int(round(window_s * sample_rate))
    if per_window < 1 or abs(per_window - window_s * sample_rate) > 1e-6:
        raise RejectedInputError(
            f"window of {window_s} s is not a whole number of samples at {sample_rate} Hz")
    _check_grid(per_window, sample_rate, f)
    count = x.size // per_window
    if count == 0:
        raise RejectedInputError(
            f"stream of {x.size} samples is shorter than one {window_s} s window")
    block = x[: count * per_window].reshape(count, per_window)
    t_start = start_time + np.arange(count) * per_window / sample_rate
    return t_start, _demodulate(block, sample_rate, f, t_start)
