"""Pipeline configuration: INI text with pipeline, scenario and per-unit sections.

Grammar (see README for the full key list)::

    [pipeline]            analysis parameters
    [scenario]            array-wide simulation parameters; ``preset`` picks a base
    [unit <id>]           one section per unit, in array order

Profiles are whitespace-separated ``time:value`` knots, e.g. ``0:3 10:10.5 20:3``.
Lists are whitespace-separated numbers.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .identify import Settings
from .simulation import (
    ArrayScenario,
    CalibrationSweep,
    DriftSchedule,
    Excitation,
    GeometryModel,
    PiecewiseLinear,
    UnitDrift,
    paper_twin_scenario,
)


class ConfigError(ValueError):
    pass


PRESETS = ("paper_twin", "zero_drift", "none")


@dataclass(frozen=True)
class Windows:
    calibration_s: float = 0.5
    train_s: float = 0.1
    test_s: float = 1.0


@dataclass(frozen=True)
class PipelineConfig:
    scenario: ArrayScenario
    settings: Settings = Settings()
    windows: Windows = Windows()
    max_nonlinearity: float = 1e-2
    out_dir: Path = field(default=Path("out"))

    def __post_init__(self):
        s = self.settings
        if not 0 < s.kappa < 1:
            raise ConfigError(f"kappa must be in (0, 1), got {s.kappa}")
        if not 0.5 < s.alpha < 1:
            raise ConfigError(f"alpha must be in (0.5, 1), got {s.alpha}")
        if not 0 <= s.exceedance_rule < 1:
            raise ConfigError(f"exceedance must be in [0, 1), got {s.exceedance_rule}")
        if s.variance_rule not in ("squared", "linear"):
            raise ConfigError(f"variance_rule must be squared or linear, got {s.variance_rule!r}")
        if s.h0_form not in ("corrected", "printed"):
            raise ConfigError(f"h0_form must be corrected or printed, got {s.h0_form!r}")
        if min(self.windows.calibration_s, self.windows.train_s, self.windows.test_s) <= 0:
            raise ConfigError("window lengths must be > 0")

    @property
    def seed(self) -> int:
        return self.scenario.seed


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split())
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc


def parse_profile(text: str, period: float | None = None) -> PiecewiseLinear:
    times, values = [], []
    for token in text.split():
        t, sep, v = token.partition(":")
        if not sep:
            raise ConfigError(f"profile knot {token!r} is not time:value")
        try:
            times.append(float(t))
            values.append(float(v))
        except ValueError as exc:
            raise ConfigError(f"profile knot {token!r} is not numeric") from exc
    return PiecewiseLinear(tuple(times), tuple(values), period)


def format_profile(p: PiecewiseLinear) -> str:
    return " ".join(f"{t!r}:{v!r}" for t, v in zip(p.times, p.values))


def _get_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


_UNIT_KEYS = {"radius_m", "angle_rad", "alignment", "gain_v_per_t", "electronics_phase_rad",
              "noise_v", "eps", "delta_rad", "drift_eps", "drift_delta_rad"}
_SCENARIO_KEYS = {"preset", "frequency_hz", "sample_rate_hz", "base_phase_rad",
                  "amplitude_profile_a", "amplitude_period_s", "phase_profile_rad",
                  "phase_period_s", "calibration_levels_a", "calibration_dwell_s", "train_s",
                  "test_s", "reference_bias", "seed"}
_PIPELINE_KEYS = {"seed", "kappa", "alpha", "exceedance", "calibration_window_s",
                  "train_window_s", "test_window_s", "variance_rule", "h0_form",
                  "max_nonlinearity", "paper_mode"}


def _check_keys(section: str, keys, allowed) -> None:
    unknown = set(keys) - allowed
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")


def _period(sec, key: str, current: float | None) -> float | None:
    if key not in sec:
        return current
    text = sec[key].strip().lower()
    return None if text in ("", "none") else float(text)


def _build_scenario(cp: configparser.ConfigParser) -> ArrayScenario:
    sec = cp["scenario"] if cp.has_section("scenario") else {}
    _check_keys("scenario", sec.keys(), _SCENARIO_KEYS)
    preset = sec.get("preset", "paper_twin").strip()
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    unit_sections = [s for s in cp.sections() if s.startswith("unit ")]

    if preset == "none":
        base = None
    else:
        base = paper_twin_scenario(drift=preset == "paper_twin")

    exc = base.excitation if base else None
    amp_period = _period(sec, "amplitude_period_s", exc.amplitude.period if exc else None)
    phase_period = _period(sec, "phase_period_s", exc.phase.period if exc else None)
    try:
        if "amplitude_profile_a" in sec:
            amplitude = parse_profile(sec["amplitude_profile_a"], amp_period)
        elif exc:
            amplitude = replace(exc.amplitude, period=amp_period)
        else:
            raise ConfigError("[scenario] amplitude_profile_a is required without a preset")
        if "phase_profile_rad" in sec:
            phase = parse_profile(sec["phase_profile_rad"], phase_period)
        else:
            phase = replace(exc.phase, period=phase_period) if exc else PiecewiseLinear.constant()
        excitation = Excitation(
            amplitude=amplitude,
            frequency=float(sec.get("frequency_hz", exc.frequency if exc else 60.0)),
            base_phase=float(sec.get("base_phase_rad", exc.base_phase if exc else 0.0)),
            phase=phase,
        )
        if "calibration_levels_a" in sec:
            levels = _floats(sec["calibration_levels_a"])
        elif base:
            levels = base.sweep.levels
        else:
            raise ConfigError("[scenario] calibration_levels_a is required without a preset")
        sweep = CalibrationSweep(levels, float(sec.get(
            "calibration_dwell_s", base.sweep.dwell_s if base else 1.0)))
    except ValueError as exc_:
        raise ConfigError(f"[scenario] {exc_}") from exc_

    if base:
        ids = list(base.unit_ids)
        table = {uid: _unit_defaults(base, k) for k, uid in enumerate(ids)}
    else:
        ids, table = [], {}
    for name in unit_sections:
        uid = name[len("unit "):].strip()
        usec = cp[name]
        _check_keys(name, usec.keys(), _UNIT_KEYS)
        if uid not in table:
            if base:
                raise ConfigError(f"[{name}] preset {preset!r} has no unit {uid!r}")
            ids.append(uid)
            table[uid] = {"angle_rad": 2 * math.pi * (len(ids) - 1) / max(1, len(unit_sections)),
                          "alignment": 1.0, "electronics_phase_rad": 0.0, "noise_v": 0.0,
                          "eps": 0.0, "delta_rad": 0.0,
                          "drift_eps": PiecewiseLinear.constant(),
                          "drift_delta_rad": PiecewiseLinear.constant()}
        for key, value in usec.items():
            try:
                if key.startswith("drift_"):
                    table[uid][key] = parse_profile(value)
                else:
                    table[uid][key] = float(value)
            except ValueError as exc_:
                raise ConfigError(f"[{name}] {key}: {exc_}") from exc_
    if not ids:
        raise ConfigError("no units defined; add [unit <id>] sections or use a preset")
    for uid in ids:
        missing = {"radius_m", "gain_v_per_t"} - set(table[uid])
        if missing:
            raise ConfigError(f"[unit {uid}] missing {', '.join(sorted(missing))}")

    col = lambda key: tuple(table[u][key] for u in ids)  # noqa: E731
    try:
        return ArrayScenario(
            geometry=GeometryModel(tuple(ids), col("radius_m"), col("angle_rad"), col("alignment")),
            excitation=excitation,
            drift=DriftSchedule(tuple(
                UnitDrift(table[u]["eps"], table[u]["delta_rad"], table[u]["drift_eps"],
                          table[u]["drift_delta_rad"]) for u in ids)),
            noise_v=col("noise_v"),
            gains=col("gain_v_per_t"),
            electronics_phase=col("electronics_phase_rad"),
            sweep=sweep,
            train_s=float(sec.get("train_s", base.train_s if base else 20.0)),
            test_s=float(sec.get("test_s", base.test_s if base else 60.0)),
            sample_rate=float(sec.get("sample_rate_hz", base.sample_rate if base else 20_000.0)),
            seed=0,
            reference_bias=_get_bool(sec.get("reference_bias", "false")),
        )
    except ValueError as exc_:
        raise ConfigError(str(exc_)) from exc_


def _unit_defaults(s: ArrayScenario, k: int) -> dict:
    d = s.drift[k]
    return {
        "radius_m": s.geometry.radii[k], "angle_rad": s.geometry.angles[k],
        "alignment": s.geometry.alignment[k], "gain_v_per_t": s.gains[k],
        "electronics_phase_rad": s.electronics_phase[k], "noise_v": s.noise_v[k],
        "eps": d.eps, "delta_rad": d.delta, "drift_eps": d.d_eps, "drift_delta_rad": d.d_delta,
    }


def load_config(path: str | Path | None = None, *, text: str | None = None, seed: int | None = None,
                alpha: float | None = None, kappa: float | None = None,
                paper_mode: bool = False, out_dir: str | Path | None = None) -> PipelineConfig:
    """Read a config file (or text) and apply command-line overrides.

    With neither ``path`` nor ``text`` the paper-twin preset with default
    analysis settings is used.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh, source=str(path))
        elif text is not None:
            cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    extra = set(cp.sections()) - {"pipeline", "scenario"}
    extra = {s for s in extra if not s.startswith("unit ")}
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(sorted(extra))}")

    scenario = _build_scenario(cp)
    p = cp["pipeline"] if cp.has_section("pipeline") else {}
    _check_keys("pipeline", p.keys(), _PIPELINE_KEYS)
    try:
        paper = paper_mode or _get_bool(p.get("paper_mode", "false"))
        settings = Settings(
            kappa=float(kappa if kappa is not None else p.get("kappa", 0.85)),
            alpha=float(alpha if alpha is not None else p.get("alpha", 0.99)),
            exceedance_rule=float(p.get("exceedance", 0.05)),
            variance_rule="squared" if paper else p.get("variance_rule", "squared").strip(),
            h0_form="printed" if paper else p.get("h0_form", "corrected").strip(),
        )
        windows = Windows(float(p.get("calibration_window_s", 0.5)),
                          float(p.get("train_window_s", 0.1)),
                          float(p.get("test_window_s", 1.0)))
        file_seed = int(p.get("seed", cp["scenario"].get("seed", 0)
                              if cp.has_section("scenario") else 0))
        max_nl = float(p.get("max_nonlinearity", 1e-2))
    except ValueError as exc:
        raise ConfigError(f"[pipeline] {exc}") from exc
    scenario = scenario.with_seed(seed if seed is not None else file_seed)
    return PipelineConfig(scenario, settings, windows, max_nl,
                          Path(out_dir) if out_dir is not None else Path("out"))


def dumps_config(cfg: PipelineConfig) -> str:
    """Fully resolved config text (``preset = none``) that reloads to ``cfg``."""
    s, st, w = cfg.scenario, cfg.settings, cfg.windows
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["pipeline"] = {
        "seed": str(s.seed), "kappa": repr(st.kappa), "alpha": repr(st.alpha),
        "exceedance": repr(st.exceedance_rule), "variance_rule": st.variance_rule,
        "h0_form": st.h0_form, "calibration_window_s": repr(w.calibration_s),
        "train_window_s": repr(w.train_s), "test_window_s": repr(w.test_s),
        "max_nonlinearity": repr(cfg.max_nonlinearity),
    }
    exc = s.excitation
    cp["scenario"] = {
        "preset": "none", "frequency_hz": repr(exc.frequency),
        "sample_rate_hz": repr(s.sample_rate), "base_phase_rad": repr(exc.base_phase),
        "amplitude_profile_a": format_profile(exc.amplitude),
        "amplitude_period_s": repr(exc.amplitude.period) if exc.amplitude.period else "none",
        "phase_profile_rad": format_profile(exc.phase),
        "phase_period_s": repr(exc.phase.period) if exc.phase.period else "none",
        "calibration_levels_a": " ".join(repr(v) for v in s.sweep.levels),
        "calibration_dwell_s": repr(s.sweep.dwell_s), "train_s": repr(s.train_s),
        "test_s": repr(s.test_s), "reference_bias": str(s.reference_bias).lower(),
    }
    for k, uid in enumerate(s.unit_ids):
        d = _unit_defaults(s, k)
        cp[f"unit {uid}"] = {key: format_profile(v) if isinstance(v, PiecewiseLinear) else repr(v)
                             for key, v in d.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
