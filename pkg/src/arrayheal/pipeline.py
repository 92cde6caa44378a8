"""Simulate -> extract -> calibrate -> train -> monitor -> identify -> heal -> report.

Each stage reads only what earlier stages wrote under the output directory, so
a run can be resumed at any stage boundary. :func:`analyze` runs the same
steps in memory without touching disk.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pca, tables
from .calibration import CalibrationTable, calibrate_all
from .config import PipelineConfig, dumps_config
from .heal import HealedEstimate, heal
from .identify import IdentificationReport, identify
from .pca import PcaModel
from .phasor import wrap_phase
from .simulation import Segment, Synthesis, demodulate_segment, synthesize
from .spe import QSeries, monitor
from .tables import PhasorTable

logger = logging.getLogger(__name__)

STAGES = ("simulate", "extract", "calibrate", "train", "monitor", "identify", "heal", "report")
SEGMENTS = ("calibration", "train", "test")
KINDS = ("amplitude", "phase")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


# -- shared steps ------------------------------------------------------------

def window_for(cfg: PipelineConfig, segment: str) -> float:
    w = cfg.windows
    return {"calibration": w.calibration_s, "train": w.train_s, "test": w.test_s}[segment]


def extract_tables(synthesis: Synthesis, cfg: PipelineConfig) -> dict[str, PhasorTable]:
    out = {}
    for name, seg in synthesis.segments.items():
        t, unit_z, ref_z = demodulate_segment(seg, synthesis.frequency, window_for(cfg, name))
        out[name] = PhasorTable.from_complex(t, synthesis.unit_ids, unit_z, ref_z)
    return out


def calibrate_tables(calib: PhasorTable, cfg: PipelineConfig) -> CalibrationTable:
    return calibrate_all(calib.unit_ids, calib.units, calib.reference,
                         max_nonlinearity=cfg.max_nonlinearity)


def train_models(train: PhasorTable, cfg: PipelineConfig) -> dict[str, PcaModel]:
    s = cfg.settings
    mats = train.matrices()
    return {k: pca.fit(mats[k], s.kappa, rule=s.variance_rule) for k in KINDS}


def monitor_models(models: dict[str, PcaModel], test: PhasorTable,
                   cfg: PipelineConfig) -> dict[str, QSeries]:
    mats = test.matrices()
    s = cfg.settings
    return {k: monitor(mats[k], models[k], s.alpha, s.h0_form) for k in KINDS}


@dataclass
class Analysis:
    cfg: PipelineConfig
    phasors: dict[str, PhasorTable]
    calibration: CalibrationTable
    models: dict[str, PcaModel]
    monitor: dict[str, QSeries]
    identification: IdentificationReport
    healed: HealedEstimate


def analyze(cfg: PipelineConfig, synthesis: Synthesis | None = None) -> Analysis:
    """Whole pipeline in memory."""
    synthesis = synthesis or synthesize(cfg.scenario)
    ph = extract_tables(synthesis, cfg)
    table = calibrate_tables(ph["calibration"], cfg)
    models = train_models(ph["train"], cfg)
    q = monitor_models(models, ph["test"], cfg)
    report = identify(ph["train"].matrices(), ph["test"].matrices(), cfg.settings)
    test = ph["test"]
    healed = heal(test.t, test.units, test.reference, table, test.unit_ids, report.abnormal)
    return Analysis(cfg, ph, table, models, q, report, healed)


# -- persisted artifacts -----------------------------------------------------

class Layout:
    def __init__(self, root: Path):
        self.root = Path(root)

    config = property(lambda self: self.root / "config.ini")
    waveform_meta = property(lambda self: self.root / "waveforms" / "meta.json")
    calibration = property(lambda self: self.root / "calibration.csv")
    identification = property(lambda self: self.root / "identify" / "identification.csv")
    identification_text = property(lambda self: self.root / "identify" / "summary.txt")
    pair_scores = property(lambda self: self.root / "identify" / "pair_scores.csv")
    triple_q = property(lambda self: self.root / "identify" / "triple_q.csv")
    healed = property(lambda self: self.root / "heal" / "healed.csv")
    report_dir = property(lambda self: self.root / "report")

    def waveform(self, segment: str) -> Path:
        return self.root / "waveforms" / f"{segment}.npy"

    def phasors(self, segment: str) -> Path:
        return self.root / "phasors" / f"{segment}.csv"

    def model(self, kind: str) -> Path:
        return self.root / "models" / f"{kind}.txt"

    def qseries(self, kind: str) -> Path:
        return self.root / "monitor" / f"q_{kind}.csv"


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(stage, f"missing input {path}; run the earlier stages first")
    return path


def stage_simulate(cfg: PipelineConfig) -> None:
    lay = Layout(cfg.out_dir)
    lay.root.mkdir(parents=True, exist_ok=True)
    lay.config.write_text(dumps_config(cfg), encoding="utf-8")
    syn = synthesize(cfg.scenario)
    lay.waveform_meta.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "frequency_hz": syn.frequency,
        "unit_ids": list(syn.unit_ids),
        "channels": list(syn.unit_ids) + [tables.REF],
        "segments": {n: {"start_time_s": s.start_time, "sample_rate_hz": s.sample_rate,
                         "n_samples": s.n_samples} for n, s in syn.segments.items()},
    }
    lay.waveform_meta.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for name, seg in syn.segments.items():
        stacked = np.vstack([seg.units, seg.reference[np.newaxis, :]]).astype(np.float32)
        np.save(lay.waveform(name), stacked)


def _load_synthesis(lay: Layout) -> Synthesis:
    meta = json.loads(_require(lay.waveform_meta, "extract").read_text(encoding="utf-8"))
    segments = {}
    for name in SEGMENTS:
        info = meta["segments"][name]
        data = np.load(_require(lay.waveform(name), "extract")).astype(float)
        segments[name] = Segment(name, info["start_time_s"], info["sample_rate_hz"],
                                 data[:-1], data[-1])
    return Synthesis(tuple(meta["unit_ids"]), meta["frequency_hz"], segments)


def stage_extract(cfg: PipelineConfig) -> None:
    lay = Layout(cfg.out_dir)
    for name, table in extract_tables(_load_synthesis(lay), cfg).items():
        tables.write_phasors(lay.phasors(name), table)


def _phasors(lay: Layout, segment: str, stage: str) -> PhasorTable:
    return tables.read_phasors(_require(lay.phasors(segment), stage))


def stage_calibrate(cfg: PipelineConfig) -> None:
    lay = Layout(cfg.out_dir)
    table = calibrate_tables(_phasors(lay, "calibration", "calibrate"), cfg)
    tables.write_calibration(lay.calibration, table)


def stage_train(cfg: PipelineConfig) -> None:
    lay = Layout(cfg.out_dir)
    for kind, model in train_models(_phasors(lay, "train", "train"), cfg).items():
        lay.model(kind).parent.mkdir(parents=True, exist_ok=True)
        lay.model(kind).write_text(pca.dumps(model), encoding="utf-8")


def stage_monitor(cfg: PipelineConfig) -> None:
    lay = Layout(cfg.out_dir)
    models = {k: pca.loads(_require(lay.model(k), "monitor").read_text(encoding="utf-8"))
              for k in KINDS}
    for kind, q in monitor_models(models, _phasors(lay, "test", "monitor"), cfg).items():
        tables.write_qseries(lay.qseries(kind), q)


def write_identification(lay: Layout, report: IdentificationReport) -> None:
    rows, pair_rows, triple_rows = [], [], []
    for kind, kr in report.kinds.items():
        for uid in report.unit_ids:
            v = kr.verdicts[uid]
            rows.append((kind, uid, "abnormal" if v.abnormal else "normal", float(v.exceedance),
                         int(v.in_reference_pair)))
        for rank, s in enumerate(kr.pair_scores, 1):
            pair_rows.append((kind, rank, s.subset[0], s.subset[1], s.q_sum, s.threshold))
        for uid, s in kr.triple_scores.items():
            for i, (q, e) in enumerate(zip(s.q_series.values, s.q_series.exceeded)):
                triple_rows.append((kind, uid, i, float(q), s.threshold, int(e)))
    tables.write_csv(lay.identification,
                     ("kind", "unit", "verdict", "exceedance", "reference_pair"), rows)
    tables.write_csv(lay.pair_scores,
                     ("kind", "rank", "unit_a", "unit_b", "q_sum", "threshold"), pair_rows)
    tables.write_csv(lay.triple_q, ("kind", "unit", "row", "q", "threshold", "exceeded"),
                     triple_rows)
    lay.identification_text.write_text(identification_summary(report), encoding="utf-8")


def identification_summary(report: IdentificationReport) -> str:
    lines = []
    for kind, kr in report.kinds.items():
        abnormal = sorted(kr.abnormal, key=report.unit_ids.index)
        lines.append(f"{kind}: reference pair {kr.reference_pair[0]}, {kr.reference_pair[1]}")
        lines.append(f"{kind}: abnormal {', '.join(abnormal) if abnormal else '(none)'}")
        for uid in report.unit_ids:
            v = kr.verdicts[uid]
            tag = "reference" if v.in_reference_pair else ("ABNORMAL" if v.abnormal else "normal")
            lines.append(f"  {uid:>6}  {tag:<9}  exceedance {v.exceedance:6.1%}")
    excluded = sorted(report.abnormal, key=report.unit_ids.index)
    lines.append(f"excluded from current estimate: {', '.join(excluded) if excluded else '(none)'}")
    return "\n".join(lines) + "\n"


def read_excluded(path: Path) -> frozenset[str]:
    out = set()
    for _, row in tables.read_rows(path, ("kind", "unit", "verdict")):
        if row["verdict"] == "abnormal":
            out.add(row["unit"])
    return frozenset(out)


def stage_identify(cfg: PipelineConfig) -> None:
    lay = Layout(cfg.out_dir)
    train = _phasors(lay, "train", "identify").matrices()
    test = _phasors(lay, "test", "identify").matrices()
    write_identification(lay, identify(train, test, cfg.settings))


HEALED_COLUMNS = ("t_s", "conv_amplitude", "conv_phase_rad", "healed_amplitude",
                  "healed_phase_rad", "ref_amplitude", "ref_phase_rad", "conv_eps_a",
                  "conv_eps_p_rad", "healed_eps_a", "healed_eps_p_rad")


def write_healed(path: Path, h: HealedEstimate) -> None:
    def rows():
        for i in range(h.t.size):
            c, hd, r = h.conventional[i], h.healed[i], h.reference[i]
            yield (float(h.t[i]), float(abs(c)), wrap_phase(np.angle(c)), float(abs(hd)),
                   wrap_phase(np.angle(hd)), float(abs(r)), wrap_phase(np.angle(r)),
                   float(h.conventional_amp_error[i]), float(h.conventional_phase_error[i]),
                   float(h.healed_amp_error[i]), float(h.healed_phase_error[i]))

    tables.write_csv(path, HEALED_COLUMNS, rows())


def stage_heal(cfg: PipelineConfig) -> None:
    lay = Layout(cfg.out_dir)
    test = _phasors(lay, "test", "heal")
    table = tables.read_calibration(_require(lay.calibration, "heal"))
    excluded = read_excluded(_require(lay.identification, "heal"))
    h = heal(test.t, test.units, test.reference, table, test.unit_ids, excluded)
    write_healed(lay.healed, h)


def stage_report(cfg: PipelineConfig) -> None:
    from .report import emit_report

    emit_report(cfg.out_dir)


_STAGE_FUNCS = {
    "simulate": stage_simulate, "extract": stage_extract, "calibrate": stage_calibrate,
    "train": stage_train, "monitor": stage_monitor, "identify": stage_identify,
    "heal": stage_heal, "report": stage_report,
}


def run_stage(name: str, cfg: PipelineConfig) -> None:
    try:
        _STAGE_FUNCS[name](cfg)
    except StageError:
        raise
    except (ValueError, OSError, KeyError, ZeroDivisionError) as exc:
        raise StageError(name, str(exc)) from exc


def run_pipeline(cfg: PipelineConfig, stages=STAGES) -> int:
    """Run ``stages`` in order; returns 0 on success, raises :class:`StageError`."""
    for name in stages:
        logger.info("stage %s", name)
        run_stage(name, cfg)
    return 0
