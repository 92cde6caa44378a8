"""Drift detection and self-healing for magnetic sensor arrays.

The modules follow the processing chain: :mod:`simulation` produces unit
waveforms, :mod:`phasor` turns them into phasors, :mod:`calibration` fits
each unit against the reference, :mod:`pca` and :mod:`spe` monitor the
residual subspace, :mod:`identify` names the drifted units and :mod:`heal`
re-estimates the current without them.
"""

from .calibration import CalibrationTable, calibrate, calibrate_all
from .config import PipelineConfig, load_config
from .heal import HealedEstimate, estimate_current, heal
from .identify import IdentificationReport, Settings, identify
from .pca import DataMatrix, PcaModel, decompose, fit
from .phasor import Phasor, SampledWindow, extract_phasor, unwrap_phase, wrap_phase
from .pipeline import analyze, run_pipeline
from .simulation import ArrayScenario, paper_twin_scenario, synthesize
from .spe import QSeries, monitor, q_alpha, q_statistic

__all__ = [
    "ArrayScenario", "CalibrationTable", "DataMatrix", "HealedEstimate", "IdentificationReport",
    "PcaModel", "Phasor", "PipelineConfig", "QSeries", "SampledWindow", "Settings", "analyze",
    "calibrate", "calibrate_all", "decompose", "estimate_current", "extract_phasor", "fit", "heal",
    "identify", "load_config", "monitor", "paper_twin_scenario", "q_alpha", "q_statistic",
    "run_pipeline", "synthesize", "unwrap_phase", "wrap_phase",
]
