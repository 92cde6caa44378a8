"""Q (squared prediction error) statistic and its control limit."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special, stats

from .pca import DataMatrix, PcaModel, decompose, normalize_test

logger = logging.getLogger(__name__)

H0Form = Literal["corrected", "printed"]


class DegenerateThresholdError(ValueError):
    pass


@dataclass(frozen=True)
class QSeries:
    values: np.ndarray
    threshold: float
    alpha: float
    model_id: str

    @property
    def exceeded(self) -> np.ndarray:
        return self.values > self.threshold

    @property
    def exceedance_fraction(self) -> float:
        return float(np.mean(self.exceeded)) if self.values.size else 0.0

    @property
    def total(self) -> float:
        return float(self.values.sum())


def q_statistic(residual) -> np.ndarray:
    """Row-wise sum of squared residuals."""
    e = np.atleast_2d(np.asarray(residual, dtype=float))
    return np.einsum("ij,ij->i", e, e)


def normal_quantile(alpha: float) -> float:
    """One-sided standard normal critical value ``C`` with Phi(C) = alpha."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return float(special.ndtri(alpha))


def q_alpha_from_spectrum(residual_eigenvalues, alpha: float = 0.99,
                          h0_form: H0Form = "corrected") -> float:
    """Jackson-Mudholkar limit for the Q statistic.

    ``h0_form="printed"`` uses ``3*theta3**2`` in the h0 denominator instead of
    the usual ``3*theta2**2``. When h0 <= 0 the scaled chi-square limit
    ``g * chi2_h(alpha)`` with ``g = theta2/theta1``, ``h = theta1**2/theta2``
    is returned instead.
    """
    if not 0.5 < alpha < 1:
        raise ValueError(f"alpha must be in (0.5, 1), got {alpha}")
    lam = np.asarray(residual_eigenvalues, dtype=float)
    if lam.size == 0 or not np.any(lam > 0):
        raise DegenerateThresholdError("residual eigenvalues are all zero")
    t1, t2, t3 = (float(np.sum(lam ** i)) for i in (1, 2, 3))
    denom = 3 * (t3 ** 2 if h0_form == "printed" else t2 ** 2)
    h0 = 1 - 2 * t1 * t3 / denom
    if h0 <= 0:
        logger.warning("h0 = %.3g <= 0; using scaled chi-square control limit", h0)
        return chi2_control_limit(lam, alpha)
    c = normal_quantile(alpha)
    base = c * math.sqrt(2 * t2 * h0 ** 2) / t1 + 1 + t2 * h0 * (h0 - 1) / t1 ** 2
    if base <= 0:
        logger.warning("Jackson-Mudholkar base %.3g <= 0; using scaled chi-square limit", base)
        return chi2_control_limit(lam, alpha)
    return t1 * base ** (1 / h0)


def chi2_control_limit(residual_eigenvalues, alpha: float) -> float:
    lam = np.asarray(residual_eigenvalues, dtype=float)
    t1, t2 = lam.sum(), np.sum(lam ** 2)
    return float(t2 / t1 * stats.chi2.ppf(alpha, t1 ** 2 / t2))


def q_alpha(model: PcaModel, alpha: float = 0.99, h0_form: H0Form = "corrected") -> float:
    return q_alpha_from_spectrum(model.residual_eigenvalues, alpha, h0_form)


def model_id(model: PcaModel) -> str:
    return f"{model.kind}:{'+'.join(model.unit_ids)}"


def monitor(test: DataMatrix, model: PcaModel, alpha: float = 0.99,
            h0_form: H0Form = "corrected") -> QSeries:
    """Q of every test row against the model's control limit."""
    dec = decompose(normalize_test(test, model), model)
    return QSeries(q_statistic(dec.residual), q_alpha(model, alpha, h0_form), alpha,
                   model_id(model))
