"""PCA models trained on normal-operation unit readings.

Columns are autoscaled with the training mean and standard deviation, so the
eigenproblem is on the training correlation matrix. The component count is
chosen by a variance-ratio threshold; the remaining eigenvectors span the
residual subspace that drift is projected into.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .phasor import unwrap_phase

Kind = Literal["amplitude", "phase"]
VarianceRule = Literal["squared", "linear"]


class DegenerateColumnError(ValueError):
    pass


class NoResidualSpaceError(ValueError):
    pass


class ModelMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class DataMatrix:
    """Rows are time points, columns are units.

    Phase matrices must already be unwrapped per column; use
    :meth:`from_phases` to build one from wrapped readings.
    """

    values: np.ndarray
    kind: Kind
    unit_ids: tuple[str, ...]

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        if v.ndim != 2:
            raise ValueError(f"data matrix must be 2-D, got shape {v.shape}")
        if v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError(f"data matrix needs at least 2 rows and 2 columns, got {v.shape}")
        if v.shape[1] != len(self.unit_ids):
            raise ValueError("one unit id per column required")
        if not np.all(np.isfinite(v)):
            raise ValueError("data matrix contains non-finite entries")
        if self.kind not in ("amplitude", "phase"):
            raise ValueError(f"unknown kind {self.kind!r}")

    @classmethod
    def from_phases(cls, wrapped, unit_ids) -> DataMatrix:
        cols = np.column_stack([unwrap_phase(c) for c in np.asarray(wrapped, dtype=float).T])
        return cls(cols, "phase", unit_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def select(self, unit_ids) -> DataMatrix:
        idx = [self.unit_ids.index(u) for u in unit_ids]
        return DataMatrix(self.values[:, idx], self.kind, tuple(unit_ids))


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    std: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are eigenvectors
    n_components: int
    kappa: float
    kind: Kind
    unit_ids: tuple[str, ...]
    variance_rule: VarianceRule = "squared"

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def principal(self) -> np.ndarray:
        return self.eigenvectors[:, : self.n_components]

    @property
    def residual(self) -> np.ndarray:
        return self.eigenvectors[:, self.n_components:]

    @property
    def residual_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.n_components:]


@dataclass(frozen=True)
class Decomposition:
    main: np.ndarray
    residual: np.ndarray


def symmetric_eigh(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric PSD matrix, deterministic order and sign.

    Eigenvalues descend and are floored at zero. Each eigenvector is flipped
    so its largest-magnitude entry is positive.
    """
    z = np.asarray(z, dtype=float)
    w, v = np.linalg.eigh((z + z.T) / 2)
    order = np.argsort(w, kind="stable")[::-1]
    w, v = np.maximum(w[order], 0.0), v[:, order]
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return w, v * signs


def component_count(eigenvalues, kappa: float, rule: VarianceRule = "squared") -> int:
    """Smallest m whose leading share of (squared, by default) eigenvalues exceeds kappa."""
    w = np.asarray(eigenvalues, dtype=float)
    weights = w ** 2 if rule == "squared" else w
    total = weights.sum()
    if total <= 0:
        return len(w)
    ratio = np.cumsum(weights) / total
    hits = np.nonzero(ratio > kappa)[0]
    return int(hits[0]) + 1 if hits.size else len(w)


def fit(train: DataMatrix, kappa: float = 0.85, *, rule: VarianceRule = "squared",
        n_components: int | None = None, max_components: int | None = None) -> PcaModel:
    """Train a model on ``train``.

    ``n_components`` forces m; ``max_components`` caps the threshold choice.
    """
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must be in (0, 1), got {kappa}")
    s = train.values
    n = s.shape[1]
    mean = s.mean(axis=0)
    std = s.std(axis=0, ddof=1)
    for j, uid in enumerate(train.unit_ids):
        if not std[j] > 1e-14 * max(1.0, abs(mean[j])):
            raise DegenerateColumnError(f"unit {uid} has zero variance in the {train.kind} training data")
    z = np.cov((s - mean) / std, rowvar=False, ddof=1)
    w, v = symmetric_eigh(z)

    if n_components is None:
        m = component_count(w, kappa, rule)
        if max_components is not None:
            m = min(m, max_components)
    else:
        m = n_components
    if not 1 <= m < n:
        raise NoResidualSpaceError(
            f"{m} principal components of {n} leave no residual subspace")
    return PcaModel(mean, std, w, v, m, kappa, train.kind, train.unit_ids, rule)


def normalize_test(x: DataMatrix, model: PcaModel) -> np.ndarray:
    """Scale test rows with the training mean and standard deviation.

    Phase columns are first moved by whole turns so their mean sits within
    pi of the training mean; independent unwrapping of two records can leave
    them on different branches.
    """
    if x.kind != model.kind or x.unit_ids != model.unit_ids:
        raise ModelMismatchError(
            f"test data ({x.kind}, {x.unit_ids}) does not match model ({model.kind}, {model.unit_ids})")
    values = x.values
    if x.kind == "phase":
        turns = np.round((values.mean(axis=0) - model.mean) / (2 * math.pi))
        values = values - 2 * math.pi * turns
    return (values - model.mean) / model.std


def decompose(x_bar: np.ndarray, model: PcaModel) -> Decomposition:
    x_bar = np.atleast_2d(np.asarray(x_bar, dtype=float))
    if x_bar.shape[1] != model.n_units:
        raise ModelMismatchError(f"expected {model.n_units} columns, got {x_bar.shape[1]}")
    p, r = model.principal, model.residual
    return Decomposition(main=x_bar @ p @ p.T, residual=x_bar @ r @ r.T)


# -- flat text persistence -------------------------------------------------

def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def dumps(model: PcaModel) -> str:
    lines = [
        "# pca-model v1",
        f"kind {model.kind}",
        f"units {' '.join(model.unit_ids)}",
        f"n_components {model.n_components}",
        f"kappa {model.kappa!r}",
        f"variance_rule {model.variance_rule}",
        f"mean {_fmt(model.mean)}",
        f"std {_fmt(model.std)}",
        f"eigenvalues {_fmt(model.eigenvalues)}",
        f"eigenvectors {_fmt(model.eigenvectors)}",
    ]
    return "\n".join(lines) + "\n"


def loads(text: str) -> PcaModel:
    fields = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        fields[key] = rest.split()
    try:
        units = tuple(fields["units"])
        n = len(units)
        vec = lambda k: np.array([float(v) for v in fields[k]])  # noqa: E731
        eigvecs = vec("eigenvectors").reshape(n, n)
        return PcaModel(
            mean=vec("mean"), std=vec("std"), eigenvalues=vec("eigenvalues"),
            eigenvectors=eigvecs, n_components=int(fields["n_components"][0]),
            kappa=float(fields["kappa"][0]), kind=fields["kind"][0], unit_ids=units,
            variance_rule=fields.get("variance_rule", ["squared"])[0],
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise ValueError(f"malformed PCA model text: {exc}") from exc
