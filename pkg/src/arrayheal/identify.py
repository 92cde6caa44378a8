"""Two-step identification of units whose measurement error drifted.

Step one scores every unit pair by the summed Q statistic of a two-unit model
over the test record and trusts the lowest-scoring pair. Step two appends each
remaining unit to that pair and judges the three-unit Q against its control
limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from . import pca
from .pca import DataMatrix, VarianceRule
from .spe import H0Form, QSeries, monitor


@dataclass(frozen=True)
class CombinationScore:
    subset: tuple[str, ...]
    kind: str
    q_series: QSeries

    @property
    def q_sum(self) -> float:
        return self.q_series.total

    @property
    def threshold(self) -> float:
        return self.q_series.threshold


@dataclass(frozen=True)
class UnitVerdict:
    unit_id: str
    kind: str
    abnormal: bool
    exceedance: float  # share of test rows with Q above the limit
    in_reference_pair: bool = False


@dataclass
class KindReport:
    kind: str
    reference_pair: tuple[str, str]
    verdicts: dict[str, UnitVerdict]
    pair_scores: list[CombinationScore]
    triple_scores: dict[str, CombinationScore]

    @property
    def abnormal(self) -> frozenset[str]:
        return frozenset(u for u, v in self.verdicts.items() if v.abnormal)


@dataclass
class IdentificationReport:
    unit_ids: tuple[str, ...]
    kinds: dict[str, KindReport] = field(default_factory=dict)

    @property
    def abnormal(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for report in self.kinds.values():
            out |= report.abnormal
        return out

    @property
    def normal(self) -> tuple[str, ...]:
        return tuple(u for u in self.unit_ids if u not in self.abnormal)


@dataclass(frozen=True)
class Settings:
    kappa: float = 0.85
    alpha: float = 0.99
    exceedance_rule: float = 0.05
    variance_rule: VarianceRule = "squared"
    h0_form: H0Form = "corrected"


def _check_pair(train: DataMatrix, test: DataMatrix) -> None:
    if train.unit_ids != test.unit_ids or train.kind != test.kind:
        raise pca.ModelMismatchError("training and test matrices must share kind and unit ids")
    if len(train.unit_ids) < 3:
        raise ValueError("identification needs at least 3 units")


def _score(subset, train: DataMatrix, test: DataMatrix, settings: Settings,
           **fit_kwargs) -> CombinationScore:
    model = pca.fit(train.select(subset), settings.kappa, rule=settings.variance_rule,
                    **fit_kwargs)
    q = monitor(test.select(subset), model, settings.alpha, settings.h0_form)
    return CombinationScore(tuple(subset), train.kind, q)


def score_pairs(train: DataMatrix, test: DataMatrix,
                settings: Settings = Settings()) -> list[CombinationScore]:
    """Q-sum of every two-unit model, ascending."""
    _check_pair(train, test)
    scores = [_score(pair, train, test, settings, n_components=1)
              for pair in combinations(train.unit_ids, 2)]
    return sorted(scores, key=lambda s: (s.q_sum, s.subset))


def select_reference_pair(scores: list[CombinationScore]) -> tuple[str, str]:
    if not scores:
        raise ValueError("no pair scores to choose from")
    best = min(scores, key=lambda s: (s.q_sum, s.subset))
    return best.subset  # type: ignore[return-value]


def classify_units(reference_pair, train: DataMatrix, test: DataMatrix,
                   settings: Settings = Settings(),
                   pair_scores: list[CombinationScore] | None = None) -> KindReport:
    """Verdict per unit from its three-unit model with the reference pair."""
    _check_pair(train, test)
    pair = tuple(reference_pair)
    if len(pair) != 2 or len(set(pair)) != 2 or not set(pair) <= set(train.unit_ids):
        raise ValueError(f"invalid reference pair {reference_pair!r}")

    verdicts: dict[str, UnitVerdict] = {}
    triples: dict[str, CombinationScore] = {}
    for uid in train.unit_ids:
        if uid in pair:
            verdicts[uid] = UnitVerdict(uid, train.kind, False, 0.0, in_reference_pair=True)
            continue
        subset = tuple(u for u in train.unit_ids if u == uid or u in pair)
        score = _score(subset, train, test, settings, max_components=2)
        frac = score.q_series.exceedance_fraction
        verdicts[uid] = UnitVerdict(uid, train.kind, frac > settings.exceedance_rule, frac)
        triples[uid] = score
    return KindReport(train.kind, pair, verdicts, pair_scores or [], triples)


def identify_kind(train: DataMatrix, test: DataMatrix,
                  settings: Settings = Settings()) -> KindReport:
    scores = score_pairs(train, test, settings)
    return classify_units(select_reference_pair(scores), train, test, settings, scores)


def identify(train: dict[str, DataMatrix], test: dict[str, DataMatrix],
             settings: Settings = Settings()) -> IdentificationReport:
    """Run both steps independently for every signal kind present."""
    unit_ids = next(iter(train.values())).unit_ids
    report = IdentificationReport(unit_ids)
    for kind in ("amplitude", "phase"):
        if kind in train:
            report.kinds[kind] = identify_kind(train[kind], test[kind], settings)
    return report
