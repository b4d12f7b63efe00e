"""
Prediction Evaluation Module

Scores watchlists against the attacks that actually happened:
- confusion counts and ROC points per victim and day
- local and global upper bounds on true positives
- improvement of collaborative over baseline prediction
- coalition stability across days
- Welch t and Pearson chi-square tests for collaborator statistics
"""

import logging
from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy.special import betainc, gammaincc

from .collaboration import PartnershipRound
from .errors import InputError, UndefinedMetricError
from .predictor import Watchlist

logger = logging.getLogger(__name__)

LARGE_COLLABORATOR_EVENTS = 500
MERGED_CORRELATION_ROW = "pearson_cosine"


@dataclass(frozen=True)
class ConfusionCounts:
    victim: str
    test_day: int
    tp: int
    fp: int
    tn: int
    fn: int
    universe_size: int

    def to_row(self) -> Dict[str, object]:
        return asdict(self)


@dataclass(frozen=True)
class BoundsReport:
    victim: str
    test_day: int
    lub: int
    gub: int


class TTestResult(NamedTuple):
    statistic: float
    p_value: float
    df: float


class ChiSquareResult(NamedTuple):
    statistic: float
    df: int
    p_value: float


def universe(training_sources: Mapping[str, Iterable[int]], actual: Iterable[int]) -> FrozenSet[int]:
    """Sources in any sampled victim's training window plus the actual attackers."""
    found = set(actual)
    for sources in training_sources.values():
        found.update(sources)
    return frozenset(found)


def score(watchlist: Watchlist, actual: Iterable[int], universe_sources: Iterable[int]) -> ConfusionCounts:
    """
    Confusion counts of a watchlist against the test-day attackers.

    Raises:
        InputError: the universe misses a listed source or an attacker
    """
    listed = watchlist.sources
    attackers = frozenset(actual)
    everything = frozenset(universe_sources)
    outside = (listed | attackers) - everything
    if outside:
        raise InputError(f"{len(outside)} listed or attacking sources fall outside the universe")

    tp = len(listed & attackers)
    fp = len(listed - attackers)
    fn = len(attackers - listed)
    return ConfusionCounts(watchlist.victim, watchlist.test_day, tp, fp, len(everything) - tp - fp - fn, fn, len(everything))


def bounds(victim: str, test_day: int, training_sources: Mapping[str, Iterable[int]], actual: Iterable[int]) -> BoundsReport:
    """
    Local and global upper bounds on true positives.

    LUB counts attackers the victim itself saw in training; GUB counts
    attackers any sampled victim saw.
    """
    attackers = frozenset(actual)
    own = frozenset(training_sources.get(victim, ()))
    anyone = universe(training_sources, ())
    return BoundsReport(victim, test_day, len(own & attackers), len(anyone & attackers))


def improvement(tp_baseline: int, tp_collab: int) -> Optional[float]:
    """(TP_collab - TP_baseline) / TP_baseline, or None when the baseline is 0."""
    if tp_baseline <= 0:
        return None
    return (tp_collab - tp_baseline) / tp_baseline


def roc_point(counts: ConfusionCounts) -> Optional[Tuple[float, float]]:
    """(FPR, TPR), or None when either denominator is 0."""
    if counts.fp + counts.tn == 0 or counts.tp + counts.fn == 0:
        return None
    return counts.fp / (counts.fp + counts.tn), counts.tp / (counts.tp + counts.fn)


def coalition_stability(before: PartnershipRound, after: PartnershipRound) -> Optional[float]:
    """
    Mean fraction of a victim's partners kept into the next round.

    Victims without partners in the first round are skipped; None when
    nobody had partners.
    """
    kept = []
    for victim, partners in before.coalitions.items():
        if partners:
            kept.append(len(partners & after.partners(victim)) / len(partners))
    if not kept:
        return None
    return float(np.mean(kept))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """
    Welch's unequal-variance t-test, two-sided.

    Degrees of freedom follow Welch-Satterthwaite; the p value is the
    regularized incomplete beta I_{df/(df+t^2)}(df/2, 1/2).
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if len(x) < 2 or len(y) < 2:
        raise UndefinedMetricError(f"t-test needs two samples of size >= 2, got {len(x)} and {len(y)}")
    vx, vy = x.var(ddof=1) / len(x), y.var(ddof=1) / len(y)
    if vx + vy == 0:
        raise UndefinedMetricError("t-test is undefined for two zero-variance samples")

    t = float((x.mean() - y.mean()) / np.sqrt(vx + vy))
    df = float((vx + vy) ** 2 / (vx ** 2 / (len(x) - 1) + vy ** 2 / (len(y) - 1)))
    p = float(betainc(df / 2, 0.5, df / (df + t * t)))
    return TTestResult(t, min(1.0, p), df)


def chi_square_test(table: Sequence[Sequence[float]]) -> ChiSquareResult:
    """
    Pearson's chi-square test of independence, without continuity correction.

    Raises:
        UndefinedMetricError: fewer than 2 rows or columns, or a zero expected count
    """
    observed = np.asarray(table, dtype=float)
    if observed.ndim != 2 or observed.shape[0] < 2 or observed.shape[1] < 2:
        raise UndefinedMetricError(f"Contingency table must be at least 2x2, got shape {observed.shape}")
    total = observed.sum()
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / total if total else np.zeros_like(observed)
    if (expected <= 0).any():
        raise UndefinedMetricError("Contingency table has a zero expected count")

    statistic = float(((observed - expected) ** 2 / expected).sum())
    df = (observed.shape[0] - 1) * (observed.shape[1] - 1)
    return ChiSquareResult(statistic, df, float(gammaincc(df / 2, statistic / 2)))


class ImprovementSummary(BaseModel):
    mean: Optional[float] = None
    max: Optional[float] = None
    min: Optional[float] = None
    defined: int = 0
    undefined: int = 0


def summarize_improvements(values: Iterable[Optional[float]]) -> ImprovementSummary:
    """Mean, max and min over defined improvements; undefined ones are only counted."""
    values = list(values)
    defined = [v for v in values if v is not None]
    if not defined:
        return ImprovementSummary(undefined=len(values))
    return ImprovementSummary(
        mean=float(np.mean(defined)),
        max=float(max(defined)),
        min=float(min(defined)),
        defined=len(defined),
        undefined=len(values) - len(defined),
    )


class KnowledgeCorrelation(BaseModel):
    r: float
    n: int


def knowledge_correlation(known_events: Sequence[float], true_positives: Sequence[float]) -> KnowledgeCorrelation:
    """
    Pearson R between what victims knew and how many attacks they predicted.

    Raises:
        UndefinedMetricError: fewer than 2 pairs or a constant sample
    """
    x = np.asarray(known_events, dtype=float)
    y = np.asarray(true_positives, dtype=float)
    if len(x) != len(y):
        raise InputError(f"Samples differ in length: {len(x)} vs {len(y)}")
    if len(x) < 2 or x.std() == 0 or y.std() == 0:
        raise UndefinedMetricError("Correlation needs at least 2 non-constant observations")
    return KnowledgeCorrelation(r=float(np.corrcoef(x, y)[0, 1]), n=len(x))


class SizeTest(BaseModel):
    first: str
    second: str
    statistic: float
    df: float
    p_value: float


class CollaboratorSizeReport(BaseModel):
    mean_size: Dict[str, float]
    large: Dict[str, int]
    small: Dict[str, int]
    t_tests: List[SizeTest]
    chi_square: Optional[SizeTest] = None


def _large_small_rows(large: Dict[str, int], small: Dict[str, int]) -> Tuple[List[str], List[List[int]]]:
    names = sorted(large)
    if "pearson" in large and "cosine" in large:
        names = [n for n in names if n not in ("pearson", "cosine")] + [MERGED_CORRELATION_ROW]
    rows = []
    for name in names:
        if name == MERGED_CORRELATION_ROW:
            rows.append([large["pearson"] + large["cosine"], small["pearson"] + small["cosine"]])
        else:
            rows.append([large[name], small[name]])
    return names, rows


def collaborator_size_analysis(
    sizes_by_metric: Mapping[str, Sequence[float]],
    large_threshold: int = LARGE_COLLABORATOR_EVENTS,
) -> CollaboratorSizeReport:
    """
    Compare how much collaborators know under each benefit metric.

    Runs a Welch t-test between every pair of metrics and one chi-square
    test over the metric x {large, small} table. Pearson and Cosine are
    merged into one row when both are present. Degenerate tests are left
    out with a warning.
    """
    mean_size, large, small = {}, {}, {}
    for metric, sizes in sizes_by_metric.items():
        values = np.asarray(sizes, dtype=float)
        mean_size[metric] = float(values.mean()) if len(values) else 0.0
        large[metric] = int((values > large_threshold).sum())
        small[metric] = int(len(values) - large[metric])

    t_tests = []
    for first, second in combinations(sorted(sizes_by_metric), 2):
        try:
            result = welch_t_test(sizes_by_metric[first], sizes_by_metric[second])
        except UndefinedMetricError as e:
            logger.warning(f"Skipping t-test {first} vs {second}: {e}")
            continue
        t_tests.append(SizeTest(first=first, second=second, statistic=result.statistic, df=result.df, p_value=result.p_value))

    chi = None
    names, rows = _large_small_rows(large, small)
    try:
        result = chi_square_test(rows)
        chi = SizeTest(first=",".join(names), second="large,small", statistic=result.statistic, df=result.df, p_value=result.p_value)
    except UndefinedMetricError as e:
        logger.warning(f"Skipping chi-square test: {e}")

    return CollaboratorSizeReport(mean_size=mean_size, large=large, small=small, t_tests=t_tests, chi_square=chi)


def confusion_frame(counts: Iterable[ConfusionCounts]) -> pd.DataFrame:
    return pd.DataFrame(
        [c.to_row() for c in counts],
        columns=["victim", "test_day", "tp", "fp", "tn", "fn", "universe_size"],
    )
