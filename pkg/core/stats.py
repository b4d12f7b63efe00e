"""
Dataset Statistics Module

Descriptive statistics over attack logs:
- Daily volumes, unique targets and unique sources
- Victim and attacker profiles
- Shared-versus-unique source distributions per active entity
- Shannon entropy of ports, sources and targets per day
- Inter-arrival time distributions at several aggregation levels

All distributions are returned as full empirical CDFs; binning is left
to whoever plots them.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Literal, Tuple

import numpy as np
import pandas as pd
from scipy.stats import entropy

from .errors import DayRangeError, InputError
from .events import Dataset

logger = logging.getLogger(__name__)

Perspective = Literal["victim", "source"]
EntropyField = Literal["port", "source", "target"]
Grouping = Literal["all", "same_ip", "same_slash24", "same_slash8"]
Unit = Literal["seconds", "hours"]

FIELD_COLUMNS = {"port": "target_port", "source": "source_ip", "target": "contributor_id"}
GROUPING_SHIFTS = {"same_ip": 0, "same_slash24": 8, "same_slash8": 24}
UNIT_SECONDS = {"seconds": 1, "hours": 3600}


@dataclass(frozen=True)
class DailyStats:
    day: int
    total_attacks: int
    unique_targets: int
    unique_sources: int


@dataclass(frozen=True)
class EmpiricalCDF:
    """Sorted samples with F(x) = fraction of samples <= x."""
    values: np.ndarray = field(default_factory=lambda: np.array([], dtype=float))

    @classmethod
    def from_samples(cls, samples: Iterable[float]) -> "EmpiricalCDF":
        return cls(np.sort(np.asarray(list(samples), dtype=float)))

    def __len__(self) -> int:
        return len(self.values)

    def __call__(self, x: float) -> float:
        if not len(self.values):
            return 0.0
        return float(np.searchsorted(self.values, x, side="right")) / len(self.values)

    def to_frame(self) -> pd.DataFrame:
        n = len(self.values)
        return pd.DataFrame({"value": self.values, "cdf": np.arange(1, n + 1) / n if n else np.array([], dtype=float)})


def daily_stats(dataset: Dataset) -> List[DailyStats]:
    """One DailyStats per day 1..T, zero-filled for quiet days."""
    if not len(dataset):
        return []
    frame = dataset.to_frame()
    grouped = frame.groupby("day").agg(
        total_attacks=("source_ip", "size"),
        unique_targets=("contributor_id", "nunique"),
        unique_sources=("source_ip", "nunique"),
    )
    grouped = grouped.reindex(range(1, dataset.n_days + 1), fill_value=0)
    return [
        DailyStats(int(day), int(row.total_attacks), int(row.unique_targets), int(row.unique_sources))
        for day, row in grouped.iterrows()
    ]


def _check_day(dataset: Dataset, day: int) -> None:
    if not 1 <= day <= dataset.n_days:
        raise DayRangeError(f"Day {day} outside 1..{dataset.n_days}")


def shared_unique_counts(dataset: Dataset, day: int, perspective: Perspective = "victim") -> pd.DataFrame:
    """
    Per active entity, how many of its counterparts that day are shared.

    For the victim perspective a source is common if at least one other
    victim saw it that day; the source perspective is symmetric.

    Returns:
        DataFrame with columns entity, common, unique
    """
    _check_day(dataset, day)
    if perspective not in ("victim", "source"):
        raise InputError(f"Unknown perspective: {perspective}")

    frame = dataset.to_frame()
    pairs = frame.loc[frame["day"] == day, ["contributor_id", "source_ip"]].drop_duplicates()
    entity, other = ("contributor_id", "source_ip") if perspective == "victim" else ("source_ip", "contributor_id")

    fan_in = pairs.groupby(other)[entity].transform("size")
    pairs = pairs.assign(common=(fan_in >= 2).astype(int), unique=(fan_in == 1).astype(int))
    counts = pairs.groupby(entity)[["common", "unique"]].sum().reset_index()
    return counts.rename(columns={entity: "entity"}).sort_values("entity").reset_index(drop=True)


def shared_unique_cdf(dataset: Dataset, day: int, perspective: Perspective = "victim") -> Tuple[EmpiricalCDF, EmpiricalCDF]:
    """CDFs of common and unique counterpart counts over active entities."""
    counts = shared_unique_counts(dataset, day, perspective)
    return EmpiricalCDF.from_samples(counts["common"]), EmpiricalCDF.from_samples(counts["unique"])


def daily_entropy(dataset: Dataset, field_name: EntropyField) -> pd.Series:
    """Shannon entropy (bits) of a log field for every day with attacks."""
    if field_name not in FIELD_COLUMNS:
        raise InputError(f"Unknown entropy field: {field_name}")
    if not len(dataset):
        return pd.Series([], dtype=float, name="entropy")
    frame = dataset.to_frame()
    counts = frame.groupby(["day", FIELD_COLUMNS[field_name]]).size()
    return counts.groupby(level="day").apply(lambda c: float(entropy(c.to_numpy(), base=2))).rename("entropy")


def entropy_cdf(dataset: Dataset, field_name: EntropyField) -> EmpiricalCDF:
    """CDF of per-day entropies; days without attacks contribute nothing."""
    return EmpiricalCDF.from_samples(daily_entropy(dataset, field_name))


def interarrival_gaps(dataset: Dataset, grouping: Grouping = "all", unit: Unit = "seconds") -> np.ndarray:
    """Consecutive time gaps between attacks within each group."""
    if grouping != "all" and grouping not in GROUPING_SHIFTS:
        raise InputError(f"Unknown grouping: {grouping}")
    if unit not in UNIT_SECONDS:
        raise InputError(f"Unknown unit: {unit}")
    if not len(dataset):
        return np.array([], dtype=float)

    frame = dataset.to_frame()
    if grouping == "all":
        key = pd.Series(0, index=frame.index)
    else:
        prefixes = np.right_shift(frame["source_ip"].to_numpy(dtype=np.int64), GROUPING_SHIFTS[grouping])
        key = pd.Series(prefixes, index=frame.index)
    ordered = frame.assign(group=key).sort_values(["group", "timestamp"], kind="mergesort")
    gaps = ordered.groupby("group")["timestamp"].diff().dropna()
    return gaps.to_numpy(dtype=float) / UNIT_SECONDS[unit]


def interarrival_cdf(dataset: Dataset, grouping: Grouping = "all", unit: Unit = "seconds") -> EmpiricalCDF:
    return EmpiricalCDF.from_samples(interarrival_gaps(dataset, grouping, unit))


def victim_daily_attacks(dataset: Dataset) -> pd.DataFrame:
    """Attack count per (day, victim) for the victims' profile."""
    frame = dataset.to_frame()
    return frame.groupby(["day", "contributor_id"]).size().rename("attacks").reset_index()


def attacker_daily_victims(dataset: Dataset) -> pd.DataFrame:
    """Distinct victims per (day, source) for the attackers' profile."""
    frame = dataset.to_frame()
    return frame.groupby(["day", "source_ip"])["contributor_id"].nunique().rename("victims").reset_index()


def top_ports(dataset: Dataset, n: int = 10) -> pd.DataFrame:
    """The n most attacked ports, ties broken by port number."""
    frame = dataset.to_frame()
    counts = frame.groupby("target_port").size().rename("attacks").reset_index()
    return counts.sort_values(["attacks", "target_port"], ascending=[False, True]).head(n).reset_index(drop=True)


def contribution_cdf(dataset: Dataset) -> EmpiricalCDF:
    """CDF over victims of the fraction of days they reported anything."""
    if not len(dataset):
        return EmpiricalCDF()
    frame = dataset.to_frame()
    active_days = frame.groupby("contributor_id")["day"].nunique()
    return EmpiricalCDF.from_samples(active_days / dataset.n_days)
