"""
Attack Prediction Module

EWMA time-series prediction of next-day attackers per victim, plus the
worst-offender baselines:
- ewma_scores: per-source smoothed attack presence over the training window
- predict: threshold (and optional budget) listing into a watchlist
- lwol / gwol: local and global worst offender lists
"""

import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .errors import InputError
from .events import AttackEvent, day_number, format_address

logger = logging.getLogger(__name__)

GLOBAL_VICTIM = "*"


class PredictionParams(BaseModel):
    """EWMA smoothing, window lengths and listing rule."""
    alpha: float = Field(default=0.9, gt=0, le=1)
    t_train: int = Field(default=5, ge=1)
    t_test: int = Field(default=1, ge=1)
    threshold: float = Field(default=0.5, ge=0)
    budget: Optional[int] = Field(default=None, ge=1)

    def training_window(self, test_day: int) -> Tuple[int, int]:
        return test_day - self.t_train, test_day - 1


@dataclass(frozen=True)
class WatchlistEntry:
    source_ip: int
    score: float


@dataclass(frozen=True)
class Watchlist:
    """Sources predicted to attack a victim on the test day, best first."""
    victim: str
    test_day: int
    entries: Tuple[WatchlistEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def sources(self) -> frozenset:
        return frozenset(entry.source_ip for entry in self.entries)

    def for_victim(self, victim: str) -> "Watchlist":
        return replace(self, victim=victim)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "victim": [self.victim] * len(self.entries),
                "test_day": [self.test_day] * len(self.entries),
                "rank": list(range(1, len(self.entries) + 1)),
                "source_ip": [format_address(e.source_ip) for e in self.entries],
                "score": [e.score for e in self.entries],
            },
            columns=["victim", "test_day", "rank", "source_ip", "score"],
        )


def watchlists_frame(watchlists: Iterable[Watchlist]) -> pd.DataFrame:
    frames = [w.to_frame() for w in watchlists]
    if not frames:
        return Watchlist("", 0).to_frame()
    return pd.concat(frames, ignore_index=True)


def _ranked(scores: Dict[int, float]) -> List[Tuple[int, float]]:
    return sorted(scores.items(), key=lambda item: (-item[1], item[0]))


def ewma_scores(events: Iterable[AttackEvent], params: PredictionParams, test_day: int, origin: int) -> Dict[int, float]:
    """
    EWMA score of every source seen in the training window.

    x_d is 1 if the source attacked on day d, however many times; the
    recurrence r <- alpha * x_d + (1 - alpha) * r starts from 0 on the
    first training day. Events outside the window are ignored.

    Args:
        events: Training events of one victim, native and received
        params: Prediction parameters
        test_day: Day being predicted
        origin: UTC midnight of day 1

    Returns:
        Mapping source_ip -> score for every strictly positive score
    """
    first, last = params.training_window(test_day)
    active: Dict[int, set] = {}
    for event in events:
        day = day_number(event.timestamp, origin)
        if first <= day <= last:
            active.setdefault(event.source_ip, set()).add(day)
    if not active:
        return {}

    sources = sorted(active)
    presence = np.zeros((len(sources), params.t_train))
    for row, source in enumerate(sources):
        for day in active[source]:
            presence[row, day - first] = 1.0

    scores = np.zeros(len(sources))
    for column in range(params.t_train):
        scores = params.alpha * presence[:, column] + (1 - params.alpha) * scores
    return {source: float(score) for source, score in zip(sources, scores) if score > 0}


def predict(scores: Dict[int, float], params: PredictionParams, victim: str = "", test_day: int = 0) -> Watchlist:
    """List sources scoring at least the threshold, truncated to the budget."""
    listed = [(ip, score) for ip, score in _ranked(scores) if score > 0 and score >= params.threshold]
    if params.budget is not None:
        listed = listed[:params.budget]
    return Watchlist(victim, test_day, tuple(WatchlistEntry(ip, score) for ip, score in listed))


def _top_offenders(events: Iterable[AttackEvent], k: int) -> Tuple[WatchlistEntry, ...]:
    if k < 1:
        raise InputError(f"Offender list size must be at least 1, got {k}")
    counts = Counter(event.source_ip for event in events)
    top = _ranked({ip: float(count) for ip, count in counts.items()})[:k]
    return tuple(WatchlistEntry(ip, score) for ip, score in top)


def lwol(events: Iterable[AttackEvent], k: int, victim: str = "", test_day: int = 0) -> Watchlist:
    """Local Worst Offender List: top-k sources by attacks on this victim."""
    return Watchlist(victim, test_day, _top_offenders(events, k))


def gwol(events: Iterable[AttackEvent], k: int, test_day: int = 0) -> Watchlist:
    """Global Worst Offender List; the same list serves every victim."""
    return Watchlist(GLOBAL_VICTIM, test_day, _top_offenders(events, k))
