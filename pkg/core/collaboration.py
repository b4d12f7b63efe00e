"""
Collaboration Module

Turns victim logs into augmented training logs:
- pairwise benefit matrix, in plaintext or through the private protocols
- partner selection by global maximization over all pairs
- data sharing under the three strategies and log augmentation
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from protocols.psi import open_sessions, private_score, psi, psi_dt

from .errors import InputError, UndefinedMetricError
from .events import AttackEvent, SourceSet, VictimLog
from .similarity import Metric, RangePolicy, plaintext_score

logger = logging.getLogger(__name__)

Pair = Tuple[str, str]


class Mode(str, Enum):
    PLAINTEXT = "plaintext"
    PRIVATE = "private"


class Strategy(str, Enum):
    INTERSECTION = "intersection"
    INTERSECTION_WITH_DATA = "intersection_with_data"
    UNION_WITH_DATA = "union_with_data"


class WindowPolicy(str, Enum):
    HISTORY_BEFORE = "history_before"
    TRAIN_WINDOW = "train_window"


def policy_window(policy: WindowPolicy, day: int, t_train: int) -> Tuple[int, int]:
    """Inclusive day range a window policy draws sets and shared events from."""
    if WindowPolicy(policy) is WindowPolicy.TRAIN_WINDOW:
        return max(1, day - t_train), day - 1
    return 1, day - 1


def _share_order(event: AttackEvent) -> Tuple[int, int, int, str]:
    return (event.timestamp, event.source_ip, event.target_port, event.contributor_id)


@dataclass(frozen=True)
class BenefitMatrix:
    """Symmetric pairwise scores; NaN marks the diagonal and undefined pairs."""
    victims: Tuple[str, ...]
    values: np.ndarray
    metric: Metric
    computed_at: int
    mode: Mode = Mode.PLAINTEXT

    def index(self, victim: str) -> int:
        try:
            return self.victims.index(victim)
        except ValueError:
            raise InputError(f"Unknown victim: {victim}") from None

    def score(self, a: str, b: str) -> Optional[float]:
        value = self.values[self.index(a), self.index(b)]
        return None if np.isnan(value) else float(value)

    def pairs(self) -> Iterable[Tuple[str, str, float]]:
        """Every unordered pair once, lexicographically ordered."""
        n = len(self.victims)
        for i in range(n):
            for j in range(i + 1, n):
                yield self.victims[i], self.victims[j], float(self.values[i, j])

    def to_frame(self, selected: Optional["PartnershipRound"] = None) -> pd.DataFrame:
        chosen = set(selected.pairs) if selected else set()
        rows = [
            {
                "victim_a": a,
                "victim_b": b,
                "metric": self.metric.value,
                "score": value,
                "selected": int((a, b) in chosen),
            }
            for a, b, value in self.pairs()
        ]
        return pd.DataFrame(rows, columns=["victim_a", "victim_b", "metric", "score", "selected"])


@dataclass(frozen=True)
class PartnershipRound:
    """Pairs selected on one day and the coalition each victim belongs to."""
    day: int
    victims: Tuple[str, ...]
    pairs: Tuple[Pair, ...] = ()
    strategy: Optional[Strategy] = None
    all_missing: bool = False

    @cached_property
    def coalitions(self) -> Dict[str, FrozenSet[str]]:
        partners: Dict[str, set] = {victim: set() for victim in self.victims}
        for a, b in self.pairs:
            partners[a].add(b)
            partners[b].add(a)
        return {victim: frozenset(found) for victim, found in partners.items()}

    def partners(self, victim: str) -> FrozenSet[str]:
        return self.coalitions.get(victim, frozenset())

    @property
    def collaborators(self) -> FrozenSet[str]:
        return frozenset(victim for victim, found in self.coalitions.items() if found)

    def with_strategy(self, strategy: Strategy) -> "PartnershipRound":
        return replace(self, strategy=Strategy(strategy))

    def for_day(self, day: int) -> "PartnershipRound":
        return replace(self, day=day)


@dataclass(frozen=True)
class SharedData:
    """What one party receives from a partner."""
    sender: str
    events: Tuple[AttackEvent, ...] = ()
    sources: FrozenSet[int] = field(default_factory=frozenset)


def _source_sets(logs: Mapping[str, VictimLog], window: Tuple[int, int]) -> Dict[str, SourceSet]:
    first, last = window
    return {victim: SourceSet(victim, log.sources(first, last), window) for victim, log in logs.items()}


def _private_score(metric: Metric, a: SourceSet, b: SourceSet, policy: RangePolicy) -> float:
    value, _ = private_score(metric, a, b, policy)
    return value


def benefit_matrix(
    logs: Mapping[str, VictimLog],
    metric: Metric,
    mode: Mode = Mode.PLAINTEXT,
    day: int = 1,
    window_policy: WindowPolicy = WindowPolicy.HISTORY_BEFORE,
    t_train: int = 5,
    range_policy: Optional[RangePolicy] = None,
) -> BenefitMatrix:
    """
    Score every unordered pair of victims with a benefit metric.

    Pairs whose metric is undefined (a constant vector, two empty sets)
    are recorded as NaN and never selected.

    Args:
        logs: Victim logs keyed by contributor id
        metric: Benefit metric
        mode: plaintext, or private to run each pair through its protocol
        day: Current day; sets are drawn from days before it
        window_policy: Full history before day, or the training window only
        t_train: Training window length for the train_window policy
        range_policy: Address-range agreement for Pearson and Cosine

    Returns:
        BenefitMatrix over the victims in lexicographic order
    """
    if len(logs) < 2:
        raise InputError(f"Benefit matrix needs at least 2 victims, got {len(logs)}")
    metric, mode = Metric(metric), Mode(mode)
    range_policy = range_policy or RangePolicy()
    victims = tuple(sorted(logs))
    sets = _source_sets(logs, policy_window(window_policy, day, t_train))
    scorer = _private_score if mode is Mode.PRIVATE else plaintext_score

    n = len(victims)
    values = np.full((n, n), np.nan)
    undefined = 0
    for i in range(n):
        for j in range(i + 1, n):
            try:
                value = scorer(metric, sets[victims[i]], sets[victims[j]], range_policy)
            except UndefinedMetricError:
                undefined += 1
                continue
            values[i, j] = values[j, i] = value
    if undefined:
        logger.debug(f"{undefined} of {n * (n - 1) // 2} pairs have undefined {metric.value} on day {day}")
    return BenefitMatrix(victims, values, metric, day, mode)


def pair_count(n_victims: int, fraction: float) -> int:
    total = n_victims * (n_victims - 1) // 2
    return math.ceil(round(fraction * total, 9))


def select_partners(matrix: BenefitMatrix, fraction: float = 0.01) -> PartnershipRound:
    """
    Pick the highest-scoring pairs.

    Selects ceil(fraction * n(n-1)/2) pairs; ties break on the
    lexicographic pair id. fraction = 0 selects nothing.
    """
    if not 0 <= fraction <= 1:
        raise InputError(f"Pair fraction must lie in [0, 1], got {fraction}")
    wanted = pair_count(len(matrix.victims), fraction)
    candidates = [(a, b, value) for a, b, value in matrix.pairs() if not np.isnan(value)]
    all_missing = not candidates and len(matrix.victims) >= 2
    if all_missing:
        logger.warning(f"All {matrix.metric.value} scores are missing on day {matrix.computed_at}; no partners selected")

    candidates.sort(key=lambda item: (-item[2], item[0], item[1]))
    pairs = tuple(sorted((a, b) for a, b, _ in candidates[:wanted]))
    return PartnershipRound(matrix.computed_at, matrix.victims, pairs, all_missing=all_missing)


def share(
    log_i: VictimLog,
    log_j: VictimLog,
    strategy: Strategy,
    day: int,
    window: Optional[Tuple[int, int]] = None,
) -> Tuple[SharedData, SharedData]:
    """
    Exchange data between two partners.

    Only native events are ever shared, so received data never travels on.

    Returns:
        (what i receives from j, what j receives from i)
    """
    first, last = window or (1, day - 1)
    last = min(last, day - 1)
    strategy = Strategy(strategy)
    own_i, own_j = log_i.window(first, last, include_foreign=False), log_j.window(first, last, include_foreign=False)
    common = log_i.sources(first, last) & log_j.sources(first, last)

    if strategy is Strategy.INTERSECTION:
        return SharedData(log_j.victim, sources=common), SharedData(log_i.victim, sources=common)
    if strategy is Strategy.INTERSECTION_WITH_DATA:
        to_i = tuple(sorted((e for e in own_j if e.source_ip in common), key=_share_order))
        to_j = tuple(sorted((e for e in own_i if e.source_ip in common), key=_share_order))
    else:
        to_i = tuple(sorted(own_j, key=_share_order))
        to_j = tuple(sorted(own_i, key=_share_order))
    return SharedData(log_j.victim, events=to_i), SharedData(log_i.victim, events=to_j)


def _records(events: Sequence[AttackEvent]) -> Dict[int, List[Tuple[int, int]]]:
    records: Dict[int, List[Tuple[int, int]]] = {}
    for event in sorted(events, key=_share_order):
        records.setdefault(event.source_ip, []).append((event.timestamp, event.target_port))
    return records


def _receive_private(sender: VictimLog, receiver: VictimLog, window: Tuple[int, int], with_data: bool) -> SharedData:
    first, last = window
    sender_set = SourceSet(sender.victim, sender.sources(first, last), window)
    receiver_set = SourceSet(receiver.victim, receiver.sources(first, last), window)
    if not with_data:
        server, client = open_sessions(sender_set, receiver_set)
        return SharedData(sender.victim, sources=frozenset(psi(server, client)))

    data = _records(sender.window(first, last, include_foreign=False))
    server, client = open_sessions(sender_set, receiver_set, associated_data=data)
    delivered = psi_dt(server, client)
    events = [
        AttackEvent(sender.victim, source_ip, port, timestamp)
        for source_ip, records in delivered.items()
        for timestamp, port in records
    ]
    return SharedData(sender.victim, events=tuple(sorted(events, key=_share_order)))


def share_private(
    log_i: VictimLog,
    log_j: VictimLog,
    strategy: Strategy,
    day: int,
    window: Optional[Tuple[int, int]] = None,
) -> Tuple[SharedData, SharedData]:
    """
    share, with the intersection strategies run through PSI and PSI-DT in
    both directions. Union sharing is a plain transfer.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.UNION_WITH_DATA:
        return share(log_i, log_j, strategy, day, window)
    first, last = window or (1, day - 1)
    bounded = (first, min(last, day - 1))
    with_data = strategy is Strategy.INTERSECTION_WITH_DATA
    return (
        _receive_private(log_j, log_i, bounded, with_data),
        _receive_private(log_i, log_j, bounded, with_data),
    )


def augment(log: VictimLog, received: Iterable[SharedData]) -> VictimLog:
    """
    Merge received data into a victim's log.

    Received events are deduplicated on (source_ip, timestamp, port)
    against the native events and each other, and are marked foreign.
    """
    seen = {event.share_key for event in log.events}
    seen.update(event.share_key for event in log.foreign)
    foreign = list(log.foreign)
    known = set(log.known_sources)
    for data in received:
        known.update(data.sources)
        for event in data.events:
            if event.share_key not in seen:
                seen.add(event.share_key)
                foreign.append(event)
    return replace(log, foreign=tuple(foreign), known_sources=frozenset(known))


def collaborate(
    logs: Mapping[str, VictimLog],
    partnership: PartnershipRound,
    strategy: Strategy,
    day: int,
    window: Optional[Tuple[int, int]] = None,
    mode: Mode = Mode.PLAINTEXT,
) -> Dict[str, VictimLog]:
    """Run every selected pair's exchange and augment each victim's log."""
    exchange = share_private if Mode(mode) is Mode.PRIVATE else share
    inbox: Dict[str, List[SharedData]] = {victim: [] for victim in logs}
    for a, b in partnership.pairs:
        to_a, to_b = exchange(logs[a], logs[b], strategy, day, window)
        inbox[a].append(to_a)
        inbox[b].append(to_b)
    return {victim: augment(log, inbox[victim]) if inbox[victim] else log for victim, log in logs.items()}


def repartner_due(day: int, first_day: int, every: int = 1) -> bool:
    """Whether partnerships are recomputed on day (every 1 = daily, 7 = weekly)."""
    if every < 1:
        raise InputError(f"Repartner interval must be at least 1, got {every}")
    return (day - first_day) % every == 0
