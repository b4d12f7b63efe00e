"""
Synthetic Attack Log Generator

Generates seeded attack logs whose marginal statistics follow community
IDS measurements: three victim intensity classes, stealthy and heavy-hitting
attackers, coordinated hit-lists attacked in short bursts, and day-to-day
persistence of attacker/victim relations.
"""

import json
import logging
import math
from datetime import datetime, timezone
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .config import DATA_DIR
from .errors import ConfigurationError
from .events import SECONDS_PER_DAY, AttackEvent, Dataset, ReservedBlocks, default_reserved_blocks
from .stats import shared_unique_counts

logger = logging.getLogger(__name__)

# Daily attack-count boundaries separating rare, light and heavy victims
RARE_LIMIT = 10
HEAVY_LIMIT = 100
# Daily attacks above which a source is a heavy hitter
STEALTH_LIMIT = 10

# Log-normal (median, sigma, low, high) of mean daily attacks per victim class
VICTIM_RATES = (
    (1.5, 0.9, 0.3, 5.0),
    (30.0, 0.5, 12.0, 80.0),
    (200.0, 0.4, 130.0, 600.0),
)
HEAVY_HITTER_WEIGHT = 25.0
# Pool of regular attackers per victim, as a multiple of its daily rate
POOL_FACTOR = 3.0
MIN_POOL = 3

# Odd multiplier: k -> k * A + B mod 2^32 is a bijection on addresses
PERMUTATION_MULTIPLIER = 0x9E3779B1
PERMUTATION_OFFSET = 0x7F4A7C15


def _split_floats(value):
    if isinstance(value, str):
        return tuple(float(part) for part in value.split(",") if part.strip())
    return value


class SynthConfig(BaseModel):
    """Generator parameters."""
    n_victims: int = Field(default=1000, gt=0)
    n_attackers: int = Field(default=2000, gt=0)
    n_days: int = Field(default=14, gt=0)
    victim_profile_mix: Tuple[float, float, float] = (0.87, 0.11, 0.02)
    attacker_profile_mix: Tuple[float, float] = (0.8, 0.2)
    hitlist_count: Optional[int] = Field(default=None, ge=0, description="Defaults to n_victims // 10")
    hitlist_size: int = Field(default=5, gt=0)
    hitlist_attackers: int = Field(default=4, gt=0)
    hitlist_activity: float = Field(default=0.5, ge=0, le=1, description="Probability a hit-list campaign runs on a given day")
    burst_window_seconds: int = Field(default=180, gt=0, lt=SECONDS_PER_DAY)
    persistence: float = Field(default=0.6, ge=0, le=1, description="Probability a source returns to a victim the next day")
    start_date: str = "2013-01-01"
    rng_seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @field_validator("victim_profile_mix", "attacker_profile_mix", mode="before")
    @classmethod
    def _split_mixes(cls, value):
        return _split_floats(value)

    @field_validator("victim_profile_mix", "attacker_profile_mix")
    @classmethod
    def _mix_is_distribution(cls, value):
        if any(not 0 <= share <= 1 for share in value):
            raise ValueError("mix fractions must lie in [0, 1]")
        if abs(sum(value) - 1) > 1e-9:
            raise ValueError(f"mix must sum to 1, got {sum(value)}")
        return value

    @field_validator("start_date")
    @classmethod
    def _date_parses(cls, value: str) -> str:
        datetime.strptime(value, "%Y-%m-%d")
        return value

    @model_validator(mode="after")
    def _default_hitlists(self):
        if self.hitlist_count is None:
            self.hitlist_count = self.n_victims // 10
        return self

    @property
    def origin(self) -> int:
        start = datetime.strptime(self.start_date, "%Y-%m-%d").replace(tzinfo=timezone.utc)
        return int(start.timestamp())


class SynthFidelityReport(BaseModel):
    """Empirical profile statistics of a dataset, comparable to a SynthConfig."""
    n_events: int = 0
    n_victims: int = 0
    n_sources: int = 0
    n_days: int = 0
    victim_profile_mix: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    attacker_profile_mix: Tuple[float, float] = (0.0, 0.0)
    mean_common_sources: float = 0.0
    mean_unique_sources: float = 0.0
    shared_source_fraction: float = 0.0


def _load_port_weights() -> Tuple[np.ndarray, np.ndarray]:
    with open(DATA_DIR / "popular_ports.json", "r") as f:
        data = json.load(f)
    ports = np.array([entry["port"] for entry in data["ports"]], dtype=np.int64)
    weights = np.array([entry["weight"] for entry in data["ports"]], dtype=float)
    return ports, weights / weights.sum()


def public_addresses(count: int, reserved: Optional[ReservedBlocks] = None) -> List[int]:
    """
    The first count routable addresses of a fixed permutation of the
    IPv4 space. The permutation does not depend on the seed.
    """
    reserved = reserved or default_reserved_blocks()
    addresses = []
    k = 0
    while len(addresses) < count:
        candidate = (k * PERMUTATION_MULTIPLIER + PERMUTATION_OFFSET) % 2 ** 32
        if reserved.is_routable(candidate):
            addresses.append(candidate)
        k += 1
    return addresses


def _contributor_ids(rng: np.random.Generator, count: int) -> List[str]:
    ids: List[str] = []
    seen = set()
    while len(ids) < count:
        for value in rng.integers(0, 2 ** 32, size=count - len(ids), dtype=np.uint64):
            token = f"{int(value):08x}"
            if token not in seen:
                seen.add(token)
                ids.append(token)
    return ids


def _check_feasible(config: SynthConfig) -> None:
    if config.hitlist_count and config.hitlist_size > config.n_victims:
        raise ConfigurationError(f"hitlist_size {config.hitlist_size} exceeds n_victims {config.n_victims}")
    if config.hitlist_count and config.hitlist_attackers > config.n_attackers:
        raise ConfigurationError(f"hitlist_attackers {config.hitlist_attackers} exceeds n_attackers {config.n_attackers}")


def generate(config: SynthConfig) -> Dataset:
    """
    Generate a synthetic attack log.

    The output is a pure function of the config, seed included. Every
    event uses a routable source and a valid port, so cleaning leaves the
    dataset unchanged.

    Args:
        config: Generator parameters

    Returns:
        Dataset whose day 1 starts at config.start_date
    """
    _check_feasible(config)
    rng = np.random.default_rng(config.rng_seed)
    origin = config.origin

    victims = _contributor_ids(rng, config.n_victims)
    victim_class = rng.choice(3, size=config.n_victims, p=config.victim_profile_mix)
    rates = np.empty(config.n_victims)
    for cls, (median, sigma, low, high) in enumerate(VICTIM_RATES):
        members = victim_class == cls
        rates[members] = np.clip(rng.lognormal(math.log(median), sigma, size=int(members.sum())), low, high)

    attacker_class = rng.choice(2, size=config.n_attackers, p=config.attacker_profile_mix)
    addresses = public_addresses(config.n_attackers)
    port_values, port_weights = _load_port_weights()
    attacker_ports = rng.choice(port_values, size=config.n_attackers, p=port_weights)
    attacker_weight = np.where(attacker_class == 1, HEAVY_HITTER_WEIGHT, 1.0)
    attacker_p = attacker_weight / attacker_weight.sum()

    pools = []
    for rate in rates:
        size = min(config.n_attackers, max(MIN_POOL, int(round(POOL_FACTOR * rate))))
        pools.append(rng.choice(config.n_attackers, size=size, replace=False, p=attacker_p))

    hitlists = []
    for _ in range(config.hitlist_count):
        members = rng.choice(config.n_victims, size=config.hitlist_size, replace=False)
        group = rng.choice(config.n_attackers, size=config.hitlist_attackers, replace=False, p=attacker_p)
        hitlists.append((members, group))

    events: List[AttackEvent] = []

    def emit(victim: int, attacker: int, timestamp: int) -> None:
        events.append(AttackEvent(victims[victim], addresses[attacker], int(attacker_ports[attacker]), int(timestamp)))

    yesterday: Dict[int, np.ndarray] = {}
    span = SECONDS_PER_DAY - config.burst_window_seconds
    for day in range(config.n_days):
        day_start = origin + day * SECONDS_PER_DAY

        for members, group in hitlists:
            if rng.random() >= config.hitlist_activity:
                continue
            for attacker in group:
                burst_start = day_start + int(rng.integers(0, span))
                offsets = rng.integers(0, config.burst_window_seconds, size=len(members))
                for victim, offset in zip(members, offsets):
                    emit(int(victim), int(attacker), burst_start + int(offset))

        today: Dict[int, np.ndarray] = {}
        for victim in range(config.n_victims):
            count = int(rng.poisson(rates[victim]))
            previous = yesterday.get(victim, np.array([], dtype=np.int64))
            returning = previous[rng.random(len(previous)) < config.persistence][:count]
            fresh = rng.choice(pools[victim], size=count - len(returning))
            sources = np.concatenate([returning, fresh]).astype(np.int64)
            stamps = day_start + rng.integers(0, SECONDS_PER_DAY, size=len(sources))
            for attacker, stamp in zip(sources, stamps):
                emit(victim, int(attacker), int(stamp))
            today[victim] = np.unique(sources)
        yesterday = today

    logger.info(f"Generated {len(events)} events for {config.n_victims} victims over {config.n_days} days (seed {config.rng_seed})")
    return Dataset.from_events(events, origin=origin)


def describe(dataset: Dataset) -> SynthFidelityReport:
    """
    Empirical victim/attacker mix and shared-source statistics.

    Victims are classed by mean daily attacks over the dataset span;
    sources by mean daily attacks over the days they were active.
    """
    if not len(dataset):
        return SynthFidelityReport()

    frame = dataset.to_frame()
    n_days = dataset.n_days

    per_victim = frame.groupby("contributor_id").size() / n_days
    victim_mix = (
        float((per_victim < RARE_LIMIT).mean()),
        float(((per_victim >= RARE_LIMIT) & (per_victim <= HEAVY_LIMIT)).mean()),
        float((per_victim > HEAVY_LIMIT).mean()),
    )

    per_source_day = frame.groupby(["source_ip", "day"]).size()
    per_source = per_source_day.groupby(level="source_ip").mean()
    stealth = float((per_source < STEALTH_LIMIT).mean())

    common, unique = [], []
    for day in sorted(frame["day"].unique()):
        counts = shared_unique_counts(dataset, int(day), "victim")
        common.extend(counts["common"])
        unique.extend(counts["unique"])
    total = sum(common) + sum(unique)

    return SynthFidelityReport(
        n_events=len(dataset),
        n_victims=len(per_victim),
        n_sources=len(per_source),
        n_days=n_days,
        victim_profile_mix=victim_mix,
        attacker_profile_mix=(stealth, 1.0 - stealth),
        mean_common_sources=float(np.mean(common)),
        mean_unique_sources=float(np.mean(unique)),
        shared_source_fraction=sum(common) / total if total else 0.0,
    )
