"""
Attack Event Model

This module defines the attack-event data model used by every other
module and the ingestion pipeline for DShield-style logs:
- Parsing line-oriented logs under a format descriptor
- Cleaning non-routable sources and invalid ports
- Filtering contributors that report too little to be useful
- Per-victim views (L_i) and unique-source sets (S_i)
"""

import bisect
import csv
import io
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from functools import cached_property, lru_cache
from ipaddress import IPv4Address, IPv4Network
from pathlib import Path
from typing import BinaryIO, Dict, FrozenSet, Iterable, List, Literal, Optional, TextIO, Tuple, Union

import pandas as pd
from pydantic import BaseModel, Field, field_validator

from .config import settings
from .errors import DataFormatError, DayRangeError

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
MAX_PORT = 65535
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"
COLUMNS = ("contributor_id", "source_ip", "target_port", "timestamp")

# Share of malformed lines above which the descriptor is assumed wrong
MALFORMED_LIMIT = 0.5


def parse_address(text: str) -> Optional[int]:
    """
    Parse a dotted-quad IPv4 address into its 32-bit value.

    Zero-padded octets ("211.144.119.042") are accepted because DShield
    logs pad every octet to three digits.
    """
    parts = text.strip().split(".")
    if len(parts) != 4:
        return None
    value = 0
    for part in parts:
        if not part.isdigit() or len(part) > 3:
            return None
        octet = int(part)
        if octet > 255:
            return None
        value = (value << 8) | octet
    return value


def format_address(value: int) -> str:
    """Canonical dotted-quad form, no zero padding."""
    return str(IPv4Address(value))


def midnight(timestamp: int) -> int:
    """UTC midnight of the day containing timestamp."""
    return timestamp - timestamp % SECONDS_PER_DAY


def day_number(timestamp: int, origin: int) -> int:
    """Day t = 1..T of a timestamp relative to the dataset origin."""
    return 1 + (timestamp - origin) // SECONDS_PER_DAY


@dataclass(frozen=True)
class AttackEvent:
    """One log line: a contributor reporting a source hitting a port."""
    contributor_id: str
    source_ip: int
    target_port: int
    timestamp: int

    @property
    def source_address(self) -> str:
        return format_address(self.source_ip)

    @property
    def moment(self) -> datetime:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc)

    @property
    def share_key(self) -> Tuple[int, int, int]:
        """Identity of an event once shared: who attacked, when, which port."""
        return (self.source_ip, self.timestamp, self.target_port)


def _event_order(event: AttackEvent) -> Tuple[int, str, int, int]:
    return (event.timestamp, event.contributor_id, event.source_ip, event.target_port)


@dataclass(frozen=True)
class SourceSet:
    """Unique source addresses S_i seen by one victim in a day window."""
    owner: str
    ips: FrozenSet[int]
    window: Tuple[int, int]

    def __len__(self) -> int:
        return len(self.ips)


@dataclass(frozen=True)
class VictimLog:
    """
    One victim's log L_i.

    Native events are the victim's own observations. Foreign events were
    received from partners; they feed prediction but are never shared on.
    Address-only shares (plain intersection) land in known_sources.
    """
    victim: str
    origin: int
    events: Tuple[AttackEvent, ...] = ()
    foreign: Tuple[AttackEvent, ...] = ()
    known_sources: FrozenSet[int] = frozenset()

    def day_of(self, event: AttackEvent) -> int:
        return day_number(event.timestamp, self.origin)

    @property
    def all_events(self) -> Tuple[AttackEvent, ...]:
        return self.events + self.foreign

    def window(self, first: int, last: int, include_foreign: bool = True) -> Tuple[AttackEvent, ...]:
        """Events dated within the inclusive day range."""
        pool = self.all_events if include_foreign else self.events
        return tuple(e for e in pool if first <= self.day_of(e) <= last)

    def before(self, day: int) -> Tuple[AttackEvent, ...]:
        """Native events dated strictly before day."""
        return tuple(e for e in self.events if self.day_of(e) < day)

    def sources(self, first: int, last: int) -> FrozenSet[int]:
        """Native unique sources within the inclusive day range."""
        return frozenset(e.source_ip for e in self.events if first <= self.day_of(e) <= last)


@dataclass(frozen=True)
class Dataset:
    """
    Ordered, immutable collection of attack events.

    Events are kept in (timestamp, contributor, source, port) order. The
    origin is UTC midnight of day 1 and survives restriction and cleaning
    so day numbers stay stable across derived datasets.
    """
    events: Tuple[AttackEvent, ...] = ()
    origin: Optional[int] = None

    @classmethod
    def from_events(cls, events: Iterable[AttackEvent], origin: Optional[int] = None) -> "Dataset":
        ordered = tuple(sorted(events, key=_event_order))
        if origin is None and ordered:
            origin = midnight(ordered[0].timestamp)
        return cls(ordered, origin)

    def derive(self, events: Iterable[AttackEvent]) -> "Dataset":
        """A dataset over a subset of events sharing this dataset's origin."""
        return Dataset.from_events(events, origin=self.origin)

    def __len__(self) -> int:
        return len(self.events)

    @cached_property
    def day_index(self) -> Tuple[int, ...]:
        if self.origin is None:
            return ()
        return tuple(day_number(e.timestamp, self.origin) for e in self.events)

    @cached_property
    def n_days(self) -> int:
        return max(self.day_index, default=0)

    @cached_property
    def victim_index(self) -> Dict[str, Tuple[int, ...]]:
        positions: Dict[str, List[int]] = defaultdict(list)
        for position, event in enumerate(self.events):
            positions[event.contributor_id].append(position)
        return {victim: tuple(found) for victim, found in positions.items()}

    @cached_property
    def victims(self) -> Tuple[str, ...]:
        return tuple(sorted(self.victim_index))

    def day_of(self, event: AttackEvent) -> int:
        if self.origin is None:
            raise DayRangeError("Empty dataset has no day origin")
        return day_number(event.timestamp, self.origin)

    def restrict(self, victims: Iterable[str]) -> "Dataset":
        wanted = set(victims)
        return self.derive(e for e in self.events if e.contributor_id in wanted)

    def log(self, victim: str) -> VictimLog:
        positions = self.victim_index.get(victim, ())
        return VictimLog(
            victim=victim,
            origin=self.origin or 0,
            events=tuple(self.events[p] for p in positions),
        )

    def to_frame(self) -> pd.DataFrame:
        """Tabular view with one row per event and its day number."""
        frame = pd.DataFrame(
            {
                "contributor_id": [e.contributor_id for e in self.events],
                "source_ip": pd.array([e.source_ip for e in self.events], dtype="int64"),
                "target_port": pd.array([e.target_port for e in self.events], dtype="int64"),
                "timestamp": pd.array([e.timestamp for e in self.events], dtype="int64"),
            }
        )
        frame["day"] = pd.array(list(self.day_index), dtype="int64")
        return frame


class FormatDescriptor(BaseModel):
    """Describes the column order and timestamp encoding of a log."""
    columns: List[str] = Field(default_factory=lambda: list(COLUMNS))
    timestamp: Literal["datetime", "epoch"] = "datetime"
    timestamp_format: str = TIMESTAMP_FORMAT
    delimiter: str = ","
    header: Optional[bool] = Field(default=None, description="None auto-detects a header row")

    @field_validator("columns", mode="before")
    @classmethod
    def _split_columns(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("columns")
    @classmethod
    def _columns_are_permutation(cls, value: List[str]) -> List[str]:
        if sorted(value) != sorted(COLUMNS):
            raise ValueError(f"columns must be a permutation of {', '.join(COLUMNS)}")
        return value

    @field_validator("delimiter")
    @classmethod
    def _single_character(cls, value: str) -> str:
        if len(value) != 1:
            raise ValueError(f"delimiter must be a single character, got {value!r}")
        return value


class ParseReport(BaseModel):
    total_lines: int = 0
    accepted: int = 0
    rejected: int = 0
    reasons: Dict[str, int] = Field(default_factory=dict)


class CleanReport(BaseModel):
    input_events: int = 0
    retained_events: int = 0
    non_routable: int = 0
    invalid_port: int = 0
    removed_by_block: Dict[str, int] = Field(default_factory=dict)


class FilterReport(BaseModel):
    input_contributors: int = 0
    retained_contributors: int = 0
    removed_single_event: int = 0
    removed_single_day: int = 0
    events_removed: int = 0


class ReservedBlocks:
    """
    Sorted, merged list of reserved IPv4 blocks with O(log n) lookup.

    Blocks are kept as inclusive integer ranges; each range remembers the
    name of the block it came from for the clean report.
    """

    def __init__(self, blocks: Iterable[Tuple[str, str]]):
        ranges = []
        for network, name in blocks:
            net = IPv4Network(network, strict=False)
            ranges.append((int(net.network_address), int(net.broadcast_address), name))
        ranges.sort()
        self._starts = [start for start, _, _ in ranges]
        self._ranges = ranges
        # Running maximum of block ends, so lookups can stop early
        self._reach = []
        furthest = -1
        for _, end, _ in ranges:
            furthest = max(furthest, end)
            self._reach.append(furthest)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ReservedBlocks":
        with open(path, "r") as f:
            data = json.load(f)
        return cls((block["network"], block.get("name", block["network"])) for block in data["blocks"])

    def __len__(self) -> int:
        return len(self._ranges)

    def match(self, address: int) -> Optional[str]:
        """Name of the reserved block containing address, if any."""
        index = bisect.bisect_right(self._starts, address) - 1
        while index >= 0 and self._reach[index] >= address:
            _, end, name = self._ranges[index]
            if address <= end:
                return name
            index -= 1
        return None

    def is_routable(self, address: int) -> bool:
        return self.match(address) is None


@lru_cache(maxsize=None)
def default_reserved_blocks() -> ReservedBlocks:
    return ReservedBlocks.from_json(settings.RESERVED_BLOCKS_PATH)


def _open_text(source: Union[str, Path, bytes, BinaryIO, TextIO]) -> TextIO:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def parse_log(
    source: Union[str, Path, bytes, BinaryIO, TextIO],
    descriptor: Optional[FormatDescriptor] = None,
) -> Tuple[Dataset, ParseReport]:
    """
    Parse a line-oriented log into a Dataset.

    Malformed lines are skipped and counted by reason. If more than half
    of the data lines are malformed the descriptor is assumed to be wrong
    and DataFormatError is raised.

    Args:
        source: Path, raw bytes, or an open binary/text stream
        descriptor: Column order and timestamp encoding

    Returns:
        Tuple of (Dataset, ParseReport)
    """
    descriptor = descriptor or FormatDescriptor()
    stream = _open_text(source)
    try:
        rows = [row for row in csv.reader(stream, delimiter=descriptor.delimiter) if any(f.strip() for f in row)]
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
    if not rows:
        return Dataset(), ParseReport()

    width = len(COLUMNS)
    has_header = descriptor.header
    if has_header is None:
        first = rows[0]
        position = descriptor.columns.index("contributor_id")
        has_header = len(first) == width and first[position].strip() == "contributor_id"
    if has_header:
        rows = rows[1:]

    reasons: Counter = Counter()
    reasons["wrong field count"] = sum(1 for row in rows if len(row) != width)
    frame = pd.DataFrame([row for row in rows if len(row) == width], columns=descriptor.columns, dtype=str)
    total = len(rows)

    contributors = frame["contributor_id"].str.strip()
    addresses = frame["source_ip"].map(parse_address)
    ports = pd.to_numeric(frame["target_port"].str.strip(), errors="coerce")
    if descriptor.timestamp == "epoch":
        stamps = pd.to_numeric(frame["timestamp"].str.strip(), errors="coerce")
        stamps = stamps.where(stamps == stamps.round())
    else:
        moments = pd.to_datetime(frame["timestamp"].str.strip(), format=descriptor.timestamp_format, errors="coerce", utc=True)
        stamps = (moments - pd.Timestamp(0, tz="UTC")) // pd.Timedelta(seconds=1)

    bad_contributor = contributors == ""
    earlier = bad_contributor
    bad_address = addresses.isna() & ~earlier
    earlier = earlier | bad_address
    bad_port = (ports.isna() | (ports != ports.round()) | (ports < 0) | (ports > MAX_PORT)) & ~earlier
    earlier = earlier | bad_port
    bad_stamp = stamps.isna() & ~earlier
    reasons["missing contributor"] = int(bad_contributor.sum())
    reasons["invalid address"] = int(bad_address.sum())
    reasons["invalid port"] = int(bad_port.sum())
    reasons["invalid timestamp"] = int(bad_stamp.sum())

    valid = ~(earlier | bad_stamp)
    events = [
        AttackEvent(contributor, int(address), int(port), int(stamp))
        for contributor, address, port, stamp in zip(
            contributors[valid], addresses[valid], ports[valid], stamps[valid]
        )
    ]

    rejected = total - len(events)
    report = ParseReport(
        total_lines=total,
        accepted=len(events),
        rejected=rejected,
        reasons={reason: count for reason, count in sorted(reasons.items()) if count},
    )
    if total and rejected / total > MALFORMED_LIMIT:
        raise DataFormatError(f"{rejected} of {total} lines malformed; check the format descriptor ({report.reasons})")

    logger.info(f"Parsed {len(events)} events, rejected {rejected} lines")
    return Dataset.from_events(events), report


def clean(dataset: Dataset, reserved: Optional[ReservedBlocks] = None) -> Tuple[Dataset, CleanReport]:
    """
    Remove events from reserved/non-routable sources or with invalid ports.

    Returns:
        Tuple of (cleaned Dataset, CleanReport)
    """
    reserved = reserved or default_reserved_blocks()
    by_block: Counter = Counter()
    invalid_port = 0
    kept = []
    for event in dataset.events:
        if not 0 <= event.target_port <= MAX_PORT:
            invalid_port += 1
            continue
        block = reserved.match(event.source_ip)
        if block is not None:
            by_block[block] += 1
            continue
        kept.append(event)

    report = CleanReport(
        input_events=len(dataset),
        retained_events=len(kept),
        non_routable=sum(by_block.values()),
        invalid_port=invalid_port,
        removed_by_block=dict(sorted(by_block.items())),
    )
    if len(kept) != len(dataset):
        logger.info(f"Cleaning removed {len(dataset) - len(kept)} of {len(dataset)} events")
    return dataset.derive(kept), report


def filter_contributors(dataset: Dataset, single_day_min_events: int = 20) -> Tuple[Dataset, FilterReport]:
    """
    Drop contributors that report too little information.

    A contributor is removed if it reports only one event overall, or
    reports on only one day with fewer than single_day_min_events events.
    """
    counts: Counter = Counter()
    days: Dict[str, set] = defaultdict(set)
    for event, day in zip(dataset.events, dataset.day_index):
        counts[event.contributor_id] += 1
        days[event.contributor_id].add(day)

    single_event = {c for c, n in counts.items() if n == 1}
    single_day = {
        c for c, n in counts.items()
        if c not in single_event and len(days[c]) == 1 and n < single_day_min_events
    }
    removed = single_event | single_day
    kept = [e for e in dataset.events if e.contributor_id not in removed]

    report = FilterReport(
        input_contributors=len(counts),
        retained_contributors=len(counts) - len(removed),
        removed_single_event=len(single_event),
        removed_single_day=len(single_day),
        events_removed=len(dataset) - len(kept),
    )
    if removed:
        logger.info(f"Filtered {len(removed)} low-information contributors ({report.events_removed} events)")
    return dataset.derive(kept), report


def source_set(dataset: Dataset, victim: str, day_range: Tuple[int, int]) -> SourceSet:
    """
    Unique sources attacking victim within an inclusive day range.

    An unknown victim yields an empty set; a range reaching outside the
    dataset span raises DayRangeError.
    """
    first, last = day_range
    if dataset.n_days and first <= last and (first < 1 or last > dataset.n_days):
        raise DayRangeError(f"Day range {first}..{last} outside 1..{dataset.n_days}")
    ips = dataset.log(victim).sources(first, last) if victim in dataset.victim_index else frozenset()
    return SourceSet(owner=victim, ips=ips, window=(first, last))


def to_frame_rows(dataset: Dataset) -> pd.DataFrame:
    """Events in the canonical CSV schema."""
    return pd.DataFrame(
        {
            "contributor_id": [e.contributor_id for e in dataset.events],
            "source_ip": [e.source_address for e in dataset.events],
            "target_port": [e.target_port for e in dataset.events],
            "timestamp": [e.moment.strftime(TIMESTAMP_FORMAT) for e in dataset.events],
        },
        columns=list(COLUMNS),
    )


def write_csv(dataset: Dataset, target: Union[str, Path, TextIO]) -> None:
    """Write a dataset in the canonical input schema."""
    to_frame_rows(dataset).to_csv(target, index=False, lineterminator="\n")


def ingest(
    source: Union[str, Path, bytes, BinaryIO, TextIO],
    descriptor: Optional[FormatDescriptor] = None,
    reserved: Optional[ReservedBlocks] = None,
) -> Tuple[Dataset, ParseReport, CleanReport, FilterReport]:
    """Parse, clean and filter a raw log in one pass."""
    parsed, parse_report = parse_log(source, descriptor)
    cleaned, clean_report = clean(parsed, reserved)
    filtered, filter_report = filter_contributors(cleaned)
    return filtered, parse_report, clean_report, filter_report
