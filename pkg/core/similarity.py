"""
Benefit Estimation Metrics

Plaintext reference implementations of the four pairwise benefit metrics:
- Intersection-Size and Jaccard over unique-source sets
- Pearson and Cosine over binary attack vectors drawn over an agreed
  address range

Binary-vector correlations are computed from popcounts with exact integer
arithmetic, so the set path and the vector path agree bit for bit.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from ipaddress import IPv4Network
from typing import FrozenSet, Iterable, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .errors import InputError, UndefinedMetricError
from .events import SourceSet

logger = logging.getLogger(__name__)


class Metric(str, Enum):
    """Benefit-estimation metrics."""
    INTERSECTION_SIZE = "intersection_size"
    JACCARD = "jaccard"
    PEARSON = "pearson"
    COSINE = "cosine"

    @property
    def uses_vectors(self) -> bool:
        return self in (Metric.PEARSON, Metric.COSINE)


@dataclass(frozen=True)
class IpRange:
    """Ordered, disjoint address blocks agreed by two parties."""
    blocks: Tuple[IPv4Network, ...]

    def __post_init__(self):
        if not self.blocks:
            raise InputError("Address range is empty")
        for previous, current in zip(self.blocks, self.blocks[1:]):
            if int(previous.broadcast_address) >= int(current.network_address):
                raise InputError(f"Blocks {previous} and {current} overlap or are unsorted")

    @classmethod
    def from_strings(cls, blocks: Iterable[str]) -> "IpRange":
        networks = sorted((IPv4Network(b, strict=False) for b in blocks), key=lambda n: int(n.network_address))
        return cls(tuple(networks))

    @property
    def size(self) -> int:
        return sum(block.num_addresses for block in self.blocks)

    def _layout(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        starts = np.array([int(b.network_address) for b in self.blocks], dtype=np.int64)
        sizes = np.array([b.num_addresses for b in self.blocks], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        return starts, sizes, offsets

    def positions(self, addresses: Iterable[int]) -> Tuple[np.ndarray, int]:
        """
        Bit positions of the addresses that fall inside the range.

        Returns:
            Tuple of (positions, number of addresses outside the range)
        """
        values = np.fromiter(addresses, dtype=np.int64)
        if not len(values):
            return np.array([], dtype=np.int64), 0
        starts, sizes, offsets = self._layout()
        block = np.searchsorted(starts, values, side="right") - 1
        inside = block >= 0
        inside[inside] = values[inside] - starts[block[inside]] < sizes[block[inside]]
        positions = offsets[block[inside]] + values[inside] - starts[block[inside]]
        return np.sort(positions), int((~inside).sum())


@dataclass(frozen=True)
class BinaryAttackVector:
    """One bit per address of a range: 1 iff the address attacked."""
    range: IpRange
    bits: np.ndarray
    outside: int = 0

    def __len__(self) -> int:
        return self.range.size

    def popcount(self) -> int:
        return int(np.unpackbits(self.bits, count=len(self)).sum())

    def to_bitstring(self) -> str:
        return "".join(str(b) for b in np.unpackbits(self.bits, count=len(self)))


class RangePolicy(BaseModel):
    """How two parties agree on the address range for binary vectors."""
    kind: Literal["public_list", "observed_blocks"] = "observed_blocks"
    blocks: List[str] = Field(default_factory=list)
    prefix_len: int = Field(default=24, ge=0, le=32)


def intersection_size(a: SourceSet, b: SourceSet) -> int:
    return len(a.ips & b.ips)


def jaccard(a: SourceSet, b: SourceSet) -> float:
    if not a.ips and not b.ips:
        raise UndefinedMetricError("Jaccard similarity of two empty sets is undefined")
    common = intersection_size(a, b)
    return common / (len(a.ips) + len(b.ips) - common)


def observed_blocks(ips: Iterable[int], prefix_len: int) -> FrozenSet[int]:
    """Network numbers of the /prefix_len blocks containing the addresses."""
    shift = 32 - prefix_len
    return frozenset(ip >> shift for ip in ips)


def agree_range(a: SourceSet, b: SourceSet, policy: RangePolicy) -> IpRange:
    """
    Agree on the address range both vectors are drawn over.

    The observed_blocks policy reveals which blocks each party has seen;
    it stands in for a private range agreement and leaks block presence.
    """
    if policy.kind == "public_list":
        if not policy.blocks:
            raise InputError("public_list policy has no blocks")
        return IpRange.from_strings(policy.blocks)

    shift = 32 - policy.prefix_len
    numbers = sorted(observed_blocks(a.ips, policy.prefix_len) | observed_blocks(b.ips, policy.prefix_len))
    if not numbers:
        raise UndefinedMetricError("Neither party observed any address; range is empty")
    return IpRange(tuple(IPv4Network((number << shift, policy.prefix_len)) for number in numbers))


def to_vector(source: SourceSet, ip_range: IpRange) -> BinaryAttackVector:
    """Binary attack vector of a source set over a range."""
    positions, outside = ip_range.positions(sorted(source.ips))
    bits = np.zeros(ip_range.size, dtype=np.uint8)
    bits[positions] = 1
    if outside:
        logger.debug(f"{outside} addresses of {source.owner} fall outside the agreed range")
    return BinaryAttackVector(range=ip_range, bits=np.packbits(bits), outside=outside)


def _exact_ratio(numerator: int, denominator_squared: int) -> float:
    root = math.isqrt(denominator_squared)
    if root * root == denominator_squared:
        return numerator / root
    return numerator / math.sqrt(denominator_squared)


def pearson_from_counts(n: int, a: int, b: int, common: int) -> float:
    """
    Pearson correlation of two binary vectors of length n from popcounts.

    Equals the sum of centred products over n times both population
    standard deviations.
    """
    if a in (0, n) or b in (0, n):
        raise UndefinedMetricError("Pearson correlation of a constant vector is undefined")
    value = _exact_ratio(n * common - a * b, a * (n - a) * b * (n - b))
    return max(-1.0, min(1.0, value))


def cosine_from_counts(a: int, b: int, common: int) -> float:
    if a == 0 or b == 0:
        raise UndefinedMetricError("Cosine similarity of a zero vector is undefined")
    return min(1.0, _exact_ratio(common, a * b))


def _vector_counts(u: BinaryAttackVector, v: BinaryAttackVector) -> Tuple[int, int, int, int]:
    if len(u) != len(v):
        raise InputError(f"Vectors differ in length: {len(u)} vs {len(v)}")
    n = len(u)
    common = int(np.unpackbits(u.bits & v.bits, count=n).sum())
    return n, u.popcount(), v.popcount(), common


def pearson(u: BinaryAttackVector, v: BinaryAttackVector) -> float:
    n, a, b, common = _vector_counts(u, v)
    return pearson_from_counts(n, a, b, common)


def cosine(u: BinaryAttackVector, v: BinaryAttackVector) -> float:
    _, a, b, common = _vector_counts(u, v)
    return cosine_from_counts(a, b, common)


def plaintext_score(metric: Metric, a: SourceSet, b: SourceSet, policy: RangePolicy) -> float:
    """
    Score a pair with any metric from their source sets.

    Vector metrics are evaluated from set counts over the agreed range,
    which gives the same value as building both vectors.
    """
    if metric is Metric.INTERSECTION_SIZE:
        return float(intersection_size(a, b))
    if metric is Metric.JACCARD:
        return jaccard(a, b)

    ip_range = agree_range(a, b, policy)
    if policy.kind == "public_list":
        u, v = to_vector(a, ip_range), to_vector(b, ip_range)
        return pearson(u, v) if metric is Metric.PEARSON else cosine(u, v)

    n = ip_range.size
    common = intersection_size(a, b)
    if metric is Metric.PEARSON:
        return pearson_from_counts(n, len(a.ips), len(b.ips), common)
    return cosine_from_counts(len(a.ips), len(b.ips), common)
