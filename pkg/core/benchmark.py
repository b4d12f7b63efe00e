"""
Protocol Benchmarks

Wall-clock timing of the private protocols for configurable set sizes,
with the cost projected to all pairs of a victim sample.
"""

import logging
import time
from typing import Callable, Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

from protocols.channel import Direction, MessageKind
from protocols.psi import open_sessions, pjs, psi, psi_ca, psi_dt

from .errors import InputError
from .events import SourceSet
from .synth import public_addresses

logger = logging.getLogger(__name__)

PROTOCOLS: Dict[str, Callable] = {"psi": psi, "psi_ca": psi_ca, "psi_dt": psi_dt, "pjs": pjs}
BENCH_COLUMNS = [
    "protocol", "set_size", "repetitions", "mean_ms", "median_ms",
    "client_elements", "pairs", "all_pairs_seconds",
]


def _bench_sets(size: int, rng: np.random.Generator, pool: List[int]):
    server_ips = rng.choice(pool, size=size, replace=False)
    overlap = size // 2
    keep = list(server_ips[:overlap])
    taken = set(int(ip) for ip in server_ips)
    fresh = [ip for ip in rng.choice(pool, size=min(len(pool), 2 * size), replace=False) if int(ip) not in taken]
    client_ips = keep + fresh[:size - overlap]
    server = SourceSet("server", frozenset(int(ip) for ip in server_ips), (0, 0))
    client = SourceSet("client", frozenset(int(ip) for ip in client_ips), (0, 0))
    return server, client


def run_once(protocol: str, server_set: SourceSet, client_set: SourceSet) -> Dict[str, float]:
    """
    Run one protocol execution and return its timing and client element count.

    Raises:
        UndefinedMetricError: PJS on two empty sets
    """
    data = {ip: [(0, 80)] for ip in server_set.ips} if protocol == "psi_dt" else None
    server, client = open_sessions(server_set, client_set, associated_data=data)
    started = time.perf_counter()
    PROTOCOLS[protocol](server, client)
    elapsed = time.perf_counter() - started
    sent = sum(
        entry.element_count
        for entry in server.channel.transcript
        if entry.direction is Direction.CLIENT_TO_SERVER and entry.kind is MessageKind.CLIENT_BLINDED
    )
    return {"seconds": elapsed, "client_elements": sent}


def bench_protocols(
    sizes: Sequence[int],
    repetitions: int = 3,
    protocols: Iterable[str] = ("psi", "psi_ca", "psi_dt", "pjs"),
    sample_size: int = 100,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Time each protocol at each set size.

    Both parties hold sets of the given size sharing half their elements.
    all_pairs_seconds projects the mean onto n(n-1)/2 runs for a sample
    of n victims.
    """
    names = list(protocols)
    unknown = [name for name in names if name not in PROTOCOLS]
    if unknown:
        raise InputError(f"Unknown protocols: {', '.join(unknown)}")
    if repetitions < 1:
        raise InputError(f"repetitions must be at least 1, got {repetitions}")
    if any(size < 1 for size in sizes):
        raise InputError(f"Set sizes must be at least 1, got {list(sizes)}")

    rng = np.random.default_rng(seed)
    pool = public_addresses(max(1, 3 * max(sizes, default=0)))
    pairs = sample_size * (sample_size - 1) // 2
    rows = []
    for size in sizes:
        server_set, client_set = _bench_sets(size, rng, pool)
        for name in names:
            runs = [run_once(name, server_set, client_set) for _ in range(repetitions)]
            seconds = np.array([run["seconds"] for run in runs])
            rows.append({
                "protocol": name,
                "set_size": size,
                "repetitions": repetitions,
                "mean_ms": float(seconds.mean() * 1000),
                "median_ms": float(np.median(seconds) * 1000),
                "client_elements": int(runs[0]["client_elements"]),
                "pairs": pairs,
                "all_pairs_seconds": float(seconds.mean() * pairs),
            })
            logger.info(f"{name} at size {size}: {rows[-1]['mean_ms']:.1f} ms mean over {repetitions} runs")
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
