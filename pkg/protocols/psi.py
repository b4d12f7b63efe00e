"""
Private Set Intersection Protocols

Honest-but-curious two-party protocols over a prime-order group:
- PSI-CA: the client learns only |S ∩ C|
- PSI: the client learns S ∩ C
- PSI-DT: the client learns S ∩ C and the server's records for it
- PJS: both parties learn the Jaccard similarity, built on PSI-CA
- simulated private Pearson/Cosine via a trusted evaluator

The client blinds H(c)^r, the server re-blinds with its key k and sends
tags of H(s)^k; unblinding yields H(c)^k, which matches exactly when
c is in S. Every run ends with the client reporting its output back.
"""

import json
import logging
import random
import secrets
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from pydantic import BaseModel

from core.errors import HandshakeError, InputError, ProtocolAbortError, UndefinedMetricError
from core.events import SourceSet
from core.similarity import (
    BinaryAttackVector,
    Metric,
    RangePolicy,
    agree_range,
    cosine,
    pearson,
    to_vector,
)

from .channel import Channel, Direction, MessageKind, Transcript
from .group import GroupParams, default_group, encode_address

logger = logging.getLogger(__name__)

Record = Tuple[int, int]

RECORD_KEY_INFO = b"collab-blacklist/record-key/v1"
NONCE_LENGTH = 12
COUNT_REPORT = struct.Struct(">I")
RATIO_REPORT = struct.Struct(">d")
SIZE_REPORT = struct.Struct(">Q")

C2S = Direction.CLIENT_TO_SERVER
S2C = Direction.SERVER_TO_CLIENT

_shuffler = random.SystemRandom()


class Role(str, Enum):
    CLIENT = "client"
    SERVER = "server"


@dataclass(eq=False)
class PartySession:
    """
    One party's state for a single protocol run.

    The secret exponent is drawn on creation and never leaves the session.
    """
    role: Role
    input_set: SourceSet
    channel: Channel
    group: GroupParams = field(default_factory=default_group)
    associated_data: Optional[Dict[int, List[Record]]] = None
    secret_key: int = field(init=False, repr=False)
    output: Any = field(default=None, init=False)
    # Reply positions the client found matching; the reply is shuffled in PSI-CA
    match_positions: Tuple[int, ...] = field(default=(), init=False, repr=False)

    def __post_init__(self):
        self.secret_key = self.group.random_exponent()

    @property
    def elements(self) -> List[int]:
        return sorted(self.input_set.ips)


@dataclass
class _ServerState:
    order: List[int]
    points: List[Any]


@dataclass
class _ClientView:
    elements: List[int]
    unblinded: List[Any]
    tag_positions: List[Optional[int]]
    server_size: int


def open_sessions(
    server_set: SourceSet,
    client_set: SourceSet,
    associated_data: Optional[Dict[int, List[Record]]] = None,
    group: Optional[GroupParams] = None,
    client_group: Optional[GroupParams] = None,
    channel: Optional[Channel] = None,
) -> Tuple[PartySession, PartySession]:
    """A server and a client session sharing one fresh channel."""
    channel = channel or Channel()
    group = group or default_group()
    server = PartySession(Role.SERVER, server_set, channel, group, associated_data)
    client = PartySession(Role.CLIENT, client_set, channel, client_group or group)
    return server, client


def _check_pair(server: PartySession, client: PartySession) -> Channel:
    if server.role is not Role.SERVER or client.role is not Role.CLIENT:
        raise InputError("Expected a server session and a client session")
    if server.channel is not client.channel:
        raise InputError("Sessions are not connected by the same channel")
    return server.channel


def _single(elements: Sequence[bytes], kind: MessageKind, channel: Channel) -> bytes:
    if len(elements) != 1:
        channel.close()
        raise ProtocolAbortError(f"{kind.name} must carry exactly one element, got {len(elements)}")
    return elements[0]


def _handshake(server: PartySession, client: PartySession) -> Channel:
    channel = _check_pair(server, client)
    channel.send(C2S, MessageKind.HELLO, [client.group.identifier])
    offered = _single(channel.receive(C2S, MessageKind.HELLO), MessageKind.HELLO, channel)
    if offered != server.group.identifier:
        channel.close()
        raise HandshakeError(f"Client offered group {offered.decode(errors='replace')}, server uses {server.group.name}")
    channel.send(S2C, MessageKind.HELLO, [server.group.identifier])
    accepted = _single(channel.receive(S2C, MessageKind.HELLO), MessageKind.HELLO, channel)
    if accepted != client.group.identifier:
        channel.close()
        raise HandshakeError(f"Server answered with group {accepted.decode(errors='replace')}")
    return channel


def _client_blind(client: PartySession) -> List[int]:
    group = client.group
    elements = client.elements
    blinded = [group.encode(group.hash_to_group(encode_address(c)) * client.secret_key) for c in elements]
    client.channel.send(C2S, MessageKind.CLIENT_BLINDED, blinded)
    return elements


def _record_key(group: GroupParams, point) -> bytes:
    hkdf = HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=RECORD_KEY_INFO)
    return hkdf.derive(group.encode(point))


def _seal_records(key: bytes, records: List[Record]) -> bytes:
    nonce = secrets.token_bytes(NONCE_LENGTH)
    plaintext = json.dumps([[int(t), int(p)] for t, p in records]).encode("utf-8")
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def _open_records(key: bytes, sealed: bytes) -> List[Record]:
    nonce, ciphertext = sealed[:NONCE_LENGTH], sealed[NONCE_LENGTH:]
    plaintext = AESGCM(key).decrypt(nonce, ciphertext, None)
    return [(int(t), int(p)) for t, p in json.loads(plaintext)]


def _server_respond(server: PartySession, shuffle_reply: bool, send_records: bool = False) -> _ServerState:
    channel, group, k = server.channel, server.group, server.secret_key
    received = channel.receive(C2S, MessageKind.CLIENT_BLINDED)
    try:
        reblinded = [group.encode(group.decode(x) * k) for x in received]
    except InputError as e:
        channel.close()
        raise ProtocolAbortError(f"Malformed blinded element: {e}") from e
    if shuffle_reply:
        _shuffler.shuffle(reblinded)
    channel.send(S2C, MessageKind.SERVER_REBLINDED, reblinded)

    order = server.elements
    _shuffler.shuffle(order)
    points = [group.hash_to_group(encode_address(s)) * k for s in order]
    channel.send(S2C, MessageKind.SERVER_TAGS, [group.tag(p) for p in points])
    if send_records:
        sealed = [_seal_records(_record_key(group, p), server.associated_data[s]) for s, p in zip(order, points)]
        channel.send(S2C, MessageKind.SERVER_RECORDS, sealed)
    return _ServerState(order, points)


def _client_match(client: PartySession, elements: List[int]) -> _ClientView:
    channel, group = client.channel, client.group
    reply = channel.receive(S2C, MessageKind.SERVER_REBLINDED)
    tags = channel.receive(S2C, MessageKind.SERVER_TAGS)
    if len(reply) != len(elements):
        channel.close()
        raise ProtocolAbortError(f"Server returned {len(reply)} elements for {len(elements)} sent")

    inverse = group.inverse(client.secret_key)
    try:
        unblinded = [group.decode(x) * inverse for x in reply]
    except InputError as e:
        channel.close()
        raise ProtocolAbortError(f"Malformed re-blinded element: {e}") from e
    tag_index = {tag: position for position, tag in enumerate(tags)}
    tag_positions = [tag_index.get(group.tag(point)) for point in unblinded]
    client.match_positions = tuple(i for i, position in enumerate(tag_positions) if position is not None)
    return _ClientView(elements, unblinded, tag_positions, len(tags))


def _report_bitmap(view: _ClientView) -> bytes:
    bits = np.zeros(view.server_size, dtype=np.uint8)
    for position in view.tag_positions:
        if position is not None:
            bits[position] = 1
    return np.packbits(bits).tobytes()


def _read_bitmap(bitmap: bytes, order: List[int]) -> set:
    bits = np.unpackbits(np.frombuffer(bitmap, dtype=np.uint8), count=len(order))
    return {order[i] for i in np.flatnonzero(bits)}


def _cardinality(server: PartySession, client: PartySession) -> Tuple[int, int, int]:
    channel = _handshake(server, client)
    elements = _client_blind(client)
    _server_respond(server, shuffle_reply=True)
    view = _client_match(client, elements)
    count = sum(1 for position in view.tag_positions if position is not None)

    channel.send(C2S, MessageKind.RESULT_REPORT, [COUNT_REPORT.pack(count)])
    report = _single(channel.receive(C2S, MessageKind.RESULT_REPORT), MessageKind.RESULT_REPORT, channel)
    return count, COUNT_REPORT.unpack(report)[0], view.server_size


def psi_ca(server: PartySession, client: PartySession) -> int:
    """
    Private set intersection cardinality.

    Returns:
        |S ∩ C| as learned by the client; the server receives it through
        the closing report.
    """
    count, reported, _ = _cardinality(server, client)
    client.output = count
    server.output = reported
    logger.debug(f"PSI-CA finished: |C|={len(client.input_set)}, |S|={len(server.input_set)}, result {count}")
    return count


def psi(server: PartySession, client: PartySession) -> frozenset:
    """Private set intersection; the reply keeps the client's order."""
    channel = _handshake(server, client)
    elements = _client_blind(client)
    state = _server_respond(server, shuffle_reply=False)
    view = _client_match(client, elements)
    common = frozenset(c for c, position in zip(elements, view.tag_positions) if position is not None)

    channel.send(C2S, MessageKind.RESULT_REPORT, [_report_bitmap(view)])
    bitmap = _single(channel.receive(C2S, MessageKind.RESULT_REPORT), MessageKind.RESULT_REPORT, channel)
    client.output = common
    server.output = frozenset(_read_bitmap(bitmap, state.order))
    return common


def psi_dt(server: PartySession, client: PartySession) -> Dict[int, List[Record]]:
    """
    Private set intersection with data transfer.

    Each server record list is sealed under a key derived from H(s)^k, so
    the client can open exactly the lists of the common elements.

    Raises:
        InputError: a server element has no associated data
    """
    _check_pair(server, client)
    data = server.associated_data or {}
    missing = [s for s in server.input_set.ips if s not in data]
    if missing:
        raise InputError(f"Server has no associated data for {len(missing)} of its {len(server.input_set)} elements")

    channel = _handshake(server, client)
    elements = _client_blind(client)
    state = _server_respond(server, shuffle_reply=False, send_records=True)
    view = _client_match(client, elements)
    sealed = channel.receive(S2C, MessageKind.SERVER_RECORDS)
    if len(sealed) != view.server_size:
        channel.close()
        raise ProtocolAbortError(f"Received {len(sealed)} record lists for {view.server_size} tags")

    delivered: Dict[int, List[Record]] = {}
    for c, point, position in zip(elements, view.unblinded, view.tag_positions):
        if position is None:
            continue
        try:
            delivered[c] = _open_records(_record_key(client.group, point), sealed[position])
        except InvalidTag as e:
            channel.close()
            raise ProtocolAbortError(f"Record list at position {position} failed authentication") from e

    channel.send(C2S, MessageKind.RESULT_REPORT, [_report_bitmap(view)])
    bitmap = _single(channel.receive(C2S, MessageKind.RESULT_REPORT), MessageKind.RESULT_REPORT, channel)
    client.output = delivered
    server.output = frozenset(_read_bitmap(bitmap, state.order))
    return delivered


def pjs(server: PartySession, client: PartySession) -> float:
    """
    Private Jaccard similarity from PSI-CA and the set sizes it reveals.

    Raises:
        UndefinedMetricError: both sets are empty
    """
    count, reported, server_size = _cardinality(server, client)
    client_size = len(client.input_set)
    union = server_size + client_size - count
    if union == 0:
        raise UndefinedMetricError("Jaccard similarity of two empty sets is undefined")
    client.output = count / union
    server.output = reported / (len(server.input_set) + client_size - reported)
    return client.output


class TrustedEvaluator:
    """
    Ideal functionality for Pearson and Cosine.

    Receives both vectors, returns the plaintext value and records only the
    vector length and the output on the transcript.
    """

    def __init__(self, channel: Optional[Channel] = None):
        self.channel = channel or Channel()

    def evaluate(self, u: BinaryAttackVector, v: BinaryAttackVector, metric: Metric) -> float:
        metric = Metric(metric)
        if not metric.uses_vectors:
            raise InputError(f"{metric.value} is not evaluated on binary vectors")
        if len(u) != len(v):
            raise InputError(f"Vectors differ in length: {len(u)} vs {len(v)}")

        self.channel.send(C2S, MessageKind.IDEAL_INPUT, [SIZE_REPORT.pack(len(u))])
        self.channel.receive(C2S, MessageKind.IDEAL_INPUT)
        value = pearson(u, v) if metric is Metric.PEARSON else cosine(u, v)
        self.channel.send(S2C, MessageKind.IDEAL_OUTPUT, [RATIO_REPORT.pack(value)])
        self.channel.receive(S2C, MessageKind.IDEAL_OUTPUT)
        return value


def simulated_private_correlation(
    u: BinaryAttackVector,
    v: BinaryAttackVector,
    metric: Metric,
    channel: Optional[Channel] = None,
) -> float:
    return TrustedEvaluator(channel).evaluate(u, v, metric)


class LeakageStep(BaseModel):
    direction: str
    kind: str
    element_count: int
    payload_length: int


class LeakageProfile(BaseModel):
    """Structure of a transcript with no payload bytes."""
    message_count: int
    steps: List[LeakageStep]
    elements_by_direction: Dict[str, int]


def leakage_profile(transcript: Transcript) -> LeakageProfile:
    steps = [
        LeakageStep(
            direction=entry.direction.label,
            kind=entry.kind.name,
            element_count=entry.element_count,
            payload_length=entry.payload_length,
        )
        for entry in transcript
    ]
    totals = {direction.label: 0 for direction in Direction}
    for step in steps:
        totals[step.direction] += step.element_count
    return LeakageProfile(message_count=len(steps), steps=steps, elements_by_direction=totals)


def private_score(
    metric: Metric,
    server_set: SourceSet,
    client_set: SourceSet,
    policy: Optional[RangePolicy] = None,
    group: Optional[GroupParams] = None,
) -> Tuple[float, Transcript]:
    """Evaluate one benefit metric through its private protocol."""
    metric = Metric(metric)
    if metric.uses_vectors:
        channel = Channel()
        ip_range = agree_range(server_set, client_set, policy or RangePolicy())
        u, v = to_vector(server_set, ip_range), to_vector(client_set, ip_range)
        return simulated_private_correlation(u, v, metric, channel), channel.transcript

    server, client = open_sessions(server_set, client_set, group=group)
    if metric is Metric.INTERSECTION_SIZE:
        value = float(psi_ca(server, client))
    else:
        value = pjs(server, client)
    return value, server.channel.transcript
