"""
Duplex Channel and Transcript

In-process message passing between two protocol parties. Every message is
framed as bytes, recorded structurally in a Transcript and kept as a raw
frame so runs can be replayed from a file.
"""

import logging
import struct
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Deque, Dict, Iterator, List, Optional, Sequence, Tuple, Union

from core.errors import InputError, ProtocolAbortError

logger = logging.getLogger(__name__)

FRAME_HEADER = struct.Struct(">IBB")
COUNT = struct.Struct(">I")


class Direction(IntEnum):
    CLIENT_TO_SERVER = 0
    SERVER_TO_CLIENT = 1

    @property
    def label(self) -> str:
        return "client->server" if self is Direction.CLIENT_TO_SERVER else "server->client"


class MessageKind(IntEnum):
    HELLO = 1
    CLIENT_BLINDED = 2
    SERVER_REBLINDED = 3
    SERVER_TAGS = 4
    SERVER_RECORDS = 5
    RESULT_REPORT = 6
    IDEAL_INPUT = 7
    IDEAL_OUTPUT = 8


@dataclass(frozen=True)
class TranscriptEntry:
    direction: Direction
    kind: MessageKind
    payload_length: int
    element_count: int


class Transcript:
    """Append-only structural record of a protocol run."""

    def __init__(self):
        self._entries: List[TranscriptEntry] = []

    def append(self, entry: TranscriptEntry) -> None:
        self._entries.append(entry)

    @property
    def entries(self) -> Tuple[TranscriptEntry, ...]:
        return tuple(self._entries)

    def __iter__(self) -> Iterator[TranscriptEntry]:
        return iter(tuple(self._entries))

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class Frame:
    direction: Direction
    kind: MessageKind
    payload: bytes

    def to_bytes(self) -> bytes:
        return FRAME_HEADER.pack(len(self.payload), int(self.direction), int(self.kind)) + self.payload


def encode_payload(elements: Sequence[bytes]) -> bytes:
    """u32 element count, then each element as u32 length plus bytes."""
    parts = [COUNT.pack(len(elements))]
    for element in elements:
        parts.append(COUNT.pack(len(element)))
        parts.append(bytes(element))
    return b"".join(parts)


def decode_payload(payload: bytes) -> List[bytes]:
    if len(payload) < COUNT.size:
        raise InputError("Payload shorter than its element count")
    (count,) = COUNT.unpack_from(payload, 0)
    offset = COUNT.size
    elements = []
    for _ in range(count):
        if offset + COUNT.size > len(payload):
            raise InputError("Truncated payload")
        (length,) = COUNT.unpack_from(payload, offset)
        offset += COUNT.size
        if offset + length > len(payload):
            raise InputError("Truncated payload element")
        elements.append(payload[offset:offset + length])
        offset += length
    if offset != len(payload):
        raise InputError("Trailing bytes after payload elements")
    return elements


class Channel:
    """
    In-process duplex channel.

    fail_after closes the channel once that many messages were sent, which
    simulates a link dropping mid-protocol.
    """

    def __init__(self, fail_after: Optional[int] = None):
        self.transcript = Transcript()
        self.frames: List[Frame] = []
        self._queues: Dict[Direction, Deque[Frame]] = {d: deque() for d in Direction}
        self._fail_after = fail_after
        self.closed = False

    def close(self) -> None:
        self.closed = True

    def send(self, direction: Direction, kind: MessageKind, elements: Sequence[bytes]) -> None:
        if self.closed:
            raise ProtocolAbortError(f"Channel closed before {kind.name} could be sent")
        if self._fail_after is not None and len(self.frames) >= self._fail_after:
            self.close()
            raise ProtocolAbortError(f"Channel failed while sending {kind.name}")
        frame = Frame(direction, kind, encode_payload(elements))
        self.frames.append(frame)
        self._queues[direction].append(frame)
        self.transcript.append(TranscriptEntry(direction, kind, len(frame.payload), len(elements)))
        logger.debug(f"{direction.label} {kind.name}: {len(elements)} elements, {len(frame.payload)} bytes")

    def receive(self, direction: Direction, kind: MessageKind) -> List[bytes]:
        """Next message travelling in direction; it must be of the given kind."""
        if self.closed:
            raise ProtocolAbortError(f"Channel closed while waiting for {kind.name}")
        queue = self._queues[direction]
        if not queue:
            raise ProtocolAbortError(f"No {kind.name} message pending on {direction.label}")
        frame = queue.popleft()
        if frame.kind != kind:
            self.close()
            raise ProtocolAbortError(f"Expected {kind.name}, received {frame.kind.name}")
        return decode_payload(frame.payload)


def write_replay(frames: Sequence[Frame], path: Union[str, Path]) -> None:
    """Write frames as 4-byte length, direction byte, kind byte, payload."""
    with open(path, "wb") as f:
        for frame in frames:
            f.write(frame.to_bytes())


def read_replay(path: Union[str, Path]) -> List[Frame]:
    with open(path, "rb") as f:
        data = f.read()
    frames = []
    offset = 0
    while offset < len(data):
        if offset + FRAME_HEADER.size > len(data):
            raise InputError(f"Truncated frame header at byte {offset}")
        length, direction, kind = FRAME_HEADER.unpack_from(data, offset)
        offset += FRAME_HEADER.size
        if offset + length > len(data):
            raise InputError(f"Truncated frame payload at byte {offset}")
        try:
            frames.append(Frame(Direction(direction), MessageKind(kind), data[offset:offset + length]))
        except ValueError as e:
            raise InputError(f"Unknown frame header: {e}") from e
        offset += length
    return frames


def replay_transcript(frames: Sequence[Frame]) -> Transcript:
    """Rebuild the structural transcript of a replayed run."""
    transcript = Transcript()
    for frame in frames:
        count = len(decode_payload(frame.payload))
        transcript.append(TranscriptEntry(frame.direction, frame.kind, len(frame.payload), count))
    return transcript
