"""Embedded publish/subscribe commit log.

Topics are directories of partitions; each partition is a directory of
append-only segment files named by their base offset::

    <root>/
      topics/<topic>/topic.json              partition count, retention
      topics/<topic>/<partition>/00000000000000000000.log
      groups/<group>.json                    committed offsets, atomic replace

Record frame (little-endian): u32 frame length (bytes after the field),
u32 CRC-32 over the rest of the frame, u64 timestamp ms, i32 key length
(-1 for no key), key bytes, u32 value length, value bytes. Offsets are
implicit: base offset of the segment plus the record's position in it.

Durability modes: ``fsync`` fsyncs before every ack, ``batch`` (default)
writes through an unbuffered fd and fsyncs every ``fsync_interval``
records and on close, ``none`` never fsyncs explicitly. Reads go through
``os.pread`` on separate descriptors, so consumers see acked records
immediately and never block producers except for the per-partition append
lock held during segment rotation.

On reopen, segments are scanned and a torn tail (short frame or CRC
mismatch) is truncated away: at-least-once delivery for acked records,
never a gap mid-partition.
"""

from __future__ import annotations

import json
import os
import struct
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

from .errors import (OffsetOutOfRange, RetentionOverflow, TopicExists,
                     UnknownTopic)
from .hashutil import fnv1a_32

DEFAULT_SEGMENT_BYTES = 16 * 1024 * 1024
_HEADER = struct.Struct("<II")  # frame_len, crc32


@dataclass(frozen=True)
class Record:
    topic: str
    partition: int
    offset: int
    key: bytes | None
    value: bytes
    timestamp_ms: int


@dataclass(frozen=True)
class TopicConfig:
    name: str
    partitions: int = 1
    retention: int = 0  # max records per partition, 0 = unbounded

    def __post_init__(self) -> None:
        if self.partitions < 1:
            raise ValueError(f"partitions must be >= 1, got {self.partitions}")
        if self.retention < 0:
            raise ValueError(f"retention must be >= 0, got {self.retention}")


def _encode_frame(key: bytes | None, value: bytes, timestamp_ms: int) -> bytes:
    body = struct.pack("<q", timestamp_ms)
    if key is None:
        body += struct.pack("<i", -1)
    else:
        body += struct.pack("<i", len(key)) + key
    body += struct.pack("<I", len(value)) + value
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return _HEADER.pack(len(body) + 4, crc) + body


def _decode_body(body: bytes) -> tuple[bytes | None, bytes, int]:
    (timestamp_ms,) = struct.unpack_from("<q", body, 0)
    (key_len,) = struct.unpack_from("<i", body, 8)
    pos = 12
    key = None
    if key_len >= 0:
        key = body[pos:pos + key_len]
        pos += key_len
    (val_len,) = struct.unpack_from("<I", body, pos)
    pos += 4
    value = body[pos:pos + val_len]
    return key, value, timestamp_ms


class _Segment:
    def __init__(self, path: Path, base_offset: int):
        self.path = path
        self.base_offset = base_offset
        self.positions: list[int] = []
        self.size = 0
        self.fd = -1

    def open_and_scan(self) -> None:
        """Index every intact frame; truncate a torn tail in place."""
        self.fd = os.open(self.path, os.O_RDWR | os.O_CREAT, 0o644)
        file_size = os.fstat(self.fd).st_size
        pos = 0
        while pos + _HEADER.size <= file_size:
            header = os.pread(self.fd, _HEADER.size, pos)
            if len(header) < _HEADER.size:
                break
            frame_len, crc = _HEADER.unpack(header)
            body_len = frame_len - 4
            if body_len < 0 or pos + _HEADER.size + body_len > file_size:
                break
            body = os.pread(self.fd, body_len, pos + _HEADER.size)
            if zlib.crc32(body) & 0xFFFFFFFF != crc:
                break
            self.positions.append(pos)
            pos += _HEADER.size + body_len
        if pos < file_size:
            os.ftruncate(self.fd, pos)
        self.size = pos

    def append(self, frame: bytes) -> int:
        pos = self.size
        os.pwrite(self.fd, frame, pos)
        self.size += len(frame)
        self.positions.append(pos)
        return self.base_offset + len(self.positions) - 1

    def read(self, local_index: int) -> bytes:
        pos = self.positions[local_index]
        header = os.pread(self.fd, _HEADER.size, pos)
        frame_len, _ = _HEADER.unpack(header)
        return os.pread(self.fd, frame_len - 4, pos + _HEADER.size)

    def close(self) -> None:
        if self.fd >= 0:
            os.close(self.fd)
            self.fd = -1


class _Partition:
    def __init__(self, directory: Path, topic: str, index: int):
        self.dir = directory
        self.topic = topic
        self.index = index
        self.segments: list[_Segment] = []
        self.lock = threading.Lock()
        self.unsynced = 0

    def open(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        paths = sorted(self.dir.glob("*.log"))
        if not paths:
            paths = [self.dir / f"{0:020d}.log"]
        for path in paths:
            seg = _Segment(path, base_offset=int(path.stem))
            seg.open_and_scan()
            self.segments.append(seg)

    @property
    def end_offset(self) -> int:
        last = self.segments[-1]
        return last.base_offset + len(last.positions)

    def append(self, frame: bytes, segment_bytes: int, durability: str,
               fsync_interval: int, capacity: int = 0) -> int:
        with self.lock:
            if capacity and self.end_offset >= capacity:
                raise RetentionOverflow(
                    f"partition {self.topic}/{self.index} at retention cap {capacity}")
            seg = self.segments[-1]
            if seg.size and seg.size + len(frame) > segment_bytes:
                if durability != "none":
                    os.fsync(seg.fd)  # retire the old segment fully synced
                    self.unsynced = 0
                new = _Segment(self.dir / f"{self.end_offset:020d}.log", self.end_offset)
                new.open_and_scan()
                self.segments.append(new)
                seg = new
            offset = seg.append(frame)
            if durability == "fsync":
                os.fsync(seg.fd)
            elif durability == "batch":
                self.unsynced += 1
                if self.unsynced >= fsync_interval:
                    os.fsync(seg.fd)
                    self.unsynced = 0
            return offset

    def read(self, offset: int) -> bytes:
        # segments are sorted by base offset; binary search would be
        # overkill for the handful of segments a partition grows here
        for seg in reversed(self.segments):
            if offset >= seg.base_offset:
                return seg.read(offset - seg.base_offset)
        raise OffsetOutOfRange(f"offset {offset} below log start")

    def flush(self) -> None:
        with self.lock:
            os.fsync(self.segments[-1].fd)
            self.unsynced = 0

    def close(self) -> None:
        for seg in self.segments:
            seg.close()


class _Topic:
    def __init__(self, config: TopicConfig, directory: Path):
        self.config = config
        self.dir = directory
        self.partitions: list[_Partition] = []
        self.rr_counter = 0

    def open(self) -> None:
        for i in range(self.config.partitions):
            part = _Partition(self.dir / str(i), self.config.name, i)
            part.open()
            self.partitions.append(part)


class Broker:
    """Thread-safe embedded broker over one root directory."""

    def __init__(self, root, durability: str = "batch", *,
                 segment_bytes: int = DEFAULT_SEGMENT_BYTES, fsync_interval: int = 256):
        if durability not in ("fsync", "batch", "none"):
            raise ValueError(f"unknown durability mode {durability!r}")
        self.root = Path(root)
        self.durability = durability
        self.segment_bytes = segment_bytes
        self.fsync_interval = fsync_interval
        self._topics: dict[str, _Topic] = {}
        self._groups: dict[str, dict[str, int]] = {}
        self._members: dict[tuple[str, str], list["GroupConsumer"]] = {}
        self._lock = threading.RLock()
        self._data_ready = threading.Condition(self._lock)
        (self.root / "topics").mkdir(parents=True, exist_ok=True)
        (self.root / "groups").mkdir(parents=True, exist_ok=True)
        self._recover()

    # -- lifecycle -------------------------------------------------------

    def _recover(self) -> None:
        for topic_dir in sorted((self.root / "topics").iterdir()):
            meta = topic_dir / "topic.json"
            if not meta.is_file():
                continue
            raw = json.loads(meta.read_text("utf-8"))
            config = TopicConfig(name=raw["name"], partitions=raw["partitions"],
                                 retention=raw["retention"])
            topic = _Topic(config, topic_dir)
            topic.open()
            self._topics[config.name] = topic
        for group_file in (self.root / "groups").glob("*.json"):
            self._groups[group_file.stem] = json.loads(group_file.read_text("utf-8"))

    def close(self) -> None:
        with self._lock:
            for topic in self._topics.values():
                for part in topic.partitions:
                    if self.durability != "none":
                        part.flush()
                    part.close()
            self._topics.clear()

    def __enter__(self) -> "Broker":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- topics ----------------------------------------------------------

    def create_topic(self, config: TopicConfig | str, partitions: int = 1,
                     retention: int = 0) -> None:
        if isinstance(config, str):
            config = TopicConfig(name=config, partitions=partitions, retention=retention)
        with self._lock:
            if config.name in self._topics:
                raise TopicExists(f"topic {config.name!r} already exists")
            topic_dir = self.root / "topics" / config.name
            topic_dir.mkdir(parents=True, exist_ok=True)
            meta = topic_dir / "topic.json"
            tmp = meta.with_suffix(".tmp")
            tmp.write_text(json.dumps({"name": config.name,
                                       "partitions": config.partitions,
                                       "retention": config.retention},
                                      sort_keys=True), "utf-8")
            os.replace(tmp, meta)
            topic = _Topic(config, topic_dir)
            topic.open()
            self._topics[config.name] = topic

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)

    def _topic(self, name: str) -> _Topic:
        topic = self._topics.get(name)
        if topic is None:
            raise UnknownTopic(f"topic {name!r} does not exist")
        return topic

    def end_offsets(self, topic: str) -> list[int]:
        t = self._topic(topic)
        return [p.end_offset for p in t.partitions]

    # -- producing -------------------------------------------------------

    def produce(self, topic: str, value: bytes, key: bytes | None = None,
                timestamp_ms: int | None = None, *, block: bool = False,
                block_timeout_ms: float = 5000.0) -> tuple[int, int]:
        """Append one record; returns (partition, offset) after the
        durability mode has acknowledged the write."""
        t = self._topic(topic)
        if key is None:
            with self._lock:
                partition = t.rr_counter % t.config.partitions
                t.rr_counter += 1
        else:
            partition = fnv1a_32(key) % t.config.partitions
        part = t.partitions[partition]

        if timestamp_ms is None:
            timestamp_ms = int(time.time() * 1000)
        frame = _encode_frame(key, value, timestamp_ms)
        deadline = time.monotonic() + block_timeout_ms / 1000.0
        while True:
            try:
                offset = part.append(frame, self.segment_bytes, self.durability,
                                     self.fsync_interval, capacity=t.config.retention)
                break
            except RetentionOverflow:
                if not block or time.monotonic() >= deadline:
                    raise
                time.sleep(0.005)
        with self._data_ready:
            self._data_ready.notify_all()
        return partition, offset

    # -- consuming -------------------------------------------------------

    def _read_record(self, topic: str, partition: int, offset: int) -> Record:
        body = self._topic(topic).partitions[partition].read(offset)
        key, value, timestamp_ms = _decode_body(body)
        return Record(topic=topic, partition=partition, offset=offset,
                      key=key, value=value, timestamp_ms=timestamp_ms)

    def _collect(self, topic: str, starts: dict[int, int], max_records: int,
                 partitions: list[int] | None = None) -> list[Record]:
        """Round-robin across partitions, offset order within each."""
        t = self._topic(topic)
        parts = partitions if partitions is not None else list(range(t.config.partitions))
        cursors = dict(starts)
        out: list[Record] = []
        progress = True
        while len(out) < max_records and progress:
            progress = False
            for p in parts:
                if len(out) >= max_records:
                    break
                cursor = cursors.get(p, 0)
                if cursor < t.partitions[p].end_offset:
                    out.append(self._read_record(topic, p, cursor))
                    cursors[p] = cursor + 1
                    progress = True
        return out

    def consume(self, topic: str, group: str, max_records: int = 1024,
                timeout_ms: float = 0.0) -> list[Record]:
        """Records after the group's committed offsets; does not advance
        commits, so the same batch is redelivered until committed."""
        t = self._topic(topic)
        deadline = time.monotonic() + timeout_ms / 1000.0
        while True:
            committed = self.committed(group, topic)
            starts = {p: committed.get(p, 0) for p in range(t.config.partitions)}
            batch = self._collect(topic, starts, max_records)
            if batch or timeout_ms <= 0:
                return batch
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return []
            with self._data_ready:
                self._data_ready.wait(timeout=remaining)

    def subscribe(self, topic: str, group: str) -> "GroupConsumer":
        """Member handle with a static range of partitions; membership
        changes re-split the range across live members."""
        self._topic(topic)
        consumer = GroupConsumer(self, topic, group)
        with self._lock:
            members = self._members.setdefault((topic, group), [])
            members.append(consumer)
        return consumer

    def _assignment(self, topic: str, group: str, consumer: "GroupConsumer") -> list[int]:
        t = self._topic(topic)
        with self._lock:
            members = self._members.get((topic, group), [])
            if consumer not in members:
                return []
            rank = members.index(consumer)
            count = len(members)
        return [p for p in range(t.config.partitions) if p % count == rank]

    def _drop_member(self, topic: str, group: str, consumer: "GroupConsumer") -> None:
        with self._lock:
            members = self._members.get((topic, group), [])
            if consumer in members:
                members.remove(consumer)

    # -- offsets ---------------------------------------------------------

    def committed(self, group: str, topic: str) -> dict[int, int]:
        with self._lock:
            state = self._groups.get(group, {})
            prefix = f"{topic}/"
            return {int(k[len(prefix):]): v for k, v in state.items()
                    if k.startswith(prefix)}

    def commit(self, group: str, topic: str, offsets: dict[int, int]) -> None:
        """Durably record next-to-read offsets; rejects offsets beyond the
        partition end."""
        t = self._topic(topic)
        for p, offset in offsets.items():
            if p < 0 or p >= t.config.partitions:
                raise OffsetOutOfRange(f"no partition {p} in topic {topic!r}")
            end = t.partitions[p].end_offset
            if offset < 0 or offset > end:
                raise OffsetOutOfRange(
                    f"commit {offset} beyond end {end} for {topic}/{p}")
        with self._lock:
            state = self._groups.setdefault(group, {})
            for p, offset in offsets.items():
                state[f"{topic}/{p}"] = offset
            self._write_group(group, state)

    def replay_from(self, group: str, topic: str, offset: int) -> None:
        """Reset the group's cursor on every partition of the topic."""
        t = self._topic(topic)
        self.commit(group, topic, {p: offset for p in range(t.config.partitions)})

    def _write_group(self, group: str, state: dict[str, int]) -> None:
        path = self.root / "groups" / f"{group}.json"
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh, sort_keys=True)
            fh.flush()
            if self.durability != "none":
                os.fsync(fh.fileno())
        os.replace(tmp, path)


class GroupConsumer:
    """One member of a consumer group, bound to its assigned partitions."""

    def __init__(self, broker: Broker, topic: str, group: str):
        self.broker = broker
        self.topic = topic
        self.group = group
        self._last_batch: list[Record] = []

    def assignment(self) -> list[int]:
        return self.broker._assignment(self.topic, self.group, self)

    def poll(self, max_records: int = 1024, timeout_ms: float = 0.0) -> list[Record]:
        deadline = time.monotonic() + timeout_ms / 1000.0
        while True:
            parts = self.assignment()
            committed = self.broker.committed(self.group, self.topic)
            starts = {p: committed.get(p, 0) for p in parts}
            batch = self.broker._collect(self.topic, starts, max_records, partitions=parts)
            if batch or timeout_ms <= 0:
                self._last_batch = batch
                return batch
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._last_batch = []
                return []
            with self.broker._data_ready:
                self.broker._data_ready.wait(timeout=remaining)

    def commit_polled(self) -> None:
        """Commit past everything the last poll returned."""
        if not self._last_batch:
            return
        highest: dict[int, int] = {}
        for rec in self._last_batch:
            highest[rec.partition] = max(highest.get(rec.partition, -1), rec.offset)
        self.broker.commit(self.group, self.topic,
                           {p: off + 1 for p, off in highest.items()})

    def close(self) -> None:
        self.broker._drop_member(self.topic, self.group, self)
