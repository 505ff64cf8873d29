#!/usr/bin/env python3
"""
Keyed-sequential dataset (KSDS) emulation.

A store is an ordered key -> record map with START / READ NEXT / READ PREV
cursors and random READ / WRITE / REWRITE / DELETE. Backends:

- single: one ordered map holding every record
- perlayout: one ordered map per record layout (one "table" per layout);
  sequential reads merge the maps with a tournament tree
- cached: write-back cache session over a single or perlayout store,
  holding an exclusive lock until it is flushed

Error conditions follow keyed-file status codes (see mf_errors).
"""

import argparse
import bisect
import csv
import logging
import os
import socket
import statistics
import sys
import tempfile
import time
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass, fields
from datetime import UTC, datetime
from pathlib import Path
from typing import IO, Any, NamedTuple

import yaml

from mf_codec import DEFAULT_CODEPAGE, Encoding, format_value, resolve_layout
from mf_copybook import CopybookSchema, DiscriminatorRule, parse_copybook, schema_fingerprint
from mf_errors import (
    ConfigError,
    CursorInvalidated,
    DuplicateKey,
    EndOfFile,
    ExclusiveLockHeld,
    FlushConflict,
    MainframeDataError,
    MissingDiscriminator,
    NotFound,
    RecordLengthViolation,
    SchemaMismatch,
    SessionClosed,
    StoreCorrupted,
)
from mf_recio import KeySpec, RecordFileSpec, RecordFormat, read_records, write_records

logger = logging.getLogger(__name__)

STORE_FORMAT_VERSION = 1
MANIFEST_NAME = "store.yaml"
LOCK_NAME = "store.lock"
BACKENDS = ("single", "perlayout", "cached")
START_MODES = ("=", ">=", ">")
SINGLE_MAP_NAME = "ALL"


@dataclass
class OpStats:
    """Counters that make the cost of sequential reads observable."""

    sub_cursor_advances: int = 0
    comparisons: int = 0
    records_returned: int = 0

    def snapshot(self) -> "OpStats":
        return OpStats(self.sub_cursor_advances, self.comparisons, self.records_returned)

    def since(self, earlier: "OpStats") -> "OpStats":
        return OpStats(
            *(getattr(self, f.name) - getattr(earlier, f.name) for f in fields(self))
        )


class SortedMap:
    """Ordered map of fixed-length keys to records (bisect over a key list)."""

    def __init__(self) -> None:
        self.keys: list[bytes] = []
        self.records: dict[bytes, bytes] = {}

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: bytes) -> bool:
        return key in self.records

    def get(self, key: bytes) -> bytes | None:
        return self.records.get(key)

    def put(self, key: bytes, record: bytes) -> None:
        if key not in self.records:
            bisect.insort(self.keys, key)
        self.records[key] = record

    def remove(self, key: bytes) -> None:
        del self.records[key]
        del self.keys[bisect.bisect_left(self.keys, key)]

    def items(self) -> Iterator[tuple[bytes, bytes]]:
        for key in self.keys:
            yield key, self.records[key]


class KsdsCursor:
    """
    Position between two records in key order.

    Each map i keeps a gap index positions[i]: records below it are behind
    the cursor. read_next takes the smallest head across maps, read_prev the
    largest tail, so read_prev right after read_next returns the same record.
    """

    def __init__(self, dataset: "KeyedDataset", positions: list[int]):
        self.dataset = dataset
        self.generation = dataset.generation
        self.positions = positions
        self._direction: str | None = None
        self._heads: list[bytes | None] = []
        self._tree: list[int] = []
        self._leaves = 1
        self._stale: int | None = None

    def _check(self) -> None:
        self.dataset._check_open()
        if self.generation != self.dataset.generation:
            raise CursorInvalidated(
                "store changed since the cursor was positioned",
                cursor_generation=self.generation,
                store_generation=self.dataset.generation,
            )

    def _head(self, index: int, direction: str) -> bytes | None:
        self.dataset.stats.sub_cursor_advances += 1
        keys = self.dataset.maps[index].keys
        position = self.positions[index]
        if direction == "next":
            return keys[position] if position < len(keys) else None
        return keys[position - 1] if position > 0 else None

    def _play(self, node: int) -> None:
        left, right = self._tree[2 * node], self._tree[2 * node + 1]
        if left < 0 or right < 0:
            self._tree[node] = left if right < 0 else right
            return
        self.dataset.stats.comparisons += 1
        left_key, right_key = self._heads[left], self._heads[right]
        assert left_key is not None and right_key is not None
        if self._direction == "next":
            self._tree[node] = left if left_key < right_key else right
        else:
            self._tree[node] = left if left_key > right_key else right

    def _prime(self, direction: str) -> None:
        count = len(self.dataset.maps)
        self._direction = direction
        self._heads = [self._head(i, direction) for i in range(count)]
        self._leaves = 1
        while self._leaves < count:
            self._leaves *= 2
        self._tree = [-1] * (2 * self._leaves)
        for i, head in enumerate(self._heads):
            self._tree[self._leaves + i] = i if head is not None else -1
        for node in range(self._leaves - 1, 0, -1):
            self._play(node)
        self._stale = None

    def _refresh(self) -> None:
        if self._stale is None:
            return
        index = self._stale
        assert self._direction is not None
        self._heads[index] = self._head(index, self._direction)
        node = self._leaves + index
        self._tree[node] = index if self._heads[index] is not None else -1
        node //= 2
        while node >= 1:
            self._play(node)
            node //= 2
        self._stale = None

    def _read(self, direction: str) -> bytes:
        self._check()
        if self._direction != direction:
            self._prime(direction)
        else:
            self._refresh()
        winner = self._tree[1]
        if winner < 0:
            raise EndOfFile(f"no {'next' if direction == 'next' else 'previous'} record")
        key = self._heads[winner]
        assert key is not None
        self.positions[winner] += 1 if direction == "next" else -1
        self._stale = winner
        self.dataset.stats.records_returned += 1
        record = self.dataset.maps[winner].get(key)
        assert record is not None
        return record

    def read_next(self) -> bytes:
        return self._read("next")

    def read_prev(self) -> bytes:
        return self._read("prev")


class KeyedDataset:
    """Keyed operations shared by stores and cache sessions."""

    def __init__(
        self,
        schema: CopybookSchema,
        key: KeySpec,
        map_names: list[str],
        encoding: Encoding | str = Encoding.EBCDIC,
        codepage: str = DEFAULT_CODEPAGE,
    ):
        key.check_schema(schema)
        self.schema = schema
        self.key = key
        self.map_names = map_names
        self.maps = [SortedMap() for _ in map_names]
        self.residence: dict[bytes, int] = {}
        self.generation = 0
        self.stats = OpStats()
        self.closed = False
        self.encoding = Encoding(encoding)
        self.codepage = codepage

    def __len__(self) -> int:
        return len(self.residence)

    def _check_open(self) -> None:
        if self.closed:
            raise SessionClosed(f"{type(self).__name__} is closed")

    def layout_of(self, record: bytes) -> str | None:
        """
        Validate a record for this dataset and return its layout name.

        None means the schema has several layouts but no discriminator, so
        only the overall length is checked.
        """
        if len(record) > self.schema.total_length:
            raise RecordLengthViolation(
                f"record of {len(record)} bytes exceeds the schema's {self.schema.total_length}"
            )
        if len(record) < self.key.end:
            raise RecordLengthViolation(f"record of {len(record)} bytes has no complete key")
        if len(self.schema.layouts) > 1 and self.schema.discriminator is None:
            return None
        layout = resolve_layout(self.schema, record, self.encoding, self.codepage)
        if len(record) < layout.length:
            raise RecordLengthViolation(
                f"record of {len(record)} bytes is shorter than layout {layout.name}",
                layout=layout.name,
            )
        return layout.name

    def _route(self, record: bytes) -> int:
        name = self.layout_of(record)
        return 0 if name is None else self._map_index(name)

    def _map_index(self, layout_name: str) -> int:
        return 0

    def _mutated(self) -> None:
        self.generation += 1

    def _insert(self, key: bytes, record: bytes, index: int) -> None:
        self.maps[index].put(key, record)
        self.residence[key] = index

    def start(self, key_prefix: bytes, mode: str = ">=") -> KsdsCursor:
        """Position a cursor before the first record whose key satisfies mode."""
        self._check_open()
        if mode not in START_MODES:
            raise ValueError(f"start mode must be one of {', '.join(START_MODES)}")
        prefix = bytes(key_prefix)
        if len(prefix) > self.key.length:
            raise ValueError(f"key prefix of {len(prefix)} bytes exceeds key length {self.key.length}")

        if mode == ">":
            probe = prefix + b"\xff" * (self.key.length - len(prefix))
            positions = [bisect.bisect_right(m.keys, probe) for m in self.maps]
        else:
            positions = [bisect.bisect_left(m.keys, prefix) for m in self.maps]
        if mode == "=":
            found = len(prefix) == self.key.length and any(
                p < len(m.keys) and m.keys[p] == prefix
                for m, p in zip(self.maps, positions, strict=True)
            )
            if not found:
                raise NotFound(f"no record with key {prefix.hex().upper()}", key=prefix.hex().upper())
        return KsdsCursor(self, positions)

    def read(self, key: bytes) -> bytes:
        self._check_open()
        index = self.residence.get(bytes(key))
        if index is None:
            raise NotFound(f"no record with key {bytes(key).hex().upper()}")
        record = self.maps[index].get(bytes(key))
        assert record is not None
        return record

    def write(self, record: bytes) -> None:
        self._check_open()
        record = bytes(record)
        key = self.key.extract(record)
        index = self._route(record)
        if key in self.residence:
            raise DuplicateKey(f"key {key.hex().upper()} already exists", key=key.hex().upper())
        self._insert(key, record, index)
        self._mutated()
        self._written(key)

    def rewrite(self, record: bytes) -> None:
        self._check_open()
        record = bytes(record)
        key = self.key.extract(record)
        index = self._route(record)
        current = self.residence.get(key)
        if current is None:
            raise NotFound(f"no record with key {key.hex().upper()} to rewrite")
        if current != index:
            self.maps[current].remove(key)
        self._insert(key, record, index)
        self._mutated()
        self._rewritten(key)

    def delete(self, key: bytes) -> None:
        self._check_open()
        key = bytes(key)
        index = self.residence.get(key)
        if index is None:
            raise NotFound(f"no record with key {key.hex().upper()} to delete")
        self.maps[index].remove(key)
        del self.residence[key]
        self._mutated()
        self._deleted(key)

    def _written(self, key: bytes) -> None:
        pass

    def _rewritten(self, key: bytes) -> None:
        pass

    def _deleted(self, key: bytes) -> None:
        pass

    def dump(self) -> list[tuple[bytes, bytes]]:
        """All (key, record) pairs in ascending key order."""
        self._check_open()
        result = []
        for key in sorted(self.residence):
            record = self.maps[self.residence[key]].get(key)
            assert record is not None
            result.append((key, record))
        return result

    def scan(self) -> Iterator[bytes]:
        """Full sequential read through a cursor, in key order."""
        cursor = self.start(b"", ">=")
        while True:
            try:
                yield cursor.read_next()
            except EndOfFile:
                return

    def map_counts(self) -> dict[str, int]:
        return {name: len(m) for name, m in zip(self.map_names, self.maps, strict=True)}


class StoreLock:
    """
    Exclusive session lock.

    Persistent stores use a store.lock file created with O_CREAT|O_EXCL and
    holding owner metadata; a lock left by a dead process on this host is
    stale and gets replaced. Memory stores keep the owner in-process.
    """

    def __init__(self, store: "KsdsStore"):
        self.store = store
        self.owner: dict[str, Any] | None = None

    @property
    def path(self) -> Path | None:
        return self.store.location / LOCK_NAME if self.store.location else None

    def acquire(self, purpose: str) -> None:
        metadata = {
            "pid": os.getpid(),
            "host": socket.gethostname(),
            "created": datetime.now(UTC).isoformat(timespec="seconds"),
            "purpose": purpose,
        }
        if self.owner is not None:
            raise ExclusiveLockHeld(
                "store is held by another session", owner=self.owner["purpose"]
            )
        path = self.path
        if path is not None:
            self._create(path, metadata)
        self.owner = metadata
        logger.debug("lock acquired for %s", purpose)

    def _create(self, path: Path, metadata: dict[str, Any], retry: bool = True) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except FileExistsError:
            holder = self.read_owner(path)
            if retry and self._is_stale(holder):
                logger.warning("removing stale lock left by pid %s", holder.get("pid"))
                path.unlink(missing_ok=True)
                self._create(path, metadata, retry=False)
                return
            raise ExclusiveLockHeld(
                "store is locked by another session",
                pid=holder.get("pid"),
                host=holder.get("host"),
                purpose=holder.get("purpose"),
            ) from None
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            yaml.safe_dump(metadata, f, sort_keys=True)

    @staticmethod
    def read_owner(path: Path) -> dict[str, Any]:
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError):
            return {}
        return data if isinstance(data, dict) else {}

    @staticmethod
    def _is_stale(holder: dict[str, Any]) -> bool:
        pid = holder.get("pid")
        if not isinstance(pid, int) or holder.get("host") != socket.gethostname():
            return False
        if pid == os.getpid():
            return False
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return True
        except PermissionError:
            return False
        return False

    def release(self) -> None:
        path = self.path
        if path is not None:
            path.unlink(missing_ok=True)
        self.owner = None


class KsdsStore(KeyedDataset):
    """A single-table or per-layout store, in memory or in a directory."""

    def __init__(
        self,
        location: Path | None,
        schema: CopybookSchema,
        key: KeySpec,
        backend: str = "single",
        encoding: Encoding | str = Encoding.EBCDIC,
        codepage: str = DEFAULT_CODEPAGE,
    ):
        if backend == "perlayout":
            if len(schema.layouts) > 1 and schema.discriminator is None:
                raise MissingDiscriminator(
                    f"per-layout store over {len(schema.layouts)} layouts needs a discriminator rule"
                )
            names = schema.layout_names
        elif backend == "single":
            names = [SINGLE_MAP_NAME]
        else:
            raise ConfigError(f"store backend must be single or perlayout, got {backend}")
        super().__init__(schema, key, names, encoding, codepage)
        self.backend = backend
        self.location = location
        self.fingerprint = schema_fingerprint(schema)
        self.lock = StoreLock(self)
        self._layout_index = {name: i for i, name in enumerate(names)}
        self._dirty = location is not None

    def _map_index(self, layout_name: str) -> int:
        if self.backend == "single":
            return 0
        return self._layout_index[layout_name]

    def _mutated(self) -> None:
        super()._mutated()
        self._dirty = True

    @contextmanager
    def exclusive(self, purpose: str) -> Iterator["KsdsStore"]:
        """Hold the session lock for the duration of a maintenance operation."""
        self._check_open()
        self.lock.acquire(purpose)
        try:
            yield self
        finally:
            self.lock.release()

    def _map_file(self, index: int) -> str:
        return f"map-{index:03d}.dat"

    def _record_spec(self) -> RecordFileSpec:
        return RecordFileSpec(
            RecordFormat.VARIABLE, max(self.schema.total_length, 1), self.encoding, None, self.key
        )

    def manifest(self) -> dict[str, Any]:
        return {
            "format_version": STORE_FORMAT_VERSION,
            "backend": self.backend,
            "schema": self.schema.name,
            "fingerprint": self.fingerprint,
            "key": {"offset": self.key.offset, "length": self.key.length},
            "generation": self.generation,
            "maps": [
                {"name": name, "file": self._map_file(i), "records": len(self.maps[i])}
                for i, name in enumerate(self.map_names)
            ],
        }

    def sync(self) -> None:
        """Write map files and the manifest if anything changed."""
        self._check_open()
        if self.location is None or not self._dirty:
            return
        self.location.mkdir(parents=True, exist_ok=True)
        spec = self._record_spec()
        for index, sorted_map in enumerate(self.maps):
            records = (sorted_map.records[k] for k in sorted_map.keys)
            write_records(self.location / self._map_file(index), spec, records)
        fd, temp_name = tempfile.mkstemp(prefix=".store.", suffix=".tmp", dir=self.location)
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.manifest(), f, sort_keys=False)
        os.replace(temp_name, self.location / MANIFEST_NAME)
        self._dirty = False
        logger.info("synced store %s (%d records)", self.location, len(self))

    def close(self) -> None:
        if self.closed:
            return
        self.sync()
        self.closed = True

    def __enter__(self) -> "KsdsStore":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def disk_generation(self) -> int | None:
        """Generation recorded in the manifest on disk, if any."""
        if self.location is None:
            return None
        manifest = _read_manifest(self.location)
        return manifest.get("generation") if manifest else None

    def _load(self, manifest: dict[str, Any]) -> None:
        assert self.location is not None
        if manifest.get("format_version") != STORE_FORMAT_VERSION:
            raise StoreCorrupted(
                f"unsupported store format {manifest.get('format_version')}", location=str(self.location)
            )
        recorded_key = manifest.get("key") or {}
        if manifest.get("fingerprint") != self.fingerprint:
            raise SchemaMismatch(
                f"store was created with schema {manifest.get('schema')} "
                f"({str(manifest.get('fingerprint'))[:12]}), not {self.schema.name} ({self.fingerprint[:12]})"
            )
        if (recorded_key.get("offset"), recorded_key.get("length")) != (self.key.offset, self.key.length):
            raise SchemaMismatch(f"store key is {recorded_key}, not {self.key}")
        if manifest.get("backend") != self.backend:
            raise SchemaMismatch(f"store backend is {manifest.get('backend')}, not {self.backend}")
        entries = manifest.get("maps") or []
        if [e.get("name") for e in entries] != self.map_names:
            raise StoreCorrupted("manifest map list does not match the schema layouts")

        spec = self._record_spec()
        for index, entry in enumerate(entries):
            path = self.location / str(entry.get("file"))
            if not path.exists():
                raise StoreCorrupted(f"map file {path.name} is missing", location=str(self.location))
            previous: bytes | None = None
            sorted_map = self.maps[index]
            for record in read_records(path, spec):
                key = self.key.extract(record)
                if previous is not None and key <= previous:
                    raise StoreCorrupted(f"map file {path.name} is out of key order", key=key.hex().upper())
                if key in self.residence:
                    raise StoreCorrupted(f"key {key.hex().upper()} appears in two maps")
                previous = key
                sorted_map.keys.append(key)
                sorted_map.records[key] = record
                self.residence[key] = index
        self.generation = int(manifest.get("generation", 0))
        self._dirty = False
        logger.info("opened store %s with %d records", self.location, len(self))


def _read_manifest(location: Path) -> dict[str, Any] | None:
    path = location / MANIFEST_NAME
    if not path.exists():
        return None
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise StoreCorrupted(f"unreadable manifest: {e}", location=str(location)) from e
    if not isinstance(data, dict):
        raise StoreCorrupted("manifest is not a mapping", location=str(location))
    return data


class FlushSummary(NamedTuple):
    inserts: int
    updates: int
    deletes: int

    @property
    def upserts(self) -> int:
        return self.inserts + self.updates


class CacheSession(KeyedDataset):
    """
    In-memory write-back copy of a store.

    Holds the store's exclusive lock from cache_open until cache_flush.
    Mutations are tracked as inserted, updated and deleted key sets.
    """

    def __init__(self, store: KsdsStore):
        super().__init__(
            store.schema, store.key, [SINGLE_MAP_NAME], store.encoding, store.codepage
        )
        self.store = store
        self.inserted: set[bytes] = set()
        self.updated: set[bytes] = set()
        self.deleted: set[bytes] = set()
        store.lock.acquire("cache session")
        try:
            for key, record in store.dump():
                self._insert(key, record, 0)
        except BaseException:
            store.lock.release()
            raise
        self.base_generation = store.generation
        self.base_disk_generation = store.disk_generation()

    def _route(self, record: bytes) -> int:
        self.store.layout_of(record)
        return 0

    def _written(self, key: bytes) -> None:
        if key in self.deleted:
            self.deleted.discard(key)
            self.updated.add(key)
        else:
            self.inserted.add(key)

    def _rewritten(self, key: bytes) -> None:
        if key not in self.inserted:
            self.updated.add(key)

    def _deleted(self, key: bytes) -> None:
        if key in self.inserted:
            self.inserted.discard(key)
        else:
            self.updated.discard(key)
            self.deleted.add(key)

    def flush(self) -> FlushSummary:
        """
        Apply deletes then upserts to the store and release the lock.

        A FlushConflict also releases the lock and ends the session; its changes are lost.
        """
        self._check_open()
        if self.store.generation != self.base_generation or (
            self.store.disk_generation() != self.base_disk_generation
        ):
            self.store.lock.release()
            self.closed = True
            raise FlushConflict(
                "store changed while the cache session was open",
                loaded_generation=self.base_generation,
                current_generation=self.store.generation,
            )
        for key in sorted(self.deleted):
            self.store.delete(key)
        for key in sorted(self.inserted | self.updated):
            record = self.maps[0].get(key)
            assert record is not None
            if key in self.store.residence:
                self.store.rewrite(record)
            else:
                self.store.write(record)
        summary = FlushSummary(len(self.inserted), len(self.updated), len(self.deleted))
        if self.store.location is not None:
            self.store.sync()
        self.store.lock.release()
        self.closed = True
        logger.info(
            "flushed cache: %d inserts, %d updates, %d deletes",
            summary.inserts,
            summary.updates,
            summary.deletes,
        )
        return summary

    def discard(self) -> None:
        """Drop all cached changes and release the lock."""
        if not self.closed:
            self.store.lock.release()
            self.closed = True

    def close(self) -> None:
        if not self.closed:
            self.flush()

    def __enter__(self) -> "CacheSession":
        return self

    def __exit__(self, exc_type: object, *exc_info: object) -> None:
        if exc_type is None:
            self.close()
        else:
            self.discard()


def open_store(
    location: str | Path | None,
    schema: CopybookSchema,
    key: KeySpec | None = None,
    backend: str | None = None,
    inner: str | None = None,
    encoding: Encoding | str = Encoding.EBCDIC,
    codepage: str = DEFAULT_CODEPAGE,
) -> KeyedDataset:
    """
    Open (or create) a store.

    location None keeps the store in memory. For an existing directory the
    key and backend default to the ones recorded in its manifest; they must
    match when given. backend "cached" returns a CacheSession over an
    `inner` store, by default the recorded backend or single.
    """
    if backend == "cached":
        return cache_open(open_keyed_store(location, schema, key, inner, encoding, codepage))
    return open_keyed_store(location, schema, key, backend, encoding, codepage)


def open_keyed_store(
    location: str | Path | None,
    schema: CopybookSchema,
    key: KeySpec | None = None,
    backend: str | None = None,
    encoding: Encoding | str = Encoding.EBCDIC,
    codepage: str = DEFAULT_CODEPAGE,
) -> KsdsStore:
    """open_store for the uncached backends."""
    path = Path(location) if location is not None else None
    manifest = _read_manifest(path) if path is not None and path.exists() else None
    if manifest is not None:
        if key is None:
            recorded = manifest.get("key") or {}
            key = KeySpec(int(recorded.get("offset", 0)), int(recorded.get("length", 0)))
        backend = backend or str(manifest.get("backend"))
    if key is None:
        raise ConfigError("a new store needs a key (--key offset,length)")
    backend = backend or "single"
    if backend not in ("single", "perlayout"):
        raise ConfigError(f"backend must be one of {', '.join(BACKENDS)}, got {backend}")
    store = KsdsStore(path, schema, key, backend, encoding, codepage)
    if manifest is not None:
        store._load(manifest)
    return store


def cache_open(store: KsdsStore) -> CacheSession:
    """Load a store into a write-back cache session under an exclusive lock."""
    return CacheSession(store)


def cache_flush(session: CacheSession) -> FlushSummary:
    return session.flush()


def start(dataset: KeyedDataset, key_prefix: bytes, mode: str = ">=") -> KsdsCursor:
    return dataset.start(key_prefix, mode)


def read_next(cursor: KsdsCursor) -> bytes:
    return cursor.read_next()


def read_prev(cursor: KsdsCursor) -> bytes:
    return cursor.read_prev()


def read(dataset: KeyedDataset, key: bytes) -> bytes:
    return dataset.read(key)


def write(dataset: KeyedDataset, record: bytes) -> None:
    dataset.write(record)


def rewrite(dataset: KeyedDataset, record: bytes) -> None:
    dataset.rewrite(record)


def delete(dataset: KeyedDataset, key: bytes) -> None:
    dataset.delete(key)


# Benchmark: sequential scan cost as the number of per-layout maps grows

BENCH_KEY = KeySpec(0, 8)
BENCH_BODY_LENGTH = 20


def synthetic_schema(layouts: int) -> CopybookSchema:
    """Schema with `layouts` group REDEFINES variants selected by BENCH-TYPE."""
    if not 1 <= layouts <= 999:
        raise ConfigError("synthetic schemas support 1 to 999 layouts")
    lines = [
        "01 BENCH-REC.",
        "   05 BENCH-KEY PIC 9(8).",
        "   05 BENCH-TYPE PIC 9(3).",
    ]
    for number in range(1, layouts + 1):
        redefines = " REDEFINES BODY-001" if number > 1 else ""
        lines.append(f"   05 BODY-{number:03d}{redefines}.")
        lines.append(f"      10 B{number:03d}-DATA PIC X({BENCH_BODY_LENGTH}).")
    schema = parse_copybook("\n".join(lines) + "\n", name=f"BENCH-{layouts}")
    if layouts == 1:
        return schema
    rule = DiscriminatorRule.build(
        "BENCH-TYPE", [(str(n), f"BODY-{n:03d}") for n in range(1, layouts + 1)]
    )
    return schema.with_discriminator(rule)


def synthetic_records(layouts: int, count: int) -> Iterator[bytes]:
    """EBCDIC records spread evenly over the layouts, keys interleaved."""
    body = b"\x40" * BENCH_BODY_LENGTH
    for number in range(count):
        kind = number % layouts + 1
        yield f"{number:08d}{kind:03d}".encode("cp037") + body


class BenchRow(NamedTuple):
    n: int
    records: int
    wall_ms: float
    advances: int
    comparisons: int


StoreFactory = Callable[[CopybookSchema, KeySpec], KeyedDataset]


def perlayout_memory_store(schema: CopybookSchema, key: KeySpec) -> KeyedDataset:
    return open_store(None, schema, key, "perlayout")


def bench_scan(
    store_factory: StoreFactory = perlayout_memory_store,
    layout_counts: list[int] | None = None,
    record_count: int = 10_000,
    runs: int = 5,
) -> list[BenchRow]:
    """
    Time a full sequential scan for each layout count.

    Counters cover exactly record_count reads; the closing EndOfFile read
    happens after the snapshot.
    """
    rows = []
    for layouts in layout_counts or [1, 10, 97]:
        if not 1 <= layouts <= 97:
            raise ConfigError("layout counts must lie between 1 and 97")
        store = store_factory(synthetic_schema(layouts), BENCH_KEY)
        for record in synthetic_records(layouts, record_count):
            store.write(record)
        timings = []
        delta = OpStats()
        for _ in range(runs):
            before = store.stats.snapshot()
            began = time.perf_counter()
            cursor = store.start(b"", ">=")
            for _ in range(record_count):
                cursor.read_next()
            timings.append((time.perf_counter() - began) * 1000)
            delta = store.stats.since(before)
            try:
                cursor.read_next()
            except EndOfFile:
                pass
            else:
                raise StoreCorrupted("scan returned more records than were written")
        rows.append(
            BenchRow(
                n=layouts,
                records=record_count,
                wall_ms=round(statistics.median(timings), 3),
                advances=delta.sub_cursor_advances,
                comparisons=delta.comparisons,
            )
        )
        logger.info("bench N=%d: %s", layouts, rows[-1])
    return rows


def write_bench_table(rows: list[BenchRow], stream: IO[str], delimiter: str = ",") -> None:
    writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    writer.writerow(BenchRow._fields)
    for row in rows:
        writer.writerow(row)


def _open_from_args(args: argparse.Namespace, cached: bool = True) -> KeyedDataset:
    from mf_config import schema_from_args, settings_from_args

    schema = schema_from_args(args)
    assert schema is not None
    settings = settings_from_args(args)
    key = KeySpec(*settings.key) if settings.key else None
    backend = args.backend
    if backend == "cached" and not cached:
        backend = args.inner
    return open_store(
        args.store, schema, key, backend, args.inner, settings.encoding, settings.codepage
    )


def _finish(dataset: KeyedDataset) -> None:
    if isinstance(dataset, (KsdsStore, CacheSession)):
        dataset.close()


def _cmd_load(args: argparse.Namespace) -> int:
    from mf_config import settings_from_args
    from mf_migrate import load

    store = _open_from_args(args, cached=False)
    assert isinstance(store, KsdsStore)
    file_spec = RecordFileSpec.from_settings(settings_from_args(args), store.schema)
    with store:
        summary = load(args.file, file_spec, store, replace=args.replace)
    print(f"✅ Loaded {summary.records} records", file=sys.stderr)
    for name, count in summary.per_layout.items():
        print(f"   {name}: {count}", file=sys.stderr)
    return 0


def _cmd_scan(args: argparse.Namespace) -> int:
    dataset = _open_from_args(args)
    count = 0
    for record in dataset.scan():
        count += 1
        key = dataset.key.extract(record)
        try:
            layout = resolve_layout(dataset.schema, record, dataset.encoding, dataset.codepage).name
        except MainframeDataError as e:
            layout = f"!{type(e).__name__}"
        print(f"key={key.hex().upper()} layout={layout} length={len(record)}")
    _finish(dataset)
    print(f"{count} records", file=sys.stderr)
    for name, size in dataset.map_counts().items():
        logger.info("map %s: %d", name, size)
    return 0


def _cmd_get(args: argparse.Namespace) -> int:
    from mf_codec import decode_record

    dataset = _open_from_args(args)
    if args.key_hex:
        key = bytes.fromhex(args.key_hex)
    else:
        key = args.key_value.encode("latin-1" if dataset.encoding is Encoding.ASCII else dataset.codepage)
    try:
        record = dataset.read(key)
    finally:
        _finish(dataset)
    decoded = decode_record(record, dataset.schema, dataset.encoding, dataset.codepage)
    print(f"layout={decoded.layout}")
    for name, value in decoded.values.items():
        print(f"  {name}={format_value(value)}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    try:
        counts = [int(part) for part in args.layouts.split(",")]
    except ValueError as e:
        raise ConfigError(f"--layouts must be comma-separated integers: {args.layouts}") from e
    rows = bench_scan(perlayout_memory_store, counts, args.records, args.runs)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            write_bench_table(rows, f)
        print(f"✅ Wrote {len(rows)} rows to {args.output}", file=sys.stderr)
    else:
        write_bench_table(rows, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    from mf_config import add_dataset_arguments
    from mf_console import add_logging_arguments

    parser = argparse.ArgumentParser(
        prog="mfkit ksds",
        description="Keyed dataset emulation over single-table, per-layout and cached backends",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Load a variable-length file into a per-layout store
  mfkit ksds load --schema acct.cpy --config acct.yaml --backend perlayout \\
      --store ./acct-store acct.dat

  # Scan in key order and fetch one record
  mfkit ksds scan --schema acct.cpy --store ./acct-store
  mfkit ksds get --schema acct.cpy --store ./acct-store --key-value 0000012345

  # Sequential scan cost for 1, 10 and 97 layouts
  mfkit ksds bench --layouts 1,10,97 --records 10000
        """,
    )
    add_logging_arguments(parser)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    def store_arguments(sub: argparse.ArgumentParser) -> None:
        add_dataset_arguments(sub)
        sub.add_argument("--store", required=True, help="store directory")
        sub.add_argument("--backend", choices=BACKENDS, help="storage backend (default single)")
        sub.add_argument(
            "--inner", choices=("single", "perlayout"), help="backend under a cache"
        )

    load = commands.add_parser("load", help="load a record file into a store")
    store_arguments(load)
    load.add_argument("--replace", action="store_true", help="replace existing store contents")
    load.add_argument("file", help="record file")
    load.set_defaults(handler=_cmd_load)

    scan = commands.add_parser("scan", help="list records in key order")
    store_arguments(scan)
    scan.set_defaults(handler=_cmd_scan)

    get = commands.add_parser("get", help="read one record by key")
    store_arguments(get)
    group = get.add_mutually_exclusive_group(required=True)
    group.add_argument("--key-value", help="key as text in the dataset encoding")
    group.add_argument("--key-hex", help="key as hex bytes")
    get.set_defaults(handler=_cmd_get)

    bench = commands.add_parser("bench", help="benchmark sequential scans across layout counts")
    bench.add_argument("--layouts", default="1,10,97", help="comma-separated layout counts")
    bench.add_argument("--records", type=int, default=10_000, help="records per store")
    bench.add_argument("--runs", type=int, default=5, help="timed runs per layout count")
    bench.add_argument("--output", help="write the table to a file instead of stdout")
    bench.set_defaults(handler=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point for `mfkit ksds`."""
    from mf_console import run_cli

    return run_cli(build_parser(), argv)


if __name__ == "__main__":
    sys.exit(main())
