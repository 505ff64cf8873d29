"""
Unit tests for mf_ksds.py.

Every backend is checked against a plain sorted-array reference over random
operation sequences; the rest covers cursor invalidation, per-layout
routing, persistence, the exclusive lock, write-back flushing and the scan
benchmark.
"""

import bisect
import io
import math
import random
from unittest.mock import patch

import pytest
import yaml

from mf_copybook import parse_copybook
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
from mf_ksds import (
    BENCH_KEY,
    LOCK_NAME,
    MANIFEST_NAME,
    CacheSession,
    KsdsStore,
    bench_scan,
    cache_flush,
    cache_open,
    main,
    open_keyed_store,
    open_store,
    read,
    read_next,
    read_prev,
    start,
    synthetic_records,
    synthetic_schema,
    write,
    write_bench_table,
)


def key_of(number):
    return f"{number:08d}".encode("cp037")


def make_record(number, kind, body="DATA"):
    return f"{number:08d}{kind:03d}{body:<20}".encode("cp037")


class ReferenceStore:
    """Keyed dataset semantics over one sorted key list."""

    def __init__(self):
        self.keys = []
        self.records = {}
        self.generation = 0

    def start(self, prefix, mode):
        if mode == ">":
            gap = bisect.bisect_right(self.keys, prefix + b"\xff" * (8 - len(prefix)))
        else:
            gap = bisect.bisect_left(self.keys, prefix)
        if mode == "=" and not (gap < len(self.keys) and self.keys[gap] == prefix):
            raise NotFound("reference")
        return {"gap": gap, "generation": self.generation}

    def step(self, cursor, direction):
        if cursor["generation"] != self.generation:
            raise CursorInvalidated("reference")
        if direction == "next":
            if cursor["gap"] >= len(self.keys):
                raise EndOfFile("reference")
            cursor["gap"] += 1
            return self.records[self.keys[cursor["gap"] - 1]]
        if cursor["gap"] <= 0:
            raise EndOfFile("reference")
        cursor["gap"] -= 1
        return self.records[self.keys[cursor["gap"]]]

    def read(self, key):
        if key not in self.records:
            raise NotFound("reference")
        return self.records[key]

    def write(self, record):
        key = record[:8]
        if key in self.records:
            raise DuplicateKey("reference")
        bisect.insort(self.keys, key)
        self.records[key] = record
        self.generation += 1

    def rewrite(self, record):
        key = record[:8]
        if key not in self.records:
            raise NotFound("reference")
        self.records[key] = record
        self.generation += 1

    def delete(self, key):
        if key not in self.records:
            raise NotFound("reference")
        self.keys.remove(key)
        del self.records[key]
        self.generation += 1

    def dump(self):
        return [(key, self.records[key]) for key in self.keys]


def outcome(action):
    try:
        return "ok", action()
    except MainframeDataError as e:
        return "error", type(e).__name__


def run_oracle(dataset, layouts, seed, operations=600):
    """Apply the same random operations to a dataset and the reference."""
    rng = random.Random(seed)
    reference = ReferenceStore()
    cursors = None
    for step in range(operations):
        number = rng.randrange(200)
        record = make_record(number, rng.randint(1, layouts), f"S{step}")
        choice = rng.random()
        if choice < 0.30:
            results = outcome(lambda r=record: dataset.write(r)), outcome(
                lambda r=record: reference.write(r)
            )
        elif choice < 0.40:
            results = outcome(lambda r=record: dataset.rewrite(r)), outcome(
                lambda r=record: reference.rewrite(r)
            )
        elif choice < 0.50:
            key = key_of(number)
            results = outcome(lambda k=key: dataset.delete(k)), outcome(
                lambda k=key: reference.delete(k)
            )
        elif choice < 0.60:
            key = key_of(number)
            results = outcome(lambda k=key: dataset.read(k)), outcome(lambda k=key: reference.read(k))
        elif choice < 0.70:
            prefix = key_of(number)[: rng.randint(0, 8)]
            mode = rng.choice(["=", ">=", ">"])
            mine = outcome(lambda p=prefix, m=mode: dataset.start(p, m))
            theirs = outcome(lambda p=prefix, m=mode: reference.start(p, m))
            assert mine[0] == theirs[0], (step, prefix, mode)
            if mine[0] == "ok":
                cursors = (mine[1], theirs[1])
            continue
        else:
            if cursors is None:
                continue
            direction = "next" if rng.random() < 0.6 else "prev"
            mine_cursor, their_cursor = cursors
            action = mine_cursor.read_next if direction == "next" else mine_cursor.read_prev
            results = outcome(action), outcome(
                lambda c=their_cursor, d=direction: reference.step(c, d)
            )
        assert results[0] == results[1], (step, results)
    assert dataset.dump() == reference.dump()
    return reference


class TestOracle:
    """Test suite comparing every backend with the sorted-array reference."""

    @pytest.mark.parametrize("layouts", [2, 5, 97])
    def test_perlayout(self, layouts):
        """Test per-layout stores behave like the reference."""
        store = open_store(None, synthetic_schema(layouts), BENCH_KEY, "perlayout")
        run_oracle(store, layouts, seed=layouts)
        assert sum(store.map_counts().values()) == len(store)

    def test_single(self):
        """Test single-map stores behave like the reference."""
        store = open_store(None, synthetic_schema(5), BENCH_KEY, "single")
        run_oracle(store, 5, seed=11)

    @pytest.mark.parametrize("inner", ["single", "perlayout"])
    def test_cached(self, inner):
        """Test cache sessions behave like the reference and flush the same state."""
        session = open_store(None, synthetic_schema(5), BENCH_KEY, "cached", inner=inner)
        assert isinstance(session, CacheSession)
        reference = run_oracle(session, 5, seed=23)
        store = session.store
        session.flush()
        assert store.dump() == reference.dump()

    def test_backends_agree(self):
        """Test single and per-layout stores produce identical observations."""
        single = open_store(None, synthetic_schema(5), BENCH_KEY, "single")
        perlayout = open_store(None, synthetic_schema(5), BENCH_KEY, "perlayout")
        run_oracle(single, 5, seed=99)
        run_oracle(perlayout, 5, seed=99)
        assert single.dump() == perlayout.dump()

    @pytest.mark.slow
    @pytest.mark.parametrize(
        ("backend", "inner", "layouts"),
        [
            ("single", None, 5),
            ("perlayout", None, 2),
            ("perlayout", None, 5),
            ("perlayout", None, 97),
            ("cached", "perlayout", 5),
        ],
    )
    def test_hundred_sequences(self, backend, inner, layouts):
        """Test 100 seeded sequences of up to 1000 operations per backend."""
        schema = synthetic_schema(layouts)
        lengths = random.Random(f"{backend}-{layouts}")
        for seed in range(100):
            dataset = open_store(None, schema, BENCH_KEY, backend, inner=inner)
            reference = run_oracle(dataset, layouts, seed=seed, operations=lengths.randint(1, 1000))
            if isinstance(dataset, CacheSession):
                store = dataset.store
                dataset.flush()
                assert store.dump() == reference.dump()

    def test_scan_strictly_increasing(self):
        """Test full scans yield strictly increasing keys after random history."""
        store = open_store(None, synthetic_schema(5), BENCH_KEY, "perlayout")
        run_oracle(store, 5, seed=5, operations=300)
        keys = [record[:8] for record in store.scan()]
        assert keys == sorted(set(keys))
        assert len(keys) == len(store)


class TestCursor:
    """Test suite for START and sequential reads."""

    @staticmethod
    def store(backend="perlayout"):
        store = open_store(None, synthetic_schema(3), BENCH_KEY, backend)
        for number, kind in [(2, 1), (5, 2), (9, 3)]:
            store.write(make_record(number, kind))
        return store

    def test_start_ge(self):
        """Test START >= positions at the matching key."""
        cursor = start(self.store(), key_of(5), ">=")
        assert read_next(cursor)[:8] == key_of(5)

    def test_start_gt(self):
        """Test START > skips the matching key."""
        cursor = start(self.store(), key_of(5), ">")
        assert read_next(cursor)[:8] == key_of(9)

    def test_start_equal_missing(self):
        """Test START = on an absent key raises NotFound."""
        with pytest.raises(NotFound) as info:
            start(self.store(), key_of(7), "=")
        assert info.value.file_status == "23"

    def test_start_equal_partial_key(self):
        """Test START = with a partial key raises NotFound even when keys share the prefix."""
        with pytest.raises(NotFound) as info:
            start(self.store(), "0000000".encode("cp037"), "=")
        assert info.value.file_status == "23"

    def test_start_equal_exact(self):
        """Test START = on a present key positions before that record."""
        cursor = start(self.store(), key_of(5), "=")
        assert read_next(cursor)[:8] == key_of(5)

    def test_start_gt_prefix(self):
        """Test START > with a partial key skips every key sharing the prefix."""
        store = self.store()
        store.write(make_record(15, 1))
        cursor = start(store, "0000000".encode("cp037"), ">")
        assert read_next(cursor)[:8] == key_of(15)

    def test_prefix_too_long(self):
        """Test prefixes longer than the key are rejected."""
        with pytest.raises(ValueError, match="exceeds key length"):
            start(self.store(), b"\xf0" * 9)

    def test_bad_mode(self):
        """Test unknown START modes are rejected."""
        with pytest.raises(ValueError, match="start mode"):
            start(self.store(), b"", "<")

    def test_backward_and_forward(self):
        """Test READ PREV after READ NEXT returns the same record."""
        cursor = start(self.store(), key_of(5), ">=")
        assert read_next(cursor)[:8] == key_of(5)
        assert read_prev(cursor)[:8] == key_of(5)
        assert read_prev(cursor)[:8] == key_of(2)
        with pytest.raises(EndOfFile):
            read_prev(cursor)

    def test_end_of_file(self):
        """Test READ NEXT past the last record raises EndOfFile."""
        cursor = start(self.store(), key_of(9), ">=")
        read_next(cursor)
        with pytest.raises(EndOfFile) as info:
            read_next(cursor)
        assert info.value.file_status == "10"

    @pytest.mark.parametrize("backend", ["single", "perlayout", "cached"])
    def test_invalidated_by_mutation(self, backend):
        """Test any mutation invalidates open cursors."""
        store = self.store("single" if backend == "cached" else backend)
        dataset = cache_open(store) if backend == "cached" else store
        cursor = start(dataset, b"", ">=")
        read_next(cursor)
        write(dataset, make_record(7, 1))
        with pytest.raises(CursorInvalidated):
            read_next(cursor)

    def test_invalidated_by_failed_mutation_is_not(self):
        """Test a rejected write leaves cursors valid."""
        store = self.store()
        cursor = start(store, b"", ">=")
        with pytest.raises(DuplicateKey):
            store.write(make_record(2, 1))
        assert read_next(cursor)[:8] == key_of(2)

    def test_merge_counts(self):
        """Test a per-layout scan of interleaved keys counts N + R - 1 advances."""
        store = self.store()
        before = store.stats.snapshot()
        cursor = start(store, b"", ">=")
        keys = [read_next(cursor)[:8] for _ in range(3)]
        delta = store.stats.since(before)
        assert keys == [key_of(2), key_of(5), key_of(9)]
        assert delta.sub_cursor_advances == 3 + 3 - 1
        assert delta.records_returned == 3

    def test_single_map_counts(self):
        """Test one map scans with one advance per record."""
        store = open_store(None, synthetic_schema(1), BENCH_KEY, "perlayout")
        for number in range(10):
            store.write(make_record(number, 1))
        cursor = start(store, b"")
        for _ in range(10):
            read_next(cursor)
        assert store.stats.sub_cursor_advances == 10
        assert store.stats.comparisons == 0


class TestMutations:
    """Test suite for random access operations."""

    def test_write_read(self):
        """Test a written record reads back unchanged."""
        store = open_store(None, synthetic_schema(2), BENCH_KEY, "perlayout")
        record = make_record(1, 2, "HELLO")
        write(store, record)
        assert read(store, key_of(1)) == record

    def test_duplicate_write(self):
        """Test writing an existing key raises DuplicateKey."""
        store = open_store(None, synthetic_schema(2), BENCH_KEY)
        store.write(make_record(1, 1))
        with pytest.raises(DuplicateKey) as info:
            store.write(make_record(1, 2))
        assert info.value.file_status == "22"

    def test_rewrite_moves_between_maps(self):
        """Test a rewrite that changes layout moves the record to the other map."""
        store = open_store(None, synthetic_schema(2), BENCH_KEY, "perlayout")
        store.write(make_record(1, 1))
        assert store.map_counts() == {"BODY-001": 1, "BODY-002": 0}
        store.rewrite(make_record(1, 2, "MOVED"))
        assert store.map_counts() == {"BODY-001": 0, "BODY-002": 1}
        assert key_of(1) not in store.maps[0]
        assert store.read(key_of(1)) == make_record(1, 2, "MOVED")

    def test_rewrite_missing(self):
        """Test rewriting an absent key raises NotFound."""
        store = open_store(None, synthetic_schema(2), BENCH_KEY)
        with pytest.raises(NotFound):
            store.rewrite(make_record(1, 1))

    def test_delete_then_write(self):
        """Test a deleted key can be written again."""
        store = open_store(None, synthetic_schema(2), BENCH_KEY)
        store.write(make_record(1, 1))
        store.delete(key_of(1))
        with pytest.raises(NotFound):
            store.read(key_of(1))
        store.write(make_record(1, 2))
        assert len(store) == 1

    def test_no_matching_layout(self):
        """Test records whose discriminator maps nowhere are refused."""
        store = open_store(None, synthetic_schema(2), BENCH_KEY, "perlayout")
        with pytest.raises(MainframeDataError, match="no layout"):
            store.write(make_record(1, 3))

    def test_wrong_length(self):
        """Test records longer than the schema are refused."""
        store = open_store(None, synthetic_schema(2), BENCH_KEY)
        with pytest.raises(RecordLengthViolation):
            store.write(make_record(1, 1) + b"\x40")

    def test_perlayout_needs_discriminator(self):
        """Test per-layout stores over several layouts need a discriminator."""
        schema = parse_copybook(
            "01 R.\n 05 K PIC X(4).\n 05 A.\n  10 A1 PIC X.\n 05 B REDEFINES A.\n  10 B1 PIC X.\n"
        )
        with pytest.raises(MissingDiscriminator):
            open_store(None, schema, BENCH_KEY._replace(length=4), "perlayout")

    def test_97_empty_maps(self):
        """Test a 97-layout per-layout store reports 97 empty maps."""
        store = open_store(None, synthetic_schema(97), BENCH_KEY, "perlayout")
        counts = store.map_counts()
        assert len(counts) == 97
        assert set(counts.values()) == {0}

    def test_new_store_needs_key(self):
        """Test creating a store without a key is a configuration error."""
        with pytest.raises(ConfigError, match="needs a key"):
            open_store(None, synthetic_schema(1))

    def test_unknown_backend(self):
        """Test unknown backends are rejected."""
        with pytest.raises(ConfigError):
            open_store(None, synthetic_schema(1), BENCH_KEY, "btree")


class TestPersistence:
    """Test suite for store directories."""

    def test_reopen(self, tmp_path):
        """Test records, key and backend survive close and reopen."""
        location = tmp_path / "store"
        with open_keyed_store(location, synthetic_schema(3), BENCH_KEY, "perlayout") as store:
            for record in synthetic_records(3, 30):
                store.write(record)
            store.delete(key_of(4))
        reopened = open_keyed_store(location, synthetic_schema(3))
        assert reopened.backend == "perlayout"
        assert reopened.key == BENCH_KEY
        assert len(reopened) == 29
        assert reopened.generation == 31
        assert [r[:8] for r in reopened.scan()] == sorted(key_of(n) for n in range(30) if n != 4)

    def test_manifest_contents(self, tmp_path):
        """Test the manifest records format, maps and counts."""
        location = tmp_path / "store"
        with open_keyed_store(location, synthetic_schema(2), BENCH_KEY, "perlayout") as store:
            store.write(make_record(1, 2))
        manifest = yaml.safe_load((location / MANIFEST_NAME).read_text())
        assert manifest["format_version"] == 1
        assert manifest["key"] == {"offset": 0, "length": 8}
        assert manifest["maps"] == [
            {"name": "BODY-001", "file": "map-000.dat", "records": 0},
            {"name": "BODY-002", "file": "map-001.dat", "records": 1},
        ]

    def test_schema_mismatch(self, tmp_path):
        """Test reopening under a different schema raises SchemaMismatch."""
        location = tmp_path / "store"
        open_keyed_store(location, synthetic_schema(2), BENCH_KEY).close()
        with pytest.raises(SchemaMismatch):
            open_keyed_store(location, synthetic_schema(3))

    def test_backend_mismatch(self, tmp_path):
        """Test reopening with another backend raises SchemaMismatch."""
        location = tmp_path / "store"
        open_keyed_store(location, synthetic_schema(2), BENCH_KEY, "single").close()
        with pytest.raises(SchemaMismatch, match="backend"):
            open_keyed_store(location, synthetic_schema(2), backend="perlayout")

    def test_key_mismatch(self, tmp_path):
        """Test reopening with another key raises SchemaMismatch."""
        location = tmp_path / "store"
        open_keyed_store(location, synthetic_schema(2), BENCH_KEY).close()
        with pytest.raises(SchemaMismatch, match="key"):
            open_keyed_store(location, synthetic_schema(2), BENCH_KEY._replace(length=4))

    def test_out_of_order_map(self, tmp_path):
        """Test a map file out of key order is reported as corrupted."""
        location = tmp_path / "store"
        with open_keyed_store(location, synthetic_schema(1), BENCH_KEY) as store:
            store.write(make_record(1, 1))
            store.write(make_record(2, 1))
        data = (location / "map-000.dat").read_bytes()
        half = len(data) // 2
        (location / "map-000.dat").write_bytes(data[half:] + data[:half])
        with pytest.raises(StoreCorrupted, match="out of key order"):
            open_keyed_store(location, synthetic_schema(1))

    def test_missing_map_file(self, tmp_path):
        """Test a missing map file is reported as corrupted."""
        location = tmp_path / "store"
        open_keyed_store(location, synthetic_schema(1), BENCH_KEY).close()
        (location / "map-000.dat").unlink()
        with pytest.raises(StoreCorrupted, match="missing"):
            open_keyed_store(location, synthetic_schema(1))

    def test_unreadable_manifest(self, tmp_path):
        """Test a manifest that is not YAML is reported as corrupted."""
        location = tmp_path / "store"
        location.mkdir()
        (location / MANIFEST_NAME).write_text("maps: [unclosed\n")
        with pytest.raises(StoreCorrupted):
            open_keyed_store(location, synthetic_schema(1), BENCH_KEY)

    def test_closed_store(self, tmp_path):
        """Test operations on a closed store raise SessionClosed."""
        store = open_keyed_store(tmp_path / "store", synthetic_schema(1), BENCH_KEY)
        store.close()
        with pytest.raises(SessionClosed):
            store.read(key_of(1))


class TestCacheSession:
    """Test suite for the write-back cache and its exclusive lock."""

    @staticmethod
    def populated(location=None, backend="perlayout"):
        store = open_keyed_store(location, synthetic_schema(3), BENCH_KEY, backend)
        for record in synthetic_records(3, 10):
            store.write(record)
        return store

    def test_flush_summary(self):
        """Test flush counts inserts, updates and deletes."""
        store = self.populated()
        session = cache_open(store)
        session.write(make_record(50, 1))
        session.rewrite(make_record(2, 3, "CHANGED"))
        session.delete(key_of(4))
        summary = cache_flush(session)
        assert (summary.inserts, summary.updates, summary.deletes) == (1, 1, 1)
        assert summary.upserts == 2
        assert store.read(key_of(2)) == make_record(2, 3, "CHANGED")
        assert key_of(4) not in store.residence

    def test_empty_flush(self):
        """Test flushing an untouched session changes nothing."""
        store = self.populated()
        generation = store.generation
        summary = cache_open(store).flush()
        assert (summary.upserts, summary.deletes) == (0, 0)
        assert store.generation == generation

    def test_delete_then_write_is_update(self):
        """Test deleting and rewriting a key in one session counts as an update."""
        store = self.populated()
        session = cache_open(store)
        session.delete(key_of(1))
        session.write(make_record(1, 1, "AGAIN"))
        session.write(make_record(60, 1))
        session.delete(key_of(60))
        summary = session.flush()
        assert (summary.inserts, summary.updates, summary.deletes) == (0, 1, 0)

    def test_second_open_refused(self):
        """Test a second cache session on the same store is refused."""
        store = self.populated()
        session = cache_open(store)
        with pytest.raises(ExclusiveLockHeld):
            cache_open(store)
        session.flush()
        cache_open(store).discard()

    def test_flush_conflict(self):
        """Test out-of-band writes to the store make flush fail."""
        store = self.populated()
        session = cache_open(store)
        session.write(make_record(70, 1))
        store.write(make_record(71, 1))
        with pytest.raises(FlushConflict):
            session.flush()
        session.discard()
        assert key_of(70) not in store.residence

    def test_flush_conflict_releases_lock(self):
        """Test a conflicting flush ends the session and frees the store."""
        store = self.populated()
        session = cache_open(store)
        store.write(make_record(71, 1))
        with pytest.raises(FlushConflict):
            session.flush()
        with pytest.raises(SessionClosed):
            session.read(key_of(1))
        cache_open(store).discard()

    def test_open_on_new_directory(self, tmp_path):
        """Test a cache session can be opened on a store directory that does not exist yet."""
        location = tmp_path / "fresh" / "store"
        session = cache_open(open_keyed_store(location, synthetic_schema(3), BENCH_KEY))
        assert (location / LOCK_NAME).exists()
        session.write(make_record(1, 1))
        session.flush()
        assert (location / MANIFEST_NAME).exists()
        assert not (location / LOCK_NAME).exists()
        assert open_keyed_store(location, synthetic_schema(3)).read(key_of(1)) == make_record(1, 1)

    def test_closed_after_flush(self):
        """Test a flushed session refuses further operations."""
        session = cache_open(self.populated())
        session.flush()
        with pytest.raises(SessionClosed):
            session.read(key_of(1))

    def test_context_manager_discards_on_error(self):
        """Test an exception inside the session discards its changes."""
        store = self.populated()
        with pytest.raises(RuntimeError), cache_open(store) as session:
            session.delete(key_of(1))
            raise RuntimeError("job failed")
        assert key_of(1) in store.residence
        cache_open(store).discard()

    def test_lock_file(self, tmp_path):
        """Test persistent sessions hold a lock file with owner metadata."""
        location = tmp_path / "store"
        self.populated(location).close()
        session = open_store(location, synthetic_schema(3), backend="cached")
        owner = yaml.safe_load((location / LOCK_NAME).read_text())
        assert owner["purpose"] == "cache session"
        assert {"pid", "host", "created"} <= set(owner)
        other = open_keyed_store(location, synthetic_schema(3))
        with pytest.raises(ExclusiveLockHeld) as info:
            cache_open(other)
        assert info.value.file_status == "93"
        session.write(make_record(80, 2))
        session.flush()
        assert not (location / LOCK_NAME).exists()
        assert open_keyed_store(location, synthetic_schema(3)).read(key_of(80)) == make_record(80, 2)

    def test_stale_lock_replaced(self, tmp_path):
        """Test a lock left by a dead process on this host is replaced."""
        import socket

        location = tmp_path / "store"
        self.populated(location).close()
        (location / LOCK_NAME).write_text(
            yaml.safe_dump({"pid": 4_000_000, "host": socket.gethostname(), "purpose": "load"})
        )
        store = open_keyed_store(location, synthetic_schema(3))
        with patch("mf_ksds.os.kill", side_effect=ProcessLookupError):
            session = cache_open(store)
        session.discard()
        assert not (location / LOCK_NAME).exists()

    def test_foreign_host_lock_kept(self, tmp_path):
        """Test a lock from another host is never treated as stale."""
        location = tmp_path / "store"
        self.populated(location).close()
        (location / LOCK_NAME).write_text(
            yaml.safe_dump({"pid": 1, "host": "elsewhere.example", "purpose": "load"})
        )
        with pytest.raises(ExclusiveLockHeld):
            cache_open(open_keyed_store(location, synthetic_schema(3)))

    def test_disk_conflict(self, tmp_path):
        """Test a manifest generation changed by another process makes flush fail."""
        location = tmp_path / "store"
        self.populated(location).close()
        store = open_keyed_store(location, synthetic_schema(3))
        session = cache_open(store)
        manifest_path = location / MANIFEST_NAME
        manifest = yaml.safe_load(manifest_path.read_text())
        manifest["generation"] += 1
        manifest_path.write_text(yaml.safe_dump(manifest, sort_keys=False))
        with pytest.raises(FlushConflict):
            session.flush()
        assert not (location / LOCK_NAME).exists()
        session.discard()

    def test_write_back_fidelity(self):
        """Test random mutations through a cache equal applying them directly."""
        rng = random.Random(7)
        cached_store = self.populated()
        direct = self.populated(backend="single")
        session = cache_open(cached_store)
        for step in range(100):
            number = rng.randrange(40)
            record = make_record(number, rng.randint(1, 3), f"M{step}")
            operation = rng.choice(["write", "rewrite", "delete"])
            if operation == "delete":
                mine = outcome(lambda n=number: session.delete(key_of(n)))
                theirs = outcome(lambda n=number: direct.delete(key_of(n)))
            else:
                mine = outcome(lambda o=operation, r=record: getattr(session, o)(r))
                theirs = outcome(lambda o=operation, r=record: getattr(direct, o)(r))
            assert mine == theirs
        session.flush()
        assert cached_store.dump() == direct.dump()

    @pytest.mark.slow
    def test_hundred_sessions(self):
        """Test 100 seeded sessions flush like direct application and lock out a second cache."""
        rng = random.Random(41)
        cached_store = self.populated()
        direct = self.populated(backend="single")
        for session_number in range(100):
            session = cache_open(cached_store)
            mutations = rng.randint(1, 500)
            lock_check = rng.randrange(mutations)
            for step in range(mutations):
                if step == lock_check:
                    with pytest.raises(ExclusiveLockHeld):
                        cache_open(cached_store)
                number = rng.randrange(200)
                record = make_record(number, rng.randint(1, 3), f"S{session_number}-{step}")
                operation = rng.choice(["write", "rewrite", "delete"])
                if operation == "delete":
                    mine = outcome(lambda n=number: session.delete(key_of(n)))
                    theirs = outcome(lambda n=number: direct.delete(key_of(n)))
                else:
                    mine = outcome(lambda o=operation, r=record: getattr(session, o)(r))
                    theirs = outcome(lambda o=operation, r=record: getattr(direct, o)(r))
                assert mine == theirs
            session.flush()
            assert cached_store.dump() == direct.dump()


class TestBench:
    """Test suite for the sequential scan benchmark."""

    def test_small_run(self):
        """Test rows report exact advance counts."""
        rows = bench_scan(layout_counts=[1, 3], record_count=60, runs=2)
        assert [row.n for row in rows] == [1, 3]
        assert rows[0].advances == 60
        assert rows[0].comparisons == 0
        assert rows[1].advances == 60 + 3 - 1
        assert rows[1].comparisons > 0

    def test_layout_count_bounds(self):
        """Test layout counts outside 1-97 are rejected."""
        with pytest.raises(ConfigError):
            bench_scan(layout_counts=[98], record_count=10, runs=1)

    def test_table(self):
        """Test the table is delimiter-separated with a header row."""
        rows = bench_scan(layout_counts=[2], record_count=20, runs=1)
        stream = io.StringIO()
        write_bench_table(rows, stream, delimiter="\t")
        lines = stream.getvalue().splitlines()
        assert lines[0] == "n\trecords\twall_ms\tadvances\tcomparisons"
        assert lines[1].startswith("2\t20\t")

    def test_synthetic_records_spread(self):
        """Test synthetic records spread evenly over the layouts."""
        store = open_store(None, synthetic_schema(4), BENCH_KEY, "perlayout")
        for record in synthetic_records(4, 40):
            store.write(record)
        assert set(store.map_counts().values()) == {10}

    @pytest.mark.slow
    def test_cost_grows_with_layouts(self):
        """Test 97 layouts cost more than one, with tournament comparison counts."""
        records = 10_000
        rows = {row.n: row for row in bench_scan(layout_counts=[1, 10, 97], record_count=records)}
        for n, row in rows.items():
            assert row.advances == records + n - 1
        assert rows[10].comparisons >= records * math.log2(10)
        assert rows[10].comparisons <= records * 4 + 10
        assert rows[97].comparisons >= records * math.log2(97)
        assert rows[97].comparisons <= records * 7 + 97
        assert rows[97].wall_ms > rows[1].wall_ms


class TestMain:
    """Test suite for the ksds command line."""

    @staticmethod
    def fixture(tmp_path):
        schema_text = "\n".join(
            [
                "01 BENCH-REC.",
                "   05 BENCH-KEY PIC 9(8).",
                "   05 BENCH-TYPE PIC 9(3).",
                "   05 BODY-001.",
                "      10 B001-DATA PIC X(20).",
            ]
        )
        (tmp_path / "bench.cpy").write_text(schema_text + "\n")
        from mf_recio import RecordFileSpec, RecordFormat, write_records

        spec = RecordFileSpec(RecordFormat.FIXED, 31)
        write_records(tmp_path / "in.dat", spec, [make_record(n, 1) for n in (3, 1, 2)])
        return ["--schema", str(tmp_path / "bench.cpy"), "--store", str(tmp_path / "store")]

    def test_load_scan_get(self, tmp_path, capsys):
        """Test load, scan and get against one store directory."""
        common = self.fixture(tmp_path)
        assert main(["load", *common, "--key", "0,8", str(tmp_path / "in.dat")]) == 0
        assert main(["scan", *common]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == f"key={key_of(1).hex().upper()} layout=BENCH-REC length=31"
        assert len(out) == 3
        assert main(["get", *common, "--key-value", "00000002"]) == 0
        assert "BENCH-KEY=2" in capsys.readouterr().out

    def test_load_into_new_directory(self, tmp_path, capsys):
        """Test load creates a store directory that does not exist yet."""
        common = self.fixture(tmp_path)
        location = tmp_path / "new" / "store"
        common[-1] = str(location)
        assert main(["load", *common, "--key", "0,8", str(tmp_path / "in.dat")]) == 0
        assert (location / MANIFEST_NAME).exists()
        assert not (location / LOCK_NAME).exists()
        assert main(["scan", *common]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 3

    def test_get_missing(self, tmp_path):
        """Test reading an absent key exits 1."""
        common = self.fixture(tmp_path)
        main(["load", *common, "--key", "0,8", str(tmp_path / "in.dat")])
        assert main(["get", *common, "--key-hex", key_of(9).hex()]) == 1

    def test_scan_cached(self, tmp_path, capsys):
        """Test scanning through a cache session releases its lock."""
        common = self.fixture(tmp_path)
        main(["load", *common, "--key", "0,8", str(tmp_path / "in.dat")])
        assert main(["scan", *common, "--backend", "cached"]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 3
        assert not (tmp_path / "store" / LOCK_NAME).exists()

    def test_bench_command(self, tmp_path):
        """Test `bench` writes a table file."""
        output = tmp_path / "bench.csv"
        code = main(
            ["bench", "--layouts", "1,2", "--records", "20", "--runs", "1", "--output", str(output)]
        )
        assert code == 0
        assert output.read_text().splitlines()[0] == "n,records,wall_ms,advances,comparisons"

    def test_bench_bad_layouts(self):
        """Test malformed --layouts is a usage error."""
        assert main(["bench", "--layouts", "one"]) == 2

    def test_store_is_ksds_store(self, tmp_path):
        """Test load creates a single-backend store by default."""
        common = self.fixture(tmp_path)
        main(["load", *common, "--key", "0,8", str(tmp_path / "in.dat")])
        store = open_keyed_store(tmp_path / "store", parse_copybook((tmp_path / "bench.cpy").read_text()))
        assert isinstance(store, KsdsStore)
        assert store.backend == "single"
