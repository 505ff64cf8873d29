#!/usr/bin/env python3
"""
Bulk migration between record files and keyed stores.

- load: file -> store, all-or-nothing (the whole file is checked first)
- unload: store -> file in ascending key order
- validate: raw-byte comparison of a file against a store
- prune: delete records matching a predicate, either in place or by
  unloading, filtering and reloading the retained records

Every operation holds the store's exclusive lock, so it fails fast while a
cache session is open.
"""

import argparse
import logging
import re
import sys
import tempfile
from collections import Counter
from decimal import Decimal, InvalidOperation
from enum import StrEnum
from pathlib import Path
from typing import Any, NamedTuple

from mf_codec import FieldValue, decode_field, resolve_layout
from mf_copybook import Category, CopybookSchema
from mf_errors import (
    ConfigError,
    DuplicateKey,
    FieldCodecError,
    MainframeDataError,
    PredicateError,
)
from mf_ksds import SINGLE_MAP_NAME, KsdsStore
from mf_recio import RecordFileSpec, RecordFormat, read_records, write_records

logger = logging.getLogger(__name__)


class LoadSummary(NamedTuple):
    records: int
    per_layout: dict[str, int]


def load(
    file: str | Path, file_spec: RecordFileSpec, store: KsdsStore, replace: bool = False
) -> LoadSummary:
    """
    Load every record of a file into a store.

    The file is read and checked in full before the store is touched: a
    repeated key raises DuplicateKey naming both record ordinals, and layout
    or length problems surface before any write.
    """
    records = list(read_records(file, file_spec))
    first_seen: dict[bytes, int] = {}
    layouts: Counter[str] = Counter()
    for ordinal, record in enumerate(records, start=1):
        key = store.key.extract(record)
        if key in first_seen:
            raise DuplicateKey(
                f"key {key.hex().upper()} appears in records {first_seen[key]} and {ordinal}",
                source=str(file),
                first_ordinal=first_seen[key],
                second_ordinal=ordinal,
            )
        first_seen[key] = ordinal
        try:
            layouts[store.layout_of(record) or SINGLE_MAP_NAME] += 1
        except MainframeDataError as e:
            e.context.setdefault("source", str(file))
            e.context.setdefault("ordinal", ordinal)
            raise

    with store.exclusive("load"):
        if len(store) and not replace:
            raise ConfigError(
                f"store already holds {len(store)} records; pass --replace to overwrite"
            )
        for key, _ in store.dump():
            store.delete(key)
        for record in records:
            store.write(record)
    logger.info("loaded %d records from %s", len(records), file)
    return LoadSummary(len(records), dict(sorted(layouts.items())))


def unload(store: KsdsStore, file_spec: RecordFileSpec, path: str | Path) -> int:
    """Write all records to a file in ascending key order."""
    with store.exclusive("unload"):
        return write_records(path, file_spec, (record for _, record in store.dump()))


class Discrepancy(StrEnum):
    MISSING = "missing"
    EXTRA = "extra"
    DIFFERENT = "different"


class ValidationEntry(NamedTuple):
    kind: Discrepancy
    key: bytes
    ordinal: int | None
    file_record: bytes | None
    store_record: bytes | None

    def describe(self) -> str:
        where = f" (record {self.ordinal})" if self.ordinal else ""
        line = f"{self.kind.value.upper()} key={self.key.hex().upper()}{where}"
        if self.kind is Discrepancy.DIFFERENT:
            assert self.file_record is not None and self.store_record is not None
            first = next(
                (
                    i
                    for i, (a, b) in enumerate(zip(self.file_record, self.store_record))
                    if a != b
                ),
                min(len(self.file_record), len(self.store_record)),
            )
            line += f" first difference at byte {first}"
        return line

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "key": self.key.hex().upper(),
            "ordinal": self.ordinal,
            "file_hex": self.file_record.hex().upper() if self.file_record is not None else None,
            "store_hex": self.store_record.hex().upper() if self.store_record is not None else None,
        }


class ValidationReport(NamedTuple):
    file_records: int
    store_records: int
    entries: tuple[ValidationEntry, ...]

    @property
    def passed(self) -> bool:
        return not self.entries

    def counts(self) -> dict[str, int]:
        counts = Counter(entry.kind.value for entry in self.entries)
        return {kind.value: counts.get(kind.value, 0) for kind in Discrepancy}


def validate(file: str | Path, file_spec: RecordFileSpec, store: KsdsStore) -> ValidationReport:
    """
    Compare a file's records with the store key by key, on raw bytes.

    MISSING: in the file but not the store (also any repeat of a key the
    file already used). EXTRA: in the store but not the file. DIFFERENT:
    same key, different bytes.
    """
    entries: list[ValidationEntry] = []
    with store.exclusive("validate"):
        stored = dict(store.dump())
        matched: set[bytes] = set()
        file_records = 0
        for ordinal, record in enumerate(read_records(file, file_spec), start=1):
            file_records += 1
            key = store.key.extract(record)
            current = stored.get(key)
            if current is None or key in matched:
                entries.append(ValidationEntry(Discrepancy.MISSING, key, ordinal, record, None))
                continue
            matched.add(key)
            if current != record:
                entries.append(ValidationEntry(Discrepancy.DIFFERENT, key, ordinal, record, current))
        for key in sorted(set(stored) - matched):
            entries.append(ValidationEntry(Discrepancy.EXTRA, key, None, None, stored[key]))
    return ValidationReport(file_records, len(stored), tuple(entries))


def format_validation(report: ValidationReport) -> str:
    lines = [entry.describe() for entry in report.entries]
    counts = ", ".join(f"{count} {kind}" for kind, count in report.counts().items())
    verdict = "MATCH" if report.passed else "MISMATCH"
    lines.append(
        f"{verdict}: {report.file_records} file records, {report.store_records} store records"
        f" ({counts})"
    )
    return "\n".join(lines)


# Predicates

OPERATORS = ("!=", "<=", ">=", "^=", "=", "<", ">")
_CONDITION = re.compile(
    r"^\s*(?P<field>[A-Za-z0-9][A-Za-z0-9-]*(?:\([0-9, ]+\))?)\s*"
    r"(?P<op>!=|<=|>=|\^=|=|<|>)\s*(?P<value>.*?)\s*$"
)
# Quoted literals and subscripts are single tokens
_PREDICATE_TOKEN = re.compile(
    r"""'[^']*'|"[^"]*"|\([^()]*\)|(?P<sep>\s+AND\s+|,)|[^'"(,\s]+|\s+|.""", re.IGNORECASE
)


class Condition(NamedTuple):
    field: str
    op: str
    value: FieldValue

    def holds(self, actual: FieldValue) -> bool:
        if isinstance(actual, Decimal):
            assert isinstance(self.value, Decimal)
            left: Any = actual
            right: Any = self.value
        else:
            assert isinstance(self.value, str)
            if self.op == "^=":
                return actual.startswith(self.value)
            width = max(len(actual), len(self.value))
            left, right = actual.ljust(width), self.value.ljust(width)
        match self.op:
            case "=":
                return bool(left == right)
            case "!=":
                return bool(left != right)
            case "<":
                return bool(left < right)
            case ">":
                return bool(left > right)
            case "<=":
                return bool(left <= right)
            case ">=":
                return bool(left >= right)
        raise PredicateError(f"unknown operator {self.op}")


class Predicate(NamedTuple):
    """Conjunction of field comparisons over decoded values."""

    text: str
    conditions: tuple[Condition, ...]

    def matches(self, record: bytes, store: KsdsStore) -> bool:
        """
        True when every condition holds. A condition on a field the record's
        layout lacks is false.
        """
        try:
            layout = resolve_layout(store.schema, record, store.encoding, store.codepage)
        except MainframeDataError as e:
            raise PredicateError(f"cannot select a layout to evaluate '{self.text}': {e}") from e
        for condition in self.conditions:
            if not layout.has_field(condition.field):
                return False
            spec = layout.field(condition.field)
            try:
                actual = decode_field(record, spec, store.encoding, store.codepage)
            except FieldCodecError as e:
                raise PredicateError(
                    f"cannot decode {condition.field} to evaluate '{self.text}': {e}",
                    key=store.key.extract(record).hex().upper(),
                ) from e
            if not condition.holds(actual):
                return False
        return True


def split_conditions(text: str) -> list[str]:
    """Split a predicate on AND and commas outside quotes and subscripts."""
    parts: list[str] = []
    current: list[str] = []
    for token in _PREDICATE_TOKEN.finditer(text):
        if token["sep"] is not None:
            parts.append("".join(current))
            current = []
        else:
            current.append(token.group(0))
    parts.append("".join(current))
    return parts


def _literal(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def parse_predicate(text: str, schema: CopybookSchema) -> Predicate:
    """
    Parse `FIELD op VALUE` conditions joined by AND or commas.

    Every field must be declared in at least one layout with a single
    category; numeric fields need numeric values and do not take ^=.
    """
    conditions = []
    for part in split_conditions(text):
        if not part.strip():
            raise PredicateError(f"empty condition in '{text}'")
        found = _CONDITION.match(part)
        if found is None:
            raise PredicateError(f"condition '{part.strip()}' is not FIELD op VALUE")
        name = found["field"].upper().replace(" ", "")
        op = found["op"]
        declarations = schema.declarations(name)
        if not declarations:
            raise PredicateError(f"field {name} is not declared in schema {schema.name}")
        numeric = {spec.category is not Category.ALPHANUMERIC for spec in declarations}
        if len(numeric) > 1:
            raise PredicateError(f"field {name} is numeric in some layouts and text in others")
        raw = _literal(found["value"])
        value: FieldValue
        if numeric.pop():
            if op == "^=":
                raise PredicateError(f"prefix match (^=) needs a text field, {name} is numeric")
            try:
                value = Decimal(raw)
            except InvalidOperation as e:
                raise PredicateError(f"{name} is numeric but '{raw}' is not a number") from e
        else:
            value = raw
        conditions.append(Condition(name, op, value))
    return Predicate(text, tuple(conditions))


class PruneStrategy(StrEnum):
    INPLACE = "inplace"
    RELOAD = "reload"


class PruneSummary(NamedTuple):
    examined: int
    deleted: int
    retained: int
    deletes: int
    inserts: int

    @property
    def operations(self) -> int:
        return self.deletes + self.inserts


def prune(
    store: KsdsStore, predicate: Predicate | str, strategy: PruneStrategy | str
) -> PruneSummary:
    """
    Delete the records matching predicate.

    The predicate is evaluated over every record before anything changes,
    so a decode failure leaves the store untouched. inplace deletes only the
    matches; reload unloads to a temporary file, deletes everything and
    inserts the retained records back in key order.
    """
    strategy = PruneStrategy(strategy)
    if isinstance(predicate, str):
        predicate = parse_predicate(predicate, store.schema)

    with store.exclusive(f"prune {strategy.value}"):
        everything = store.dump()
        doomed = {key for key, record in everything if predicate.matches(record, store)}
        examined, deleted = len(everything), len(doomed)
        retained = examined - deleted
        deletes = inserts = 0

        if strategy is PruneStrategy.INPLACE:
            for key in sorted(doomed):
                store.delete(key)
                deletes += 1
        else:
            spec = RecordFileSpec(
                RecordFormat.VARIABLE,
                max(store.schema.total_length, 1),
                store.encoding,
                store.schema,
                store.key,
                store.codepage,
            )
            with tempfile.TemporaryDirectory(prefix="mfkit-prune-") as workdir:
                unloaded = Path(workdir) / "unload.dat"
                write_records(unloaded, spec, (record for _, record in everything))
                for key, _ in everything:
                    store.delete(key)
                    deletes += 1
                for record in read_records(unloaded, spec):
                    if store.key.extract(record) not in doomed:
                        store.write(record)
                        inserts += 1

    summary = PruneSummary(examined, deleted, retained, deletes, inserts)
    logger.info("prune %s: %s", strategy.value, summary)
    return summary


def _store_and_spec(args: argparse.Namespace) -> tuple[KsdsStore, RecordFileSpec]:
    from mf_config import schema_from_args, settings_from_args
    from mf_ksds import open_keyed_store
    from mf_recio import KeySpec

    schema = schema_from_args(args)
    assert schema is not None
    settings = settings_from_args(args)
    key = KeySpec(*settings.key) if settings.key else None
    store = open_keyed_store(
        args.store, schema, key, args.backend, settings.encoding, settings.codepage
    )
    spec = RecordFileSpec.from_settings(settings._replace(key=None), schema)
    return store, spec._replace(key=store.key)


def _cmd_load(args: argparse.Namespace) -> int:
    store, spec = _store_and_spec(args)
    with store:
        summary = load(args.file, spec, store, replace=args.replace)
    print(f"✅ Loaded {summary.records} records into {args.store}", file=sys.stderr)
    for name, count in summary.per_layout.items():
        print(f"{name}\t{count}")
    return 0


def _cmd_unload(args: argparse.Namespace) -> int:
    store, spec = _store_and_spec(args)
    with store:
        count = unload(store, spec, args.output)
    print(f"✅ Unloaded {count} records to {args.output}", file=sys.stderr)
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    store, spec = _store_and_spec(args)
    with store:
        report = validate(args.file, spec, store)
    print(format_validation(report))
    if report.passed:
        print("✅ Store matches the file", file=sys.stderr)
        return 0
    print(f"❌ {len(report.entries)} discrepancies", file=sys.stderr)
    return 1


def _cmd_prune(args: argparse.Namespace) -> int:
    store, _ = _store_and_spec(args)
    with store:
        summary = prune(store, args.where, args.strategy)
    for name, value in summary._asdict().items():
        print(f"{name}\t{value}")
    print(
        f"✅ Pruned {summary.deleted} of {summary.examined} records "
        f"({summary.operations} store operations)",
        file=sys.stderr,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    from mf_config import add_dataset_arguments
    from mf_console import add_logging_arguments

    parser = argparse.ArgumentParser(
        prog="mfkit migrate",
        description="Load, unload, validate and prune keyed stores",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Load a fixed-length file keyed on its first 10 bytes
  mfkit migrate load --schema acct.cpy --key 0,10 --store ./acct-store acct.dat

  # Check the store still matches the source file
  mfkit migrate validate --schema acct.cpy --store ./acct-store acct.dat

  # Remove closed accounts without a full reload
  mfkit migrate prune --schema acct.cpy --store ./acct-store \\
      --where "ACCT-STATUS = C" --strategy inplace
        """,
    )
    add_logging_arguments(parser)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(sub: argparse.ArgumentParser) -> None:
        add_dataset_arguments(sub)
        sub.add_argument("--store", required=True, help="store directory")
        sub.add_argument("--backend", choices=("single", "perlayout"), help="store backend")

    load_cmd = commands.add_parser("load", help="load a record file into a store")
    common(load_cmd)
    load_cmd.add_argument("--replace", action="store_true", help="replace existing contents")
    load_cmd.add_argument("file", help="record file to load")
    load_cmd.set_defaults(handler=_cmd_load)

    unload_cmd = commands.add_parser("unload", help="write the store to a record file")
    common(unload_cmd)
    unload_cmd.add_argument("output", help="record file to write")
    unload_cmd.set_defaults(handler=_cmd_unload)

    validate_cmd = commands.add_parser("validate", help="compare a record file with a store")
    common(validate_cmd)
    validate_cmd.add_argument("file", help="record file to compare")
    validate_cmd.set_defaults(handler=_cmd_validate)

    prune_cmd = commands.add_parser("prune", help="delete records matching a predicate")
    common(prune_cmd)
    prune_cmd.add_argument("--where", required=True, help='predicate, e.g. "STATUS = C AND DAYS > 30"')
    prune_cmd.add_argument(
        "--strategy",
        choices=[s.value for s in PruneStrategy],
        default=PruneStrategy.INPLACE.value,
        help="inplace deletes matches only; reload unloads, filters and reloads",
    )
    prune_cmd.set_defaults(handler=_cmd_prune)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point for `mfkit migrate`."""
    from mf_console import run_cli

    return run_cli(build_parser(), argv)


if __name__ == "__main__":
    sys.exit(main())
