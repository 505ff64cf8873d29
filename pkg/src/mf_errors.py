"""
Exception hierarchy shared by every mainframe-migration-kit module.

Each exception knows the process exit code the CLI should return for it:

- 1: semantic failure (mismatch, record not found where fatal)
- 2: usage or configuration error
- 3: I/O error or data corruption

Keyed-dataset errors also carry the two-character file status a translated
COBOL program would have seen, so callers can branch on familiar codes.
"""

from typing import Any

EXIT_OK = 0
EXIT_SEMANTIC = 1
EXIT_USAGE = 2
EXIT_CORRUPTION = 3


class MainframeDataError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_SEMANTIC
    file_status: str | None = None

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = dict(context)

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items() if v is not None)
        return f"{self.message} ({details})" if details else self.message


# Copybook parsing


class CopybookSyntaxError(MainframeDataError):
    """Copybook text outside the supported grammar."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, line: int, column: int):
        super().__init__(message, line=line, column=column)
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}: {self.message}"


class UnsupportedFeature(MainframeDataError):
    """Valid COBOL the parser refuses; the copybook needs manual pre-editing."""

    exit_code = EXIT_USAGE

    def __init__(self, feature: str, line: int | None = None, column: int | None = None):
        super().__init__(f"unsupported copybook feature: {feature}", line=line, column=column)
        self.feature = feature
        self.line = line
        self.column = column


class DiscriminatorError(MainframeDataError):
    """A discriminator rule that cannot work against its schema."""

    exit_code = EXIT_USAGE


class MissingDiscriminator(DiscriminatorError):
    """Multi-layout schema used where a discriminator rule is required."""


class NoMatchingLayout(MainframeDataError):
    """Record whose discriminator value maps to no layout."""

    exit_code = EXIT_SEMANTIC


# Field codecs


class FieldCodecError(MainframeDataError):
    """Base for errors tied to one field of one record."""

    exit_code = EXIT_CORRUPTION

    def __init__(
        self,
        message: str,
        field: str | None = None,
        offset: int | None = None,
        raw: bytes | None = None,
        **context: Any,
    ):
        super().__init__(message, field=field, offset=offset, **context)
        self.field = field
        self.offset = offset
        self.raw = raw


class InvalidNibble(FieldCodecError):
    """Packed-decimal digit nibble above 9."""


class InvalidSignNibble(FieldCodecError):
    """Packed-decimal sign nibble other than C, D or F."""


class InvalidZonedByte(FieldCodecError):
    """Zoned-decimal byte with a bad zone or digit."""


class UnmappableByte(FieldCodecError):
    """Byte or character without a counterpart in the target codepage."""


class RecordLengthMismatch(FieldCodecError):
    """Record too short for the layout or field being decoded."""


class TypeMismatch(FieldCodecError):
    """Value type does not fit the field category."""

    exit_code = EXIT_USAGE


class FieldOverflowError(FieldCodecError, OverflowError):
    """Numeric value wider than its picture under the strict policy."""

    exit_code = EXIT_SEMANTIC


# Record files


class RecordFormatError(MainframeDataError):
    """Physical record file violates its declared format."""

    exit_code = EXIT_CORRUPTION


class TrailingBytes(RecordFormatError):
    """Fixed-format file size is not a multiple of LRECL."""


class MalformedRDW(RecordFormatError):
    """Variable-format record descriptor word is invalid."""


class BDWNotSupported(MalformedRDW):
    """File appears to start with a block descriptor word."""


class RecordLengthViolation(RecordFormatError):
    """Record handed to a writer does not fit the file format."""

    exit_code = EXIT_USAGE


# Keyed datasets


class KeyedAccessError(MainframeDataError):
    """Base for keyed-dataset status conditions."""


class EndOfFile(KeyedAccessError):
    """No further record in the requested direction."""

    file_status = "10"


class DuplicateKey(KeyedAccessError):
    """Write of a key that already exists."""

    file_status = "22"


class NotFound(KeyedAccessError):
    """Key absent from the dataset."""

    file_status = "23"


class CursorInvalidated(KeyedAccessError):
    """Store mutated after the cursor was positioned."""

    file_status = "46"


class SessionClosed(KeyedAccessError):
    """Operation on a store or cache session that is already closed."""

    exit_code = EXIT_USAGE
    file_status = "42"


class ExclusiveLockHeld(KeyedAccessError):
    """Another session holds the store exclusively."""

    file_status = "93"


class FlushConflict(KeyedAccessError):
    """Backing store changed underneath a write-back cache session."""

    file_status = "93"


class SchemaMismatch(KeyedAccessError):
    """Existing store was created with a different schema, key, or backend."""

    exit_code = EXIT_USAGE
    file_status = "39"


class StoreCorrupted(KeyedAccessError):
    """Store files are unreadable or out of key order."""

    exit_code = EXIT_CORRUPTION
    file_status = "35"


# Migration


class PredicateError(MainframeDataError):
    """Prune predicate that cannot be parsed or evaluated."""

    exit_code = EXIT_USAGE


# Configuration and plans


class ConfigError(MainframeDataError):
    """Invalid dataset configuration or command-line combination."""

    exit_code = EXIT_USAGE


class PlanError(ConfigError):
    """Harness plan rejected before execution."""


class CycleDetected(PlanError):
    """Job dependency graph contains a cycle."""

    def __init__(self, cycle: list[str]):
        super().__init__(f"dependency cycle: {' -> '.join(cycle)}")
        self.cycle = cycle


class OutputConflict(PlanError):
    """Two jobs that may run concurrently declare the same output."""

    def __init__(self, job_a: str, job_b: str, path: str):
        super().__init__(
            f"jobs '{job_a}' and '{job_b}' may run concurrently and both write {path}"
        )
        self.job_a = job_a
        self.job_b = job_b
        self.path = path


class DanglingDependency(PlanError):
    """Reference to a job or path the plan does not define."""


class PlanChanged(PlanError):
    """Plan fingerprint differs from the report being re-run."""


class JobError(MainframeDataError):
    """Base for job execution failures recorded in reports."""


class JobLaunchFailure(JobError):
    """Job command could not be started."""


class JobTimeout(JobError):
    """Job exceeded its time limit."""
