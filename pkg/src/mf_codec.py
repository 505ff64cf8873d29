#!/usr/bin/env python3
"""
Field codecs for mainframe record data and selective record transcoding.

Categories:
- alphanumeric: characters through the codepage (EBCDIC) or Latin-1 (ASCII)
- zoned-numeric: one digit per byte, sign overpunched into the last byte
- packed-numeric (COMP-3): two digits per byte, trailing sign nibble
- binary-numeric (COMP): big-endian, two's complement when signed

Numbers are decimal.Decimal end to end; floats are rejected.

Transcoding converts character bytes between EBCDIC and ASCII while COMP and
COMP-3 bytes, gaps and the tail of short layouts are copied unchanged.
"""

import argparse
import logging
import sys
from collections.abc import Mapping
from decimal import Decimal
from enum import StrEnum
from functools import lru_cache
from typing import NamedTuple

from mf_copybook import Category, CopybookSchema, FieldSpec, RecordLayout, select_layout
from mf_errors import (
    ConfigError,
    FieldCodecError,
    FieldOverflowError,
    InvalidNibble,
    InvalidSignNibble,
    InvalidZonedByte,
    RecordLengthMismatch,
    TypeMismatch,
    UnmappableByte,
)

logger = logging.getLogger(__name__)

DEFAULT_CODEPAGE = "cp037"

FieldValue = str | Decimal


class Encoding(StrEnum):
    EBCDIC = "ebcdic"
    ASCII = "ascii"


class OverflowPolicy(StrEnum):
    """What happens when a number is wider than its picture."""

    LEGACY_TRUNCATE = "legacy-truncate"
    STRICT = "strict"


# ASCII overpunch for the last byte of a signed zoned field
POSITIVE_OVERPUNCH = "{ABCDEFGHI"
NEGATIVE_OVERPUNCH = "}JKLMNOPQR"

ASCII_SPACE = 0x20


class Codepage:
    """
    256-entry translation tables between one EBCDIC codepage and Latin-1.

    Built from Python's own codec so cp037, cp500, cp1140 and friends all
    work. Bytes whose character lies outside Latin-1 are unmappable.
    """

    def __init__(self, name: str = DEFAULT_CODEPAGE):
        self.name = name
        to_ascii = bytearray(range(256))
        to_ebcdic = bytearray(range(256))
        ebcdic_mappable = bytearray()
        ascii_mappable = bytearray()
        for byte in range(256):
            char = bytes([byte]).decode(name)
            if ord(char) < 256:
                to_ascii[byte] = ord(char)
                to_ebcdic[ord(char)] = byte
                ebcdic_mappable.append(byte)
                ascii_mappable.append(ord(char))
        self.to_ascii = bytes(to_ascii)
        self.to_ebcdic = bytes(to_ebcdic)
        self.ebcdic_mappable = bytes(ebcdic_mappable)
        self.ascii_mappable = bytes(sorted(ascii_mappable))
        self.bijective = len(ebcdic_mappable) == 256
        self.space = " ".encode(name)[0]

    def __repr__(self) -> str:
        return f"Codepage({self.name!r})"

    def table(self, target: "Encoding") -> bytes:
        return self.to_ascii if target is Encoding.ASCII else self.to_ebcdic

    def mappable(self, source: "Encoding") -> bytes:
        return self.ebcdic_mappable if source is Encoding.EBCDIC else self.ascii_mappable


@lru_cache(maxsize=16)
def get_codepage(name: str = DEFAULT_CODEPAGE) -> Codepage:
    return Codepage(name)


def _codepage(codepage: Codepage | str | None) -> Codepage:
    if isinstance(codepage, Codepage):
        return codepage
    return get_codepage(codepage or DEFAULT_CODEPAGE)


def _codec_error(
    cls: type[FieldCodecError], message: str, spec: FieldSpec, raw: bytes
) -> FieldCodecError:
    return cls(message, field=spec.name, offset=spec.offset, raw=raw, hex=raw.hex().upper())


def _digits_to_decimal(negative: bool, digits: list[int], scale: int) -> Decimal:
    return Decimal((1 if negative else 0, tuple(digits) or (0,), -scale))


def decode_field(
    record: bytes,
    spec: FieldSpec,
    encoding: Encoding | str = Encoding.EBCDIC,
    codepage: Codepage | str | None = None,
) -> FieldValue:
    """Decode one elementary field from a record."""
    if len(record) < spec.end:
        raise RecordLengthMismatch(
            f"record of {len(record)} bytes is too short for {spec.name}",
            field=spec.name,
            offset=spec.offset,
            needed=spec.end,
        )
    raw = bytes(record[spec.offset : spec.end])
    encoding = Encoding(encoding)

    if spec.category is Category.ALPHANUMERIC:
        if encoding is Encoding.ASCII:
            return raw.decode("latin-1")
        return raw.decode(_codepage(codepage).name)
    if spec.category is Category.ZONED:
        return _decode_zoned(raw, spec, encoding)
    if spec.category is Category.PACKED:
        return _decode_packed(raw, spec)
    value = int.from_bytes(raw, "big", signed=spec.signed)
    return Decimal(value).scaleb(-spec.scale)


def _decode_zoned(raw: bytes, spec: FieldSpec, encoding: Encoding) -> Decimal:
    digits: list[int] = []
    negative = False
    last = len(raw) - 1
    for index, byte in enumerate(raw):
        if encoding is Encoding.EBCDIC:
            zone, digit = byte >> 4, byte & 0x0F
            if digit > 9:
                raise _codec_error(InvalidZonedByte, f"bad digit in byte {index}", spec, raw)
            if index == last:
                if zone == 0xD:
                    negative = True
                elif zone not in (0xC, 0xF):
                    raise _codec_error(InvalidZonedByte, f"bad sign zone {zone:X}", spec, raw)
            elif zone != 0xF:
                raise _codec_error(InvalidZonedByte, f"bad zone in byte {index}", spec, raw)
        else:
            char = chr(byte)
            if char.isdigit() and byte < 0x80:
                digit = byte - 0x30
            elif index == last and char in POSITIVE_OVERPUNCH:
                digit = POSITIVE_OVERPUNCH.index(char)
            elif index == last and char in NEGATIVE_OVERPUNCH:
                digit = NEGATIVE_OVERPUNCH.index(char)
                negative = True
            else:
                raise _codec_error(InvalidZonedByte, f"bad zoned character in byte {index}", spec, raw)
        digits.append(digit)
    return _digits_to_decimal(negative, digits, spec.scale)


def _decode_packed(raw: bytes, spec: FieldSpec) -> Decimal:
    nibbles = raw.hex().upper()
    sign = nibbles[-1]
    digits: list[int] = []
    for position, nibble in enumerate(nibbles[:-1]):
        value = int(nibble, 16)
        if value > 9:
            raise _codec_error(InvalidNibble, f"digit nibble {nibble} at position {position}", spec, raw)
        digits.append(value)
    if sign not in "CDF":
        raise _codec_error(InvalidSignNibble, f"sign nibble {sign}", spec, raw)
    return _digits_to_decimal(sign == "D", digits, spec.scale)


def _scaled_integer(value: object, spec: FieldSpec) -> int:
    """Coefficient at the field's scale; extra fraction digits truncate toward zero."""
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeMismatch(
            f"{type(value).__name__} value for numeric field {spec.name}",
            field=spec.name,
            offset=spec.offset,
        )
    if isinstance(value, int):
        value = Decimal(value)
    if not isinstance(value, Decimal) or not value.is_finite():
        raise TypeMismatch(
            f"numeric field {spec.name} needs a finite Decimal, got {value!r}",
            field=spec.name,
            offset=spec.offset,
        )
    sign, digit_tuple, exponent = value.as_tuple()
    assert isinstance(exponent, int)
    magnitude = int("".join(str(d) for d in digit_tuple) or "0")
    shift = exponent + spec.scale
    if shift >= 0:
        magnitude *= 10**shift
    else:
        magnitude //= 10 ** (-shift)
    return -magnitude if sign else magnitude


def apply_overflow_policy(number: int, spec: FieldSpec, policy: OverflowPolicy | str) -> int:
    """Fit a scaled integer into the field's digit count."""
    policy = OverflowPolicy(policy)
    if number < 0 and not spec.signed:
        if policy is OverflowPolicy.STRICT:
            raise FieldOverflowError(
                f"negative value for unsigned field {spec.name}", field=spec.name, offset=spec.offset
            )
        number = -number
    limit = 10**spec.digits
    if abs(number) >= limit:
        if policy is OverflowPolicy.STRICT:
            raise FieldOverflowError(
                f"value {number} needs more than {spec.digits} digits for {spec.name}",
                field=spec.name,
                offset=spec.offset,
            )
        truncated = abs(number) % limit
        logger.debug("truncated %s to %d digits for %s", number, spec.digits, spec.name)
        number = -truncated if number < 0 else truncated
    return number


def encode_field(
    value: FieldValue,
    spec: FieldSpec,
    encoding: Encoding | str = Encoding.EBCDIC,
    policy: OverflowPolicy | str = OverflowPolicy.LEGACY_TRUNCATE,
    codepage: Codepage | str | None = None,
) -> bytes:
    """Encode one value into exactly spec.length bytes."""
    encoding = Encoding(encoding)
    if spec.category is Category.ALPHANUMERIC:
        return _encode_text(value, spec, encoding, OverflowPolicy(policy), _codepage(codepage))
    if isinstance(value, str):
        raise TypeMismatch(
            f"text value for numeric field {spec.name}", field=spec.name, offset=spec.offset
        )
    number = apply_overflow_policy(_scaled_integer(value, spec), spec, policy)
    magnitude = str(abs(number))

    if spec.category is Category.ZONED:
        text = magnitude.zfill(spec.digits)
        if encoding is Encoding.ASCII:
            body = text[:-1].encode("ascii")
            last = int(text[-1])
            if not spec.signed:
                return body + text[-1].encode("ascii")
            punch = NEGATIVE_OVERPUNCH if number < 0 else POSITIVE_OVERPUNCH
            return body + punch[last].encode("ascii")
        zoned = bytearray(0xF0 | int(d) for d in text)
        if spec.signed:
            zoned[-1] = (0xD0 if number < 0 else 0xC0) | (zoned[-1] & 0x0F)
        return bytes(zoned)

    if spec.category is Category.PACKED:
        sign = ("D" if number < 0 else "C") if spec.signed else "F"
        return bytes.fromhex(magnitude.zfill(spec.length * 2 - 1) + sign)

    return number.to_bytes(spec.length, "big", signed=spec.signed)


def _encode_text(
    value: object,
    spec: FieldSpec,
    encoding: Encoding,
    policy: OverflowPolicy,
    codepage: Codepage,
) -> bytes:
    if not isinstance(value, str):
        raise TypeMismatch(
            f"alphanumeric field {spec.name} needs text, got {type(value).__name__}",
            field=spec.name,
            offset=spec.offset,
        )
    if len(value) > spec.length:
        if policy is OverflowPolicy.STRICT:
            raise FieldOverflowError(
                f"text of {len(value)} characters for {spec.length}-byte {spec.name}",
                field=spec.name,
                offset=spec.offset,
            )
        value = value[: spec.length]
    codec = "latin-1" if encoding is Encoding.ASCII else codepage.name
    try:
        encoded = value.encode(codec)
    except UnicodeEncodeError as e:
        raise UnmappableByte(
            f"character {value[e.start]!r} has no {codec} byte",
            field=spec.name,
            offset=spec.offset + e.start,
        ) from e
    pad = ASCII_SPACE if encoding is Encoding.ASCII else codepage.space
    return encoded + bytes([pad]) * (spec.length - len(encoded))


class DecodedRecord(NamedTuple):
    layout: str
    values: dict[str, FieldValue]


def resolve_layout(
    schema: CopybookSchema,
    record: bytes,
    encoding: Encoding | str = Encoding.EBCDIC,
    codepage: Codepage | str | None = None,
) -> RecordLayout:
    return schema.layout(select_layout(schema, record, Encoding(encoding), _codepage(codepage)))


def decode_record(
    record: bytes,
    schema: CopybookSchema,
    encoding: Encoding | str = Encoding.EBCDIC,
    codepage: Codepage | str | None = None,
) -> DecodedRecord:
    """Select the record's layout and decode every field of it."""
    layout = resolve_layout(schema, record, encoding, codepage)
    if len(record) < layout.length:
        raise RecordLengthMismatch(
            f"record of {len(record)} bytes is shorter than layout {layout.name}",
            layout=layout.name,
            needed=layout.length,
        )
    values = {spec.name: decode_field(record, spec, encoding, codepage) for spec in layout.fields}
    return DecodedRecord(layout.name, values)


def encode_record(
    values: Mapping[str, FieldValue],
    layout: RecordLayout,
    encoding: Encoding | str = Encoding.EBCDIC,
    policy: OverflowPolicy | str = OverflowPolicy.LEGACY_TRUNCATE,
    codepage: Codepage | str | None = None,
    base: bytes | None = None,
) -> bytes:
    """
    Build a record from field values.

    Fields missing from values keep their bytes from base; without a base,
    alphanumeric fields become spaces and numeric fields zero.
    """
    unknown = set(values) - {spec.name for spec in layout.fields}
    if unknown:
        raise ConfigError(
            f"layout {layout.name} has no field(s) {', '.join(sorted(unknown))}"
        )
    if base is not None:
        buffer = bytearray(base)
        if len(buffer) < layout.length:
            raise RecordLengthMismatch(
                f"base record of {len(buffer)} bytes is shorter than layout {layout.name}",
                layout=layout.name,
            )
    else:
        buffer = bytearray(layout.length)
        for spec in layout.fields:
            if spec.name not in values:
                blank: FieldValue = "" if spec.category is Category.ALPHANUMERIC else Decimal(0)
                buffer[spec.offset : spec.end] = encode_field(blank, spec, encoding, policy, codepage)
    for spec in layout.fields:
        if spec.name in values:
            buffer[spec.offset : spec.end] = encode_field(
                values[spec.name], spec, encoding, policy, codepage
            )
    return bytes(buffer)


class TranscodePlan(NamedTuple):
    """Byte classes of one layout: character spans, overpunch bytes, verbatim spans."""

    character: tuple[tuple[int, int], ...]
    overpunch: tuple[int, ...]
    length: int


@lru_cache(maxsize=512)
def transcode_plan(layout: RecordLayout) -> TranscodePlan:
    verbatim, character, overpunch = 0, 1, 2
    classes = [verbatim] * layout.length
    for spec in layout.fields:
        if spec.category in (Category.ALPHANUMERIC, Category.ZONED):
            classes[spec.offset : spec.end] = [character] * spec.length
    for spec in layout.fields:
        if spec.category is Category.ZONED and spec.signed:
            classes[spec.end - 1] = overpunch
    for spec in layout.fields:
        if spec.is_computational:
            classes[spec.offset : spec.end] = [verbatim] * spec.length

    spans: list[tuple[int, int]] = []
    start = None
    for position, kind in enumerate(classes + [verbatim]):
        if kind == character and start is None:
            start = position
        elif kind != character and start is not None:
            spans.append((start, position))
            start = None
    punches = tuple(p for p, kind in enumerate(classes) if kind == overpunch)
    return TranscodePlan(tuple(spans), punches, layout.length)


def _overpunch_tables() -> tuple[dict[int, int], dict[int, int]]:
    ebcdic_to_ascii: dict[int, int] = {}
    for digit in range(10):
        ebcdic_to_ascii[0xC0 | digit] = ord(POSITIVE_OVERPUNCH[digit])
        ebcdic_to_ascii[0xD0 | digit] = ord(NEGATIVE_OVERPUNCH[digit])
        ebcdic_to_ascii[0xF0 | digit] = 0x30 + digit
    return ebcdic_to_ascii, {a: e for e, a in ebcdic_to_ascii.items()}


OVERPUNCH_TO_ASCII, OVERPUNCH_TO_EBCDIC = _overpunch_tables()


def transcode_record(
    record: bytes,
    schema: CopybookSchema,
    source: Encoding | str = Encoding.EBCDIC,
    target: Encoding | str = Encoding.ASCII,
    codepage: Codepage | str | None = None,
) -> bytes:
    """Convert display bytes between encodings, leaving computational bytes untouched."""
    source, target = Encoding(source), Encoding(target)
    if source is target:
        return bytes(record)
    page = _codepage(codepage)
    layout = resolve_layout(schema, record, source, page)
    if len(record) < layout.length:
        raise RecordLengthMismatch(
            f"record of {len(record)} bytes is shorter than layout {layout.name}",
            layout=layout.name,
            needed=layout.length,
        )
    plan = transcode_plan(layout)
    table = page.table(target)
    output = bytearray(record)
    for start, end in plan.character:
        segment = bytes(record[start:end])
        if not page.bijective:
            residue = segment.translate(None, page.mappable(source))
            if residue:
                position = start + segment.index(residue[0])
                raise UnmappableByte(
                    f"byte {residue[0]:02X} has no {target} counterpart in {page.name}",
                    offset=position,
                    layout=layout.name,
                )
        output[start:end] = segment.translate(table)
    punch_table = OVERPUNCH_TO_ASCII if target is Encoding.ASCII else OVERPUNCH_TO_EBCDIC
    for position in plan.overpunch:
        byte = record[position]
        if byte not in punch_table:
            raise InvalidZonedByte(
                f"byte {byte:02X} is not a valid signed zoned last byte",
                offset=position,
                layout=layout.name,
            )
        output[position] = punch_table[byte]
    return bytes(output)


def format_value(value: FieldValue) -> str:
    """Display form used by inspect and decode output."""
    if isinstance(value, Decimal):
        return str(value)
    return value.rstrip(" ")


def _cmd_decode(args: argparse.Namespace) -> int:
    from mf_config import schema_from_args, settings_from_args

    schema = schema_from_args(args)
    assert schema is not None
    settings = settings_from_args(args)
    try:
        record = bytes.fromhex(args.record_hex)
    except ValueError as e:
        raise ConfigError(f"--record-hex is not valid hex: {e}") from e
    decoded = decode_record(record, schema, settings.encoding, settings.codepage)
    print(f"layout={decoded.layout}")
    for name, value in decoded.values.items():
        print(f"  {name}={format_value(value)}")
    return 0


def _cmd_transcode(args: argparse.Namespace) -> int:
    from mf_config import schema_from_args, settings_from_args
    from mf_recio import RecordFileSpec, read_records, write_records

    schema = schema_from_args(args)
    assert schema is not None
    settings = settings_from_args(args)
    source, target = Encoding(args.source), Encoding(args.target)
    spec = RecordFileSpec.from_settings(settings, schema)._replace(encoding=source)
    records = (
        transcode_record(r, schema, source, target, settings.codepage)
        for r in read_records(args.input, spec)
    )
    count = write_records(args.output, spec._replace(encoding=target), records)
    print(f"✅ Transcoded {count} records {source} -> {target}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    from mf_config import add_dataset_arguments
    from mf_console import add_logging_arguments

    parser = argparse.ArgumentParser(
        prog="mfkit codec",
        description="Decode fields and transcode record files between EBCDIC and ASCII",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Decode one record given as hex
  mfkit codec decode --schema billing.cpy --record-hex F0F0F1C1C2C3

  # Transcode a fixed-length EBCDIC file to ASCII, keeping COMP-3 bytes intact
  mfkit codec transcode --schema billing.cpy --from ebcdic --to ascii in.dat out.dat
        """,
    )
    add_logging_arguments(parser)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    decode = commands.add_parser("decode", help="decode one record given as hex")
    add_dataset_arguments(decode)
    decode.add_argument("--record-hex", required=True, help="record bytes as hex")
    decode.set_defaults(handler=_cmd_decode)

    transcode = commands.add_parser("transcode", help="transcode a record file")
    add_dataset_arguments(transcode)
    transcode.add_argument("--from", dest="source", choices=[e.value for e in Encoding], required=True)
    transcode.add_argument("--to", dest="target", choices=[e.value for e in Encoding], required=True)
    transcode.add_argument("input", help="input record file")
    transcode.add_argument("output", help="output record file")
    transcode.set_defaults(handler=_cmd_transcode)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point for `mfkit codec`."""
    from mf_console import run_cli

    return run_cli(build_parser(), argv)


if __name__ == "__main__":
    sys.exit(main())
