#!/usr/bin/env python3
"""
COBOL copybook parser producing record schemas with resolved byte offsets.

Supported grammar (free column layout, periods terminate entries):

- level numbers 01-49, FILLER or unnamed items
- PIC X(n), PIC 9(n), PIC S9(n), PIC S9(n)V9(m)
- USAGE DISPLAY (default), COMP / COMP-4 / BINARY, COMP-3 / PACKED-DECIMAL,
  given on the item or inherited from its group
- REDEFINES (01 level, group level, elementary level)
- fixed OCCURS n TIMES
- VALUE, BLANK WHEN ZERO, JUSTIFIED, INDEXED BY, EXTERNAL and GLOBAL are
  accepted and ignored because they do not change storage

Rejected loudly with UnsupportedFeature so offsets are never miscomputed:
OCCURS DEPENDING ON, SIGN clauses, levels 66/77/88, SYNCHRONIZED,
national/DBCS data, floating point usages, editing pictures.

Layouts: every 01 record is a layout. A REDEFINES on a group splits the
record into one layout per alternative; a REDEFINES on an elementary item
keeps both names in the same layout at the same offset.
"""

import argparse
import hashlib
import logging
import re
import sys
from collections.abc import Mapping, Sequence
from decimal import Decimal, InvalidOperation
from enum import StrEnum
from pathlib import Path
from typing import NamedTuple

from mf_errors import (
    CopybookSyntaxError,
    DiscriminatorError,
    MissingDiscriminator,
    NoMatchingLayout,
    UnsupportedFeature,
)

logger = logging.getLogger(__name__)

GRAMMAR_VERSION = "1"


class Usage(StrEnum):
    """Storage usage of an elementary item."""

    DISPLAY = "DISPLAY"
    COMP = "COMP"
    COMP3 = "COMP-3"


class Category(StrEnum):
    """Picture category after usage is applied."""

    ALPHANUMERIC = "alphanumeric"
    ZONED = "zoned-numeric"
    PACKED = "packed-numeric"
    BINARY = "binary-numeric"


USAGE_WORDS = {
    "DISPLAY": Usage.DISPLAY,
    "COMP": Usage.COMP,
    "COMPUTATIONAL": Usage.COMP,
    "COMP-4": Usage.COMP,
    "COMPUTATIONAL-4": Usage.COMP,
    "BINARY": Usage.COMP,
    "COMP-3": Usage.COMP3,
    "COMPUTATIONAL-3": Usage.COMP3,
    "PACKED-DECIMAL": Usage.COMP3,
}

REJECTED_USAGES = {
    "COMP-1": "floating point usage COMP-1",
    "COMPUTATIONAL-1": "floating point usage COMP-1",
    "COMP-2": "floating point usage COMP-2",
    "COMPUTATIONAL-2": "floating point usage COMP-2",
    "COMP-5": "native binary usage COMP-5",
    "COMPUTATIONAL-5": "native binary usage COMP-5",
    "NATIONAL": "national data",
    "DISPLAY-1": "DBCS data (DISPLAY-1)",
    "POINTER": "USAGE POINTER",
    "PROCEDURE-POINTER": "USAGE PROCEDURE-POINTER",
    "FUNCTION-POINTER": "USAGE FUNCTION-POINTER",
    "INDEX": "USAGE INDEX",
}

# Clauses accepted because they never change storage layout
IGNORED_FLAGS = {"EXTERNAL", "GLOBAL"}

MAX_DIGITS = 18

NAME_PATTERN = re.compile(r"^[A-Z0-9](?:[A-Z0-9-]*[A-Z0-9])?$")
TOKEN_PATTERN = re.compile(r"'[^']*'|\"[^\"]*\"|\S+")
PIC_SYMBOL_PATTERN = re.compile(r"([XA9SV])(?:\((\d+)\))?")
SEQUENCE_AREA_PATTERN = re.compile(r"^[0-9 ]{6}")


class Picture(NamedTuple):
    """Parsed PICTURE string."""

    alphanumeric: bool
    size: int  # character count for X pictures, digit count for numerics
    digits: int
    scale: int
    signed: bool

    def render(self) -> str:
        """Canonical picture text accepted back by the parser."""
        if self.alphanumeric:
            return f"X({self.size})"
        text = "S" if self.signed else ""
        integer_digits = self.digits - self.scale
        if integer_digits:
            text += f"9({integer_digits})"
        if self.scale:
            text += f"V9({self.scale})"
        return text


class DataItem(NamedTuple):
    """One data description entry, kept for pretty-printing and fingerprints."""

    level: int
    name: str
    picture: Picture | None = None
    usage: Usage | None = None
    occurs: int | None = None
    redefines: str | None = None
    children: tuple["DataItem", ...] = ()


class FieldSpec(NamedTuple):
    """One elementary field with its resolved storage."""

    name: str
    level: int
    offset: int
    length: int
    category: Category
    digits: int
    scale: int
    signed: bool
    usage: Usage
    occurs_index: tuple[int, ...] | None = None

    @property
    def end(self) -> int:
        return self.offset + self.length

    @property
    def is_numeric(self) -> bool:
        return self.category is not Category.ALPHANUMERIC

    @property
    def is_computational(self) -> bool:
        return self.category in (Category.PACKED, Category.BINARY)


class RecordLayout(NamedTuple):
    """Ordered elementary fields of one record layout."""

    name: str
    fields: tuple[FieldSpec, ...]
    length: int

    def field(self, name: str) -> FieldSpec:
        for spec in self.fields:
            if spec.name == name:
                return spec
        raise KeyError(f"layout {self.name} has no field {name}")

    def has_field(self, name: str) -> bool:
        return any(spec.name == name for spec in self.fields)


class DiscriminatorRule(NamedTuple):
    """Maps the value of one field to the layout a record uses."""

    field: str
    mapping: tuple[tuple[str, str], ...]
    default: str | None = None

    @classmethod
    def build(
        cls,
        field: str,
        mapping: Mapping[str, str] | Sequence[tuple[str, str]],
        default: str | None = None,
    ) -> "DiscriminatorRule":
        pairs = mapping.items() if isinstance(mapping, Mapping) else mapping
        return cls(
            field=field.upper(),
            mapping=tuple((str(value), str(layout).upper()) for value, layout in pairs),
            default=default.upper() if default else None,
        )

    def layout_for(self, value: str) -> str | None:
        for candidate, layout in self.mapping:
            if candidate == value:
                return layout
        return self.default


class CopybookSchema(NamedTuple):
    """Parsed copybook: layouts, total record length and the source item tree."""

    name: str
    layouts: tuple[RecordLayout, ...]
    total_length: int
    discriminator: DiscriminatorRule | None = None
    items: tuple[DataItem, ...] = ()

    @property
    def layout_names(self) -> list[str]:
        return [layout.name for layout in self.layouts]

    def layout(self, name: str) -> RecordLayout:
        for layout in self.layouts:
            if layout.name == name:
                return layout
        raise KeyError(f"schema {self.name} has no layout {name}")

    def declarations(self, field_name: str) -> list[FieldSpec]:
        """Every declaration of a field name across layouts (deduplicated)."""
        found: list[FieldSpec] = []
        for layout in self.layouts:
            for spec in layout.fields:
                if spec.name == field_name and spec not in found:
                    found.append(spec)
        return found

    def with_discriminator(self, rule: DiscriminatorRule | None) -> "CopybookSchema":
        """Return a copy of the schema bound to a validated discriminator rule."""
        if rule is None:
            return self._replace(discriminator=None)
        return self._replace(discriminator=_validate_rule(self, rule))


class _Token(NamedTuple):
    text: str
    line: int
    column: int


class _Entry:
    """Mutable data description entry used while the tree is assembled."""

    def __init__(self, level: int, name: str, line: int, column: int):
        self.level = level
        self.name = name
        self.line = line
        self.column = column
        self.picture: Picture | None = None
        self.usage: Usage | None = None
        self.occurs: int | None = None
        self.redefines: str | None = None
        self.children: list[_Entry] = []
        self.field_name = name  # FILLERs are renamed FILLER-n

    @property
    def is_group(self) -> bool:
        return bool(self.children)

    def freeze(self) -> DataItem:
        return DataItem(
            level=self.level,
            name=self.name,
            picture=self.picture,
            usage=self.usage,
            occurs=self.occurs,
            redefines=self.redefines,
            children=tuple(child.freeze() for child in self.children),
        )


class _Variant(NamedTuple):
    names: tuple[str, ...]
    fields: tuple[FieldSpec, ...]


def storage_length(category: Category, digits: int, characters: int = 0) -> int:
    """Bytes occupied by an elementary item."""
    if category is Category.ALPHANUMERIC:
        return characters
    if category is Category.ZONED:
        return digits
    if category is Category.PACKED:
        return digits // 2 + 1
    if digits <= 4:
        return 2
    if digits <= 9:
        return 4
    return 8


def category_for(picture: Picture, usage: Usage) -> Category:
    if picture.alphanumeric:
        return Category.ALPHANUMERIC
    if usage is Usage.COMP3:
        return Category.PACKED
    if usage is Usage.COMP:
        return Category.BINARY
    return Category.ZONED


def parse_picture(text: str, line: int = 0, column: int = 0) -> Picture:
    """Parse a PICTURE character string from the supported subset."""
    source = text.upper()
    symbols: list[tuple[str, int]] = []
    pos = 0
    while pos < len(source):
        match = PIC_SYMBOL_PATTERN.match(source, pos)
        if not match:
            char = source[pos]
            if char == "P":
                raise UnsupportedFeature(f"scaling position P in PIC {text}", line, column)
            if char in "ZB0/,.+-*$CRDBEN":
                raise UnsupportedFeature(f"editing or national picture PIC {text}", line, column)
            raise CopybookSyntaxError(f"invalid PICTURE string '{text}'", line, column)
        count = int(match.group(2)) if match.group(2) else 1
        if count == 0:
            raise CopybookSyntaxError(f"zero repetition in PIC {text}", line, column)
        symbols.append((match.group(1), count))
        pos = match.end()

    kinds = {symbol for symbol, _ in symbols}
    if kinds & {"X", "A"}:
        if kinds & {"S", "V"}:
            raise CopybookSyntaxError(f"sign or decimal point in alphanumeric PIC {text}", line, column)
        size = sum(count for _, count in symbols)
        return Picture(alphanumeric=True, size=size, digits=0, scale=0, signed=False)

    signed = False
    seen_point = False
    digits = 0
    scale = 0
    for index, (symbol, count) in enumerate(symbols):
        if symbol == "S":
            if index != 0 or count != 1:
                raise CopybookSyntaxError(f"S must lead PIC {text} exactly once", line, column)
            signed = True
        elif symbol == "V":
            if seen_point or count != 1:
                raise CopybookSyntaxError(f"more than one V in PIC {text}", line, column)
            seen_point = True
        else:
            digits += count
            if seen_point:
                scale += count
    if digits == 0:
        raise CopybookSyntaxError(f"numeric PIC {text} has no digit positions", line, column)
    if digits > MAX_DIGITS:
        raise UnsupportedFeature(f"more than {MAX_DIGITS} digits in PIC {text}", line, column)
    return Picture(alphanumeric=False, size=digits, digits=digits, scale=scale, signed=signed)


def is_fixed_format(text: str) -> bool:
    """
    Decide the source format once for a whole copybook.

    Fixed format needs at least one line numbered in all of columns 1-6 and
    every other non-blank line to keep columns 1-6 to digits and spaces.
    Anything else, including indented free-form entries, is free format.
    """
    numbered = False
    for line in text.splitlines():
        if not line.strip():
            continue
        if not SEQUENCE_AREA_PATTERN.match(line):
            return False
        numbered = numbered or (len(line) >= 7 and line[:6].isdigit())
    return numbered


def _source_lines(text: str) -> list[tuple[int, int, str]]:
    """Yield (line number, column offset, content) with comments removed."""
    fixed = is_fixed_format(text)
    lines: list[tuple[int, int, str]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        column_offset = 0
        if fixed:
            # sequence area in columns 1-6, indicator in 7, area A/B up to column 72
            if line[6:7] in ("*", "/"):
                continue
            line = line[7:72]
            column_offset = 7
        stripped = line.lstrip()
        if stripped.startswith("*"):
            continue
        if "*>" in line:
            line = line[: line.index("*>")]
        lines.append((number, column_offset, line))
    return lines


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    for number, column_offset, line in _source_lines(text):
        for match in TOKEN_PATTERN.finditer(line):
            word = match.group(0)
            column = match.start() + column_offset + 1
            quoted = word[0] in "'\""
            if not quoted and len(word) > 1 and word.endswith("."):
                tokens.append(_Token(word[:-1].upper(), number, column))
                tokens.append(_Token(".", number, column + len(word) - 1))
            else:
                tokens.append(_Token(word if quoted else word.upper(), number, column))
    return tokens


def _sentences(tokens: list[_Token]) -> list[list[_Token]]:
    sentences: list[list[_Token]] = []
    current: list[_Token] = []
    for token in tokens:
        if token.text == ".":
            if current:
                sentences.append(current)
            current = []
        else:
            current.append(token)
    if current:
        first = current[0]
        raise CopybookSyntaxError("entry is missing its period terminator", first.line, first.column)
    return sentences


class CopybookParser:
    """Turn copybook text into a CopybookSchema."""

    CLAUSE_WORDS = {
        "REDEFINES",
        "PIC",
        "PICTURE",
        "USAGE",
        "OCCURS",
        "VALUE",
        "VALUES",
        "SIGN",
        "SYNC",
        "SYNCHRONIZED",
        "JUST",
        "JUSTIFIED",
        "BLANK",
        "INDEXED",
        "RENAMES",
        *USAGE_WORDS,
        *REJECTED_USAGES,
        *IGNORED_FLAGS,
    }

    def __init__(self, text: str, name: str | None = None):
        self.text = text
        self.name = name
        self._filler_count = 0

    def parse(self) -> CopybookSchema:
        sentences = _sentences(_tokenize(self.text))
        if not sentences:
            raise CopybookSyntaxError("copybook contains no data description entries", 1, 1)
        entries = [self._parse_entry(sentence) for sentence in sentences]
        roots = self._build_tree(entries)

        layouts: list[RecordLayout] = []
        record_names: set[str] = set()
        for root in roots:
            if root.name in record_names:
                raise CopybookSyntaxError(f"duplicate record name {root.name}", root.line, root.column)
            if root.redefines and root.redefines not in record_names:
                raise CopybookSyntaxError(
                    f"{root.name} redefines unknown record {root.redefines}", root.line, root.column
                )
            record_names.add(root.name)
            layouts.extend(self._record_layouts(root))

        seen: set[str] = set()
        for layout in layouts:
            if layout.name in seen:
                raise CopybookSyntaxError(f"duplicate layout name {layout.name}", 1, 1)
            seen.add(layout.name)

        total = max((layout.length for layout in layouts), default=0)
        schema = CopybookSchema(
            name=(self.name or roots[0].name).upper(),
            layouts=tuple(layouts),
            total_length=total,
            discriminator=None,
            items=tuple(root.freeze() for root in roots),
        )
        logger.debug(
            "parsed copybook %s: %d layout(s), %d bytes", schema.name, len(layouts), total
        )
        return schema

    def _parse_entry(self, tokens: list[_Token]) -> _Entry:
        head = tokens[0]
        if not head.text.isdigit():
            raise CopybookSyntaxError(f"expected a level number, found '{head.text}'", head.line, head.column)
        level = int(head.text)
        if level in (66, 77, 88):
            raise UnsupportedFeature(f"level {level} entries", head.line, head.column)
        if not 1 <= level <= 49:
            raise CopybookSyntaxError(f"level number {level} outside 01-49", head.line, head.column)

        pos = 1
        if pos < len(tokens) and tokens[pos].text not in self.CLAUSE_WORDS:
            name_token = tokens[pos]
            name = name_token.text
            if not NAME_PATTERN.match(name) or name.isdigit():
                raise CopybookSyntaxError(f"invalid data name '{name}'", name_token.line, name_token.column)
            pos += 1
        else:
            name = "FILLER"
        entry = _Entry(level, name, head.line, head.column)
        if name == "FILLER":
            self._filler_count += 1
            entry.field_name = f"FILLER-{self._filler_count}"

        while pos < len(tokens):
            pos = self._parse_clause(entry, tokens, pos)
        return entry

    def _expect(self, tokens: list[_Token], pos: int, what: str) -> _Token:
        if pos >= len(tokens):
            last = tokens[-1]
            raise CopybookSyntaxError(f"expected {what}", last.line, last.column + len(last.text))
        return tokens[pos]

    def _parse_clause(self, entry: _Entry, tokens: list[_Token], pos: int) -> int:
        token = tokens[pos]
        word = token.text

        if word == "REDEFINES":
            target = self._expect(tokens, pos + 1, "name after REDEFINES")
            entry.redefines = target.text
            return pos + 2

        if word in ("PIC", "PICTURE"):
            pos += 1
            if pos < len(tokens) and tokens[pos].text == "IS":
                pos += 1
            pic = self._expect(tokens, pos, "picture string")
            entry.picture = parse_picture(pic.text, pic.line, pic.column)
            return pos + 1

        if word == "USAGE":
            pos += 1
            if pos < len(tokens) and tokens[pos].text == "IS":
                pos += 1
            usage_token = self._expect(tokens, pos, "usage after USAGE")
            self._apply_usage(entry, usage_token)
            return pos + 1

        if word in USAGE_WORDS or word in REJECTED_USAGES:
            self._apply_usage(entry, token)
            return pos + 1

        if word == "OCCURS":
            count_token = self._expect(tokens, pos + 1, "count after OCCURS")
            if not count_token.text.isdigit():
                raise CopybookSyntaxError("OCCURS needs an integer count", count_token.line, count_token.column)
            pos += 2
            if pos < len(tokens) and tokens[pos].text == "TO":
                raise UnsupportedFeature("variable OCCURS (n TO m)", token.line, token.column)
            if pos < len(tokens) and tokens[pos].text == "TIMES":
                pos += 1
            if pos < len(tokens) and tokens[pos].text == "DEPENDING":
                raise UnsupportedFeature("OCCURS DEPENDING ON", token.line, token.column)
            count = int(count_token.text)
            if count < 1:
                raise CopybookSyntaxError("OCCURS count must be positive", count_token.line, count_token.column)
            entry.occurs = count
            return self._skip_occurs_keys(tokens, pos)

        if word in ("VALUE", "VALUES"):
            pos += 1
            if pos < len(tokens) and tokens[pos].text in ("IS", "ARE"):
                pos += 1
            if pos < len(tokens) and tokens[pos].text == "ALL":
                pos += 1
            self._expect(tokens, pos, "literal after VALUE")
            return pos + 1

        if word == "SIGN":
            raise UnsupportedFeature("SIGN clause", token.line, token.column)
        if word in ("SYNC", "SYNCHRONIZED"):
            raise UnsupportedFeature("SYNCHRONIZED alignment", token.line, token.column)
        if word == "RENAMES":
            raise UnsupportedFeature("RENAMES", token.line, token.column)

        if word in ("JUST", "JUSTIFIED"):
            pos += 1
            if pos < len(tokens) and tokens[pos].text == "RIGHT":
                pos += 1
            return pos

        if word == "BLANK":
            pos += 1
            if pos < len(tokens) and tokens[pos].text == "WHEN":
                pos += 1
            zero = self._expect(tokens, pos, "ZERO after BLANK WHEN")
            if zero.text not in ("ZERO", "ZEROS", "ZEROES"):
                raise CopybookSyntaxError("expected BLANK WHEN ZERO", zero.line, zero.column)
            return pos + 1

        if word == "INDEXED":
            return self._skip_names(tokens, pos + 1, optional_word="BY")

        if word in IGNORED_FLAGS:
            return pos + 1

        raise CopybookSyntaxError(f"unexpected '{word}' in entry {entry.name}", token.line, token.column)

    def _skip_occurs_keys(self, tokens: list[_Token], pos: int) -> int:
        while pos < len(tokens) and tokens[pos].text in ("ASCENDING", "DESCENDING"):
            pos += 1
            if pos < len(tokens) and tokens[pos].text == "KEY":
                pos += 1
            if pos < len(tokens) and tokens[pos].text == "IS":
                pos += 1
            pos = self._skip_names(tokens, pos)
        return pos

    def _skip_names(self, tokens: list[_Token], pos: int, optional_word: str | None = None) -> int:
        if optional_word and pos < len(tokens) and tokens[pos].text == optional_word:
            pos += 1
        start = pos
        while pos < len(tokens) and tokens[pos].text not in self.CLAUSE_WORDS:
            pos += 1
        if pos == start:
            token = tokens[start - 1]
            raise CopybookSyntaxError("expected a data name", token.line, token.column)
        return pos

    def _apply_usage(self, entry: _Entry, token: _Token) -> None:
        if token.text in REJECTED_USAGES:
            raise UnsupportedFeature(REJECTED_USAGES[token.text], token.line, token.column)
        if token.text not in USAGE_WORDS:
            raise CopybookSyntaxError(f"unknown usage '{token.text}'", token.line, token.column)
        entry.usage = USAGE_WORDS[token.text]

    def _build_tree(self, entries: list[_Entry]) -> list[_Entry]:
        roots: list[_Entry] = []
        if entries[0].level != 1:
            # Copybooks that start below 01 describe the body of one record
            root_name = (self.name or "COPYBOOK-RECORD").upper()
            roots.append(_Entry(1, root_name, entries[0].line, entries[0].column))
        stack: list[_Entry] = list(roots)

        for entry in entries:
            if entry.level == 1:
                if entry.occurs:
                    raise CopybookSyntaxError("OCCURS is not allowed at level 01", entry.line, entry.column)
                roots.append(entry)
                stack = [entry]
                continue
            while stack and stack[-1].level >= entry.level:
                stack.pop()
            if not stack:
                raise CopybookSyntaxError(
                    f"level {entry.level:02d} item {entry.name} has no enclosing record",
                    entry.line,
                    entry.column,
                )
            parent = stack[-1]
            if parent.picture is not None:
                raise CopybookSyntaxError(
                    f"elementary item {parent.name} cannot contain {entry.name}",
                    entry.line,
                    entry.column,
                )
            parent.children.append(entry)
            stack.append(entry)

        for root in roots:
            self._check_items(root)
        return roots

    def _check_items(self, entry: _Entry) -> None:
        if entry.is_group:
            if entry.picture is not None:
                raise CopybookSyntaxError(
                    f"group item {entry.name} has a PICTURE clause", entry.line, entry.column
                )
            previous: _Entry | None = None
            base: _Entry | None = None
            for child in entry.children:
                if child.redefines:
                    if previous is None or base is None or child.redefines != base.name:
                        raise CopybookSyntaxError(
                            f"{child.name} must immediately follow the item it redefines "
                            f"({child.redefines})",
                            child.line,
                            child.column,
                        )
                    if child.level != base.level:
                        raise CopybookSyntaxError(
                            f"{child.name} and {base.name} must share a level number",
                            child.line,
                            child.column,
                        )
                else:
                    base = child
                previous = child
                self._check_items(child)
        elif entry.level > 1 or entry.picture is not None:
            if entry.picture is None:
                raise CopybookSyntaxError(
                    f"elementary item {entry.name} needs a PICTURE clause", entry.line, entry.column
                )
            if entry.picture.alphanumeric and entry.usage not in (None, Usage.DISPLAY):
                raise CopybookSyntaxError(
                    f"alphanumeric item {entry.name} cannot be {entry.usage}", entry.line, entry.column
                )

    def _record_layouts(self, root: _Entry) -> list[RecordLayout]:
        if not root.is_group and root.picture is None:
            return [RecordLayout(name=root.name, fields=(), length=0)]
        variants, _ = self._expand(root, 0, None, (), inside_occurs=False)
        layouts: list[RecordLayout] = []
        for variant in variants:
            name = "+".join(variant.names) if variant.names else root.name
            names: set[str] = set()
            for spec in variant.fields:
                if spec.name in names:
                    raise UnsupportedFeature(
                        f"duplicate data name {spec.name} in layout {name} (qualification)",
                        root.line,
                        root.column,
                    )
                names.add(spec.name)
            length = max((spec.end for spec in variant.fields), default=0)
            layouts.append(RecordLayout(name=name, fields=variant.fields, length=length))
        return layouts

    def _expand(
        self,
        entry: _Entry,
        offset: int,
        inherited: Usage | None,
        occurs_index: tuple[int, ...],
        inside_occurs: bool,
    ) -> tuple[list[_Variant], int]:
        usage = entry.usage or inherited
        if entry.occurs:
            _, element_size = self._expand_once(entry, offset, usage, occurs_index + (1,), True)
            fields: list[FieldSpec] = []
            for ordinal in range(1, entry.occurs + 1):
                element_offset = offset + (ordinal - 1) * element_size
                variants, _ = self._expand_once(
                    entry, element_offset, usage, occurs_index + (ordinal,), True
                )
                fields.extend(variants[0].fields)
            return [_Variant((), tuple(fields))], element_size * entry.occurs
        return self._expand_once(entry, offset, usage, occurs_index, inside_occurs)

    def _expand_once(
        self,
        entry: _Entry,
        offset: int,
        usage: Usage | None,
        occurs_index: tuple[int, ...],
        inside_occurs: bool,
    ) -> tuple[list[_Variant], int]:
        if not entry.is_group:
            assert entry.picture is not None
            effective = usage or Usage.DISPLAY
            category = category_for(entry.picture, effective)
            if category is Category.ALPHANUMERIC:
                effective = Usage.DISPLAY
            length = storage_length(category, entry.picture.digits, entry.picture.size)
            name = entry.field_name
            if occurs_index:
                name = f"{name}({','.join(str(i) for i in occurs_index)})"
            spec = FieldSpec(
                name=name,
                level=entry.level,
                offset=offset,
                length=length,
                category=category,
                digits=entry.picture.digits,
                scale=entry.picture.scale,
                signed=entry.picture.signed,
                usage=effective,
                occurs_index=occurs_index or None,
            )
            return [_Variant((), (spec,))], length

        accumulated = [_Variant((), ())]
        cursor = offset
        for members in self._redefines_sets(entry.children):
            results = [self._expand(m, cursor, usage, occurs_index, inside_occurs) for m in members]
            set_size = max(size for _, size in results)
            if len(members) == 1:
                alternatives = results[0][0]
            elif not any(member.is_group for member in members):
                overlapped = tuple(f for variants, _ in results for f in variants[0].fields)
                alternatives = [_Variant((), overlapped)]
            else:
                if inside_occurs:
                    raise UnsupportedFeature(
                        f"group REDEFINES of {members[0].name} inside OCCURS",
                        members[1].line,
                        members[1].column,
                    )
                alternatives = [
                    _Variant((member.name,) + variant.names, variant.fields)
                    for member, (variants, _) in zip(members, results, strict=True)
                    for variant in variants
                ]
            accumulated = [
                _Variant(left.names + right.names, left.fields + right.fields)
                for left in accumulated
                for right in alternatives
            ]
            cursor += set_size
        return accumulated, cursor - offset

    @staticmethod
    def _redefines_sets(children: list[_Entry]) -> list[list[_Entry]]:
        sets: list[list[_Entry]] = []
        for child in children:
            if child.redefines and sets:
                sets[-1].append(child)
            else:
                sets.append([child])
        return sets


def parse_copybook(text: str, name: str | None = None) -> CopybookSchema:
    """Parse copybook source text into a CopybookSchema."""
    return CopybookParser(text, name).parse()


def load_copybook(path: str | Path, discriminator: DiscriminatorRule | None = None) -> CopybookSchema:
    """Read and parse a copybook file, optionally binding a discriminator rule."""
    source = Path(path)
    text = source.read_text(encoding="ascii", errors="strict")
    schema = parse_copybook(text)
    if discriminator is not None:
        schema = schema.with_discriminator(discriminator)
    return schema


def discriminator_key(value: object) -> str:
    """Canonical text form used to look a decoded value up in a rule."""
    if isinstance(value, str):
        return value.rstrip(" ")
    if isinstance(value, Decimal | int):
        return format(Decimal(value).normalize(), "f") if value else "0"
    return str(value)


def _validate_rule(schema: CopybookSchema, rule: DiscriminatorRule) -> DiscriminatorRule:
    names = set(schema.layout_names)
    for _, layout in rule.mapping:
        if layout not in names:
            raise DiscriminatorError(f"discriminator maps to unknown layout {layout}")
    if rule.default and rule.default not in names:
        raise DiscriminatorError(f"discriminator default {rule.default} is not a layout")

    declarations = schema.declarations(rule.field)
    if not declarations:
        raise DiscriminatorError(f"discriminator field {rule.field} is not declared")
    first = declarations[0]
    for other in declarations[1:]:
        if (other.offset, other.length, other.category) != (first.offset, first.length, first.category):
            raise DiscriminatorError(
                f"discriminator field {rule.field} is declared at different offsets or lengths"
            )
    for layout in schema.layouts:
        if layout.length < first.end:
            raise DiscriminatorError(
                f"layout {layout.name} is too short to hold discriminator {rule.field}"
            )

    normalized: list[tuple[str, str]] = []
    seen: set[str] = set()
    for value, layout in rule.mapping:
        key = value
        if first.is_numeric:
            try:
                key = discriminator_key(Decimal(value))
            except InvalidOperation as e:
                raise DiscriminatorError(
                    f"discriminator value '{value}' is not numeric like {rule.field}"
                ) from e
        else:
            key = value.rstrip(" ")
        if key in seen:
            raise DiscriminatorError(f"discriminator value '{value}' is mapped twice")
        seen.add(key)
        normalized.append((key, layout))
    return rule._replace(mapping=tuple(normalized))


def discriminator_field(schema: CopybookSchema) -> FieldSpec:
    if schema.discriminator is None:
        raise MissingDiscriminator(
            f"schema {schema.name} has {len(schema.layouts)} layouts and no discriminator rule"
        )
    return schema.declarations(schema.discriminator.field)[0]


def select_layout(
    schema: CopybookSchema,
    record: bytes,
    encoding: str = "ebcdic",
    codepage: object | None = None,
) -> str:
    """Name of the layout a record uses."""
    if len(schema.layouts) == 1:
        return schema.layouts[0].name
    spec = discriminator_field(schema)
    from mf_codec import decode_field

    value = decode_field(record, spec, encoding, codepage=codepage)
    key = discriminator_key(value)
    assert schema.discriminator is not None
    layout = schema.discriminator.layout_for(key)
    if layout is None:
        raise NoMatchingLayout(
            f"no layout for {spec.name}='{key}'", field=spec.name, value=key
        )
    return layout


def format_copybook(schema: CopybookSchema) -> str:
    """Render the schema back to copybook text in the supported subset."""
    lines: list[str] = []

    def emit(item: DataItem, depth: int) -> None:
        parts = [f"{item.level:02d}", item.name]
        if item.redefines:
            parts += ["REDEFINES", item.redefines]
        if item.picture is not None:
            parts += ["PIC", item.picture.render()]
        if item.usage is not None:
            parts.append(str(item.usage))
        if item.occurs:
            parts += ["OCCURS", str(item.occurs), "TIMES"]
        lines.append("    " * depth + " ".join(parts) + ".")
        for child in item.children:
            emit(child, depth + 1)

    for item in schema.items:
        emit(item, 0)
    return "\n".join(lines) + "\n"


def schema_fingerprint(schema: CopybookSchema) -> str:
    """SHA-256 over the canonical copybook text and discriminator rule."""
    digest = hashlib.sha256()
    digest.update(format_copybook(schema).encode("ascii"))
    rule = schema.discriminator
    if rule is not None:
        digest.update(f"\nDISCRIMINATOR {rule.field} DEFAULT {rule.default}\n".encode())
        for value, layout in rule.mapping:
            digest.update(f"{value}={layout}\n".encode())
    return digest.hexdigest()


def format_field_table(schema: CopybookSchema) -> str:
    """Field table printed by `copybook parse`."""
    header = (
        f"{'NAME':<30} {'LVL':>3} {'OFFSET':>6} {'LENGTH':>6} {'CATEGORY':<15} "
        f"{'DIGITS':>6} {'SCALE':>5} {'SIGNED':<6} LAYOUT"
    )
    rows = [header, "-" * len(header)]
    for layout in schema.layouts:
        for spec in layout.fields:
            rows.append(
                f"{spec.name:<30} {spec.level:>3} {spec.offset:>6} {spec.length:>6} "
                f"{spec.category:<15} {spec.digits:>6} {spec.scale:>5} "
                f"{'yes' if spec.signed else 'no':<6} {layout.name}"
            )
    rows.append("")
    rows.append(
        f"{schema.name}: {len(schema.layouts)} layout(s), total length {schema.total_length}"
    )
    return "\n".join(rows)


def _cmd_parse(args: argparse.Namespace) -> int:
    from mf_config import schema_from_args

    schema = schema_from_args(args, path=args.file)
    assert schema is not None
    print(format_field_table(schema))
    return 0


def _cmd_format(args: argparse.Namespace) -> int:
    schema = load_copybook(args.file)
    sys.stdout.write(format_copybook(schema))
    return 0


def build_parser() -> argparse.ArgumentParser:
    from mf_config import add_dataset_arguments
    from mf_console import add_logging_arguments

    parser = argparse.ArgumentParser(
        prog="mfkit copybook",
        description="Parse COBOL copybooks into record layouts with resolved offsets",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Print the field table of a copybook
  mfkit copybook parse customer.cpy

  # Apply the discriminator from a dataset configuration
  mfkit copybook parse customer.cpy --config customer.yaml

  # Pretty-print the supported subset
  mfkit copybook format customer.cpy
        """,
    )
    add_logging_arguments(parser)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    parse = commands.add_parser("parse", help="print the field table of a copybook")
    parse.add_argument("file", help="copybook file")
    add_dataset_arguments(parse, schema=False, physical=False)
    parse.set_defaults(handler=_cmd_parse)

    fmt = commands.add_parser("format", help="pretty-print the copybook")
    fmt.add_argument("file", help="copybook file")
    fmt.set_defaults(handler=_cmd_format)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point for `mfkit copybook`."""
    from mf_console import run_cli

    return run_cli(build_parser(), argv)


if __name__ == "__main__":
    sys.exit(main())
