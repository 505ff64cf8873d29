"""
Unit tests for mf_copybook.py.

Covers offsets and storage lengths, REDEFINES layouts, OCCURS expansion,
rejected features with their positions, discriminators and fingerprints.
"""

import pytest

from mf_copybook import (
    Category,
    DiscriminatorRule,
    Usage,
    format_copybook,
    format_field_table,
    is_fixed_format,
    load_copybook,
    main,
    parse_copybook,
    parse_picture,
    schema_fingerprint,
    select_layout,
    storage_length,
)
from mf_errors import (
    CopybookSyntaxError,
    DiscriminatorError,
    MissingDiscriminator,
    NoMatchingLayout,
    UnsupportedFeature,
)

CUSTOMER = """
      * Customer master record
       01 CUSTOMER-REC.
          05 CUST-ID          PIC 9(8).
          05 CUST-NAME        PIC X(30).
          05 CUST-BALANCE     PIC S9(7)V99 COMP-3.
          05 CUST-VISITS      PIC 9(4) COMP.
          05 FILLER           PIC X(5).
"""

ORDERS = """
01 ORDER-REC.
   05 ORD-TYPE        PIC X.
   05 ORD-BODY.
      10 ORD-AMOUNT   PIC S9(5)V99 COMP-3.
      10 ORD-QTY      PIC 9(3).
   05 RET-BODY REDEFINES ORD-BODY.
      10 RET-REASON   PIC X(8).
   05 ORD-TRAILER     PIC X(2).
"""


class TestPictures:
    """Test suite for PICTURE parsing and storage sizes."""

    def test_alphanumeric(self):
        """Test X(n) pictures count characters."""
        pic = parse_picture("X(12)")
        assert pic.alphanumeric
        assert pic.size == 12

    def test_signed_scaled_numeric(self):
        """Test S9(7)V99 yields nine digits with scale two."""
        pic = parse_picture("S9(7)V99")
        assert (pic.digits, pic.scale, pic.signed) == (9, 2, True)

    def test_render_round_trips(self):
        """Test the canonical rendering parses back to the same picture."""
        pic = parse_picture("S999V9(3)")
        assert parse_picture(pic.render()) == pic

    def test_editing_picture_rejected(self):
        """Test editing symbols raise UnsupportedFeature."""
        with pytest.raises(UnsupportedFeature, match="editing"):
            parse_picture("ZZ9.99")

    def test_scaling_position_rejected(self):
        """Test P pictures raise UnsupportedFeature."""
        with pytest.raises(UnsupportedFeature, match="scaling"):
            parse_picture("9(3)PP")

    def test_too_many_digits(self):
        """Test pictures wider than 18 digits are refused."""
        with pytest.raises(UnsupportedFeature, match="18 digits"):
            parse_picture("9(19)")

    def test_double_point(self):
        """Test two V symbols is a syntax error."""
        with pytest.raises(CopybookSyntaxError):
            parse_picture("9V9V9")

    @pytest.mark.parametrize(
        ("category", "digits", "expected"),
        [
            (Category.ZONED, 7, 7),
            (Category.PACKED, 9, 5),
            (Category.PACKED, 4, 3),
            (Category.BINARY, 4, 2),
            (Category.BINARY, 5, 4),
            (Category.BINARY, 9, 4),
            (Category.BINARY, 10, 8),
            (Category.BINARY, 18, 8),
        ],
    )
    def test_storage_length(self, category, digits, expected):
        """Test storage length per category and digit count."""
        assert storage_length(category, digits) == expected


class TestOffsets:
    """Test suite for resolved field offsets."""

    def test_customer_offsets(self):
        """Test offsets and lengths of a flat record."""
        schema = parse_copybook(CUSTOMER)
        layout = schema.layout("CUSTOMER-REC")
        assert layout.field("CUST-ID")[2:4] == (0, 8)
        assert layout.field("CUST-NAME")[2:4] == (8, 30)
        balance = layout.field("CUST-BALANCE")
        assert (balance.offset, balance.length, balance.category) == (38, 5, Category.PACKED)
        visits = layout.field("CUST-VISITS")
        assert (visits.offset, visits.length, visits.category) == (43, 2, Category.BINARY)
        assert layout.field("FILLER-1").offset == 45
        assert schema.total_length == 50

    def test_fields_do_not_overlap(self):
        """Test consecutive fields tile the record."""
        layout = parse_copybook(CUSTOMER).layouts[0]
        for left, right in zip(layout.fields, layout.fields[1:], strict=False):
            assert left.end == right.offset

    def test_schema_named_after_record(self):
        """Test schema name defaults to the 01 record name."""
        assert parse_copybook(CUSTOMER).name == "CUSTOMER-REC"

    def test_group_usage_inherited(self):
        """Test USAGE on a group applies to its elementary items."""
        schema = parse_copybook(
            "01 REC.\n   05 AMOUNTS COMP-3.\n      10 A PIC S9(5).\n      10 B PIC S9(3).\n"
        )
        layout = schema.layouts[0]
        assert layout.field("A").usage is Usage.COMP3
        assert layout.field("B").offset == 3
        assert schema.total_length == 5

    def test_occurs_expands_elements(self):
        """Test OCCURS creates subscripted fields at element offsets."""
        schema = parse_copybook(
            "01 REC.\n"
            "   05 ITEM OCCURS 3 TIMES.\n"
            "      10 ITEM-CODE PIC X(2).\n"
            "      10 ITEM-QTY  PIC 9(3).\n"
            "   05 TAIL PIC X.\n"
        )
        layout = schema.layouts[0]
        assert layout.field("ITEM-CODE(2)").offset == 5
        assert layout.field("ITEM-QTY(3)").offset == 12
        assert layout.field("ITEM-QTY(3)").occurs_index == (3,)
        assert layout.field("TAIL").offset == 15

    def test_nested_occurs(self):
        """Test nested OCCURS produce two-level subscripts."""
        schema = parse_copybook(
            "01 REC.\n   05 ROW OCCURS 2.\n      10 CELL PIC X OCCURS 3.\n"
        )
        layout = schema.layouts[0]
        assert layout.field("CELL(2,3)").offset == 5
        assert schema.total_length == 6

    def test_elementary_redefines_shares_offset(self):
        """Test an elementary REDEFINES stays in the same layout."""
        schema = parse_copybook(
            "01 REC.\n   05 DATE-NUM PIC 9(8).\n   05 DATE-TXT REDEFINES DATE-NUM PIC X(8).\n"
        )
        assert len(schema.layouts) == 1
        layout = schema.layouts[0]
        assert layout.field("DATE-NUM").offset == layout.field("DATE-TXT").offset == 0

    def test_fixed_format_sequence_area(self):
        """Test columns 1-6 are ignored when they hold sequence numbers."""
        text = (
            "000100 01 REC.\n"
            "000200*    comment line\n"
            "000300     05 A PIC X(3).\n"
        )
        schema = parse_copybook(text)
        assert schema.layouts[0].field("A").length == 3

    @pytest.mark.parametrize("indent", range(1, 7))
    def test_indented_free_format(self, indent):
        """Test entries indented by one to six spaces keep their level numbers."""
        pad = " " * indent
        schema = parse_copybook(f"01 REC.\n{pad}05 NAME PIC X(10).\n{pad}05 AMT PIC S9(5)V99 COMP-3.\n")
        layout = schema.layouts[0]
        assert layout.field("NAME").length == 10
        assert layout.field("AMT").offset == 10
        assert schema.total_length == 14

    def test_deep_indent_keeps_long_lines(self):
        """Test free-format lines past column 72 are not cut off."""
        text = "       01 REC.\n" + " " * 60 + "05 NAME PIC X(10).\n"
        assert not is_fixed_format(text)
        assert parse_copybook(text).layouts[0].field("NAME").length == 10

    def test_fixed_format_blank_sequence_lines(self):
        """Test numbered and unnumbered lines mix in one fixed-format file."""
        text = (
            "000100 01 REC.\n"
            "           05 A PIC X(3).\n"
            f"{'000300     05 B PIC 9(2).':<72}IDENT001\n"
        )
        assert is_fixed_format(text)
        schema = parse_copybook(text)
        assert schema.layouts[0].field("B").offset == 3
        assert schema.total_length == 5

    def test_fixed_format_columns(self):
        """Test positions in fixed-format errors count the sequence area."""
        with pytest.raises(CopybookSyntaxError) as info:
            parse_copybook("000100 01 REC.\n000200     05 B BOGUS.\n")
        assert info.value.line == 2
        assert info.value.column == 17

    def test_inline_comment(self):
        """Test *> starts an inline comment."""
        schema = parse_copybook("01 REC. *> record\n 05 A PIC 9(2). *> two digits\n")
        assert schema.total_length == 2

    def test_value_clause_ignored(self):
        """Test VALUE literals do not disturb storage."""
        schema = parse_copybook("01 REC.\n 05 A PIC X(4) VALUE 'AB. C'.\n 05 B PIC 9 VALUE 0.\n")
        assert schema.layouts[0].field("B").offset == 4

    def test_body_without_01(self):
        """Test a copybook starting below 01 gets a synthetic record."""
        schema = parse_copybook("05 A PIC X.\n05 B PIC X.\n", name="body")
        assert schema.name == "BODY"
        assert schema.total_length == 2


class TestLayouts:
    """Test suite for group REDEFINES layouts."""

    def test_group_redefines_split(self):
        """Test each alternative of a group REDEFINES is its own layout."""
        schema = parse_copybook(ORDERS)
        assert schema.layout_names == ["ORD-BODY", "RET-BODY"]
        assert schema.layout("ORD-BODY").field("ORD-QTY").offset == 5
        assert schema.layout("RET-BODY").field("RET-REASON").offset == 1

    def test_trailer_follows_widest_alternative(self):
        """Test items after a REDEFINES set start after the widest alternative."""
        schema = parse_copybook(ORDERS)
        assert schema.layout("ORD-BODY").field("ORD-TRAILER").offset == 9
        assert schema.layout("RET-BODY").field("ORD-TRAILER").offset == 9
        assert schema.total_length == 11

    def test_multiple_records(self):
        """Test several 01 records each become a layout."""
        schema = parse_copybook("01 HDR.\n 05 H PIC X(4).\n01 DTL.\n 05 D PIC X(9).\n")
        assert schema.layout_names == ["HDR", "DTL"]
        assert schema.total_length == 9

    def test_redefines_must_follow_target(self):
        """Test a REDEFINES that does not follow its target is rejected."""
        text = "01 REC.\n 05 A PIC X.\n 05 B PIC X.\n 05 C REDEFINES A PIC X.\n"
        with pytest.raises(CopybookSyntaxError, match="immediately follow"):
            parse_copybook(text)

    def test_group_redefines_inside_occurs_rejected(self):
        """Test group REDEFINES within OCCURS is unsupported."""
        text = (
            "01 REC.\n 05 T OCCURS 2.\n  10 G1.\n   15 A PIC X.\n"
            "  10 G2 REDEFINES G1.\n   15 B PIC X.\n"
        )
        with pytest.raises(UnsupportedFeature, match="inside OCCURS"):
            parse_copybook(text)


class TestRejections:
    """Test suite for loud rejection of unsupported copybooks."""

    @pytest.mark.parametrize(
        ("text", "fragment"),
        [
            ("01 REC.\n 05 N PIC 9.\n 05 T PIC X OCCURS 1 TO 5 DEPENDING ON N.\n", "variable OCCURS"),
            ("01 REC.\n 05 N PIC 9.\n 05 T PIC X OCCURS 5 DEPENDING ON N.\n", "DEPENDING"),
            ("01 REC.\n 05 A PIC S9(3) SIGN LEADING SEPARATE.\n", "SIGN"),
            ("01 REC.\n 05 A PIC 9(4) COMP SYNC.\n", "SYNCHRONIZED"),
            ("01 REC.\n 05 A PIC X.\n  88 IS-Y VALUE 'Y'.\n", "level 88"),
            ("77 COUNTER PIC 9.\n", "level 77"),
            ("01 REC.\n 05 A COMP-1.\n", "COMP-1"),
            ("01 REC.\n 05 A PIC N(4).\n", "national"),
        ],
    )
    def test_unsupported(self, text, fragment):
        """Test unsupported features name themselves."""
        with pytest.raises(UnsupportedFeature, match=fragment):
            parse_copybook(text)

    def test_error_position(self):
        """Test syntax errors carry line and column."""
        with pytest.raises(CopybookSyntaxError) as info:
            parse_copybook("01 REC.\n   05 A PIC X.\n   05 B BOGUS.\n")
        assert info.value.line == 3
        assert info.value.column == 9
        assert str(info.value).startswith("line 3, column 9:")

    def test_missing_period(self):
        """Test an unterminated entry is rejected."""
        with pytest.raises(CopybookSyntaxError, match="period"):
            parse_copybook("01 REC.\n 05 A PIC X")

    def test_elementary_needs_picture(self):
        """Test an elementary item without PIC is rejected."""
        with pytest.raises(CopybookSyntaxError, match="PICTURE"):
            parse_copybook("01 REC.\n 05 A.\n")

    def test_comp_on_alphanumeric(self):
        """Test COMP on an X picture is rejected."""
        with pytest.raises(CopybookSyntaxError, match="cannot be"):
            parse_copybook("01 REC.\n 05 A PIC X(2) COMP.\n")

    def test_empty_copybook(self):
        """Test a copybook with only comments is rejected."""
        with pytest.raises(CopybookSyntaxError, match="no data description"):
            parse_copybook("      * nothing here\n")


class TestDiscriminator:
    """Test suite for discriminator rules and layout selection."""

    @staticmethod
    def bound_schema(default=None):
        rule = DiscriminatorRule.build("ORD-TYPE", {"O": "ORD-BODY", "R": "RET-BODY"}, default)
        return parse_copybook(ORDERS).with_discriminator(rule)

    def test_select_by_value(self):
        """Test layouts follow the discriminator field value."""
        schema = self.bound_schema()
        assert select_layout(schema, "R".encode("cp037") + bytes(10)) == "RET-BODY"
        assert select_layout(schema, "O".encode("cp037") + bytes(10)) == "ORD-BODY"

    def test_select_ascii(self):
        """Test selection works on ASCII records."""
        schema = self.bound_schema()
        assert select_layout(schema, b"R" + bytes(10), "ascii") == "RET-BODY"

    def test_no_matching_layout(self):
        """Test an unmapped value raises NoMatchingLayout."""
        schema = self.bound_schema()
        with pytest.raises(NoMatchingLayout):
            select_layout(schema, "Z".encode("cp037") + bytes(10))

    def test_default_layout(self):
        """Test the default layout catches unmapped values."""
        schema = self.bound_schema(default="ORD-BODY")
        assert select_layout(schema, "Z".encode("cp037") + bytes(10)) == "ORD-BODY"

    def test_missing_discriminator(self):
        """Test multi-layout selection without a rule raises MissingDiscriminator."""
        with pytest.raises(MissingDiscriminator):
            select_layout(parse_copybook(ORDERS), bytes(11))

    def test_single_layout_needs_no_rule(self):
        """Test single-layout schemas always select their only layout."""
        assert select_layout(parse_copybook(CUSTOMER), bytes(50)) == "CUSTOMER-REC"

    def test_unknown_layout_in_rule(self):
        """Test rules naming unknown layouts are rejected."""
        rule = DiscriminatorRule.build("ORD-TYPE", {"O": "NOPE"})
        with pytest.raises(DiscriminatorError, match="unknown layout"):
            parse_copybook(ORDERS).with_discriminator(rule)

    def test_undeclared_field(self):
        """Test rules on undeclared fields are rejected."""
        rule = DiscriminatorRule.build("NOPE", {"O": "ORD-BODY"})
        with pytest.raises(DiscriminatorError, match="not declared"):
            parse_copybook(ORDERS).with_discriminator(rule)

    def test_numeric_values_normalized(self):
        """Test numeric discriminator values compare numerically."""
        text = (
            "01 REC.\n 05 KIND PIC 9(3).\n 05 A-BODY.\n  10 A PIC X.\n"
            " 05 B-BODY REDEFINES A-BODY.\n  10 B PIC X.\n"
        )
        rule = DiscriminatorRule.build("KIND", {"1": "A-BODY", "002": "B-BODY"})
        schema = parse_copybook(text).with_discriminator(rule)
        assert select_layout(schema, "002X".encode("cp037")) == "B-BODY"
        assert select_layout(schema, "001X".encode("cp037")) == "A-BODY"

    def test_value_mapped_twice(self):
        """Test duplicate values after normalization are rejected."""
        text = (
            "01 REC.\n 05 KIND PIC 9(3).\n 05 A-BODY.\n  10 A PIC X.\n"
            " 05 B-BODY REDEFINES A-BODY.\n  10 B PIC X.\n"
        )
        rule = DiscriminatorRule.build("KIND", [("1", "A-BODY"), ("001", "B-BODY")])
        with pytest.raises(DiscriminatorError, match="mapped twice"):
            parse_copybook(text).with_discriminator(rule)


class TestFingerprintAndFormat:
    """Test suite for canonical formatting and fingerprints."""

    def test_format_reparses_identically(self):
        """Test formatted text parses to the same layouts."""
        schema = parse_copybook(ORDERS)
        again = parse_copybook(format_copybook(schema))
        assert again.layouts == schema.layouts

    def test_fingerprint_ignores_whitespace(self):
        """Test layout-neutral edits keep the fingerprint."""
        spaced = ORDERS.replace("   05", "          05")
        assert schema_fingerprint(parse_copybook(ORDERS)) == schema_fingerprint(parse_copybook(spaced))

    def test_fingerprint_tracks_layout(self):
        """Test a changed picture changes the fingerprint."""
        changed = ORDERS.replace("PIC X(8)", "PIC X(9)")
        assert schema_fingerprint(parse_copybook(ORDERS)) != schema_fingerprint(parse_copybook(changed))

    def test_fingerprint_tracks_discriminator(self):
        """Test binding a discriminator changes the fingerprint."""
        schema = parse_copybook(ORDERS)
        rule = DiscriminatorRule.build("ORD-TYPE", {"O": "ORD-BODY", "R": "RET-BODY"})
        assert schema_fingerprint(schema) != schema_fingerprint(schema.with_discriminator(rule))

    def test_field_table(self):
        """Test the field table lists every layout."""
        table = format_field_table(parse_copybook(ORDERS))
        assert "RET-REASON" in table
        assert "2 layout(s), total length 11" in table


class TestMain:
    """Test suite for the copybook command line."""

    def test_parse_command(self, tmp_path, capsys):
        """Test `parse` prints the field table."""
        path = tmp_path / "customer.cpy"
        path.write_text(CUSTOMER)
        assert main(["parse", str(path)]) == 0
        assert "CUST-BALANCE" in capsys.readouterr().out

    def test_load_copybook(self, tmp_path):
        """Test load_copybook reads files from disk."""
        path = tmp_path / "customer.cpy"
        path.write_text(CUSTOMER)
        assert load_copybook(path).total_length == 50

    def test_syntax_error_exit_code(self, tmp_path):
        """Test copybook errors exit with the usage code."""
        path = tmp_path / "bad.cpy"
        path.write_text("01 REC.\n 05 A PIC X OCCURS 2 DEPENDING ON B.\n")
        assert main(["parse", str(path)]) == 2

    def test_missing_file(self, tmp_path):
        """Test a missing copybook exits with the I/O code."""
        assert main(["parse", str(tmp_path / "absent.cpy")]) == 3
