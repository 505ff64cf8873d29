#!/usr/bin/env python3
"""
Billing credit step as the translated batch program computes it.

Reads the billing extract record by record, moves fields one at a time
into the credit record and, like the original MOVE into a PIC 9(2) field,
silently keeps only the low two digits of the late-day count.
"""

import argparse
import sys
from decimal import ROUND_DOWN, Decimal
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from mf_codec import Encoding, OverflowPolicy, decode_field, encode_field  # noqa: E402
from mf_copybook import load_copybook  # noqa: E402
from mf_recio import RecordFileSpec, RecordFormat, read_records, write_records  # noqa: E402

HERE = Path(__file__).resolve().parent
CENT = Decimal("0.01")


def credit_step(input_path: str, output_path: str) -> int:
    billing = load_copybook(HERE / "billing.cpy").layouts[0]
    credit = load_copybook(HERE / "credit.cpy").layouts[0]
    in_spec = RecordFileSpec(RecordFormat.FIXED, billing.length, Encoding.EBCDIC)
    out_spec = RecordFileSpec(RecordFormat.FIXED, credit.length, Encoding.EBCDIC)

    def move(target: bytearray, name: str, value: object) -> None:
        field = credit.field(name)
        target[field.offset : field.end] = encode_field(
            value, field, Encoding.EBCDIC, OverflowPolicy.LEGACY_TRUNCATE  # type: ignore[arg-type]
        )

    def output() -> list[bytes]:
        records = []
        for record in read_records(input_path, in_spec):
            account = decode_field(record, billing.field("BILL-ACCOUNT"))
            days = decode_field(record, billing.field("BILL-DAYS-LATE"))
            balance = decode_field(record, billing.field("BILL-BALANCE"))
            rate = decode_field(record, billing.field("BILL-RATE"))
            assert isinstance(days, Decimal) and isinstance(balance, Decimal)
            assert isinstance(rate, Decimal)

            out = bytearray(credit.length)
            move(out, "CR-ACCOUNT", account)
            move(out, "CR-DAYS", days)
            if days == 0:
                move(out, "CR-AMOUNT", Decimal(0))
                move(out, "CR-STATUS", "N")
            elif balance < 0:
                move(out, "CR-AMOUNT", Decimal(0))
                move(out, "CR-STATUS", "X")
            else:
                amount = (balance * rate * days / 365).quantize(CENT, rounding=ROUND_DOWN)
                move(out, "CR-AMOUNT", amount)
                move(out, "CR-STATUS", "C")
            records.append(bytes(out))
        return records

    return write_records(output_path, out_spec, output())


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Legacy billing credit step")
    parser.add_argument("input", help="billing extract")
    parser.add_argument("output", help="credit file to write")
    args = parser.parse_args(argv)
    count = credit_step(args.input, args.output)
    print(f"✅ legacy credit step wrote {count} records", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
