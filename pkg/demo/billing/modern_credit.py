#!/usr/bin/env python3
"""
Billing credit step, modernized: whole-record decode, a pure credit rule
and whole-record encode with an explicit overflow policy.

With --overflow strict a late-day count that does not fit the credit
record stops the run instead of being truncated.
"""

import argparse
import sys
from collections.abc import Iterator
from decimal import ROUND_DOWN, Decimal
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from mf_codec import Encoding, FieldValue, OverflowPolicy, decode_record, encode_record  # noqa: E402
from mf_copybook import load_copybook  # noqa: E402
from mf_recio import RecordFileSpec, RecordFormat, read_records, write_records  # noqa: E402

HERE = Path(__file__).resolve().parent


def credit_for(billing: dict[str, FieldValue]) -> dict[str, FieldValue]:
    days = Decimal(billing["BILL-DAYS-LATE"])
    balance = Decimal(billing["BILL-BALANCE"])
    rate = Decimal(billing["BILL-RATE"])
    if not days:
        amount, status = Decimal(0), "N"
    elif balance < 0:
        amount, status = Decimal(0), "X"
    else:
        amount = (balance * rate * days / 365).quantize(Decimal("0.01"), rounding=ROUND_DOWN)
        status = "C"
    return {
        "CR-ACCOUNT": billing["BILL-ACCOUNT"],
        "CR-DAYS": days,
        "CR-AMOUNT": amount,
        "CR-STATUS": status,
    }


def _cmd_run(args: argparse.Namespace) -> int:
    billing_schema = load_copybook(HERE / "billing.cpy")
    credit_layout = load_copybook(HERE / "credit.cpy").layouts[0]
    in_spec = RecordFileSpec(RecordFormat.FIXED, billing_schema.total_length, Encoding.EBCDIC)
    out_spec = RecordFileSpec(RecordFormat.FIXED, credit_layout.length, Encoding.EBCDIC)

    def credits() -> Iterator[bytes]:
        for record in read_records(args.input, in_spec):
            decoded = decode_record(record, billing_schema, Encoding.EBCDIC)
            yield encode_record(
                credit_for(decoded.values), credit_layout, Encoding.EBCDIC, args.overflow
            )

    count = write_records(args.output, out_spec, credits())
    print(f"✅ modern credit step wrote {count} records", file=sys.stderr)
    return 0


def main(argv: list[str] | None = None) -> int:
    from mf_console import run_cli

    parser = argparse.ArgumentParser(description="Modernized billing credit step")
    parser.add_argument("input", help="billing extract")
    parser.add_argument("output", help="credit file to write")
    parser.add_argument(
        "--overflow",
        choices=[p.value for p in OverflowPolicy],
        default=OverflowPolicy.LEGACY_TRUNCATE.value,
        help="numeric overflow policy for the credit record",
    )
    parser.set_defaults(handler=_cmd_run)
    return run_cli(parser, argv)


if __name__ == "__main__":
    sys.exit(main())
