#!/usr/bin/env python3
"""
Generate the EBCDIC billing extract used by the parallel-run demo.

Records are fixed length (see billing.cpy) and seeded, so every run of the
plan sees byte-identical input. --incident appends one account that is 147
days late, past what the credit record's 2-digit day field can hold.
"""

import argparse
import random
import sys
from decimal import Decimal
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from mf_codec import Encoding, encode_record  # noqa: E402
from mf_copybook import load_copybook  # noqa: E402
from mf_recio import RecordFileSpec, RecordFormat, write_records  # noqa: E402

HERE = Path(__file__).resolve().parent
FIRST_NAMES = ["ALVAREZ", "BRENNAN", "CHOWDHURY", "DUBOIS", "EKSTROM", "FERREIRA", "GALLAGHER"]
INCIDENT_DAYS = 147


def billing_records(count: int, seed: int, incident: bool) -> list[dict[str, object]]:
    rng = random.Random(seed)
    rows: list[dict[str, object]] = []
    for index in range(count):
        rows.append(
            {
                "BILL-ACCOUNT": Decimal(4_000_000_000 + index * 37),
                "BILL-NAME": f"{rng.choice(FIRST_NAMES)} {index:05d}",
                "BILL-DAYS-LATE": Decimal(rng.choice([0, 0, rng.randint(1, 99)])),
                "BILL-BALANCE": Decimal(rng.randint(-50_000, 2_500_000)).scaleb(-2),
                "BILL-RATE": Decimal(rng.randint(100, 2_500)).scaleb(-4),
            }
        )
    if incident:
        rows.append(
            {
                "BILL-ACCOUNT": Decimal(4_000_000_000 + count * 37),
                "BILL-NAME": "LATE PAYER 147",
                "BILL-DAYS-LATE": Decimal(INCIDENT_DAYS),
                "BILL-BALANCE": Decimal("1234.56"),
                "BILL-RATE": Decimal("0.0150"),
            }
        )
    return rows


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Write the demo billing extract")
    parser.add_argument("--records", type=int, default=1000, help="number of accounts")
    parser.add_argument("--seed", type=int, default=2024, help="random seed")
    parser.add_argument("--incident", action="store_true", help="append a 147-day-late account")
    parser.add_argument("--output", required=True, help="output record file")
    args = parser.parse_args(argv)

    layout = load_copybook(HERE / "billing.cpy").layouts[0]
    spec = RecordFileSpec(RecordFormat.FIXED, layout.length, Encoding.EBCDIC)
    records = (
        encode_record(values, layout, Encoding.EBCDIC)  # type: ignore[arg-type]
        for values in billing_records(args.records, args.seed, args.incident)
    )
    count = write_records(args.output, spec, records)
    print(f"✅ Wrote {count} billing records to {args.output}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
