#!/usr/bin/env python3
"""Download the S&P 500 daily-close fixture used by the historical-fit test.

Fetches daily ^SPX closes from stooq.com, keeps the last 1000 trading days up
to and including 2007-06-29 (roughly July 2003 through June 2007), and writes
them to data/sp500_2003_2007.csv as `date,close` rows. Prints the SHA-256 of
the written file so it can be compared against a previously recorded value.

The historical-fit acceptance test skips itself with a warning when the
fixture file is absent, so running this script is optional.
"""

import argparse
import csv
import hashlib
import io
import sys
import urllib.request
from pathlib import Path

STOOQ_URL = "https://stooq.com/q/d/l/?s=%5Espx&d1=20030101&d2=20070630&i=d"
END_DATE = "2007-06-29"
ROWS = 1000
DEFAULT_OUT = Path(__file__).resolve().parent.parent / "data" / "sp500_2003_2007.csv"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    parser.add_argument("--url", default=STOOQ_URL)
    args = parser.parse_args()

    print(f"fetching {args.url}", file=sys.stderr)
    with urllib.request.urlopen(args.url, timeout=60) as resp:
        text = resp.read().decode("utf-8")

    rows = []
    for record in csv.DictReader(io.StringIO(text)):
        date = record.get("Date", "").strip()
        close = record.get("Close", "").strip()
        if not date or not close or date > END_DATE:
            continue
        rows.append((date, float(close)))
    rows.sort()
    if len(rows) < ROWS:
        print(f"error: only {len(rows)} usable rows, need {ROWS}", file=sys.stderr)
        return 1
    rows = rows[-ROWS:]

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        writer.writerows(rows)

    digest = hashlib.sha256(args.out.read_bytes()).hexdigest()
    print(f"wrote {args.out} ({len(rows)} rows, {rows[0][0]}..{rows[-1][0]})")
    print(f"sha256 {digest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
