"""Convert a copy of the sparrow fledgling data into the package CSV schema.

The data are not redistributed here. Pass a local file, or a URL you have
access to, holding the table with a count column (``fledged`` or ``y``) and an
``age`` column, whitespace- or comma-separated with a header row. The output
has columns ``y,const,age,age2`` and goes to ``data/sparrow.csv`` by default,
where the acceptance suite looks for it (or set ``IDENTLINK_SPARROW_CSV``).

    python scripts/fetch_sparrow.py path/or/url/to/yX.sparrow
"""

import argparse
import io
import sys
import urllib.request
from pathlib import Path

import numpy as np

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "data" / "sparrow.csv"


def load_table(source: str) -> str:
    if "://" in source:
        with urllib.request.urlopen(source, timeout=30) as resp:
            return resp.read().decode()
    return Path(source).read_text()


def convert(text: str) -> np.ndarray:
    delim = "," if "," in text.splitlines()[0] else None
    table = np.genfromtxt(io.StringIO(text), names=True, delimiter=delim, dtype=float)
    names = [n.lower() for n in table.dtype.names]
    count_col = next((n for n in ("fledged", "y") if n in names), None)
    if count_col is None or "age" not in names:
        raise ValueError(f"need a 'fledged' or 'y' column and an 'age' column, found {names}")
    cols = dict(zip(names, table.dtype.names))
    y = table[cols[count_col]]
    age = table[cols["age"]]
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise ValueError("counts must be non-negative integers")
    return np.column_stack([y, np.ones_like(age), age, age**2])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", help="local path or URL of the sparrow table")
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args(argv)
    rows = convert(load_table(args.source))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write("y,const,age,age2\n")
        for y, c, a, a2 in rows:
            fh.write(f"{int(y)},{c:g},{a:g},{a2:g}\n")
    ages, counts = np.unique(rows[:, 2], return_counts=True)
    per_age = ", ".join(f"{int(a)}: {int(c)}" for a, c in zip(ages, counts))
    print(f"wrote {args.out}: n = {rows.shape[0]}, birds per age {per_age}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
