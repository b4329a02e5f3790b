"""Identity-link vs exponential-link fit on the sparrow data (or its look-alike).

Burn 5000, keep 5000, prior N(0, 100 I) for both models; writes the paired
density SVG and the per-age predictive means to ``--out-dir``.
"""

import argparse
import os
from pathlib import Path

from identlink.cli import main as cli_main
from identlink.datasets import bundled_path

REAL = Path(__file__).resolve().parents[1] / "data" / "sparrow.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", help="sparrow CSV (default: fetched copy if present, else the look-alike)")
    ap.add_argument("--out-dir", default="out/sparrow")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    data = args.data or os.environ.get("IDENTLINK_SPARROW_CSV")
    if data is None:
        data = REAL if REAL.is_file() else bundled_path("sparrow_synthetic.csv")
    print(f"data: {data}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = out / "sparrow.cfg"
    cfg.write_text(f"model = poisson-lambda\ndata = {Path(data).resolve()}\nprior_mean = 0\n"
                   "prior_precision = 0.01\nburn_in = 5000\nkeep = 5000\n"
                   f"seed = {args.seed}\n")
    return cli_main(["compare", "--config", str(cfg), "--label-column", "age", "--out-dir", str(out)])


if __name__ == "__main__":
    raise SystemExit(main())
