"""Regenerate the CSV files shipped in src/identlink/data/."""

from pathlib import Path

from identlink.datasets import drift_test_data, synthetic_sparrow
from identlink.io import write_poisson_csv

OUT = Path(__file__).resolve().parents[1] / "src" / "identlink" / "data"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    write_poisson_csv(synthetic_sparrow(), OUT / "sparrow_synthetic.csv",
                      names=["const", "age", "age2"], with_exposure=False)
    write_poisson_csv(drift_test_data(), OUT / "drift_design.csv",
                      names=["const", "x1", "x2"], with_exposure=False)
    print(f"wrote bundled data to {OUT}")


if __name__ == "__main__":
    main()
