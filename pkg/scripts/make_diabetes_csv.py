"""Write the bundled diabetes CSV from scikit-learn's copy of the dataset.

Run once; the package only reads the resulting file, so scikit-learn is not
a runtime dependency.
"""

import argparse
from pathlib import Path

from sklearn.datasets import load_diabetes

from shapattr.core import Dataset, write_dataset_csv

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "shapattr" / "data" / "diabetes.csv"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()
    bunch = load_diabetes()
    write_dataset_csv(Dataset(tuple(bunch.feature_names), bunch.data), args.out)
    print(f"wrote {bunch.data.shape[0]} rows to {args.out}")


if __name__ == "__main__":
    main()
