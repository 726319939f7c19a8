#!/usr/bin/env python3
"""Convert an ODDS .mat file (X, y) to a CSV with a trailing `label` column."""
import argparse
import csv

from scipy.io import loadmat


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("mat", help="input .mat file, e.g. satimage-2.mat")
    parser.add_argument("out", help="output CSV path")
    args = parser.parse_args()

    data = loadmat(args.mat)
    x = data["X"]
    y = data["y"].ravel().astype(int)
    with open(args.out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"x{j}" for j in range(x.shape[1])] + ["label"])
        for row, label in zip(x, y):
            writer.writerow([repr(float(v)) for v in row] + [label])
    print(f"n={x.shape[0]} d={x.shape[1]} positives={int(y.sum())}")


if __name__ == "__main__":
    main()
