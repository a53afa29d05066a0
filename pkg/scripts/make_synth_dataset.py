#!/usr/bin/env python3
"""Emit a synthetic speckle-blob dataset as a dataset directory.

Usage: python scripts/make_synth_dataset.py --out data/synth40 --n 40 --seed 2026
"""

import argparse

from scefis.data import save_dataset, synthetic_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="dataset directory to create")
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--height", type=int, default=96)
    ap.add_argument("--width", type=int, default=96)
    args = ap.parse_args()
    ds = synthetic_dataset(args.n, seed=args.seed, size=(args.height, args.width))
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} images to {args.out}")


if __name__ == "__main__":
    main()
