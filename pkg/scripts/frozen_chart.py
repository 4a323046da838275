"""Frozen channel charts of a rate-1/2 length-1024 code and of its repetition-equivalent.

The equivalent of a length-512 code repeated twice has length 1024 with the
first 512 bit-channels frozen. Both charts are 16 x 64, sorted by Bhattacharyya
parameter, and written as CSV and PGM.

    python scripts/frozen_chart.py --out results/
"""
import argparse
from pathlib import Path

from polaridma.harness import emit_fcc
from polaridma.polar_code import build_equivalent_code, construct_bhattacharyya


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--z0", type=float, default=0.5)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    plain, order = construct_bhattacharyya(1024, 256, args.z0)
    short, _ = construct_bhattacharyya(512, 256, args.z0)
    equiv = build_equivalent_code(short, 2)
    for name, A in (("plain_1024_256", plain), ("equiv_512x2_256", equiv)):
        m = emit_fcc(A, order, 64, 16, out / f"fcc_{name}.csv", out / f"fcc_{name}.pgm")
        print(f"{name}: {int(m.sum())} frozen of {m.size}, written to {out}/fcc_{name}.csv")


if __name__ == "__main__":
    main()
