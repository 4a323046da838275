"""K_a = 4 users at R_sum = 1: (R_c = 1/4, d_r = 1) against (R_c = 1/2, d_r = 2).

Writes one CSV per configuration and prints both curves.

    python scripts/repetition_ordering.py --out results/ --trials 500
"""
import argparse
import logging
from dataclasses import replace
from pathlib import Path

from polaridma.cli import parse_ebn0
from polaridma.harness import SimConfig, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--ebn0", type=parse_ebn0, default=(3.0, 5.0, 7.0))
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--N", type=int, default=512)
    ap.add_argument("--design", default="5g")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    base = SimConfig(users=4, N=args.N, rc=0.25, ebn0=args.ebn0, trials=args.trials,
                     max_block_errors=args.trials, it_mud=10, it_bp=20, reset_fg=True,
                     design=args.design, seed=args.seed)
    for rc, dr in ((0.25, 1), (0.5, 2)):
        cfg = replace(base, rc=rc, dr=dr, k=None, out=str(out / f"ka4_rc{rc:g}_dr{dr}.csv"))
        for r in run_sweep(cfg):
            lo, hi = r.wilson()
            print(f"R_c={rc:g} d_r={dr}  {r.ebn0_db:g} dB  BLER {r.bler:.4f} [{lo:.4f}, {hi:.4f}]  "
                  f"({r.block_errors}/{r.trials})")


if __name__ == "__main__":
    main()
