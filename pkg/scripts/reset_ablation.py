"""Reset vs persistent BP factor graph inside the 2-user receiver, shared randomness.

    python scripts/reset_ablation.py --out results/ablation.csv --trials 1000
"""
import argparse
import logging

from polaridma.cli import parse_ebn0
from polaridma.harness import SimConfig, run_reset_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results/ablation.csv")
    ap.add_argument("--ebn0", type=parse_ebn0, default=(2.0, 3.0, 4.0))
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = SimConfig(users=2, N=512, rc=0.25, ebn0=args.ebn0, trials=args.trials,
                    max_block_errors=args.trials, it_mud=10, design="5g", seed=args.seed, out=args.out)
    reset, persist = run_reset_ablation(cfg)
    for a, b in zip(reset, persist):
        (alo, ahi), (blo, bhi) = a.wilson(), b.wilson()
        print(f"{a.ebn0_db:g} dB  reset {a.bler:.4f} [{alo:.4f}, {ahi:.4f}]  "
              f"persistent {b.bler:.4f} [{blo:.4f}, {bhi:.4f}]")


if __name__ == "__main__":
    main()
