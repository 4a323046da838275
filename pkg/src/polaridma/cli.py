"""Command line entry point: ``polaridma {sweep,fcc,equiv,ablate-reset}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .harness import SimConfig
from .polar_code import build_equivalent_code, construct_bhattacharyya

_INT = {"users", "N", "k", "dr", "trials", "max_block_errors", "it_mud", "it_bp", "q", "seed",
        "ablate_it_bp_reset", "ablate_it_bp_persist", "batch"}
_FLOAT = {"rc", "z0", "llr_max"}
_ONOFF = {"reset_fg"}


def parse_ebn0(text: str) -> tuple[float, ...]:
    """``a:b:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("Eb/N0 step must be positive")
        count = int(np.floor((b - a) / step + 1e-9)) + 1
        return tuple(round(a + i * step, 10) for i in range(count))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _convert(key: str, value: str):
    if key in _INT:
        return int(value)
    if key in _FLOAT:
        return float(value)
    if key in _ONOFF:
        if value.lower() in ("on", "true", "1", "yes"):
            return True
        if value.lower() in ("off", "false", "0", "no"):
            return False
        raise ValueError(f"{key} must be on/off, got {value!r}")
    if key == "ebn0":
        return parse_ebn0(value)
    if key == "powers":
        return tuple(float(v) for v in value.split(","))
    return value


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes in keys are allowed."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in harness.CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def _sim_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--users", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--rc", type=float)
    p.add_argument("--dr", type=int)
    p.add_argument("--ebn0", type=parse_ebn0, help="a:b:step or comma list, dB")
    p.add_argument("--trials", type=int)
    p.add_argument("--max-block-errors", type=int)
    p.add_argument("--it-mud", type=int)
    p.add_argument("--it-bp", type=int)
    p.add_argument("--reset-fg", choices=["on", "off"])
    p.add_argument("--stop", choices=["gmatrix", "crc", "genie", "none"])
    p.add_argument("--q", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--design", help="bhatt, 5g or file:PATH")
    p.add_argument("--feedback", choices=["ext", "app"])
    p.add_argument("--variance", choices=["position", "frame", "projected"])
    p.add_argument("--batch", type=int)
    p.add_argument("--out")
    return p


def sim_config(args) -> SimConfig:
    values = read_config(args.config) if args.config else {}
    for key in harness.CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is None:
            continue
        values[key] = (v == "on") if key in _ONOFF else v
    if "k" in values and "rc" in values and args.k is None and args.rc is not None:
        values.pop("k")
    return SimConfig(**values)


def _report(records, label=""):
    for r in records:
        lo, hi = r.wilson()
        print(f"{label}Eb/N0={r.ebn0_db:g} dB  trials={r.trials}  block_errors={r.block_errors}  "
              f"BLER={r.bler:.4e} [{lo:.3e}, {hi:.3e}]  BER={r.ber:.4e}")


def cmd_sweep(args) -> int:
    _report(harness.run_sweep(sim_config(args)))
    return 0


def cmd_ablate(args) -> int:
    reset, persist = harness.run_reset_ablation(sim_config(args))
    _report(reset, "reset    ")
    _report(persist, "persist  ")
    return 0


def cmd_fcc(args) -> int:
    cfg = SimConfig(N=args.N, k=args.k, design=args.design, z0=args.z0)
    A, _ = harness.build_code(cfg)
    if args.equivalent:
        if args.dr < 2:
            raise ValueError("--equivalent needs --dr >= 2")
        A = build_equivalent_code(A, args.dr)
    # charts are always sorted by Bhattacharyya parameter, whatever built the code
    _, order = construct_bhattacharyya(A.N, A.k, args.z0)
    m = harness.emit_fcc(A, order, args.width, args.height, args.out, args.pgm)
    if not args.out:
        np.savetxt(sys.stdout, m, fmt="%d", delimiter=",")
    return 0


def cmd_equiv(args) -> int:
    rep = harness.verify_equivalence(args.N, args.k, args.dr, args.design, args.z0)
    print(rep.summary())
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polaridma",
                                 description="Polar BP decoding in an IDMA multi-user receiver.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sim = _sim_parser()
    sub.add_parser("sweep", parents=[sim], help="Monte Carlo BLER sweep").set_defaults(func=cmd_sweep)
    sub.add_parser("ablate-reset", parents=[sim],
                   help="reset vs persistent factor graph, shared randomness").set_defaults(func=cmd_ablate)

    fcc = sub.add_parser("fcc", help="frozen channel chart")
    fcc.add_argument("--N", type=int, required=True)
    fcc.add_argument("--k", type=int, required=True)
    fcc.add_argument("--design", default="bhatt")
    fcc.add_argument("--z0", type=float, default=0.5)
    fcc.add_argument("--dr", type=int, default=1)
    fcc.add_argument("--equivalent", action="store_true",
                     help="chart the repetition-equivalent code of length N*dr")
    fcc.add_argument("--width", type=int, required=True)
    fcc.add_argument("--height", type=int, required=True)
    fcc.add_argument("--out")
    fcc.add_argument("--pgm")
    fcc.set_defaults(func=cmd_fcc)

    eq = sub.add_parser("equiv", help="exhaustive check of the repetition-equivalent code")
    eq.add_argument("--N", type=int, required=True)
    eq.add_argument("--k", type=int, required=True)
    eq.add_argument("--dr", type=int, required=True)
    eq.add_argument("--design", default="bhatt")
    eq.add_argument("--z0", type=float, default=0.5)
    eq.set_defaults(func=cmd_equiv)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
