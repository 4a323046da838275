"""Monte Carlo BLER sweeps, reset ablation, frozen channel charts and equivalence checks."""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .bp_decoder import StopCriterion
from .crc import PRESETS, CrcSpec, crc_attach
from .gmac_channel import complex_awgn, sigma2_from_ebn0, superpose
from .polar_code import (
    InformationSet, ReliabilityOrder, build_equivalent_code, construct_bhattacharyya, encode,
    info_set_from_order, load_reliability_order, nr_reliability_order,
)
from .receiver import ReceiverConfig, receive_batch
from .user_chain import INTERLEAVER_RNG, interleave, map_bpsk, repeat_encode

log = logging.getLogger(__name__)

CSV_HEADER = ["ebn0_db", "trials", "block_errors", "bler", "per_user_block_errors",
              "bit_errors", "ber", "seed", "config_digest"]

ROLES = {"message": 0, "phase": 1, "noise": 2, "interleaver": 3}


@dataclass
class SimConfig:
    users: int = 1
    N: int = 64
    k: int | None = None
    rc: float | None = None
    dr: int = 1
    ebn0: tuple[float, ...] = (0.0,)
    trials: int = 1000
    max_block_errors: int = 100
    it_mud: int = 10
    it_bp: int = 20
    reset_fg: bool = True
    stop: str = "gmatrix"
    crc: str = "crc11"
    q: int = 1
    seed: int = 0
    design: str = "bhatt"
    z0: float = 0.5
    feedback: str = "ext"
    variance: str = "position"
    powers: tuple[float, ...] | None = None
    phases: str = "random"
    llr_max: float = 100.0
    ablate_it_bp_reset: int = 20
    ablate_it_bp_persist: int = 2
    batch: int = 256
    out: str | None = None

    def __post_init__(self):
        self.ebn0 = tuple(float(e) for e in self.ebn0)
        if not self.ebn0:
            raise ValueError("ebn0 list must be nonempty")
        if self.trials < 1 or self.max_block_errors < 1:
            raise ValueError("trials and max_block_errors must be >= 1")
        if self.users < 1:
            raise ValueError("need at least one user")
        if self.k is None:
            if self.rc is None:
                raise ValueError("set either k or rc")
            self.k = int(round(self.rc * self.N))
        if self.powers is not None:
            self.powers = tuple(float(p) for p in self.powers)
            if len(self.powers) != self.users:
                raise ValueError("need one power per user")

    @property
    def power_list(self) -> np.ndarray:
        return np.ones(self.users) if self.powers is None else np.array(self.powers)

    def crc_spec(self) -> CrcSpec | None:
        return PRESETS[self.crc] if self.stop == "crc" else None

    def receiver_config(self) -> ReceiverConfig:
        stop = StopCriterion("none")
        if self.stop == "gmatrix":
            stop = StopCriterion("gmatrix")
        elif self.stop == "crc":
            stop = StopCriterion.crc_aided(self.crc_spec())
        elif self.stop == "genie":
            stop = StopCriterion("genie", u_true=np.zeros(0, dtype=np.uint8))
        elif self.stop != "none":
            raise ValueError(f"unknown stopping criterion {self.stop!r}")
        return ReceiverConfig(self.it_mud, self.it_bp, self.reset_fg, stop, self.q, self.seed,
                              self.llr_max, self.feedback, self.variance)

    def digest(self) -> str:
        d = asdict(self)
        for key in ("out", "batch"):
            d.pop(key)
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class BlerRecord:
    ebn0_db: float
    trials: int
    block_errors: int
    per_user_block_errors: list[int]
    bit_errors: int
    info_bits: int
    seed: int
    config_digest: str
    elapsed: float = field(default=0.0, compare=False)

    @property
    def bler(self) -> float:
        return self.block_errors / self.trials

    @property
    def ber(self) -> float:
        return self.bit_errors / self.info_bits

    def wilson(self, confidence: float = 0.95) -> tuple[float, float]:
        return wilson_interval(self.block_errors, self.trials, confidence)

    def csv_row(self) -> list[str]:
        return [f"{self.ebn0_db:g}", str(self.trials), str(self.block_errors), f"{self.bler:.6e}",
                ";".join(str(e) for e in self.per_user_block_errors), str(self.bit_errors),
                f"{self.ber:.6e}", str(self.seed), self.config_digest]


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(errors, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return ci.low, ci.high


def build_code(cfg: SimConfig) -> tuple[InformationSet, ReliabilityOrder]:
    design = cfg.design
    if design == "bhatt":
        return construct_bhattacharyya(cfg.N, cfg.k, cfg.z0)
    if design == "5g":
        order = nr_reliability_order(cfg.N)
    elif design.startswith("file:"):
        order = load_reliability_order(design[5:], cfg.N)
    else:
        raise ValueError(f"unknown design {design!r}")
    return info_set_from_order(order, cfg.k), order


def trial_rng(seed: int, ebn0_idx: int, trial: int, role: str, user: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, ebn0_idx, trial, ROLES[role], user]))


def _fixed_phases(cfg: SimConfig):
    if cfg.phases == "random":
        return None
    if not cfg.phases.startswith("fixed:"):
        raise ValueError(f"phases must be 'random' or 'fixed:p1,p2,...', got {cfg.phases!r}")
    vals = [float(v) for v in cfg.phases[6:].split(",")]
    if len(vals) != cfg.users:
        raise ValueError("need one fixed phase per user")
    return np.array(vals)


@dataclass
class TrialBatch:
    u: np.ndarray        # (B, K, k)
    phases: np.ndarray   # (B, K)
    perms: np.ndarray    # (B, K, T)
    y: np.ndarray        # (B, T)


def make_trials(cfg: SimConfig, A: InformationSet, ebn0_idx: int, trials, sigma2: float) -> TrialBatch:
    """Generate frames; every random draw depends only on (seed, point, trial, role, user)."""
    K, T = cfg.users, A.N * cfg.dr
    crc = cfg.crc_spec()
    payload = A.k - (crc.width if crc else 0)
    if payload < 1:
        raise ValueError("CRC leaves no payload bits")
    fixed = _fixed_phases(cfg)
    B = len(trials)
    u = np.empty((B, K, A.k), dtype=np.uint8)
    phases = np.empty((B, K))
    perms = np.empty((B, K, T), dtype=np.int64)
    noise = np.empty((B, T), dtype=complex)
    for b, t in enumerate(trials):
        for j in range(K):
            msg = trial_rng(cfg.seed, ebn0_idx, t, "message", j).integers(0, 2, payload, dtype=np.uint8)
            u[b, j] = crc_attach(msg, crc) if crc else msg
            phases[b, j] = (fixed[j] if fixed is not None
                            else trial_rng(cfg.seed, ebn0_idx, t, "phase", j).uniform(0, np.pi))
            perms[b, j] = trial_rng(cfg.seed, ebn0_idx, t, "interleaver", j).permutation(T)
        noise[b] = complex_awgn(T, sigma2, trial_rng(cfg.seed, ebn0_idx, t, "noise"))
    sym = map_bpsk(interleave(repeat_encode(encode(u, A), cfg.dr), perms))
    x_tilde = sym * np.exp(1j * phases)[..., None]
    y = superpose(x_tilde, cfg.power_list) + noise
    return TrialBatch(u, phases, perms, y)


def run_trials(cfg: SimConfig, A: InformationSet, ebn0_idx: int, trials, sigma2: float):
    """Simulate the given trial indices; returns per-trial (user block errors, bit errors)."""
    tb = make_trials(cfg, A, ebn0_idx, trials, sigma2)
    K = cfg.users
    res = receive_batch(tb.y, sigma2, [A] * K, [cfg.dr] * K, cfg.power_list, tb.phases, tb.perms,
                        cfg.receiver_config(), u_true=[tb.u[:, j] for j in range(K)])
    u_hat = np.stack([r.u_hat for r in res.users], axis=1)
    diff = u_hat != tb.u
    return diff.any(axis=2), diff.sum(axis=(1, 2))


def _sigma2(cfg: SimConfig, A: InformationSet, ebn0_db: float) -> float:
    return sigma2_from_ebn0(ebn0_db, A.k / A.N / cfg.dr, float(cfg.power_list.mean()))


def run_point(cfg: SimConfig, A: InformationSet, ebn0_idx: int) -> BlerRecord:
    ebn0 = cfg.ebn0[ebn0_idx]
    sigma2 = _sigma2(cfg, A, ebn0)
    start = time.perf_counter()
    done = 0
    user_errs = np.zeros(cfg.users, dtype=np.int64)
    block_errs = bit_errs = 0
    while done < cfg.trials and block_errs < cfg.max_block_errors:
        remaining = cfg.trials - done
        if block_errs:
            want = math.ceil(1.2 * (cfg.max_block_errors - block_errs) * done / block_errs)
        else:
            want = cfg.batch
        chunk = min(remaining, cfg.batch, max(8, want))
        ue, be = run_trials(cfg, A, ebn0_idx, range(done, done + chunk), sigma2)
        frame_err = ue.any(axis=1)
        cum = block_errs + np.cumsum(frame_err)
        hit = np.flatnonzero(cum >= cfg.max_block_errors)
        take = hit[0] + 1 if hit.size else chunk
        user_errs += ue[:take].sum(axis=0)
        block_errs += int(frame_err[:take].sum())
        bit_errs += int(be[:take].sum())
        done += take
    rec = BlerRecord(ebn0, done, block_errs, user_errs.tolist(), bit_errs,
                     done * cfg.users * A.k, cfg.seed, cfg.digest(),
                     time.perf_counter() - start)
    lo, hi = rec.wilson()
    log.info("Eb/N0 %g dB: %d/%d block errors, BLER %.3e [%.3e, %.3e], %.1f s",
             ebn0, block_errs, done, rec.bler, lo, hi, rec.elapsed)
    return rec


def _write_meta(path: Path, cfg: SimConfig):
    meta = {
        "config": asdict(cfg),
        "config_digest": cfg.digest(),
        "ebn0_convention": "per user: Eb = mean(P) / (R_c / d_r), N0 = E|n|^2",
        "interleaver_rng": INTERLEAVER_RNG,
        "trial_streams": "SeedSequence([seed, ebn0_index, trial, role, user])",
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta, indent=2, default=str))


def run_sweep(cfg: SimConfig) -> list[BlerRecord]:
    """Sweep all Eb/N0 points; rows are appended to ``cfg.out`` as each point finishes."""
    A, _ = build_code(cfg)
    records = []
    writer = fh = None
    if cfg.out:
        path = Path(cfg.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_meta(path, cfg)
        fh = path.open("w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        fh.flush()
    try:
        for i in range(len(cfg.ebn0)):
            rec = run_point(cfg, A, i)
            records.append(rec)
            if writer:
                writer.writerow(rec.csv_row())
                fh.flush()
    finally:
        if fh:
            fh.close()
    return records


def ablation_configs(cfg: SimConfig) -> tuple[SimConfig, SimConfig]:
    """(reset variant, persistent-memory variant) sharing every random draw."""
    def out(tag):
        if not cfg.out:
            return None
        p = Path(cfg.out)
        return str(p.with_name(f"{p.stem}_{tag}{p.suffix or '.csv'}"))

    reset = replace(cfg, reset_fg=True, it_bp=cfg.ablate_it_bp_reset, out=out("reset"))
    persist = replace(cfg, reset_fg=False, it_bp=cfg.ablate_it_bp_persist, out=out("persist"))
    return reset, persist


def run_reset_ablation(cfg: SimConfig) -> tuple[list[BlerRecord], list[BlerRecord]]:
    reset, persist = ablation_configs(cfg)
    return run_sweep(reset), run_sweep(persist)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------------------- FCC

def fcc_matrix(A, order: ReliabilityOrder, width: int, height: int) -> np.ndarray:
    """Frozen flags (1 = frozen) sorted from least to most reliable, reshaped row-major.

    ``A`` is an InformationSet or a raw A-vector (which may be all frozen).
    """
    a = A.a if isinstance(A, InformationSet) else np.asarray(A, dtype=bool)
    if width * height != a.size:
        raise ValueError(f"dimension mismatch: {height}x{width} != N={a.size}")
    if order.N != a.size:
        raise ValueError("reliability order length differs from code length")
    flags = (~a[order.order[::-1]]).astype(np.uint8)
    return flags.reshape(height, width)


def emit_fcc(A, order: ReliabilityOrder, width: int, height: int,
             path=None, pgm_path=None) -> np.ndarray:
    """Write the frozen channel chart as 0/1 CSV and optionally as a P2 graymap."""
    m = fcc_matrix(A, order, width, height)
    if path:
        np.savetxt(path, m, fmt="%d", delimiter=",")
    if pgm_path:
        lines = ["P2", f"{width} {height}", "255"]
        lines += [" ".join("0" if v else "255" for v in row) for row in m]
        Path(pgm_path).write_text("\n".join(lines) + "\n")
    return m


# --------------------------------------------------------------------------- equivalence

@dataclass
class EquivalenceReport:
    N: int
    k: int
    d_r: int
    messages_checked: int
    passed: bool
    counterexample: list[int] | None = None

    def summary(self) -> str:
        status = "PASS" if self.passed else f"FAIL (u = {self.counterexample})"
        return (f"N={self.N} k={self.k} d_r={self.d_r}: {self.messages_checked} messages, {status}")


def all_messages(k: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.uint8).reshape(-1, k)


def verify_equivalence(N: int, k: int, d_r: int, design: str = "bhatt", z0: float = 0.5,
                       A: InformationSet | None = None) -> EquivalenceReport:
    """Exhaustively compare the equivalent long code with d_r-fold block repetition."""
    if A is None:
        A, _ = build_code(SimConfig(N=N, k=k, design=design, z0=z0))
    A_eq = build_equivalent_code(A, d_r)
    U = all_messages(A.k)
    ok = np.all(encode(U, A_eq) == repeat_encode(encode(U, A), d_r), axis=1)
    bad = None if ok.all() else U[np.argmin(ok)].tolist()
    return EquivalenceReport(A.N, A.k, d_r, len(U), bool(ok.all()), bad)


CONFIG_KEYS = {f.name: f for f in fields(SimConfig)}
