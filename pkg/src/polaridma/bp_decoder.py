"""Belief-propagation decoding on the polar factor graph.

The graph has ``n + 1`` node columns. Column 0 is the information side,
column ``n`` the channel side. ``L`` messages travel right to left, ``R``
messages left to right. Every array here may carry leading batch axes, so a
single call can decode many frames; rows never interact.

A *schedule* is a permutation of ``1..n`` giving the stage layout: the stage
between columns ``s`` and ``s + 1`` pairs nodes at distance
``2 ** (schedule[s] - 1)``. The identity schedule is the conventional graph,
span 1 next to the information bits and span N/2 next to the channel (the
layout of the SC decoding tree). Other layouts describe the same code and are
used by the multi-trellis decoder.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .crc import CrcSpec, crc_check
from .polar_code import InformationSet, encode

LLR_MAX = 100.0


def boxplus(x, y):
    """``log((1 + e^(x+y)) / (e^x + e^y))`` evaluated without overflow."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (
        np.sign(x) * np.sign(y) * np.minimum(np.abs(x), np.abs(y))
        + np.log1p(np.exp(-np.abs(x + y)))
        - np.log1p(np.exp(-np.abs(x - y)))
    )


def pe_update(L_in1, L_in2, R_in1, R_in2, llr_max=LLR_MAX):
    """The four processing-element equations, each clamped to ``+-llr_max``.

    Returns ``(L_out1, L_out2, R_out1, R_out2)``.
    """
    c = lambda v: np.clip(v, -llr_max, llr_max)
    L_out1 = c(boxplus(L_in1, L_in2 + R_in2))
    L_out2 = c(boxplus(R_in1, L_in1) + L_in2)
    R_out1 = c(boxplus(R_in1, L_in2 + R_in2))
    R_out2 = c(boxplus(R_in1, L_in1) + R_in2)
    return L_out1, L_out2, R_out1, R_out2


def llr2bit(v) -> np.ndarray:
    """Hard decision, ``L = log p(0)/p(1)``; an exact 0 decides bit 0."""
    return (np.asarray(v) < 0).astype(np.uint8)


def identity_schedule(n: int) -> tuple[int, ...]:
    return tuple(range(1, n + 1))


def graph_schedule(n: int, graph: int, seed: int = 0) -> tuple[int, ...]:
    """Stage layout of graph ``graph`` (1-based). Graph 1 is always the identity."""
    if graph == 1:
        return identity_schedule(n)
    perm = np.random.default_rng(seed + graph).permutation(n) + 1
    return tuple(int(p) for p in perm)


def _distances(schedule, n: int) -> list[int]:
    sched = [int(s) for s in schedule]
    if sorted(sched) != list(range(1, n + 1)):
        raise ValueError(f"schedule must be a permutation of 1..{n}, got {tuple(schedule)}")
    return [1 << (s - 1) for s in sched]


@dataclass(frozen=True)
class StopCriterion:
    """``kind`` is one of ``gmatrix``, ``crc``, ``genie`` or ``none``."""

    kind: str = "gmatrix"
    crc: CrcSpec | None = None
    u_true: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gmatrix", "crc", "genie", "none"):
            raise ValueError(f"unknown stopping criterion {self.kind!r}")
        if self.kind == "crc" and self.crc is None:
            raise ValueError("CRC stopping needs a CrcSpec")
        if self.kind == "genie" and self.u_true is None:
            raise ValueError("genie stopping needs the true information bits")

    @classmethod
    def genie(cls, u_true) -> "StopCriterion":
        return cls("genie", u_true=np.asarray(u_true, dtype=np.uint8))

    @classmethod
    def crc_aided(cls, spec: CrcSpec) -> "StopCriterion":
        return cls("crc", crc=spec)


@dataclass(frozen=True)
class DecoderConfig:
    max_iters: int = 20
    num_graphs: int = 1
    schedule_seed: int = 0
    stop: StopCriterion = StopCriterion()
    llr_max: float = LLR_MAX
    output: str = "extrinsic"

    def __post_init__(self):
        if self.max_iters < 1 or self.num_graphs < 1:
            raise ValueError("need at least one graph and one iteration per graph")
        if self.llr_max <= 0:
            raise ValueError("llr_max must be positive")
        if self.output not in ("extrinsic", "app"):
            raise ValueError(f"unknown soft output mode {self.output!r}")


@dataclass
class FactorGraphState:
    L: np.ndarray
    R: np.ndarray
    A: InformationSet
    llr_max: float = LLR_MAX
    schedule: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.schedule is None:
            self.schedule = identity_schedule(self.A.n)

    def copy(self) -> "FactorGraphState":
        return replace(self, L=self.L.copy(), R=self.R.copy())


@dataclass
class DecodeResult:
    """Decoder output; array fields gain a leading axis for batched calls."""

    u_hat: np.ndarray
    x_hat: np.ndarray
    stopped_early: np.ndarray | bool
    graphs_used: np.ndarray | int
    iters_used: np.ndarray | int
    ext_out: np.ndarray

    def frame(self, i: int) -> "DecodeResult":
        return DecodeResult(
            self.u_hat[i], self.x_hat[i], bool(self.stopped_early[i]),
            int(self.graphs_used[i]), int(self.iters_used[i]), self.ext_out[i],
        )


def initialize(L_ch, A: InformationSet, llr_max: float = LLR_MAX, schedule=None) -> FactorGraphState:
    L_ch = np.asarray(L_ch, dtype=float)
    if L_ch.shape[-1] != A.N:
        raise ValueError(f"length mismatch: expected {A.N} channel LLRs, got {L_ch.shape[-1]}")
    if not np.all(np.isfinite(L_ch)):
        raise ValueError("channel LLRs must be finite")
    shape = L_ch.shape[:-1] + (A.n + 1, A.N)
    L = np.zeros(shape)
    R = np.zeros(shape)
    L[..., A.n, :] = np.clip(L_ch, -llr_max, llr_max)
    R[..., 0, :] = np.where(A.frozen, llr_max, 0.0)
    return FactorGraphState(L, R, A, llr_max, schedule)


def _iterate(L, R, dists, llr_max):
    """One L-pass and one R-pass, in place."""
    n = len(dists)
    lead = L.shape[:-2]
    N = L.shape[-1]

    def split(col, d):
        v = col.reshape(*lead, N // (2 * d), 2, d)
        return v[..., 0, :], v[..., 1, :]

    for s in range(n - 1, -1, -1):
        d = dists[s]
        l1, l2 = split(L[..., s + 1, :], d)
        r1, r2 = split(R[..., s, :], d)
        out1, out2 = split(L[..., s, :], d)
        out1[...] = np.clip(boxplus(l1, l2 + r2), -llr_max, llr_max)
        out2[...] = np.clip(boxplus(r1, l1) + l2, -llr_max, llr_max)
    for s in range(n):
        d = dists[s]
        l1, l2 = split(L[..., s + 1, :], d)
        r1, r2 = split(R[..., s, :], d)
        out1, out2 = split(R[..., s + 1, :], d)
        out1[...] = np.clip(boxplus(r1, l2 + r2), -llr_max, llr_max)
        out2[...] = np.clip(boxplus(r1, l1) + r2, -llr_max, llr_max)


def one_iteration(state: FactorGraphState, schedule=None) -> FactorGraphState:
    """Return a new state after one full L-pass and R-pass."""
    schedule = state.schedule if schedule is None else tuple(schedule)
    new = replace(state, L=state.L.copy(), R=state.R.copy(), schedule=schedule)
    _iterate(new.L, new.R, _distances(schedule, state.A.n), state.llr_max)
    return new


def _hard(L, R, A):
    n = A.n
    u_hat = llr2bit(L[..., 0, A.info_idx] + R[..., 0, A.info_idx])
    x_hat = llr2bit(L[..., n, :] + R[..., n, :])
    return u_hat, x_hat


def _soft_out(L, R, A, output):
    ext = R[..., A.n, :]
    return ext.copy() if output == "extrinsic" else ext + L[..., A.n, :]


def _stop_mask(L, R, A, stop: StopCriterion, u_true) -> np.ndarray:
    if stop.kind == "none":
        return np.zeros(L.shape[:-2], dtype=bool)
    u_hat, x_hat = _hard(L, R, A)
    if stop.kind == "gmatrix":
        return np.all(encode(u_hat, A) == x_hat, axis=-1)
    if stop.kind == "crc":
        return np.asarray(crc_check(u_hat, stop.crc))
    return np.all(u_hat == u_true, axis=-1)


def check_stop(state: FactorGraphState, criterion: StopCriterion):
    u_true = None
    if criterion.kind == "genie":
        u_true = np.asarray(criterion.u_true, dtype=np.uint8)
        if u_true.shape[-1] != state.A.k:
            raise ValueError(f"genie bits have length {u_true.shape[-1]}, code has k={state.A.k}")
    hit = _stop_mask(state.L, state.R, state.A, criterion, u_true)
    return bool(hit) if hit.ndim == 0 else hit


def _genie_rows(stop: StopCriterion, B: int, k: int):
    if stop.kind != "genie":
        return None
    u = np.asarray(stop.u_true, dtype=np.uint8)
    if u.shape[-1] != k:
        raise ValueError(f"genie bits have length {u.shape[-1]}, code has k={k}")
    return np.broadcast_to(u, (B, k))


def _run(L, R, A, dists, iters, stop, u_true, llr_max):
    """Iterate batched states in place; a row freezes as soon as its stop rule fires.

    Returns ``(stopped, iterations_used)`` per row.
    """
    B = L.shape[0]
    stopped = np.zeros(B, dtype=bool)
    used = np.zeros(B, dtype=np.int64)
    idx = np.arange(B)
    Ls, Rs, us = L, R, u_true
    for _ in range(iters):
        _iterate(Ls, Rs, dists, llr_max)
        used[idx] += 1
        hit = _stop_mask(Ls, Rs, A, stop, us)
        if hit.any():
            if Ls is not L:
                L[idx], R[idx] = Ls, Rs
            stopped[idx[hit]] = True
            keep = ~hit
            idx, Ls, Rs = idx[keep], Ls[keep], Rs[keep]
            if us is not None:
                us = us[keep]
            if idx.size == 0:
                break
    if Ls is not L and idx.size:
        L[idx], R[idx] = Ls, Rs
    return stopped, used


def _as_batch(L_ch):
    L_ch = np.asarray(L_ch, dtype=float)
    if L_ch.ndim not in (1, 2):
        raise ValueError("channel LLRs must be a vector or a (batch, N) array")
    return L_ch.ndim == 1, np.atleast_2d(L_ch)


def decode(L_ch, A: InformationSet, config: DecoderConfig = DecoderConfig()) -> DecodeResult:
    """Multi-trellis BP decoding of one frame (``(N,)``) or a batch (``(B, N)``).

    Graph g re-initializes from the channel and runs up to ``max_iters``
    iterations on stage layout ``graph_schedule(n, g, schedule_seed)``; the stop
    rule is checked after every iteration. Frames that never stop take the
    hard decision of the last graph.
    """
    single, L2 = _as_batch(L_ch)
    B, N, k = L2.shape[0], A.N, A.k
    u_true = _genie_rows(config.stop, B, k)
    u_hat = np.zeros((B, k), dtype=np.uint8)
    x_hat = np.zeros((B, N), dtype=np.uint8)
    ext = np.zeros((B, N))
    stopped = np.zeros(B, dtype=bool)
    graphs = np.zeros(B, dtype=np.int64)
    iters = np.zeros(B, dtype=np.int64)
    pending = np.arange(B)
    for g in range(1, config.num_graphs + 1):
        sched = graph_schedule(A.n, g, config.schedule_seed)
        st = initialize(L2[pending], A, config.llr_max, sched)
        hit, used = _run(st.L, st.R, A, _distances(sched, A.n), config.max_iters, config.stop,
                         None if u_true is None else u_true[pending], config.llr_max)
        iters[pending] += used
        graphs[pending] = g
        final = hit | (g == config.num_graphs)
        rows = pending[final]
        u_hat[rows], x_hat[rows] = _hard(st.L[final], st.R[final], A)
        ext[rows] = _soft_out(st.L[final], st.R[final], A, config.output)
        stopped[pending[hit]] = True
        pending = pending[~hit]
        if pending.size == 0:
            break
    res = DecodeResult(u_hat, x_hat, stopped, graphs, iters, ext)
    return res.frame(0) if single else res


def decode_warm(state: FactorGraphState, L_ch_new, iters: int,
                stop: StopCriterion = StopCriterion("none"), output: str = "extrinsic"):
    """Continue decoding on an existing graph after replacing only the channel column.

    All other messages persist. Returns ``(new_state, DecodeResult)``; the
    input state is left untouched.
    """
    A = state.A
    L_ch_new = np.asarray(L_ch_new, dtype=float)
    if L_ch_new.shape != state.L.shape[:-2] + (A.N,):
        raise ValueError(f"shape mismatch: state holds {state.L.shape[:-2] + (A.N,)}, got {L_ch_new.shape}")
    if not np.all(np.isfinite(L_ch_new)):
        raise ValueError("channel LLRs must be finite")
    new = state.copy()
    single = new.L.ndim == 2
    if single:
        new.L, new.R = new.L[None], new.R[None]
    B = new.L.shape[0]
    new.L[:, A.n, :] = np.clip(L_ch_new.reshape(B, A.N), -new.llr_max, new.llr_max)
    hit, used = _run(new.L, new.R, A, _distances(new.schedule, A.n), iters, stop,
                     _genie_rows(stop, B, A.k), new.llr_max)
    u_hat, x_hat = _hard(new.L, new.R, A)
    res = DecodeResult(u_hat, x_hat, hit, np.ones(B, dtype=np.int64), used,
                       _soft_out(new.L, new.R, A, output))
    if single:
        new.L, new.R = new.L[0], new.R[0]
        res = res.frame(0)
    return new, res
