"""Iterative multi-user receiver: soft interference cancellation + per-user BP.

One outer (MUD) iteration, for every user j in parallel:

1. subtract the other users' reconstructed soft symbols from y,
2. descramble and demap, counting the residual interference as noise,
3. deinterleave and sum the repetition copies,
4. run BP, either on a freshly initialized graph (``reset_fg``) or warm
   from the graph left by the previous outer iteration,
5. turn the code-bit LLRs back into soft channel symbols
   (repeat, interleave, scramble) for the next cancellation.

A user whose stopping rule fires is frozen: its decision is kept and its
feedback becomes the saturated re-encoded codeword.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bp_decoder import (
    LLR_MAX, DecodeResult, DecoderConfig, FactorGraphState, StopCriterion,
    decode, decode_warm, initialize,
)
from .gmac_channel import ReceivedFrame
from .polar_code import InformationSet, encode
from .user_chain import (
    UserConfig, deinterleave, demap, interleave, map_bpsk, repeat_combine,
    repeat_encode, soft_symbol,
)


@dataclass(frozen=True)
class ReceiverConfig:
    n_it_mud: int = 10
    n_it_bp: int = 20
    reset_fg: bool = True
    stop: StopCriterion = StopCriterion()
    num_graphs: int = 1
    schedule_seed: int = 0
    llr_max: float = LLR_MAX
    feedback: str = "ext"
    variance: str = "position"

    def __post_init__(self):
        if self.n_it_mud < 1 or self.n_it_bp < 1:
            raise ValueError("need at least one MUD and one BP iteration")
        if self.feedback not in ("ext", "app"):
            raise ValueError(f"unknown feedback mode {self.feedback!r}")
        if self.variance not in ("position", "frame", "projected"):
            raise ValueError(f"unknown variance mode {self.variance!r}")


def _others(K: int, j: int):
    if not 0 <= j < K:
        raise ValueError(f"unknown user {j} (have {K})")
    return [i for i in range(K) if i != j]


def cancel(y, soft, powers, phases, j: int) -> np.ndarray:
    """``y - sum_{i != j} sqrt(P_i) e^{j phi_i} xbar_i``.

    ``soft`` holds the real soft symbols xbar of all users, shape ``(..., K, T)``;
    ``phases`` has shape ``(..., K)``.
    """
    soft = np.asarray(soft, dtype=float)
    phases = np.asarray(phases, dtype=float)
    powers = np.asarray(powers, dtype=float)
    out = np.array(y, dtype=complex, copy=True)
    for i in _others(soft.shape[-2], j):
        out -= np.sqrt(powers[i]) * np.exp(1j * phases[..., i])[..., None] * soft[..., i, :]
    return out


def effective_variance(soft, powers, j: int, sigma2: float, mode: str = "position",
                       phases=None) -> np.ndarray:
    """Noise plus residual interference variance seen by user j (complex convention).

    ``sigma2 + sum_{i != j} P_i (1 - xbar_i^2)`` per position, or its frame
    average when ``mode == "frame"``. ``mode == "projected"`` counts only the
    residual falling on user j's real axis, ``2 P_i (1 - xbar_i^2) cos^2(phi_i - phi_j)``,
    and needs ``phases`` of shape ``(..., K)``.
    """
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    soft = np.asarray(soft, dtype=float)
    var = np.full(soft.shape[:-2] + soft.shape[-1:], float(sigma2))
    for i in _others(soft.shape[-2], j):
        resid = powers[i] * (1.0 - soft[..., i, :] ** 2)
        if mode == "projected":
            phases = np.asarray(phases, dtype=float)
            resid = resid * (2 * np.cos(phases[..., i] - phases[..., j]) ** 2)[..., None]
        var += resid
    if mode == "frame":
        var = np.broadcast_to(var.mean(axis=-1, keepdims=True), var.shape).copy()
    return var


def user_llrs(y, soft, powers, phases, perm, d_r: int, j: int, sigma2: float,
              mode: str = "position"):
    """Cancel, demap, deinterleave and repetition-combine for user j.

    Returns ``(per_copy, combined)``: the deinterleaved LLRs of all N*d_r
    copies and their per-code-bit sums.
    """
    yj = cancel(y, soft, powers, phases, j)
    var = effective_variance(soft, powers, j, sigma2, mode, phases)
    llr = demap(yj, powers[j], np.asarray(phases)[..., j, None], var)
    per_copy = deinterleave(llr, perm)
    return per_copy, repeat_combine(per_copy, d_r)


@dataclass
class ReceiveResult:
    """Per-user batched decoder outputs plus the outer iterations spent per frame."""

    users: list[DecodeResult]
    outer_iters: np.ndarray = field(repr=False)


def _empty_result(B: int, A: InformationSet) -> DecodeResult:
    return DecodeResult(
        np.zeros((B, A.k), dtype=np.uint8), np.zeros((B, A.N), dtype=np.uint8),
        np.zeros(B, dtype=bool), np.zeros(B, dtype=np.int64), np.zeros(B, dtype=np.int64),
        np.zeros((B, A.N)),
    )


def receive_batch(y, sigma2: float, codes, reps, powers, phases, perms,
                  cfg: ReceiverConfig = ReceiverConfig(), u_true=None) -> ReceiveResult:
    """Run the receiver on a batch of frames sharing the user codes and powers.

    y: ``(B, T)`` complex; phases: ``(B, K)``; perms: ``(K, T)`` or ``(B, K, T)``;
    u_true: per-user ``(B, k_j)`` arrays, needed only for genie stopping.
    """
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    B, T = y.shape
    K = len(codes)
    powers = np.asarray(powers, dtype=float)
    phases = np.broadcast_to(np.asarray(phases, dtype=float), (B, K))
    perms = np.asarray(perms)
    if perms.ndim == 2:
        perms = np.broadcast_to(perms, (B,) + perms.shape)
    for A, d_r in zip(codes, reps):
        if A.N * d_r != T:
            raise ValueError(f"user frame length {A.N}*{d_r} does not match received length {T}")
    if cfg.stop.kind == "genie" and u_true is None:
        raise ValueError("genie stopping needs u_true")

    soft = np.zeros((B, K, T))
    done = np.zeros((B, K), dtype=bool)
    results = [_empty_result(B, A) for A in codes]
    states: list[FactorGraphState | None] = [None] * K
    outer = np.zeros(B, dtype=np.int64)

    for _ in range(cfg.n_it_mud):
        live = ~done.all(axis=1)
        if not live.any():
            break
        outer[live] += 1
        new_soft = soft.copy()
        for j, (A, d_r) in enumerate(zip(codes, reps)):
            rows = np.flatnonzero(~done[:, j])
            if rows.size == 0:
                continue
            per_copy, llr_code = user_llrs(
                y[rows], soft[rows], powers, phases[rows], perms[rows, j], d_r, j, sigma2,
                cfg.variance,
            )
            stop = cfg.stop
            if stop.kind == "genie":
                stop = StopCriterion.genie(np.asarray(u_true[j])[rows])
            if cfg.reset_fg:
                dec_cfg = DecoderConfig(cfg.n_it_bp, cfg.num_graphs, cfg.schedule_seed, stop,
                                        cfg.llr_max, "extrinsic")
                r = decode(llr_code, A, dec_cfg)
            else:
                if states[j] is None:
                    states[j] = initialize(np.zeros((B, A.N)), A, cfg.llr_max)
                st = states[j]
                sub = FactorGraphState(st.L[rows], st.R[rows], A, cfg.llr_max)
                sub, r = decode_warm(sub, llr_code, cfg.n_it_bp, stop, "extrinsic")
                st.L[rows], st.R[rows] = sub.L, sub.R

            res = results[j]
            res.u_hat[rows], res.x_hat[rows], res.ext_out[rows] = r.u_hat, r.x_hat, r.ext_out
            res.graphs_used[rows] = r.graphs_used
            res.iters_used[rows] += r.iters_used
            res.stopped_early[rows] = r.stopped_early

            if cfg.feedback == "app":
                fb = repeat_encode(r.ext_out + llr_code, d_r)
            elif d_r == 1:
                fb = r.ext_out.copy()
            else:
                # each copy: decoder extrinsic plus the channel LLRs of the other copies
                fb = repeat_encode(r.ext_out, d_r) + (repeat_encode(llr_code, d_r) - per_copy)
            fb = np.clip(fb, -cfg.llr_max, cfg.llr_max)
            hit = np.asarray(r.stopped_early, dtype=bool)
            if hit.any():
                cw = repeat_encode(encode(r.u_hat[hit], A), d_r)
                fb[hit] = cfg.llr_max * map_bpsk(cw)
                done[rows[hit], j] = True
            new_soft[rows, j] = soft_symbol(interleave(fb, perms[rows, j]))
        soft = new_soft
    return ReceiveResult(results, outer)


def receive(frame: ReceivedFrame, users: list[UserConfig], cfg: ReceiverConfig = ReceiverConfig(),
            u_true=None) -> list[DecodeResult]:
    """Single-frame receiver; returns one DecodeResult per user."""
    if frame.sigma2 <= 0:
        raise ValueError("receiver needs a positive noise variance")
    K = len(users)
    out = receive_batch(
        frame.y[None], frame.sigma2, [u.A for u in users], [u.d_r for u in users],
        [u.power for u in users], np.array([[u.phase for u in users]]),
        np.stack([u.perm for u in users]), cfg,
        None if u_true is None else [np.asarray(u)[None] for u in u_true],
    )
    return [out.users[j].frame(0) for j in range(K)]
