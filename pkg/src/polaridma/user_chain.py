"""Per-user transmit/receive chain: repetition, interleaving, BPSK, phase scrambling.

BPSK maps bit 0 to +1, so a positive LLR favours bit 0 everywhere.
``sigma2`` always means the total complex noise variance E|n|^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crc import CrcSpec
from .polar_code import InformationSet, encode

# Interleavers come from numpy's PCG64 via Generator.permutation (Fisher-Yates).
INTERLEAVER_RNG = f"numpy-{np.__version__}/PCG64/permutation"


def repeat_encode(c, d_r: int) -> np.ndarray:
    """Blockwise repetition ``c || c || ... || c`` along the last axis."""
    if d_r < 1:
        raise ValueError("repetition factor must be >= 1")
    c = np.asarray(c)
    return np.tile(c, (1,) * (c.ndim - 1) + (d_r,))


def repeat_combine(llrs, d_r: int) -> np.ndarray:
    """Sum the d_r blockwise copies of every code bit."""
    llrs = np.asarray(llrs, dtype=float)
    m = llrs.shape[-1]
    if d_r < 1 or m % d_r:
        raise ValueError(f"length mismatch: {m} is not divisible by d_r={d_r}")
    return llrs.reshape(*llrs.shape[:-1], d_r, m // d_r).sum(axis=-2)


@dataclass(frozen=True, eq=False)
class Interleaver:
    """``perm`` is 0-based; position i of the input goes to position perm[i]."""

    perm: np.ndarray

    def __post_init__(self):
        perm = np.array(self.perm, dtype=np.int64)
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("interleaver must be a permutation")
        perm.setflags(write=False)
        object.__setattr__(self, "perm", perm)

    @classmethod
    def from_seed(cls, m: int, seed) -> "Interleaver":
        return cls(np.random.default_rng(seed).permutation(m))

    @property
    def m(self) -> int:
        return self.perm.size


def _perm_of(p):
    return p.perm if isinstance(p, Interleaver) else np.asarray(p)


def interleave(v, perm) -> np.ndarray:
    """``out[perm[i]] = v[i]``. ``perm`` may be batched alongside ``v``."""
    v = np.asarray(v)
    perm = _perm_of(perm)
    if v.shape[-1] != perm.shape[-1]:
        raise ValueError(f"length mismatch: {v.shape[-1]} vs interleaver length {perm.shape[-1]}")
    out = np.empty_like(v)
    if perm.ndim == 1:
        out[..., perm] = v
    else:
        np.put_along_axis(out, np.broadcast_to(perm, v.shape), v, axis=-1)
    return out


def deinterleave(v, perm) -> np.ndarray:
    v = np.asarray(v)
    perm = _perm_of(perm)
    if v.shape[-1] != perm.shape[-1]:
        raise ValueError(f"length mismatch: {v.shape[-1]} vs interleaver length {perm.shape[-1]}")
    if perm.ndim == 1:
        return v[..., perm]
    return np.take_along_axis(v, np.broadcast_to(perm, v.shape), axis=-1)


def map_bpsk(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


def scramble(s, phi) -> np.ndarray:
    return np.asarray(s) * np.exp(1j * np.asarray(phi))


def descramble(y, phi) -> np.ndarray:
    return np.asarray(y) * np.exp(-1j * np.asarray(phi))


def soft_symbol(llr) -> np.ndarray:
    """Conditional mean of a BPSK symbol given its LLR."""
    return np.tanh(np.asarray(llr, dtype=float) / 2)


def demap(y, power, phi, sigma_eff2) -> np.ndarray:
    """BPSK LLRs ``4 sqrt(P) Re(y e^{-j phi}) / sigma_eff2``; interference counted as noise."""
    sigma_eff2 = np.asarray(sigma_eff2, dtype=float)
    if np.any(sigma_eff2 <= 0):
        raise ValueError("effective noise variance must be positive")
    return 4.0 * np.sqrt(power) * np.real(descramble(y, phi)) / sigma_eff2


@dataclass(frozen=True)
class UserConfig:
    user_id: int
    A: InformationSet
    power: float = 1.0
    phase: float = 0.0
    interleaver: Interleaver | None = None
    d_r: int = 1
    crc: CrcSpec | None = None

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("user power must be positive")
        if not 0 <= self.phase < np.pi:
            raise ValueError("phase must lie in [0, pi)")
        if self.d_r < 1:
            raise ValueError("repetition factor must be >= 1")
        if self.interleaver is not None and self.interleaver.m != self.frame_length:
            raise ValueError("interleaver length does not match N * d_r")

    @property
    def frame_length(self) -> int:
        return self.A.N * self.d_r

    @property
    def rate(self) -> float:
        """Information bits per channel use, R_c / d_r."""
        return self.A.k / self.A.N / self.d_r

    @property
    def perm(self) -> np.ndarray:
        if self.interleaver is None:
            return np.arange(self.frame_length)
        return self.interleaver.perm


def transmit_symbols(u, user: UserConfig) -> np.ndarray:
    """Information bits to the unit-power scrambled symbols of one user."""
    c = repeat_encode(encode(u, user.A), user.d_r)
    return scramble(map_bpsk(interleave(c, user.perm)), user.phase)
