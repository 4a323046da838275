"""Polar code construction, encoding and the repetition-equivalent code.

Conventions used throughout the package:

* bit-channels are indexed 0-based in code and 1-based in files and docs,
* natural bit order, no bit-reversal: ``x = u_full @ F^{(x)n}`` over GF(2)
  with ``F = [[1, 0], [1, 1]]`` (row-vector convention),
* frozen bits are always 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


def _log2_exact(N: int) -> int:
    if N < 2 or (N & (N - 1)) != 0:
        raise ValueError(f"N must be a power of two >= 2, got {N}")
    return N.bit_length() - 1


def _frozen_array(a) -> np.ndarray:
    arr = np.array(a, dtype=bool)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class InformationSet:
    """The A-vector of a polar code: ``a[i]`` is True for information bit-channels."""

    a: np.ndarray
    info_idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = _frozen_array(self.a)
        if a.ndim != 1:
            raise ValueError("A-vector must be one-dimensional")
        _log2_exact(a.size)
        if not a.any():
            raise ValueError("information set is empty (k = 0)")
        object.__setattr__(self, "a", a)
        idx = np.flatnonzero(a)
        idx.setflags(write=False)
        object.__setattr__(self, "info_idx", idx)

    @property
    def N(self) -> int:
        return self.a.size

    @property
    def n(self) -> int:
        return self.a.size.bit_length() - 1

    @property
    def k(self) -> int:
        return self.info_idx.size

    @property
    def frozen(self) -> np.ndarray:
        return ~self.a

    def __eq__(self, other):
        if not isinstance(other, InformationSet):
            return NotImplemented
        return np.array_equal(self.a, other.a)

    def __hash__(self):
        return hash(self.a.tobytes())

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.a)

    @classmethod
    def from_string(cls, text: str) -> "InformationSet":
        text = text.strip()
        if set(text) - {"0", "1"}:
            raise ValueError("A-vector string may only contain '0' and '1'")
        return cls(np.array([c == "1" for c in text]))


@dataclass(frozen=True, eq=False)
class ReliabilityOrder:
    """Bit-channel indices (0-based) sorted from most to least reliable."""

    order: np.ndarray
    source: str = "file"
    scores: np.ndarray | None = None

    def __post_init__(self):
        order = np.array(self.order, dtype=np.int64)
        N = order.size
        _log2_exact(N)
        if not np.array_equal(np.sort(order), np.arange(N)):
            raise ValueError("reliability order is not a permutation of the bit-channels")
        order.setflags(write=False)
        object.__setattr__(self, "order", order)

    @property
    def N(self) -> int:
        return self.order.size


def bhattacharyya_bec(N: int, z0: float = 0.5) -> np.ndarray:
    """Bhattacharyya parameters of the N synthesized channels of a BEC(z0).

    Natural order: channel pair (2i, 2i+1) splits parent i into its worse
    (2z - z^2) and better (z^2) children.
    """
    n = _log2_exact(N)
    z = np.array([z0], dtype=float)
    for _ in range(n):
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return z


def construct_bhattacharyya(N: int, k: int, z0: float = 0.5):
    """Pick the k bit-channels with the smallest Bhattacharyya parameter.

    Ties freeze the lower index first. Returns ``(InformationSet, ReliabilityOrder)``.
    """
    _log2_exact(N)
    if not 0 < k <= N:
        raise ValueError(f"k must satisfy 0 < k <= N, got k={k}, N={N}")
    if not 0 < z0 < 1:
        raise ValueError(f"design erasure probability must lie in (0, 1), got {z0}")
    rel = order_from_scores(bhattacharyya_bec(N, z0), source="bhattacharyya")
    return info_set_from_order(rel, k), rel


def order_from_scores(z, source: str = "bhattacharyya") -> ReliabilityOrder:
    """Sort by ascending score; equal scores rank the higher index as more reliable."""
    z = np.asarray(z, dtype=float)
    order = np.lexsort((-np.arange(z.size), z))
    return ReliabilityOrder(order, source=source, scores=z)


def parse_reliability_order(text: str, N: int) -> ReliabilityOrder:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) != N:
        raise ValueError(f"length mismatch: expected {N} indices, found {len(lines)}")
    idx = np.array([int(ln) for ln in lines], dtype=np.int64)
    if idx.min() < 1 or idx.max() > N:
        raise ValueError(f"index out of range: indices must lie in 1..{N}")
    if np.unique(idx).size != N:
        raise ValueError("duplicate index in reliability order")
    return ReliabilityOrder(idx - 1, source="file")


def load_reliability_order(path, N: int) -> ReliabilityOrder:
    """Read a reliability-order file (one 1-based index per line, best first)."""
    return parse_reliability_order(Path(path).read_text(encoding="utf-8"), N)


def nr_reliability_order(N: int) -> ReliabilityOrder:
    """5G NR ordering for length N, taken as the nested subsequence of the vendored table."""
    _log2_exact(N)
    if N > 1024:
        raise ValueError("the 5G NR sequence is defined up to N = 1024")
    text = resources.files("polaridma.data").joinpath("nr_polar_1024.txt").read_text()
    full = parse_reliability_order(text, 1024).order
    return ReliabilityOrder(full[full < N], source="5g")


def info_set_from_order(order: ReliabilityOrder, k: int) -> InformationSet:
    N = order.N
    if not 0 < k <= N:
        raise ValueError(f"k must satisfy 0 < k <= N, got k={k}, N={N}")
    a = np.zeros(N, dtype=bool)
    a[order.order[:k]] = True
    return InformationSet(a)


def polar_transform(v: np.ndarray) -> np.ndarray:
    """Apply ``v @ F^{(x)n}`` over GF(2) along the last axis (copying)."""
    v = np.array(v, dtype=np.uint8, copy=True)
    N = v.shape[-1]
    _log2_exact(N)
    lead = v.shape[:-1]
    d = 1
    while d < N:
        w = v.reshape(*lead, N // (2 * d), 2, d)
        w[..., 0, :] ^= w[..., 1, :]
        d *= 2
    return v


def scatter(u: np.ndarray, A: InformationSet) -> np.ndarray:
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != A.k:
        raise ValueError(f"length mismatch: expected {A.k} information bits, got {u.shape[-1]}")
    full = np.zeros(u.shape[:-1] + (A.N,), dtype=np.uint8)
    full[..., A.info_idx] = u
    return full


def encode(u, A: InformationSet) -> np.ndarray:
    """Encode information bits (shape ``(..., k)``) into codewords ``(..., N)``."""
    return polar_transform(scatter(u, A))


def rate(A: InformationSet) -> float:
    return A.k / A.N


def build_equivalent_code(A: InformationSet, d_r: int) -> InformationSet:
    """Length ``N*d_r`` code whose codewords are the d_r-fold block repetition of A's.

    The first ``N*(d_r-1)`` bit-channels are frozen and the last N copy A.
    """
    if d_r < 2 or (d_r & (d_r - 1)) != 0:
        raise ValueError(f"repetition factor must be a power of two >= 2, got {d_r}")
    a = np.concatenate([np.zeros(A.N * (d_r - 1), dtype=bool), A.a])
    return InformationSet(a)
