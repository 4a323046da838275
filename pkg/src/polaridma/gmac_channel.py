"""Gaussian multiple-access channel ``y = sum_i sqrt(P_i) x~_i + n``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelConfig:
    K_a: int
    sigma2: float
    seed: int | None = None

    def __post_init__(self):
        if self.K_a < 1:
            raise ValueError("need at least one active user")
        if self.sigma2 < 0:
            raise ValueError("noise variance must be non-negative")


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    y: np.ndarray
    sigma2: float


def complex_awgn(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly symmetric Gaussian noise with E|n|^2 = sigma2."""
    g = rng.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return np.sqrt(sigma2 / 2) * (g[0] + 1j * g[1])


def superpose(x_tilde, powers) -> np.ndarray:
    x_tilde = np.asarray(x_tilde)
    powers = np.asarray(powers, dtype=float)
    if x_tilde.ndim < 2 or x_tilde.shape[-2] != powers.shape[-1]:
        raise ValueError("need one equal-length signal per user")
    if np.any(powers <= 0):
        raise ValueError("user powers must be positive")
    return np.sum(np.sqrt(powers)[..., None] * x_tilde, axis=-2)


def transmit(x_tilde, powers, cfg: ChannelConfig, rng: np.random.Generator | None = None) -> ReceivedFrame:
    """Superimpose the K_a scrambled user signals and add complex AWGN.

    ``x_tilde`` has shape ``(K_a, T)``. Noise comes from ``rng`` when given,
    otherwise from a generator seeded with ``cfg.seed``. ``sigma2 = 0`` is
    the noiseless channel.
    """
    x_tilde = np.asarray(x_tilde)
    if x_tilde.ndim != 2 or x_tilde.shape[0] != cfg.K_a:
        raise ValueError(f"length mismatch: expected {cfg.K_a} user signals of equal length")
    y = superpose(x_tilde, powers)
    if cfg.sigma2 > 0:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        y = y + complex_awgn(y.shape[-1], cfg.sigma2, rng)
    return ReceivedFrame(y.astype(complex), cfg.sigma2)


def sigma2_from_ebn0(ebn0_db: float, rate: float, power: float = 1.0) -> float:
    """Noise variance for a per-user Eb/N0, one complex symbol per coded bit.

    ``Eb = P / R_u`` and ``N0 = sigma2``.
    """
    if rate <= 0 or power <= 0:
        raise ValueError("rate and power must be positive")
    return power / rate / 10 ** (ebn0_db / 10)
