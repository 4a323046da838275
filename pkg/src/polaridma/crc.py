"""Bit-level CRC used by the CRC-aided stopping rule."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class CrcSpec:
    """Rocksoft-style CRC parameters. ``poly`` omits the implicit top bit."""

    width: int
    poly: int
    init: int = 0
    refin: bool = False
    refout: bool = False
    xorout: int = 0

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("CRC width must be positive")
        if not self.poly & 1:
            raise ValueError("CRC polynomial must have a constant term")


CRC8 = CrcSpec(8, 0x07)
CRC11_NR = CrcSpec(11, 0x621)  # 5G NR gCRC11
CRC24C_NR = CrcSpec(24, 0xB2B117)  # 5G NR gCRC24C

PRESETS = {"crc8": CRC8, "crc11": CRC11_NR, "crc24c": CRC24C_NR}


def _reflect_bytes(bits: np.ndarray) -> np.ndarray:
    if bits.size % 8:
        raise ValueError("input reflection needs a whole number of bytes")
    return bits.reshape(-1, 8)[:, ::-1].reshape(-1)


def crc_value(bits, spec: CrcSpec) -> int:
    """CRC register value after long division of ``bits`` (processed in order)."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if spec.refin:
        bits = _reflect_bytes(bits)
    top = 1 << (spec.width - 1)
    mask = (1 << spec.width) - 1
    reg = spec.init
    for b in bits:
        fb = bool(reg & top) ^ bool(b)
        reg = (reg << 1) & mask
        if fb:
            reg ^= spec.poly
    if spec.refout:
        reg = int(f"{reg:0{spec.width}b}"[::-1], 2)
    return reg ^ spec.xorout


def crc_bits(bits, spec: CrcSpec) -> np.ndarray:
    v = crc_value(bits, spec)
    return np.array([(v >> (spec.width - 1 - i)) & 1 for i in range(spec.width)], dtype=np.uint8)


def crc_bytes(data: bytes, spec: CrcSpec) -> int:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    return crc_value(bits, spec)


def crc_attach(payload, spec: CrcSpec) -> np.ndarray:
    payload = np.asarray(payload, dtype=np.uint8).reshape(-1)
    if payload.size == 0:
        raise ValueError("payload must be nonempty")
    return np.concatenate([payload, crc_bits(payload, spec)])


@lru_cache(maxsize=64)
def _affine_form(length: int, spec: CrcSpec):
    """``crc(bits) = bits @ M ^ c`` over GF(2) for payloads of a fixed length."""
    c = crc_bits(np.zeros(length, dtype=np.uint8), spec)
    M = np.empty((length, spec.width), dtype=np.uint8)
    e = np.zeros(length, dtype=np.uint8)
    for i in range(length):
        e[i] = 1
        M[i] = crc_bits(e, spec) ^ c
        e[i] = 0
    return M, c


def crc_check(word, spec: CrcSpec) -> np.ndarray | bool:
    """True where the trailing ``width`` bits match the CRC of the leading bits.

    Accepts a single word or a batch of shape ``(B, length)``.
    """
    word = np.asarray(word, dtype=np.uint8)
    if spec.width >= word.shape[-1]:
        raise ValueError("CRC width must be smaller than the word length")
    payload, check = word[..., : -spec.width], word[..., -spec.width :]
    M, c = _affine_form(payload.shape[-1], spec)
    calc = (payload.astype(np.int64) @ M.astype(np.int64)) % 2 ^ c
    ok = np.all(calc == check, axis=-1)
    return bool(ok) if ok.ndim == 0 else ok
