"""Modulation, AWGN channel and intrinsic LLR computation.

Two modulations are supported:

* CCSK -- a symbol over GF(q) selects a left-cyclic shift of a length-q
  binary PN sequence; the shifted sequence is sent as +/-1 chips.
* BPSK -- each symbol is sent as its p bits (LSB first), one +/-1 chip
  per bit, with 0 -> +1 and 1 -> -1.

All LLR vectors follow the nonnegative convention: L(hard) = 0 and
L(alpha) >= 0 for every symbol, where hard is the most likely symbol.
SNR is Es/N0 for the unit-energy transmitted chip (CCSK) or bit (BPSK):
sigma^2 = 1 / (2 * 10^(snr_db/10)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def noise_sigma2(snr_db: float) -> float:
    """Noise variance for a unit-energy +/-1 chip at the given Es/N0."""
    return 1.0 / (2.0 * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class LlrVector:
    """Intrinsic symbol reliabilities: values >= 0, values[hard] == 0."""

    values: np.ndarray
    hard: int = field(init=False, default=0)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "hard", int(np.argmin(v)))
        if v[self.hard] != 0.0 or np.any(v < 0):
            raise ValueError("LLR vector must be nonnegative with a zero minimum")

    @property
    def q(self) -> int:
        return self.values.shape[0]


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    """Turn per-symbol likelihood scores into the nonnegative LLR form.

    ``scores`` may be (..., q); larger score = more likely.  The result is
    max(scores) - scores along the last axis.
    """
    return scores.max(axis=-1, keepdims=True) - scores


class CcskConfig:
    """PN sequence and shift convention for CCSK.

    The default sequence is drawn from a seeded PRNG, rejected until it is
    balanced (Hamming weight q/2) and all q cyclic shifts are distinct, so
    that distinct symbols map to distinct waveforms.
    """

    def __init__(self, pn: np.ndarray, seed: int | None = None):
        pn = np.asarray(pn, dtype=np.int64)
        q = pn.shape[0]
        if q < 2 or (q & (q - 1)):
            raise ValueError("PN length must be a power of two >= 2")
        if not np.all((pn == 0) | (pn == 1)):
            raise ValueError("PN chips must be 0/1")
        if pn.min() == pn.max():
            raise ValueError("PN sequence must not be constant")
        self.pn = pn
        self.seed = seed
        self.q = q
        # psi[a] = pn cyclically left-shifted by a; psi[a][k] = pn[(k+a) % q]
        idx = (np.arange(q)[None, :] + np.arange(q)[:, None]) % q
        self.psi = pn[idx]
        self.psi.setflags(write=False)
        self.chips = (2 * self.psi - 1).astype(np.float64)
        self.chips.setflags(write=False)

    @classmethod
    def default(cls, q: int, seed: int = 0xCC5C) -> "CcskConfig":
        rng = np.random.default_rng(seed)
        while True:
            pn = np.zeros(q, dtype=np.int64)
            on = rng.permutation(q)[: q // 2]
            pn[on] = 1
            shifts = pn[(np.arange(q)[None, :] + np.arange(q)[:, None]) % q]
            if np.unique(shifts, axis=0).shape[0] == q:
                return cls(pn, seed=seed)

    def to_dict(self) -> dict:
        return {"pn": self.pn.tolist(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "CcskConfig":
        return cls(np.asarray(d["pn"], dtype=np.int64), seed=d.get("seed"))

    def __eq__(self, other):
        return isinstance(other, CcskConfig) and np.array_equal(other.pn, self.pn)


def ccsk_modulate(cfg: CcskConfig, x: int) -> np.ndarray:
    """Map symbol x to its +/-1 chip sequence (left shift of the PN by x)."""
    if not 0 <= x < cfg.q:
        raise ValueError(f"symbol {x} outside [0, {cfg.q})")
    return cfg.chips[x].copy()


def bpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """0 -> +1, 1 -> -1."""
    bits = np.asarray(bits)
    return 1.0 - 2.0 * bits


def awgn(chips: np.ndarray, snr_db: float, seed=None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Add seeded white Gaussian noise of variance noise_sigma2(snr_db)."""
    if rng is None:
        rng = np.random.default_rng(seed)
    sigma = np.sqrt(noise_sigma2(snr_db))
    return chips + sigma * rng.standard_normal(chips.shape)


def ccsk_scores(cfg: CcskConfig, y: np.ndarray, sigma2: float) -> np.ndarray:
    """Correlation score per candidate symbol, sum_k y(k) psi_a(k) / sigma2.

    ``y`` may be (..., q); returns matching (..., q) scores.
    """
    return (y @ cfg.psi.T.astype(np.float64)) / sigma2


def llr_ccsk(cfg: CcskConfig, y: np.ndarray, sigma2: float) -> LlrVector:
    """Symbol LLRs for one received CCSK block of q noisy chips."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (cfg.q,):
        raise ValueError(f"expected {cfg.q} chips, got shape {y.shape}")
    scores = ccsk_scores(cfg, y, sigma2)
    return LlrVector(normalize_scores(scores))


def bpsk_nb_scores(y: np.ndarray, sigma2: float, bits_table: np.ndarray) -> np.ndarray:
    """Per-symbol scores for p BPSK chips carrying one GF(2^p) symbol.

    ``y`` is (..., p); bits_table is the (q, p) LSB-first bit expansion.
    With the 0 -> +1 chip map, a positive chip favours bit 0, so the score
    of symbol alpha is sum_k -y(k) * alpha(k) / sigma2 (up to a constant).
    """
    return -(y @ bits_table.T.astype(np.float64)) / sigma2


def symbol_bits_table(p: int) -> np.ndarray:
    """(2^p, p) array of LSB-first bit expansions."""
    q = 1 << p
    return ((np.arange(q)[:, None] >> np.arange(p)[None, :]) & 1).astype(np.int64)


def llr_nb_bpsk(y: np.ndarray, sigma2: float) -> LlrVector:
    """Symbol LLRs from p per-bit BPSK observations.

    L(alpha) = sum_k (y_k / sigma2) * (alpha_k - hard_k), oriented for the
    0 -> +1 chip map so that the result is nonnegative with L(hard) = 0.
    """
    y = np.asarray(y, dtype=np.float64)
    p = y.shape[0]
    scores = bpsk_nb_scores(y, sigma2, symbol_bits_table(p))
    return LlrVector(normalize_scores(scores))


def llr_binary_bpsk(y: float, sigma2: float) -> float:
    """Classic bit LLR 2y/sigma^2 (positive favours bit 0)."""
    return 2.0 * y / sigma2


def binary_marginalize(L: LlrVector | np.ndarray) -> np.ndarray:
    """Bit reliabilities from a symbol LLR vector (max-log marginalisation).

    Lambda(k) = min over symbols with bit k = 1 of L
              - min over symbols with bit k = 0 of L,
    so positive values favour bit 0, matching llr_binary_bpsk's sign.
    """
    v = L.values if isinstance(L, LlrVector) else np.asarray(L, dtype=np.float64)
    q = v.shape[0]
    p = int(np.log2(q))
    bits = symbol_bits_table(p)
    out = np.empty(p)
    for k in range(p):
        ones = bits[:, k] == 1
        out[k] = v[ones].min() - v[~ones].min()
    return out


# -- batched channel pipeline used by the Monte-Carlo harness -----------


def transmit_ccsk(cfg: CcskConfig, x: np.ndarray, snr_db: float,
                  rng: np.random.Generator, noiseless: bool = False) -> np.ndarray:
    """Modulate a (B, N) symbol block, add noise, return (B, N, q) LLRs."""
    B, N = x.shape
    chips = cfg.chips[x]  # (B, N, q)
    sigma2 = noise_sigma2(snr_db)
    if noiseless:
        y = chips
    else:
        y = chips + np.sqrt(sigma2) * rng.standard_normal(chips.shape)
    scores = ccsk_scores(cfg, y, sigma2)
    return normalize_scores(scores)


def transmit_bpsk_nb(p: int, x: np.ndarray, snr_db: float,
                     rng: np.random.Generator, noiseless: bool = False) -> np.ndarray:
    """BPSK counterpart of transmit_ccsk: (B, N) symbols -> (B, N, q) LLRs."""
    bits_table = symbol_bits_table(p)
    chips = 1.0 - 2.0 * bits_table[x]  # (B, N, p)
    sigma2 = noise_sigma2(snr_db)
    if noiseless:
        y = chips
    else:
        y = chips + np.sqrt(sigma2) * rng.standard_normal(chips.shape)
    scores = bpsk_nb_scores(y, sigma2, bits_table)
    return normalize_scores(scores)
