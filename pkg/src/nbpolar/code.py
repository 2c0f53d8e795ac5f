"""Polar code construction and encoding over GF(2^p).

The code is defined by the 2x2 kernel (u0, u1) -> (u0 + u1, gamma * u1)
applied as n = log2(N) butterfly stages.  The frozen set is designed by a
genie-aided Monte-Carlo: random full-rate frames are decoded with the full
min-sum SC decoder, every layer-n decision is compared against the truth
(and then corrected), and channels are ranked by their error counts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .galois import GField
from .modem import CcskConfig

SPEC_FORMAT_VERSION = 1


@dataclass
class CodeSpec:
    """Code length/dimension, information set and per-kernel coefficients.

    ``coeffs`` has shape (n, N/2): coeffs[l-1, t] is the gamma of kernel
    instance t at layer l.  All coefficients must be nonzero.
    """

    field: GField
    N: int
    K: int
    info_set: np.ndarray
    coeffs: np.ndarray
    modulation: str = "ccsk"
    ccsk: CcskConfig | None = None
    design_snr_db: float | None = None
    seed: int | None = None
    construction_frames: int | None = None

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two >= 2")
        if not 0 <= self.K <= self.N:
            raise ValueError("K must be in [0, N]")
        self.info_set = np.sort(np.asarray(self.info_set, dtype=np.int64))
        if len(self.info_set) != self.K:
            raise ValueError("info_set size must equal K")
        if self.K and (self.info_set[0] < 0 or self.info_set[-1] >= self.N):
            raise ValueError("info_set indices out of range")
        if len(np.unique(self.info_set)) != self.K:
            raise ValueError("info_set indices must be distinct")
        self.coeffs = np.asarray(self.coeffs, dtype=np.int64)
        if self.coeffs.shape != (self.n, self.N // 2):
            raise ValueError(f"coeffs must have shape {(self.n, self.N // 2)}")
        if np.any(self.coeffs == 0) or np.any(self.coeffs >= self.field.q):
            raise ValueError("coefficients must be nonzero field elements")
        if self.modulation not in ("ccsk", "bpsk"):
            raise ValueError(f"unknown modulation {self.modulation!r}")
        if self.modulation == "ccsk" and self.ccsk is None:
            self.ccsk = CcskConfig.default(self.field.q)
        mask = np.ones(self.N, dtype=bool)
        mask[self.info_set] = False
        self.frozen_mask = mask

    @property
    def n(self) -> int:
        return self.N.bit_length() - 1

    @property
    def frozen_set(self) -> np.ndarray:
        return np.nonzero(self.frozen_mask)[0]

    @property
    def rate(self) -> float:
        return self.K / self.N

    def effective_rate(self) -> float:
        """Code rate times the CCSK spreading factor p/q (BPSK: times 1)."""
        if self.modulation == "ccsk":
            return self.rate * self.field.p / self.field.q
        return self.rate

    def gamma(self, layer: int, instance: int) -> int:
        return int(self.coeffs[layer - 1, instance])


def uniform_coeffs(field: GField, N: int, value: int | list | np.ndarray = 1) -> np.ndarray:
    """Coefficient table from a scalar, one value per layer, or full table."""
    n = N.bit_length() - 1
    value = np.asarray(value, dtype=np.int64)
    if value.ndim == 0:
        return np.full((n, N // 2), int(value), dtype=np.int64)
    if value.shape == (n,):
        return np.repeat(value[:, None], N // 2, axis=1)
    if value.shape == (n, N // 2):
        return value.copy()
    raise ValueError(f"cannot broadcast coefficients of shape {value.shape}")


def allocate_message(spec: CodeSpec, m: np.ndarray) -> np.ndarray:
    """Place the K message symbols at the information indices, zeros elsewhere."""
    m = np.asarray(m, dtype=np.int64)
    if m.shape[-1] != spec.K:
        raise ValueError(f"message length {m.shape[-1]} != K = {spec.K}")
    u = np.zeros(m.shape[:-1] + (spec.N,), dtype=np.int64)
    u[..., spec.info_set] = m
    return u


def encode(spec: CodeSpec, u: np.ndarray) -> np.ndarray:
    """Butterfly encoding: n stages of (a, b) -> (a ^ b, gamma * b).

    Accepts (N,) or (B, N) arrays.  Frozen positions of u must be zero.
    """
    u = np.asarray(u, dtype=np.int64)
    single = u.ndim == 1
    x = u.reshape(1, -1).copy() if single else u.copy()
    if x.shape[1] != spec.N:
        raise ValueError(f"input length {x.shape[1]} != N = {spec.N}")
    if np.any(x[:, spec.frozen_mask] != 0):
        raise ValueError("nonzero symbol at frozen index")
    n = spec.n
    mul = spec.field.mul_table
    for l in range(n, 0, -1):
        t = np.arange(spec.N // 2)
        theta = 2 * t - (t % (1 << (n - l)))
        phi = theta + (1 << (n - l))
        b = x[:, phi]
        x[:, theta] ^= b
        x[:, phi] = mul[spec.coeffs[l - 1][None, :], b]
    return x[0] if single else x


def backpropagate(spec: CodeSpec, u_theta: int, u_phi: int, layer: int,
                  instance: int) -> tuple[int, int]:
    """Push a decided kernel pair one layer towards the channel:
    (u_theta ^ u_phi, gamma * u_phi)."""
    g = spec.gamma(layer, instance)
    return u_theta ^ u_phi, spec.field.mul(g, u_phi)


@dataclass
class ConstructionReport:
    """Per-channel genie error statistics from a construction run."""

    error_counts: np.ndarray
    frames: int
    design_snr_db: float

    @property
    def error_rates(self) -> np.ndarray:
        return self.error_counts / self.frames


def construct_frozen_set(field: GField, N: int, K: int, design_snr_db: float,
                         modulation: str = "ccsk", frames: int = 10_000,
                         seed: int = 0, ccsk: CcskConfig | None = None,
                         coeffs=1, batch: int = 256) -> tuple[CodeSpec, ConstructionReport]:
    """Genie-aided Monte-Carlo channel ranking.

    Random full-rate frames are encoded, transmitted at the design SNR and
    decoded with the full (untruncated) min-sum SC decoder; each layer-n
    decision error is tallied and then corrected to the true symbol.  The K
    channels with the fewest errors form the information set, ties broken
    towards the smaller channel index.  Deterministic for a fixed seed.
    """
    from . import fastsc
    from .modem import transmit_bpsk_nb, transmit_ccsk

    if K > N:
        raise ValueError("K > N")
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if modulation not in ("ccsk", "bpsk"):
        raise ValueError(f"unknown modulation {modulation!r}")
    if modulation == "ccsk" and ccsk is None:
        ccsk = CcskConfig.default(field.q)

    coeff_table = uniform_coeffs(field, N, coeffs)
    probe = CodeSpec(field, N, K=N, info_set=np.arange(N), coeffs=coeff_table,
                     modulation=modulation, ccsk=ccsk)
    cfg = fastsc.DecoderConfig(variant="ms", fast_nodes_enabled=False)
    decoder = fastsc.Decoder(probe, cfg)

    err_counts = np.zeros(N, dtype=np.int64)
    done = 0
    chunk = 0
    while done < frames:
        B = min(batch, frames - done)
        rng = np.random.default_rng([seed, 0xC0DE, chunk])
        u = rng.integers(0, field.q, size=(B, N), dtype=np.int64)
        x = encode(probe, u)
        if modulation == "ccsk":
            llrs = transmit_ccsk(ccsk, x, design_snr_db, rng)
        else:
            llrs = transmit_bpsk_nb(field.p, x, design_snr_db, rng)
        res = decoder.decode_batch(llrs, genie=u)
        err_counts += res.genie_errors
        done += B
        chunk += 1

    order = np.lexsort((np.arange(N), err_counts))
    info = np.sort(order[:K])
    spec = CodeSpec(field, N, K, info_set=info, coeffs=coeff_table,
                    modulation=modulation, ccsk=ccsk,
                    design_snr_db=design_snr_db, seed=seed,
                    construction_frames=frames)
    report = ConstructionReport(err_counts, frames, design_snr_db)
    return spec, report


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def spec_to_dict(spec: CodeSpec) -> dict:
    return {
        "format_version": SPEC_FORMAT_VERSION,
        "p": spec.field.p,
        "poly": spec.field.poly,
        "N": spec.N,
        "K": spec.K,
        "info_set": spec.info_set.tolist(),
        "coeffs": spec.coeffs.tolist(),
        "modulation": spec.modulation,
        "ccsk": spec.ccsk.to_dict() if spec.ccsk is not None else None,
        "design_snr_db": spec.design_snr_db,
        "seed": spec.seed,
        "construction_frames": spec.construction_frames,
    }


def spec_from_dict(d: dict) -> CodeSpec:
    if d.get("format_version") != SPEC_FORMAT_VERSION:
        raise ValueError(f"unsupported code spec format: {d.get('format_version')}")
    field = GField(d["p"], d["poly"])
    ccsk = CcskConfig.from_dict(d["ccsk"]) if d.get("ccsk") else None
    return CodeSpec(field, d["N"], d["K"], np.asarray(d["info_set"]),
                    np.asarray(d["coeffs"]), modulation=d["modulation"],
                    ccsk=ccsk, design_snr_db=d.get("design_snr_db"),
                    seed=d.get("seed"),
                    construction_frames=d.get("construction_frames"))


def save_spec(spec: CodeSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(spec_to_dict(spec), f, indent=1)


def load_spec(path) -> CodeSpec:
    with open(path) as f:
        return spec_from_dict(json.load(f))


def spec_hash(spec: CodeSpec) -> str:
    """Stable digest used to pair design artifacts with their code."""
    blob = json.dumps(spec_to_dict(spec), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
