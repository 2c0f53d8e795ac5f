"""Fast successive-cancellation decoding for non-binary polar codes.

One Decoder instance compiles a static schedule from the code and the
decoder configuration: the tree of subtrees with their constituent-code
classification (Rate-0 / Rate-1 / repetition / generic), the per-node
message sizes, and the candidate cell lists of the check nodes.  Frames
are then decoded in lockstep batches; all per-node processing is
vectorised over (batch, kernels).

Variants:

* ``ms``   -- full min-sum on dense length-q vectors.
* ``ems``  -- extended min-sum on sorted messages of size n_m.
* ``aems`` -- asymmetric candidate band with n_l / n_h per-input counts.
* ``pa``   -- polarisation-aware: per-cluster indicator matrices from an
  offline DesignArtifact restrict the computed candidate cells and shrink
  the message sizes layer by layer.  The leaf layer stays unpruned.

The leaf layer needs no dense CN output: the decision for the theta leaf
is the field sum of the two input hard symbols (one GF addition), followed
by a full VN update for the phi leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from .code import CodeSpec, spec_hash
from .complexity import OpCount
from .galois import GField
from . import kernel as kn


class NodeClass(Enum):
    RATE0 = "rate0"
    RATE1 = "rate1"
    REP = "rep"
    GENERIC = "generic"


def classify_tree(spec: CodeSpec, n_v: int = 4) -> dict[tuple[int, int], NodeClass]:
    """Classify every aligned subtree, bottom-up.

    RATE0: all leaves frozen.  RATE1: all leaves informational.  REP: size
    exactly n_v with only the last leaf informational.  GENERIC otherwise.
    """
    out: dict[tuple[int, int], NodeClass] = {}
    frozen = spec.frozen_mask

    def visit(start: int, size: int) -> NodeClass:
        span = frozen[start:start + size]
        if span.all():
            cls = NodeClass.RATE0
        elif not span.any():
            cls = NodeClass.RATE1
        elif size == n_v and span[:-1].all() and not span[-1]:
            cls = NodeClass.REP
        else:
            cls = NodeClass.GENERIC
        out[(start, size)] = cls
        if size > 1:
            visit(start, size // 2)
            visit(start + size // 2, size // 2)
        return cls

    visit(0, spec.N)
    return out


@dataclass
class DecoderConfig:
    """Decoder variant and its message-size parameters."""

    variant: str = "ems"
    n_m: int = 18
    n_l: int = 8
    n_h: int = 20
    design=None  # DesignArtifact, required for the pa variant
    fast_nodes_enabled: bool = True
    n_v: int = 4

    def __post_init__(self):
        if self.variant not in ("ms", "ems", "aems", "pa"):
            raise ValueError(f"unknown decoder variant {self.variant!r}")
        if self.variant == "pa" and self.design is None:
            raise ValueError("pa variant requires a design artifact")

    @property
    def name(self) -> str:
        return {"ms": "FSC-MS", "ems": "FSC-EMS", "aems": "FSC-AEMS",
                "pa": "FSC-PA"}[self.variant]


@dataclass
class _Node:
    start: int
    size: int
    layer: int            # layer of the node's top kernels (1..n); size 2 -> n
    cluster: int
    kind: NodeClass
    in_size: int          # entries per incoming message (q for ms)
    out_size: int         # entries per message handed to the children
    coeffs: np.ndarray | None = None       # (size//2,) kernel gammas
    unit_gamma: bool = True
    fwd_perm: np.ndarray | None = None     # (K, q) eta -> gamma*eta
    inv_perm: np.ndarray | None = None     # (K, q) sym -> gamma^-1*sym
    cells_i: np.ndarray | None = None
    cells_j: np.ndarray | None = None
    cells_interior: int = 0
    rep_gains: np.ndarray | None = None
    children: tuple = ()


@dataclass
class BatchResult:
    u_hat: np.ndarray
    x_hat: np.ndarray
    failed: np.ndarray
    counts: OpCount
    traces: list | None = None
    genie_errors: np.ndarray | None = None


@dataclass
class DecodeResult:
    u_hat: np.ndarray
    x_hat: np.ndarray
    failed: bool
    counts: OpCount
    traces: list | None = None


def decode_rep(field: GField, inputs: np.ndarray, gains=None) -> int:
    """Repetition decision: argmin of the elementwise sum of the (de-rotated)
    input LLR vectors."""
    inputs = np.asarray(inputs, dtype=np.float64)
    n_v, q = inputs.shape
    if gains is None:
        gains = np.ones(n_v, dtype=np.int64)
    acc = np.zeros(q)
    for j in range(n_v):
        acc += inputs[j, field.mul_table[int(gains[j])]]
    return int(np.argmin(acc))


def span_encode(spec: CodeSpec, start: int, size: int, u_local: np.ndarray) -> np.ndarray:
    """Encode a local block through the subtree's own kernel layers."""
    m = size.bit_length() - 1
    l0 = spec.n - m + 1
    x = np.asarray(u_local, dtype=np.int64).copy()
    single = x.ndim == 1
    if single:
        x = x[None, :]
    mul = spec.field.mul_table
    for l_loc in range(m, 0, -1):
        l = l0 + l_loc - 1
        tp = np.arange(size // 2)
        theta = 2 * tp - (tp % (1 << (m - l_loc)))
        phi = theta + (1 << (m - l_loc))
        g = spec.coeffs[l - 1, start // 2 + tp]
        b = x[:, phi]
        x[:, theta] ^= b
        x[:, phi] = mul[g[None, :], b]
    return x[0] if single else x


def span_decode(spec: CodeSpec, start: int, size: int, x_local: np.ndarray) -> np.ndarray:
    """Inverse of span_encode: recover the subtree input block from its
    codeword block."""
    m = size.bit_length() - 1
    l0 = spec.n - m + 1
    u = np.asarray(x_local, dtype=np.int64).copy()
    single = u.ndim == 1
    if single:
        u = u[None, :]
    mul = spec.field.mul_table
    inv = spec.field.inv_table
    for l_loc in range(1, m + 1):
        l = l0 + l_loc - 1
        tp = np.arange(size // 2)
        theta = 2 * tp - (tp % (1 << (m - l_loc)))
        phi = theta + (1 << (m - l_loc))
        g = spec.coeffs[l - 1, start // 2 + tp]
        b = mul[inv[g][None, :], u[:, phi]]
        u[:, phi] = b
        u[:, theta] ^= b
    return u[0] if single else u


class Decoder:
    """Compiled SC decoder for one (CodeSpec, DecoderConfig) pair."""

    def __init__(self, spec: CodeSpec, cfg: DecoderConfig):
        self.spec = spec
        self.cfg = cfg
        self.field = spec.field
        self.q = spec.field.q
        self.n = spec.n
        self._classes = classify_tree(spec, cfg.n_v)
        if cfg.variant == "pa":
            art = cfg.design
            h = spec_hash(spec)
            if art.spec_hash != h:
                raise ValueError(
                    f"design artifact was built for code {art.spec_hash}, not {h}")
            self._sizes = art.sizes
            self._indicators = art.indicators
            self._root_size = min(art.n0, self.q)
        elif cfg.variant == "ems":
            self._root_size = min(cfg.n_m, self.q)
        elif cfg.variant == "aems":
            self._root_size = min(max(cfg.n_l, cfg.n_h), self.q)
        else:
            self._root_size = self.q
        self.root = self._build(0, spec.N, self._root_size)

    # -- schedule ------------------------------------------------------

    def _node_kind(self, start: int, size: int) -> NodeClass:
        if not self.cfg.fast_nodes_enabled:
            return NodeClass.GENERIC
        cls = self._classes[(start, size)]
        if cls == NodeClass.GENERIC:
            return NodeClass.GENERIC
        return cls

    def _build(self, start: int, size: int, in_size: int) -> _Node:
        m = size.bit_length() - 1
        layer = self.n - m + 1
        cluster = start // size
        kind = self._node_kind(start, size)
        K = size // 2
        coeffs = self.spec.coeffs[layer - 1, start // 2: start // 2 + K] if size >= 2 else None
        node = _Node(start, size, layer, cluster, kind, in_size, in_size,
                     coeffs=coeffs)
        if kind in (NodeClass.RATE0, NodeClass.RATE1):
            return node
        node.unit_gamma = bool(np.all(coeffs == 1))
        if not node.unit_gamma:
            node.fwd_perm = self.field.mul_table[coeffs]
            node.inv_perm = self.field.mul_table[self.field.inv_table[coeffs]]
        if kind == NodeClass.REP:
            node.rep_gains = span_encode(
                self.spec, start, size,
                np.eye(1, size, size - 1, dtype=np.int64)[0])
            return node
        if size == 2:
            return node
        # generic internal node: CN candidate structure and child sizes
        v = self.cfg.variant
        if v == "ms":
            out_size = self.q
        elif v == "ems":
            out_size = in_size
            node.cells_i, node.cells_j = kn.full_cells(in_size, in_size)
        elif v == "aems":
            out_size = in_size
            node.cells_i, node.cells_j = kn.aems_cells(
                min(self.cfg.n_l, in_size), min(self.cfg.n_h, in_size))
        else:  # pa
            key = (layer, cluster)
            if key not in self._indicators:
                raise ValueError(
                    f"design artifact has no statistics for cluster {key}; "
                    "tree shape differs from the design run")
            out_size = self._sizes[key]
            if out_size > in_size:
                raise ValueError(f"cluster {key}: size {out_size} exceeds input {in_size}")
            node.cells_i, node.cells_j = kn.indicator_cells(self._indicators[key], out_size)
        node.out_size = out_size
        if node.cells_i is not None:
            node.cells_interior = int(np.count_nonzero(
                (node.cells_i > 0) & (node.cells_j > 0)))
        node.children = (self._build(start, K, out_size),
                         self._build(start + K, K, out_size))
        return node

    def node_records(self):
        """Flat view of the schedule for complexity accounting."""
        records = []

        def walk(node: _Node):
            records.append(node)
            for c in node.children:
                walk(c)

        walk(self.root)
        return records

    # -- decoding ------------------------------------------------------

    def decode_batch(self, chan_llrs: np.ndarray, genie: np.ndarray | None = None,
                     collect_trace: bool = False) -> BatchResult:
        """Decode a (B, N, q) block of channel LLR vectors in lockstep.

        ``genie``: (B, N) true inputs; every leaf decision is tallied
        against it and then corrected, and per-channel error counts are
        returned (construction mode; requires fast nodes disabled).
        """
        chan_llrs = np.ascontiguousarray(chan_llrs, dtype=np.float64)
        B, N, q = chan_llrs.shape
        if N != self.spec.N or q != self.q:
            raise ValueError("channel LLR block does not match the code")
        if genie is not None and self.cfg.fast_nodes_enabled:
            raise ValueError("genie decoding requires fast_nodes_enabled=False")
        self._counts = OpCount()
        self._failed = np.zeros(B, dtype=bool)
        self._genie = genie
        self._genie_errors = np.zeros(N, dtype=np.int64) if genie is not None else None
        self._traces = [] if collect_trace else None
        if self.cfg.variant == "ms":
            msgs = chan_llrs
        else:
            ns = self._root_size
            syms = np.empty((B, N, ns), np.int64)
            llrs = np.empty((B, N, ns))
            defs = np.empty((B, N))
            kn._topk_core(chan_llrs, syms, llrs, defs)
            msgs = (syms, llrs, defs)
        u_hat, x_hat = self._decode(self.root, msgs)
        return BatchResult(u_hat, x_hat, self._failed, self._counts,
                           traces=self._traces, genie_errors=self._genie_errors)

    def decode_frame(self, chan_llrs: np.ndarray, collect_trace: bool = False) -> DecodeResult:
        res = self.decode_batch(chan_llrs[None, ...], collect_trace=collect_trace)
        return DecodeResult(res.u_hat[0], res.x_hat[0], bool(res.failed[0]),
                            res.counts, traces=res.traces)

    # internal helpers ---------------------------------------------------

    def _phi_to_eta(self, node: _Node, syms_or_dense, llrs=None):
        """Bring the phi-side halves into the kernel symbol domain."""
        if node.unit_gamma:
            return (syms_or_dense, llrs) if llrs is not None else syms_or_dense
        if llrs is None:  # dense: L(gamma*eta) via forward permutation gather
            dense = syms_or_dense
            B = dense.shape[0]
            perm = np.broadcast_to(node.fwd_perm[None, :, :], (B,) + node.fwd_perm.shape)
            return np.take_along_axis(dense, perm, axis=2)
        syms = node.inv_perm[np.arange(len(node.inv_perm))[None, :, None], syms_or_dense]
        return syms, llrs

    def _expand(self, syms, llrs, defs):
        B, K, _ = syms.shape
        out = np.empty((B, K, self.q))
        kn._expand_core(syms, llrs, defs, out)
        return out

    def _leaf_decision(self, dec: np.ndarray, leaf: int) -> np.ndarray:
        """Apply frozen forcing, genie correction and error tallying."""
        if self.spec.frozen_mask[leaf] and self._genie is None:
            return np.zeros_like(dec)
        if self._genie is not None:
            true = self._genie[:, leaf]
            self._genie_errors[leaf] += int(np.count_nonzero(dec != true))
            return true.copy()
        return dec

    def _decode(self, node: _Node, msgs):
        B = msgs.shape[0] if node.kind == NodeClass.RATE0 or self.cfg.variant == "ms" \
            else (msgs[0].shape[0] if isinstance(msgs, tuple) else msgs.shape[0])
        if node.kind == NodeClass.RATE0:
            z = np.zeros((B, node.size), dtype=np.int64)
            return z, z.copy()
        if node.kind == NodeClass.RATE1:
            return self._decode_rate1(node, msgs)
        if node.kind == NodeClass.REP:
            return self._decode_rep(node, msgs)
        if node.size == 2:
            return self._decode_pair(node, msgs)
        return self._decode_generic(node, msgs)

    def _hards(self, msgs, sl=slice(None)):
        if self.cfg.variant == "ms":
            return np.argmin(msgs[:, sl], axis=2)
        return msgs[0][:, sl, 0]

    def _decode_rate1(self, node: _Node, msgs):
        x_hat = self._hards(msgs).astype(np.int64)
        u_hat = span_decode(self.spec, node.start, node.size, x_hat)
        self._counts.comparisons += node.size * (self.q - 1) * x_hat.shape[0] \
            if self.cfg.variant == "ms" else 0
        return u_hat, x_hat

    def _decode_rep(self, node: _Node, msgs):
        if self.cfg.variant == "ms":
            dense = msgs
        else:
            dense = self._expand(*msgs)
        B = dense.shape[0]
        acc = np.zeros((B, self.q))
        for j in range(node.size):
            g = int(node.rep_gains[j])
            acc += dense[:, j, self.field.mul_table[g]]
        m_hat = np.argmin(acc, axis=1)
        u_hat = np.zeros((B, node.size), dtype=np.int64)
        u_hat[:, -1] = m_hat
        x_hat = self.field.mul_table[node.rep_gains[None, :], m_hat[:, None]]
        self._counts.real_adds += node.size * self.q * B
        self._counts.comparisons += (self.q - 1) * B
        return u_hat, x_hat

    def _decode_pair(self, node: _Node, msgs):
        q = self.q
        if self.cfg.variant == "ms":
            dense_th = msgs[:, 0:1]
            dense_ph = self._phi_to_eta(node, msgs[:, 1:2])
            B = dense_th.shape[0]
            h_th = np.argmin(dense_th[:, 0], axis=1)
            h_ph = np.argmin(dense_ph[:, 0], axis=1)
        else:
            syms, llrs, defs = msgs
            B = syms.shape[0]
            s_ph, l_ph = self._phi_to_eta(node, syms[:, 1:2], llrs[:, 1:2])
            dense_th = self._expand(syms[:, 0:1], llrs[:, 0:1], defs[:, 0:1])
            dense_ph = self._expand(s_ph, l_ph, defs[:, 1:2])
            h_th = syms[:, 0, 0]
            h_ph = s_ph[:, 0, 0]
        theta_leaf, phi_leaf = node.start, node.start + 1
        u_theta = self._leaf_decision(h_th ^ h_ph, theta_leaf)
        if self._genie is not None or not self.spec.frozen_mask[theta_leaf]:
            self._counts.gf_adds += B
        vn = np.empty((B, 1, q))
        kn._vn_ms_core(dense_th, dense_ph, u_theta[:, None], vn)
        self._counts.real_adds += q * B
        self._counts.comparisons += 2 * q * B
        u_phi = self._leaf_decision(np.argmin(vn[:, 0], axis=1), phi_leaf)
        g = int(node.coeffs[0])
        x_theta = u_theta ^ u_phi
        x_phi = self.field.mul_table[g][u_phi] if g != 1 else u_phi
        u_hat = np.stack([u_theta, u_phi], axis=1)
        x_hat = np.stack([x_theta, x_phi], axis=1)
        return u_hat, x_hat

    def _decode_generic(self, node: _Node, msgs):
        K = node.size // 2
        q = self.q
        if self.cfg.variant == "ms":
            B = msgs.shape[0]
            dense_th = msgs[:, :K]
            dense_ph = self._phi_to_eta(node, msgs[:, K:])
            order = np.argsort(dense_ph, axis=2, kind="stable")
            cn_out = np.empty((B, K, q))
            kn._cn_ms_core(dense_th, dense_ph, order, cn_out)
            self._counts.gf_adds += q * q * K * B
            self._counts.real_adds += (q - 1) * (q - 1) * K * B
            self._counts.comparisons += q * q * K * B
            left_msgs = cn_out
        else:
            syms, llrs, defs = msgs
            B = syms.shape[0]
            s_ph, l_ph = self._phi_to_eta(node, syms[:, K:], llrs[:, K:])
            s_th, l_th = syms[:, :K], llrs[:, :K]
            z = min(2, node.in_size - 1)
            cond = (l_th[:, :, z] < l_ph[:, :, z])[:, :, None]
            s_l = np.where(cond, s_th, s_ph)
            l_l = np.where(cond, l_th, l_ph)
            s_h = np.where(cond, s_ph, s_th)
            l_h = np.where(cond, l_ph, l_th)
            n_out = node.out_size
            out_s = np.empty((B, K, n_out), np.int64)
            out_l = np.empty((B, K, n_out))
            out_d = np.empty((B, K))
            out_len = np.empty((B, K), np.int64)
            want = self._traces is not None and node.layer < self.n
            win = np.empty((B, K, n_out), np.int64) if want else np.empty((1, 1, 1), np.int64)
            kn._cn_masked_core(s_h, l_h, s_l, l_l, node.cells_i, node.cells_j,
                               q, out_s, out_l, out_d, out_len, win, want)
            if np.any(out_len < n_out):
                self._failed |= (out_len < n_out).any(axis=1)
            ncells = len(node.cells_i)
            self._counts.gf_adds += ncells * K * B
            self._counts.real_adds += node.cells_interior * K * B
            self._counts.comparisons += (ncells + 1) * K * B
            if want:
                self._traces.append((node.layer, node.cluster, node.start // 2,
                                     node.cells_i, node.cells_j, win))
            left_msgs = (out_s, out_l, out_d)

        u_left, x_left = self._decode(node.children[0], left_msgs)

        if self.cfg.variant == "ms":
            vn_out = np.empty((B, K, q))
            kn._vn_ms_core(dense_th, dense_ph, x_left, vn_out)
            right_msgs = vn_out
        else:
            full_th = self._expand(s_th, l_th, defs[:, :K])
            full_ph = self._expand(s_ph, l_ph, defs[:, K:])
            vn_out = np.empty((B, K, q))
            kn._vn_ms_core(full_th, full_ph, x_left, vn_out)
            n_out = node.out_size
            r_s = np.empty((B, K, n_out), np.int64)
            r_l = np.empty((B, K, n_out))
            r_d = np.empty((B, K))
            kn._topk_core(vn_out, r_s, r_l, r_d)
            right_msgs = (r_s, r_l, r_d)
        self._counts.real_adds += q * K * B
        self._counts.comparisons += 2 * q * K * B

        u_right, x_right = self._decode(node.children[1], right_msgs)

        x_hat = np.empty((B, node.size), dtype=np.int64)
        x_hat[:, :K] = x_left ^ x_right
        if node.unit_gamma:
            x_hat[:, K:] = x_right
        else:
            x_hat[:, K:] = np.take_along_axis(node.fwd_perm[None, :, :]
                                              .repeat(B, axis=0), x_right[:, :, None],
                                              axis=2)[:, :, 0]
        u_hat = np.concatenate([u_left, u_right], axis=1)
        return u_hat, x_hat
