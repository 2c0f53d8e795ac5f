"""Per-kernel node processing for SC decoding over GF(q).

A decoder kernel combines two reliability messages with a check-node (CN)
update, and later a variable-node (VN) update once the left branch has been
decided.  Full min-sum works on dense length-q LLR vectors; the truncated
family (EMS / AEMS / polarisation-aware) works on SortedMessage lists of the
most reliable candidates.

Conventions used throughout:

* LLR vectors and message lists are nonnegative with minimum 0.
* Ties are broken towards the smallest symbol integer; sorting is stable.
* The kernel coefficient gamma multiplies the phi-side branch.  Messages
  originating from the phi side are brought into the kernel's own symbol
  domain once, via ``phi_to_eta`` (a gamma^-1 index mapping), so that the
  CN/VN inner loops are pure XOR combinations.  With gamma = 1 (the CCSK
  default) the mapping is the identity.

The ``*_core`` functions are numba kernels operating on (B, K, ...) blocks:
B lockstep frames times K kernels of one tree node.  The public operations
wrap them for single messages.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit

from .galois import GField

INF = np.inf


# ---------------------------------------------------------------------------
# numba cores
# ---------------------------------------------------------------------------


@njit(cache=True)
def _select_topk(table, n_out, syms_out, llrs_out):
    """Stable smallest-n_out selection from a dense per-symbol table.

    Scans symbols in ascending order, so equal LLRs keep the smaller
    symbol first.  Entries equal to +inf are absent symbols.  Returns the
    number of entries written and the default LLR for absent symbols (the
    (n_out+1)-th smallest when it exists, else the worst retained value).
    """
    q = table.shape[0]
    buf = np.empty(n_out + 1, np.int64)
    m = 0
    for s in range(q):
        v = table[s]
        if v == INF:
            continue
        if m == n_out + 1:
            if v >= table[buf[m - 1]]:
                continue
            pos = m - 1
            while pos > 0 and table[buf[pos - 1]] > v:
                pos -= 1
            for t in range(m - 1, pos, -1):
                buf[t] = buf[t - 1]
            buf[pos] = s
        else:
            pos = m
            while pos > 0 and table[buf[pos - 1]] > v:
                pos -= 1
            for t in range(m, pos, -1):
                buf[t] = buf[t - 1]
            buf[pos] = s
            m += 1
    if m == 0:
        return 0, INF
    k = m if m < n_out else n_out
    for t in range(k):
        syms_out[t] = buf[t]
        llrs_out[t] = table[buf[t]]
    if m > n_out:
        default = table[buf[n_out]]
    else:
        default = table[buf[m - 1]]
    return k, default


@njit(cache=True)
def _topk_core(tables, out_syms, out_llrs, out_def):
    """Batched truncation of dense (B, K, q) tables into sorted messages."""
    B, K, _ = tables.shape
    n_out = out_syms.shape[2]
    for b in range(B):
        for k in range(K):
            cnt, d = _select_topk(tables[b, k], n_out, out_syms[b, k], out_llrs[b, k])
            out_def[b, k] = d
    return


@njit(cache=True)
def _expand_core(syms, llrs, defaults, out):
    """Scatter sorted messages back to dense per-symbol tables."""
    B, K, n = syms.shape
    q = out.shape[2]
    for b in range(B):
        for k in range(K):
            d = defaults[b, k]
            for s in range(q):
                out[b, k, s] = d
            for t in range(n):
                out[b, k, syms[b, k, t]] = llrs[b, k, t]
    return


@njit(cache=True)
def _cn_ms_core(l_theta, l_phi_eta, order, out):
    """Dense min-sum CN: out[beta] = min_eta l_theta[beta^eta] + l_phi_eta[eta].

    ``order`` holds per-(frame, kernel) symbol indices sorted by ascending
    l_phi_eta; since l_theta >= 0, the scan can stop as soon as the phi term
    alone exceeds the current best.  The result is exact.
    """
    B, K, q = l_theta.shape
    for b in range(B):
        for k in range(K):
            for beta in range(q):
                best = INF
                for t in range(q):
                    eta = order[b, k, t]
                    v = l_phi_eta[b, k, eta]
                    if v >= best:
                        break
                    c = l_theta[b, k, beta ^ eta] + v
                    if c < best:
                        best = c
                out[b, k, beta] = best
    return


@njit(cache=True)
def _vn_ms_core(l_theta, l_phi_eta, u_hat, out):
    """Dense VN: out[eta] = l_theta[u^eta] + l_phi_eta[eta], min shifted to 0."""
    B, K, q = l_theta.shape
    for b in range(B):
        for k in range(K):
            u = u_hat[b, k]
            m = INF
            for eta in range(q):
                v = l_theta[b, k, u ^ eta] + l_phi_eta[b, k, eta]
                out[b, k, eta] = v
                if v < m:
                    m = v
            for eta in range(q):
                out[b, k, eta] -= m
    return


@njit(cache=True)
def _cn_masked_core(syms_h, llrs_h, syms_l, llrs_l, cells_i, cells_j, q,
                    out_syms, out_llrs, out_def, out_len, win, want_win):
    """Candidate-matrix CN over an explicit cell list.

    Cell c combines row cells_i[c] of the H input with column cells_j[c] of
    the L input.  Duplicate GF symbols keep the smallest LLR; on an exact
    tie the earliest cell in list order survives (the list is row-major).
    Outputs are the most reliable distinct symbols, ascending, at most
    n_out of them.  ``win`` (when requested) records the surviving cell
    index per output entry.
    """
    B, K, n_out = out_syms.shape
    C = cells_i.shape[0]
    table = np.empty(q)
    winner = np.empty(q, np.int64)
    for b in range(B):
        for k in range(K):
            for s in range(q):
                table[s] = INF
            for c in range(C):
                s = syms_h[b, k, cells_i[c]] ^ syms_l[b, k, cells_j[c]]
                v = llrs_h[b, k, cells_i[c]] + llrs_l[b, k, cells_j[c]]
                if v < table[s]:
                    table[s] = v
                    winner[s] = c
            cnt, d = _select_topk(table, n_out, out_syms[b, k], out_llrs[b, k])
            out_len[b, k] = cnt
            out_def[b, k] = d
            if want_win:
                for t in range(cnt):
                    win[b, k, t] = winner[out_syms[b, k, t]]
    return


# ---------------------------------------------------------------------------
# message types
# ---------------------------------------------------------------------------


@dataclass
class SortedMessage:
    """Truncated reliability list: distinct symbols, ascending LLR.

    ``default_llr`` is the value assumed for any symbol not listed; it is
    never below the worst retained LLR.
    """

    symbols: np.ndarray
    llrs: np.ndarray
    default_llr: float
    capacity: int = dc_field(default=0)

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.int64)
        self.llrs = np.asarray(self.llrs, dtype=np.float64)
        if self.capacity == 0:
            self.capacity = len(self.symbols)
        self.validate()

    def validate(self):
        if len(self.symbols) != len(self.llrs):
            raise ValueError("symbol/llr length mismatch")
        if len(self.symbols) == 0:
            raise ValueError("empty message")
        if len(self.symbols) > self.capacity:
            raise ValueError("message longer than capacity")
        if self.llrs[0] != 0.0:
            raise ValueError("first entry must have LLR 0")
        if np.any(np.diff(self.llrs) < 0):
            raise ValueError("LLRs must be non-decreasing")
        if len(np.unique(self.symbols)) != len(self.symbols):
            raise ValueError("symbols must be distinct")
        if self.default_llr < self.llrs[-1]:
            raise ValueError("default_llr below worst retained LLR")

    def __len__(self):
        return len(self.symbols)

    @property
    def hard(self) -> int:
        return int(self.symbols[0])

    def expand(self, q: int) -> np.ndarray:
        """Dense length-q LLR vector with default_llr for absent symbols."""
        out = np.full(q, self.default_llr)
        out[self.symbols] = self.llrs
        return out


@dataclass
class IndicatorMatrix:
    """Retained-bubble mask for one polarisation cluster.

    entry (0, 0) is always 1: the combined hard decision is never pruned.
    """

    matrix: np.ndarray
    layer: int
    cluster: int

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.int64)
        if self.matrix.ndim != 2:
            raise ValueError("indicator must be 2-D")
        if not np.all((self.matrix == 0) | (self.matrix == 1)):
            raise ValueError("indicator entries must be 0/1")
        if self.matrix[0, 0] != 1:
            raise ValueError("indicator (0,0) must be 1")

    @property
    def size(self) -> int:
        """Propagated message size: retained count in row 0."""
        return int(self.matrix[0].sum())


# ---------------------------------------------------------------------------
# public single-kernel operations
# ---------------------------------------------------------------------------


def kernel_indices(n: int, l: int, t: int) -> tuple[int, int]:
    """Input vector indices (theta, phi) of kernel instance t at layer l."""
    if not 1 <= l <= n:
        raise ValueError(f"layer {l} outside [1, {n}]")
    if not 0 <= t < (1 << (n - 1)):
        raise ValueError(f"instance {t} outside [0, {1 << (n - 1)})")
    theta = 2 * t - (t % (1 << (n - l)))
    return theta, theta + (1 << (n - l))


def cn_update_ms(field: GField, l_theta: np.ndarray, l_phi: np.ndarray,
                 gamma: int = 1) -> np.ndarray:
    """Full min-sum CN update, Eqs-style: min over eta of
    l_theta(beta ^ eta) + l_phi(gamma * eta), renormalised to min 0."""
    q = field.q
    l_theta = np.asarray(l_theta, dtype=np.float64).reshape(1, 1, q)
    perm = field.mul_perm(gamma)
    l_phi_eta = np.asarray(l_phi, dtype=np.float64)[perm].reshape(1, 1, q)
    order = np.argsort(l_phi_eta, axis=2, kind="stable")
    out = np.empty((1, 1, q))
    _cn_ms_core(l_theta, l_phi_eta, order, out)
    out = out[0, 0]
    return out - out.min()


def vn_update(field: GField, l_theta: np.ndarray, l_phi: np.ndarray,
              u_hat: int, gamma: int = 1) -> np.ndarray:
    """VN update l_theta(u ^ eta) + l_phi(gamma * eta), min shifted to 0."""
    q = field.q
    perm = field.mul_perm(gamma)
    l_theta = np.asarray(l_theta, dtype=np.float64).reshape(1, 1, q)
    l_phi_eta = np.asarray(l_phi, dtype=np.float64)[perm].reshape(1, 1, q)
    out = np.empty((1, 1, q))
    _vn_ms_core(l_theta, l_phi_eta, np.array([[u_hat]], dtype=np.int64), out)
    return out[0, 0]


def hard_decision(msg, index: int, info_set) -> int:
    """Layer-n decision: 0 when frozen, else the most reliable symbol."""
    if index not in info_set:
        return 0
    if isinstance(msg, SortedMessage):
        return msg.hard
    values = msg.values if hasattr(msg, "values") else np.asarray(msg)
    return int(np.argmin(values))


def truncate(values: np.ndarray, n: int) -> SortedMessage:
    """Keep the n most reliable symbols of a dense LLR vector."""
    values = values.values if hasattr(values, "values") else np.asarray(values, dtype=np.float64)
    q = values.shape[0]
    if not 1 <= n <= q:
        raise ValueError(f"n must be in [1, {q}]")
    syms = np.empty((1, 1, n), np.int64)
    llrs = np.empty((1, 1, n))
    d = np.empty((1, 1))
    _topk_core(values.reshape(1, 1, q), syms, llrs, d)
    return SortedMessage(syms[0, 0], llrs[0, 0], float(d[0, 0]), capacity=n)


def phi_to_eta(field: GField, msg: SortedMessage, gamma: int) -> SortedMessage:
    """Bring a phi-side message into the kernel symbol domain.

    The phi branch observes gamma * eta, so its symbols are mapped through
    gamma^-1 once here; all downstream combining is then multiplication
    free.  Identity for gamma = 1.
    """
    if gamma == 1:
        return msg
    perm = field.mul_table[field.inv(gamma)]
    return SortedMessage(perm[msg.symbols], msg.llrs.copy(), msg.default_llr,
                         capacity=msg.capacity)


def relocate_inputs(m_theta: SortedMessage, m_phi: SortedMessage):
    """Order a message pair by relative reliability.

    Compares the LLR at index z = 2 (or the last common index for shorter
    messages); the input with the smaller value is the least reliable M_L.
    Ties take the 'otherwise' branch: (M_L, M_H) = (m_phi, m_theta).
    """
    z = min(2, len(m_theta) - 1, len(m_phi) - 1)
    if m_theta.llrs[z] < m_phi.llrs[z]:
        return m_theta, m_phi
    return m_phi, m_theta


def _masked_cn(q: int, m_l: SortedMessage, m_h: SortedMessage,
               cells_i: np.ndarray, cells_j: np.ndarray, n_out: int) -> SortedMessage:
    syms_h = m_h.symbols.reshape(1, 1, -1)
    llrs_h = m_h.llrs.reshape(1, 1, -1)
    syms_l = m_l.symbols.reshape(1, 1, -1)
    llrs_l = m_l.llrs.reshape(1, 1, -1)
    out_s = np.empty((1, 1, n_out), np.int64)
    out_l = np.empty((1, 1, n_out))
    out_d = np.empty((1, 1))
    out_len = np.empty((1, 1), np.int64)
    win = np.empty((1, 1, 1), np.int64)
    _cn_masked_core(syms_h, llrs_h, syms_l, llrs_l,
                    cells_i.astype(np.int64), cells_j.astype(np.int64), q,
                    out_s, out_l, out_d, out_len, win, False)
    cnt = int(out_len[0, 0])
    return SortedMessage(out_s[0, 0, :cnt], out_l[0, 0, :cnt], float(out_d[0, 0]),
                         capacity=n_out)


def full_cells(n_rows: int, n_cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major cell list covering the whole candidate matrix."""
    i, j = np.divmod(np.arange(n_rows * n_cols, dtype=np.int64), n_cols)
    return i, j


def aems_cells(n_l: int, n_h: int) -> tuple[np.ndarray, np.ndarray]:
    """Asymmetric candidate band: two columns of depth n_h into the H input
    and two rows of width n_l into the L input, overlap deduplicated.

    The cell total is 2*(n_l + n_h) - 4 field additions, of which
    n_l + n_h - 3 also cost a real addition (everything off row/column 0).
    """
    cells = set()
    for i in range(n_h):
        for j in range(min(2, n_l)):
            cells.add((i, j))
    for i in range(min(2, n_h)):
        for j in range(n_l):
            cells.add((i, j))
    cells = sorted(cells)
    return (np.array([c[0] for c in cells], dtype=np.int64),
            np.array([c[1] for c in cells], dtype=np.int64))


def indicator_cells(matrix: np.ndarray, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    """Retained cells of an indicator matrix within the output-size square,
    in row-major order."""
    sub = np.asarray(matrix)[:n_out, :n_out]
    ii, jj = np.nonzero(sub)
    if len(ii) == 0:
        return np.array([0], dtype=np.int64), np.array([0], dtype=np.int64)
    order = np.argsort(ii * sub.shape[1] + jj, kind="stable")
    return ii[order].astype(np.int64), jj[order].astype(np.int64)


def cn_update_ems(field: GField, m_l: SortedMessage, m_h: SortedMessage,
                  n_out: int) -> SortedMessage:
    """EMS CN: most reliable distinct symbols of the full candidate matrix
    T(i, j) = M_H(i) combined with M_L(j).  Inputs must share one symbol
    domain (see phi_to_eta)."""
    ci, cj = full_cells(len(m_h), len(m_l))
    return _masked_cn(field.q, m_l, m_h, ci, cj, n_out)


def cn_update_pa(field: GField, m_l: SortedMessage, m_h: SortedMessage,
                 indicator, n_out: int | None = None) -> SortedMessage:
    """Pruned CN: candidates restricted to indicator cells inside the
    output-size square; saturated cells never enter the sorter."""
    matrix = indicator.matrix if isinstance(indicator, IndicatorMatrix) else np.asarray(indicator)
    if n_out is None:
        n_out = int(matrix[0].sum())
    n_out = max(1, min(n_out, field.q))
    ci, cj = indicator_cells(matrix, n_out)
    keep = (ci < len(m_h)) & (cj < len(m_l))
    ci, cj = ci[keep], cj[keep]
    if len(ci) == 0:
        ci = np.array([0], dtype=np.int64)
        cj = np.array([0], dtype=np.int64)
    return _masked_cn(field.q, m_l, m_h, ci, cj, n_out)


def cn_update_aems(field: GField, m_l: SortedMessage, m_h: SortedMessage,
                   n_l: int, n_h: int, n_out: int) -> SortedMessage:
    """Asymmetric EMS CN over the L-shaped band of aems_cells."""
    ci, cj = aems_cells(min(n_l, len(m_l)), min(n_h, len(m_h)))
    return _masked_cn(field.q, m_l, m_h, ci, cj, n_out)


def vn_update_truncated(field: GField, m_theta: SortedMessage, m_phi: SortedMessage,
                        u_hat: int, n_out: int, gamma: int = 1) -> SortedMessage:
    """VN update on truncated messages.

    Both inputs are expanded to dense vectors with their default LLRs, the
    dense VN rule is applied (q real additions) and the result truncated.
    """
    q = field.q
    n_out = min(n_out, q)
    m_phi_eta = phi_to_eta(field, m_phi, gamma)
    full_theta = m_theta.expand(q).reshape(1, 1, q)
    full_phi = m_phi_eta.expand(q).reshape(1, 1, q)
    tmp = np.empty((1, 1, q))
    _vn_ms_core(full_theta, full_phi, np.array([[u_hat]], dtype=np.int64), tmp)
    syms = np.empty((1, 1, n_out), np.int64)
    llrs = np.empty((1, 1, n_out))
    d = np.empty((1, 1))
    _topk_core(tmp, syms, llrs, d)
    return SortedMessage(syms[0, 0], llrs[0, 0], float(d[0, 0]), capacity=n_out)
