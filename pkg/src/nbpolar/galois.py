"""Arithmetic over GF(2^p) built from log/antilog tables.

Elements are plain integers in [0, 2^p) whose bits are polynomial
coefficients over GF(2).  Addition is bitwise XOR; multiplication goes
through log/antilog tables generated from a primitive polynomial.
"""

from __future__ import annotations

import numpy as np

# Default primitive polynomials per extension degree p, as bitmasks over
# p+1 bits (x^6 + x + 1 -> 0b1000011, etc.).  Any primitive choice works;
# these are fixed so that results are reproducible.
DEFAULT_POLY = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
}


class GField:
    """The finite field GF(q = 2^p) for 2 <= p <= 8.

    Immutable after construction; safe to share across workers.

    Attributes
    ----------
    p : bit width of a symbol
    q : field order, 2^p
    poly : primitive polynomial bitmask (p+1 bits)
    log_table, antilog_table : length-q int arrays (log_table[0] unused)
    mul_table : (q, q) multiplication table; mul_table[a, b] = a * b
    inv_table : length-q inverse table (inv_table[0] unused)
    """

    def __init__(self, p: int, poly: int | None = None):
        if not 2 <= p <= 8:
            raise ValueError(f"p must be in [2, 8], got {p}")
        if poly is None:
            poly = DEFAULT_POLY[p]
        if poly >> (p + 1):
            raise ValueError(f"polynomial 0x{poly:x} has degree above {p}")
        if not (poly >> p) & 1:
            raise ValueError(f"polynomial 0x{poly:x} must have degree exactly {p}")
        self.p = p
        self.q = 1 << p
        self.poly = poly

        antilog = np.zeros(self.q, dtype=np.int64)
        log = np.zeros(self.q, dtype=np.int64)
        x = 1
        for i in range(self.q - 1):
            if x == 1 and i > 0:
                raise ValueError(
                    f"polynomial 0x{poly:x} is not primitive for p={p}: "
                    f"generator cycle closed after {i} steps"
                )
            antilog[i] = x
            log[x] = i
            x <<= 1
            if x & self.q:
                x ^= poly
        if x != 1:
            raise ValueError(f"polynomial 0x{poly:x} is not primitive for p={p}")
        self.log_table = log
        self.antilog_table = antilog

        # Dense q*q table: fast vectorised multiply for decoder permutations.
        a = np.arange(self.q)
        la = log[a]
        mul = antilog[(la[:, None] + la[None, :]) % (self.q - 1)]
        mul[0, :] = 0
        mul[:, 0] = 0
        mul.setflags(write=False)
        self.mul_table = mul

        inv = np.zeros(self.q, dtype=np.int64)
        inv[antilog[: self.q - 1]] = antilog[(self.q - 1 - log[antilog[: self.q - 1]]) % (self.q - 1)]
        inv[1] = 1
        inv.setflags(write=False)
        self.inv_table = inv

    # -- scalar ops ---------------------------------------------------

    @staticmethod
    def add(a: int, b: int) -> int:
        """Field addition (characteristic 2): bitwise XOR."""
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        la = self.log_table[a] + self.log_table[b]
        return int(self.antilog_table[la % (self.q - 1)])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return int(self.inv_table[a])

    # -- vector helpers used by the decoders --------------------------

    def mul_perm(self, gamma: int) -> np.ndarray:
        """Permutation row: mul_perm(g)[b] = g * b.  gamma must be nonzero."""
        if gamma == 0:
            raise ValueError("kernel coefficient must be nonzero")
        return self.mul_table[gamma]

    def check_symbol(self, a: int) -> None:
        if not 0 <= a < self.q:
            raise ValueError(f"symbol {a} outside GF({self.q})")

    def __eq__(self, other):
        return isinstance(other, GField) and other.p == self.p and other.poly == self.poly

    def __hash__(self):
        return hash((self.p, self.poly))

    def __repr__(self):
        return f"GField(p={self.p}, poly=0x{self.poly:x})"


def mul_schoolbook(p: int, poly: int, a: int, b: int) -> int:
    """Carry-less polynomial multiply reduced mod poly.

    Independent of the log tables; used as a cross-check oracle.
    """
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        if a & (1 << p):
            a ^= poly
        b >>= 1
    return r
