"""Linear algebra over GF(2) with bit-packed rows.

Vectors are plain Python ints: bit ``i`` of the integer is coordinate ``x_i``.
Matrices store one int per row, bit ``j`` of a row being column ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

MAX_DIM = 64


@dataclass(frozen=True)
class GF2Matrix:
    nrows: int
    ncols: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if not (0 <= self.nrows <= MAX_DIM and 0 <= self.ncols <= MAX_DIM):
            raise ValueError(f"matrix shape {self.nrows}x{self.ncols} exceeds {MAX_DIM}")
        if len(self.rows) != self.nrows:
            raise ValueError("row count mismatch")
        mask = (1 << self.ncols) - 1
        for r in self.rows:
            if r < 0 or r & ~mask:
                raise ValueError("row has bits outside the column range")

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "GF2Matrix":
        return cls(nrows, ncols, (0,) * nrows)

    @classmethod
    def identity(cls, n: int) -> "GF2Matrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def from_columns(cls, nrows: int, columns: Sequence[int]) -> "GF2Matrix":
        rows = [0] * nrows
        for j, col in enumerate(columns):
            if col >> nrows:
                raise ValueError("column has bits outside the row range")
            for i in range(nrows):
                if (col >> i) & 1:
                    rows[i] |= 1 << j
        return cls(nrows, len(columns), tuple(rows))

    @classmethod
    def from_lists(cls, entries: Sequence[Sequence[int]]) -> "GF2Matrix":
        nrows = len(entries)
        ncols = len(entries[0]) if nrows else 0
        rows = []
        for row in entries:
            if len(row) != ncols:
                raise ValueError("ragged matrix")
            v = 0
            for j, e in enumerate(row):
                if e not in (0, 1):
                    raise ValueError("entries must be 0 or 1")
                v |= e << j
            rows.append(v)
        return cls(nrows, ncols, tuple(rows))

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return (self.rows[i] >> j) & 1

    def column(self, j: int) -> int:
        """Column ``j`` as an ``nrows``-bit vector."""
        v = 0
        for i, r in enumerate(self.rows):
            v |= ((r >> j) & 1) << i
        return v

    @property
    def columns(self) -> tuple[int, ...]:
        return tuple(self.column(j) for j in range(self.ncols))

    def apply(self, x: int) -> int:
        """Matrix-vector product ``M x`` over GF(2)."""
        y = 0
        for j in range(self.ncols):
            if (x >> j) & 1:
                y ^= self.column(j)
        return y

    def to_lists(self) -> list[list[int]]:
        return [[(r >> j) & 1 for j in range(self.ncols)] for r in self.rows]


def rank(m: GF2Matrix) -> int:
    rows = list(m.rows)
    r = 0
    for j in range(m.ncols):
        bit = 1 << j
        piv = next((i for i in range(r, len(rows)) if rows[i] & bit), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i] & bit:
                rows[i] ^= rows[r]
        r += 1
    return r


def qbinom(n: int, k: int) -> int:
    """Gaussian binomial coefficient ``[n choose k]`` at q=2."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    num = den = 1
    for i in range(k):
        num *= (1 << (n - i)) - 1
        den *= (1 << (k - i)) - 1
    return num // den


def free_positions(n: int, pivots: Sequence[int]) -> list[tuple[int, int]]:
    """(row, col) entries left free by an RCEF with the given pivot rows.

    Ordered column-major, rows ascending; this fixes the bit order of the
    ``free`` integer used by :func:`rcef_from_pivots`.
    """
    pset = set(pivots)
    return [(i, j) for j, p in enumerate(pivots) for i in range(p + 1, n) if i not in pset]


def rcef_columns(n: int, pivots: Sequence[int], free: int) -> tuple[int, ...]:
    cols = [1 << p for p in pivots]
    for b, (i, j) in enumerate(free_positions(n, pivots)):
        if (free >> b) & 1:
            cols[j] |= 1 << i
    return tuple(cols)


def rcef_from_pivots(n: int, pivots: Sequence[int], free: int) -> GF2Matrix:
    return GF2Matrix.from_columns(n, rcef_columns(n, pivots, free))


def iter_rcef_params(n: int, k: int) -> Iterator[tuple[tuple[int, ...], int]]:
    """Yield ``(pivots, free_bits)`` for every n x k RCEF of rank k, in canonical order."""
    if not 0 < k <= n:
        raise ValueError(f"need 0 < k <= n, got n={n}, k={k}")
    for pivots in combinations(range(n), k):
        nfree = len(free_positions(n, pivots))
        for free in range(1 << nfree):
            yield pivots, free


def enumerate_rcef(n: int, k: int) -> Iterator[GF2Matrix]:
    """Every n x k reduced column echelon form matrix of rank k, exactly once.

    Convention: the pivot of column j is its first nonzero row, pivot rows
    increase left to right, and each pivot row is zero in every other column.
    Order is lexicographic in the pivot-row set, then ascending free bits.
    """
    for pivots, free in iter_rcef_params(n, k):
        yield rcef_from_pivots(n, pivots, free)


def rcef_pivots(R: GF2Matrix) -> tuple[int, ...] | None:
    """Pivot rows of ``R`` if it is an RCEF of full column rank, else None."""
    pivots = []
    for j in range(R.ncols):
        col = R.column(j)
        if col == 0:
            return None
        pivots.append((col & -col).bit_length() - 1)
    if any(a >= b for a, b in zip(pivots, pivots[1:])):
        return None
    for j, p in enumerate(pivots):
        if R.rows[p] != 1 << j:
            return None
    return tuple(pivots)


def rcef_free_bits(R: GF2Matrix, pivots: Sequence[int]) -> int:
    free = 0
    for b, (i, j) in enumerate(free_positions(R.nrows, pivots)):
        free |= R[i, j] << b
    return free


def deposit_bits(value: int, mask: int) -> int:
    """Scatter the low bits of ``value`` into the set positions of ``mask``."""
    out = 0
    b = 0
    while mask:
        low = mask & -mask
        if (value >> b) & 1:
            out |= low
        mask ^= low
        b += 1
    return out


def quotient_reps(R: GF2Matrix) -> Iterator[int]:
    """One representative per coset of Im(R): zero on pivot rows, free elsewhere."""
    pivots = rcef_pivots(R)
    if pivots is None:
        raise ValueError("input is not a full-rank reduced column echelon form")
    n = R.nrows
    nonpivot = ((1 << n) - 1) & ~sum(1 << p for p in pivots)
    for v in range(1 << (n - R.ncols)):
        yield deposit_bits(v, nonpivot)
