"""Canonical forms of pure stabilizer states.

A stabilizer state with ``k > 0`` is named by ``(Q, c, R, t)``::

    |phi> = 2^{-k/2} sum_x (-1)^{x^T Q x} i^{c^T x} |R x + t>

with ``Q`` upper triangular, ``R`` a rank-k RCEF and ``t`` zero on the
pivot rows of ``R``. Phases use the integer lift: ``x^T Q x`` is reduced
mod 2 and ``c^T x`` is counted over the integers and reduced mod 4.
``k = 0`` forms are computational basis states ``|t>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from . import gf2
from .gf2 import GF2Matrix


def q_offset(k: int, i: int) -> int:
    """Bit offset of row ``i`` in the packed upper-triangular ``Q``."""
    return i * k - i * (i - 1) // 2


def n_q_bits(k: int) -> int:
    return k * (k + 1) // 2


@dataclass(frozen=True, order=False)
class CanonicalForm:
    n: int
    k: int
    t: int
    q: int = 0
    c: int = 0
    pivots: tuple[int, ...] = ()
    free: int = 0

    def __post_init__(self):
        n, k = self.n, self.k
        if not 0 <= k <= n:
            raise ValueError(f"k={k} out of range for n={n}")
        if len(self.pivots) != k:
            raise ValueError("pivot count must equal k")
        if self.q >> n_q_bits(k) or self.c >> k or self.t >> n or min(self.q, self.c, self.t) < 0:
            raise ValueError("form bits out of range")
        if k:
            if any(a >= b for a, b in zip(self.pivots, self.pivots[1:])) or self.pivots[-1] >= n:
                raise ValueError("pivots must be strictly increasing rows")
            if self.free >> len(gf2.free_positions(n, self.pivots)):
                raise ValueError("free bits out of range")
            for p in self.pivots:
                if (self.t >> p) & 1:
                    raise ValueError("t must vanish on pivot rows")
        elif self.q or self.c or self.free:
            raise ValueError("k=0 forms carry only t")

    @classmethod
    def from_matrices(cls, Q: GF2Matrix | None, c: int, R: GF2Matrix | None, t: int, n: int | None = None):
        if R is None or R.ncols == 0:
            if n is None:
                raise ValueError("n required for k=0 forms")
            return cls(n=n, k=0, t=t)
        k = R.ncols
        pivots = gf2.rcef_pivots(R)
        if pivots is None:
            raise ValueError("R is not a rank-k reduced column echelon form")
        q = 0
        if Q is not None:
            if Q.nrows != k or Q.ncols != k:
                raise ValueError("Q must be k x k")
            for i in range(k):
                row = Q.rows[i]
                if row & ((1 << i) - 1):
                    raise ValueError("Q must be upper triangular")
                q |= (row >> i) << q_offset(k, i)
        return cls(n=R.nrows, k=k, t=t, q=q, c=c, pivots=pivots, free=gf2.rcef_free_bits(R, pivots))

    @property
    def R(self) -> GF2Matrix | None:
        if self.k == 0:
            return None
        return gf2.rcef_from_pivots(self.n, self.pivots, self.free)

    @property
    def Q(self) -> GF2Matrix | None:
        if self.k == 0:
            return None
        k = self.k
        rows = tuple(((self.q >> q_offset(k, i)) & ((1 << (k - i)) - 1)) << i for i in range(k))
        return GF2Matrix(k, k, rows)

    @property
    def r_columns(self) -> tuple[int, ...]:
        return gf2.rcef_columns(self.n, self.pivots, self.free)

    @property
    def is_real(self) -> bool:
        return self.c == 0

    def sort_key(self) -> tuple:
        return (self.k, self.pivots, self.free, self.t, self.q, self.c)

    def token(self) -> str:
        rpacked = 0
        for j, col in enumerate(self.r_columns):
            rpacked |= col << (j * self.n)
        return f"k={self.k};Q={self.q:x};c={self.c:x};R={rpacked:x};t={self.t:x}"

    @classmethod
    def from_token(cls, token: str, n: int) -> "CanonicalForm":
        try:
            fields = dict(part.split("=", 1) for part in token.strip().split(";"))
            k = int(fields["k"])
            q, c, rpacked, t = (int(fields[key], 16) for key in ("Q", "c", "R", "t"))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"malformed form token {token!r}") from exc
        if k == 0:
            return cls(n=n, k=0, t=t)
        mask = (1 << n) - 1
        if rpacked >> (k * n):
            raise ValueError(f"R bits out of range in {token!r}")
        R = GF2Matrix.from_columns(n, [(rpacked >> (j * n)) & mask for j in range(k)])
        form = cls.from_matrices(None, c, R, t)
        return cls(n=n, k=k, t=t, q=q, c=c, pivots=form.pivots, free=form.free)

    def support(self) -> np.ndarray:
        """Basis indices ``R x + t`` for ``x = 0 .. 2^k - 1``."""
        return support_indices(self.r_columns, self.t, self.k)

    def phases(self) -> np.ndarray:
        """Phase ``(-1)^{x^T Q x} i^{c^T x}`` for each ``x``, as complex."""
        return phase_vector(self.k, self.q, self.c)


def support_indices(cols, t: int, k: int) -> np.ndarray:
    idx = np.empty(1 << k, dtype=np.int64)
    idx[0] = t
    for j in range(k):
        half = 1 << j
        idx[half:2 * half] = idx[:half] ^ cols[j]
    return idx


def phase_vector(k: int, q: int, c: int) -> np.ndarray:
    x = np.arange(1 << k, dtype=np.int64)
    quad = np.zeros(1 << k, dtype=np.int64)
    for i in range(k):
        row = (q >> q_offset(k, i)) & ((1 << (k - i)) - 1)
        xi = (x >> i) & 1
        quad ^= xi & (np.bitwise_count((x >> i) & row).astype(np.int64) & 1)
    lin = np.bitwise_count(x & c).astype(np.int64) & 3
    return (1 - 2 * quad) * (1j ** lin)


def synthesize(form: CanonicalForm) -> np.ndarray:
    """Amplitude vector of ``form``; exactly ``2^k`` entries of modulus ``2^{-k/2}``."""
    amps = np.zeros(1 << form.n, dtype=np.complex128)
    if form.k == 0:
        amps[form.t] = 1.0
        return amps
    amps[form.support()] = form.phases() * 2.0 ** (-form.k / 2)
    return amps


def count_states(n: int) -> tuple[int, list[int]]:
    """Total number of n-qubit stabilizer states and the per-k breakdown."""
    if n < 1:
        raise ValueError("n must be positive")
    per_k = [1 << n]
    for k in range(1, n + 1):
        per_k.append((1 << n_q_bits(k)) * (1 << k) * gf2.qbinom(n, k) * (1 << (n - k)))
    total = 1 << n
    for k in range(n):
        total *= (1 << (n - k)) + 1
    assert total == sum(per_k)
    return total, per_k


def count_real_states(n: int) -> int:
    return (1 << n) + sum((1 << n_q_bits(k)) * gf2.qbinom(n, k) * (1 << (n - k)) for k in range(1, n + 1))


@dataclass(frozen=True)
class RTable:
    """All RCEF matrices for ``k = 1..n`` in canonical order, indexed by ``rid``."""
    n: int
    ks: np.ndarray          # (nR,) int64
    cols: np.ndarray        # (nR, n) int64, column j of R; zero past k
    nonpivot: np.ndarray    # (nR,) int64 mask of non-pivot rows
    params: list            # [(pivots, free)] per rid
    index: dict             # (pivots, free) -> rid

    def __len__(self):
        return len(self.params)

    def form(self, rid: int, t: int, q: int = 0, c: int = 0) -> CanonicalForm:
        if rid < 0:
            return CanonicalForm(n=self.n, k=0, t=t)
        pivots, free = self.params[rid]
        return CanonicalForm(n=self.n, k=len(pivots), t=t, q=q, c=c, pivots=pivots, free=free)

    def rid_of(self, form: CanonicalForm) -> int:
        if form.k == 0:
            return -1
        return self.index[(form.pivots, form.free)]


@lru_cache(maxsize=None)
def r_table(n: int) -> RTable:
    params = []
    for k in range(1, n + 1):
        params.extend(gf2.iter_rcef_params(n, k))
    nR = len(params)
    ks = np.empty(nR, dtype=np.int64)
    cols = np.zeros((nR, n), dtype=np.int64)
    nonpivot = np.empty(nR, dtype=np.int64)
    full = (1 << n) - 1
    for rid, (pivots, free) in enumerate(params):
        k = len(pivots)
        ks[rid] = k
        cols[rid, :k] = gf2.rcef_columns(n, pivots, free)
        nonpivot[rid] = full & ~sum(1 << p for p in pivots)
    index = {p: i for i, p in enumerate(params)}
    return RTable(n, ks, cols, nonpivot, params, index)


def iter_branches(n: int) -> Iterator[tuple[int, tuple[int, ...], int, int]]:
    """Yield ``(k, pivots, free, t)`` for every ``k >= 1`` affine support, in form order."""
    for k in range(1, n + 1):
        for pivots, free in gf2.iter_rcef_params(n, k):
            nonpivot = ((1 << n) - 1) & ~sum(1 << p for p in pivots)
            for v in range(1 << (n - k)):
                yield k, pivots, free, gf2.deposit_bits(v, nonpivot)


def enumerate_forms(n: int, real_only: bool = False) -> Iterator[CanonicalForm]:
    """Stream every stabilizer state's canonical form exactly once.

    Order: ascending k; then R in RCEF order; then t ascending; then Q
    (packed bits) with c varying fastest. ``real_only`` keeps k=0 and c=0.
    """
    if not 1 <= n <= 10:
        raise ValueError("n must be in 1..10")
    for t in range(1 << n):
        yield CanonicalForm(n=n, k=0, t=t)
    for k, pivots, free, t in iter_branches(n):
        nc = 1 if real_only else 1 << k
        for q in range(1 << n_q_bits(k)):
            for c in range(nc):
                yield CanonicalForm(n=n, k=k, t=t, q=q, c=c, pivots=pivots, free=free)


def count_enumerated(n: int, real_only: bool = False) -> int:
    """Size of :func:`enumerate_forms` obtained by walking its branch stream.

    Each ``(k, R, t)`` branch contributes its full block of ``(Q, c)``
    assignments, so the forms themselves are never materialized.
    """
    total = 1 << n
    for k, _, _, _ in iter_branches(n):
        total += 1 << (n_q_bits(k) + (0 if real_only else k))
    return total


def random_form(n: int, rng: np.random.Generator, real_only: bool = False) -> CanonicalForm:
    """Uniformly random stabilizer state (or real stabilizer state)."""
    if real_only:
        weights = [1 << n] + [(1 << n_q_bits(k)) * gf2.qbinom(n, k) * (1 << (n - k)) for k in range(1, n + 1)]
    else:
        weights = count_states(n)[1]
    total = sum(weights)
    r = int(rng.integers(0, total)) if total < 2**63 else int(rng.random() * total)
    k = 0
    while r >= weights[k]:
        r -= weights[k]
        k += 1
    if k == 0:
        return CanonicalForm(n=n, k=0, t=int(rng.integers(0, 1 << n)))
    ridx = int(rng.integers(0, gf2.qbinom(n, k)))
    for pivots, free in gf2.iter_rcef_params(n, k):
        if ridx == 0:
            break
        ridx -= 1
    nonpivot = ((1 << n) - 1) & ~sum(1 << p for p in pivots)
    t = gf2.deposit_bits(int(rng.integers(0, 1 << (n - k))), nonpivot)
    q = int(rng.integers(0, 1 << n_q_bits(k)))
    c = 0 if real_only else int(rng.integers(0, 1 << k))
    return CanonicalForm(n=n, k=k, t=t, q=q, c=c, pivots=pivots, free=free)


def identify(v, atol: float = 1e-9) -> tuple[CanonicalForm, complex]:
    """Recover ``(form, phase)`` with ``v == phase * synthesize(form)``.

    Raises ValueError when ``v`` is not a stabilizer state up to phase.
    """
    v = np.asarray(v, dtype=np.complex128).ravel()
    n = v.size.bit_length() - 1
    if v.size != 1 << n or n < 1:
        raise ValueError("length must be 2^n")
    support = np.flatnonzero(np.abs(v) > atol)
    size = support.size
    k = size.bit_length() - 1
    if size == 0 or size != 1 << k:
        raise ValueError("support size is not a power of two")
    base = int(support[0])
    # column-reduce the span of the support differences
    basis: list[int] = []
    for s in support[1:]:
        d = int(s) ^ base
        for col in basis:
            if d & (col & -col):
                d ^= col
        if d:
            low = d & -d
            basis = [col ^ d if col & low else col for col in basis]
            basis.append(d)
    if len(basis) != k:
        raise ValueError("support is not an affine subspace")
    basis.sort(key=lambda col: col & -col)
    pivots = tuple((col & -col).bit_length() - 1 for col in basis)
    t = base
    for col, p in zip(basis, pivots):
        if (t >> p) & 1:
            t ^= col
    R = GF2Matrix.from_columns(n, basis)
    if k == 0:
        form = CanonicalForm(n=n, k=0, t=t)
        return form, complex(v[t])
    phase = v[t] * 2.0 ** (k / 2)

    def rel(x: int) -> complex:
        return v[R.apply(x) ^ t] / phase

    def quarter(z: complex) -> int:
        # z ~ i^m; return m
        m = int(round(np.angle(z) / (np.pi / 2))) % 4
        return m

    scale = 2.0 ** (-k / 2)
    c = 0
    qdiag = [0] * k
    for j in range(k):
        m = quarter(rel(1 << j) / scale)
        c |= (m & 1) << j
        qdiag[j] = (m >> 1) & 1
    q = 0
    for i in range(k):
        row = qdiag[i]
        for j in range(i + 1, k):
            m = quarter(rel((1 << i) | (1 << j)) / scale)
            lin = ((c >> i) & 1) + ((c >> j) & 1)
            sign = ((m - lin) % 4) // 2
            row |= (sign ^ qdiag[i] ^ qdiag[j]) << (j - i)
        q |= row << q_offset(k, i)
    form = CanonicalForm(n=n, k=k, t=t, q=q, c=c, pivots=pivots, free=gf2.rcef_free_bits(R, pivots))
    if not np.allclose(phase * synthesize(form), v, atol=max(atol, 1e-7)):
        raise ValueError("vector is not a stabilizer state")
    return form, complex(phase)


def tensor(forms_low_first) -> CanonicalForm:
    """Canonical form of a tensor product; the first factor holds the lowest qubits."""
    v = np.ones(1, dtype=np.complex128)
    for f in forms_low_first:
        v = np.kron(synthesize(f), v)
    form, phase = identify(v)
    assert abs(phase - 1) < 1e-9
    return form
