"""Overlaps between a target vector and every stabilizer state.

The search fixes an affine support ``(k, R, t)``, forms
``P_x = conj(b[R x + t]) / 2^{k/2}`` and then folds one variable at a time,
choosing one row of ``Q`` and one bit of ``c`` per level. A branch is cut
when an upper bound on every leaf below it cannot beat the current floor.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .stabilizer import CanonicalForm, r_table, synthesize

NORM_TOL = 1e-9
DEFAULT_VIOLATION_CAP = 10**6


@dataclass(frozen=True)
class OverlapHit:
    form: CanonicalForm
    overlap: complex

    @property
    def magnitude(self) -> float:
        return abs(self.overlap)


@dataclass(frozen=True)
class SearchBudget:
    top_m: int = 1
    threshold: float = 0.0
    real_only: bool = False

    def __post_init__(self):
        if self.top_m < 1:
            raise ValueError("top_m must be at least 1")


@dataclass
class FormBatch:
    """Struct-of-arrays view of many forms on the same n (``rid = -1`` for k=0)."""
    n: int
    rid: np.ndarray
    t: np.ndarray
    q: np.ndarray
    c: np.ndarray

    def __len__(self):
        return len(self.rid)

    @classmethod
    def empty(cls, n):
        z = np.zeros(0, dtype=np.int64)
        return cls(n, z, z.copy(), z.copy(), z.copy())

    @classmethod
    def from_forms(cls, forms, n=None):
        forms = list(forms)
        if n is None:
            if not forms:
                raise ValueError("n required for an empty batch")
            n = forms[0].n
        table = r_table(n)
        arr = np.array([(table.rid_of(f), f.t, f.q, f.c) for f in forms], dtype=np.int64).reshape(-1, 4)
        if any(f.n != n for f in forms):
            raise ValueError("all forms must share n")
        return cls(n, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy())

    def concat(self, other: "FormBatch") -> "FormBatch":
        if other.n != self.n:
            raise ValueError("mixed n")
        return FormBatch(self.n, *(np.concatenate([getattr(self, a), getattr(other, a)]) for a in ("rid", "t", "q", "c")))

    def take(self, idx) -> "FormBatch":
        return FormBatch(self.n, self.rid[idx], self.t[idx], self.q[idx], self.c[idx])

    def keys(self) -> np.ndarray:
        return np.stack([self.rid, self.t, self.q, self.c], axis=1)

    def order(self) -> np.ndarray:
        """Permutation sorting the batch into canonical form order."""
        return np.lexsort((self.c, self.q, self.t, self.rid))

    def kernel_args(self):
        table = r_table(self.n)
        safe = np.where(self.rid < 0, 0, self.rid)
        ks = np.where(self.rid < 0, 0, table.ks[safe])
        cols = table.cols[safe] if len(table) else np.zeros((len(self), self.n), dtype=np.int64)
        return ks, np.ascontiguousarray(cols), self.t, self.q, self.c

    def form(self, i: int) -> CanonicalForm:
        return r_table(self.n).form(int(self.rid[i]), int(self.t[i]), int(self.q[i]), int(self.c[i]))

    def forms(self) -> list[CanonicalForm]:
        return [self.form(i) for i in range(len(self))]

    def overlaps(self, b: np.ndarray) -> np.ndarray:
        """Exact ``<phi_j|b>`` for every form, by direct summation."""
        if not len(self):
            return np.zeros(0, dtype=np.complex128)
        ks, cols, t, q, c = self.kernel_args()
        return _kernels.form_overlaps(np.ascontiguousarray(b, dtype=np.complex128), self.n, ks, cols, t, q, c)

    def columns(self) -> np.ndarray:
        ks, cols, t, q, c = self.kernel_args()
        return _kernels.synthesize_columns(self.n, ks, cols, t, q, c)

    def is_real(self) -> np.ndarray:
        return self.c == 0


@dataclass
class ScanResult:
    batch: FormBatch
    overlaps: np.ndarray
    stats: dict

    def hits(self) -> list[OverlapHit]:
        return [OverlapHit(self.batch.form(i), complex(self.overlaps[i])) for i in range(len(self.batch))]


def default_threads() -> int:
    env = os.environ.get("STABEX_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _as_vector(b) -> tuple[np.ndarray, int]:
    b = np.ascontiguousarray(b, dtype=np.complex128).ravel()
    n = b.size.bit_length() - 1
    if b.size < 2 or b.size != 1 << n:
        raise ValueError(f"vector length {b.size} is not 2^n with n >= 1")
    return b, n


def _check_normalized(b: np.ndarray):
    norm = np.linalg.norm(b)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state vector is not normalized (norm={norm:.12g})")


def build_p(b, k: int, R_columns, t: int) -> np.ndarray:
    """``P_x = conj(b[R x + t]) / 2^{k/2}`` for ``x = 0 .. 2^k - 1``."""
    b = np.asarray(b, dtype=np.complex128)
    idx = np.empty(1 << k, dtype=np.int64)
    idx[0] = t
    for j in range(k):
        h = 1 << j
        idx[h:2 * h] = idx[:h] ^ R_columns[j]
    return np.conj(b[idx]) * 2.0 ** (-k / 2)


def bound(p) -> float:
    """Rotation-sweep upper bound on ``max_{Q,c} |sum_x (-1)^{xQx} i^{cx} P_x|``.

    Exactly solves the relaxation where each term picks its own power of i.
    """
    p = np.ascontiguousarray(p, dtype=np.complex128)
    rot = np.empty(max(1, p.size), dtype=np.complex128)
    ang = np.empty(max(1, p.size), dtype=np.float64)
    return float(_kernels.rotation_bound(p, 0, p.size, rot, ang))


@dataclass
class QCSearch:
    best: float
    values: np.ndarray
    q: np.ndarray
    c: np.ndarray
    stats: dict


def max_over_qc(p, prune_floor: float = -1.0, real_only: bool = False, top_m: int = 1,
                use_bound: bool = True) -> QCSearch:
    """Maximize ``|sum_x (-1)^{x^T Q x} i^{c^T x} P_x|`` over upper-triangular Q and c.

    Leaves above ``prune_floor`` are collected (best ``top_m`` kept);
    ``best`` is 0 when nothing beats the floor.
    """
    p = np.ascontiguousarray(p, dtype=np.complex128)
    k = p.size.bit_length() - 1
    if p.size != 1 << k or k < 1:
        raise ValueError("P must have length 2^k with k >= 1")
    empty = QCSearch(0.0, np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64), {})
    if use_bound and np.abs(p).sum() <= prune_floor:
        return empty
    vals, q, c, st = _kernels.max_over_qc_kernel(p, k, real_only, prune_floor, use_bound, top_m)
    order = np.lexsort((c, q, -vals))
    vals, q, c = vals[order], q[order], c[order]
    stats = dict(zip(("leaves", "nodes", "pruned", "skipped"), (int(s) for s in st)))
    return QCSearch(float(vals[0]) if len(vals) else 0.0, vals, q, c, stats)


def _collect(b, n, real_only, threshold, top_m, threads, use_bound=True) -> ScanResult:
    table = r_table(n)
    threads = threads or default_threads()
    # k = 0 forms: overlap is b_t itself
    basis = np.arange(1 << n, dtype=np.int64)
    mags0 = np.abs(b)
    keep0 = basis[mags0 > threshold]
    # the M-th best basis overlap already bounds what the tree search must beat
    seed = float(threshold)
    if use_bound and keep0.size >= top_m:
        seed = max(seed, float(np.sort(mags0)[-top_m]))
    kernel = _kernels.scan_serial if threads == 1 else _kernels.scan_parallel
    args = (b, n, table.ks, table.cols, table.nonpivot, real_only, seed, use_bound, int(top_m))
    if threads == 1:
        hv, hr, ht, hq, hc, sizes, st = kernel(*args)
    else:
        hv, hr, ht, hq, hc, sizes, st = kernel(*args, int(threads))
    parts_r = [np.full(keep0.size, -1, np.int64)]
    parts_t, parts_q, parts_c = [keep0], [np.zeros_like(keep0)], [np.zeros_like(keep0)]
    for w in range(len(sizes)):
        s = sizes[w]
        parts_r.append(hr[w, :s])
        parts_t.append(ht[w, :s])
        parts_q.append(hq[w, :s])
        parts_c.append(hc[w, :s])
    batch = FormBatch(n, *(np.concatenate(p).astype(np.int64) for p in (parts_r, parts_t, parts_q, parts_c)))
    # recompute exactly, then order by |overlap| desc with form order as tie-break
    ov = batch.overlaps(b)
    mags = np.abs(ov)
    # magnitudes equal up to rounding count as ties so the form order decides
    order = np.lexsort((batch.c, batch.q, batch.t, batch.rid, -np.round(mags, 12)))
    order = order[mags[order] > threshold][:top_m]
    stats = dict(zip(("leaves", "nodes", "pruned", "skipped_branches"), (int(x) for x in st.sum(axis=0))))
    stats["candidates"] = len(batch)
    return ScanResult(batch.take(order), ov[order], stats)


def scan_batch(b, budget: SearchBudget, threads: int | None = None, use_bound: bool = True) -> ScanResult:
    """Top ``budget.top_m`` stabilizer overlaps with ``b`` above ``budget.threshold``."""
    b, n = _as_vector(b)
    _check_normalized(b)
    if budget.real_only and np.abs(b.imag).max() > 1e-12:
        raise ValueError("real_only search requires a real vector")
    return _collect(b, n, budget.real_only, budget.threshold, budget.top_m, threads, use_bound)


def scan(b, budget: SearchBudget, threads: int | None = None) -> list[OverlapHit]:
    """Hits sorted by |overlap| descending, ties broken by form order."""
    return scan_batch(b, budget, threads).hits()


def fidelity(b, real_only: bool = False, threads: int | None = None) -> tuple[float, CanonicalForm]:
    """Stabilizer fidelity ``max_phi |<phi|b>|^2`` and a form attaining it."""
    b, n = _as_vector(b)
    if real_only and np.abs(b.imag).max() > 1e-12:
        raise ValueError("real_only fidelity requires a real vector")
    res = scan_batch(b, SearchBudget(top_m=1, threshold=0.0, real_only=real_only), threads)
    return float(abs(res.overlaps[0]) ** 2), res.batch.form(0)


def violations_batch(y, eps: float = 1e-8, real_only: bool = False, cap: int = DEFAULT_VIOLATION_CAP,
                     threads: int | None = None) -> ScanResult:
    """All forms with ``|<phi|y>| > 1 + eps`` (largest ``cap`` if there are more)."""
    y, n = _as_vector(y)
    if not np.any(y):
        return ScanResult(FormBatch.empty(n), np.zeros(0, np.complex128), {})
    return _collect(y, n, real_only, 1.0 + eps, cap, threads)


def violations(y, eps: float = 1e-8, real_only: bool = False, cap: int = DEFAULT_VIOLATION_CAP,
               threads: int | None = None) -> list[OverlapHit]:
    return violations_batch(y, eps, real_only, cap, threads).hits()


def max_dual_overlap(y, real_only: bool = False, threads: int | None = None) -> tuple[float, CanonicalForm]:
    """``max_phi |<phi|y>|`` for an arbitrary (unnormalized) vector."""
    y, n = _as_vector(y)
    res = _collect(y, n, real_only, 0.0, 1, threads)
    if not len(res.batch):
        return 0.0, CanonicalForm(n=n, k=0, t=0)
    return float(abs(res.overlaps[0])), res.batch.form(0)


def naive_overlaps(b, forms) -> np.ndarray:
    """Reference overlaps by synthesizing each form; slow, for checks only."""
    b = np.asarray(b, dtype=np.complex128)
    return np.array([np.vdot(synthesize(f), b) for f in forms])
