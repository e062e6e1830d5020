"""Stabilizer extent by column generation over a restricted SOCP.

The restricted primal is ``min ||x||_1  s.t.  sum_j x_j a_j = b`` over a
column subset. Its dual ``max Re(b^H y)  s.t.  |a_j^H y| <= 1`` supplies
the pricing vector: any stabilizer state with ``|<phi|y>| > 1`` is added,
and when none exists the restricted optimum is the global one.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

from . import overlap
from .overlap import FormBatch, SearchBudget
from .stabilizer import CanonicalForm, count_real_states, count_states, tensor

log = logging.getLogger(__name__)

REAL_TOL = 1e-12


class SolverError(RuntimeError):
    """The conic solver failed or stopped short of its tolerances."""


class RestrictedInfeasible(SolverError):
    """The column set does not span the target vector."""


@dataclass
class CGConfig:
    init_size: int | None = None
    eps_violation: float = 1e-8
    max_iters: int = 50
    feas_tol: float = 1e-8
    dual_tol: float = 1e-8
    gap_tol: float = 1e-8
    real_mode: str = "auto"
    violation_cap: int = overlap.DEFAULT_VIOLATION_CAP
    threads: int | None = None

    def __post_init__(self):
        if self.real_mode not in ("auto", "on", "off"):
            raise ValueError("real_mode must be auto, on or off")
        if min(self.eps_violation, self.feas_tol, self.dual_tol, self.gap_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1 or self.violation_cap < 1 or (self.init_size is not None and self.init_size < 1):
            raise ValueError("max_iters, violation_cap and init_size must be at least 1")

    def resolved_init_size(self, n: int) -> int:
        if self.init_size is not None:
            return self.init_size
        return 10_000 if n <= 8 else 100_000


@dataclass
class ColumnSet:
    """Columns named by canonical forms; amplitudes are synthesized on demand."""
    forms: FormBatch
    _keys: set = field(default_factory=set, repr=False)
    _cols: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        keys = [tuple(r) for r in self.forms.keys().tolist()]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate forms in column set")
        self._keys = set(keys)

    @property
    def n(self) -> int:
        return self.forms.n

    def __len__(self):
        return len(self.forms)

    def add(self, batch: FormBatch) -> FormBatch:
        """Append forms not already present; returns the ones actually added."""
        if batch.n != self.n:
            raise ValueError("mixed n")
        fresh = []
        for i, key in enumerate(map(tuple, batch.keys().tolist())):
            if key not in self._keys:
                self._keys.add(key)
                fresh.append(i)
        added = batch.take(np.array(fresh, dtype=np.int64))
        if len(added):
            self.forms = self.forms.concat(added)
            if self._cols is not None:
                self._cols = np.hstack([self._cols, added.columns()])
        return added

    def matrix(self) -> np.ndarray:
        if self._cols is None or self._cols.shape[1] != len(self.forms):
            self._cols = self.forms.columns()
        return self._cols


@dataclass
class RestrictedSolution:
    x: np.ndarray
    y: np.ndarray
    primal_value: float
    dual_value: float
    residual: float
    max_in_set: float
    status: str


def _socp_data(A: np.ndarray, b: np.ndarray):
    """Clarabel data for min sum t_j s.t. ||(Re x_j, Im x_j)|| <= t_j, A x = b.

    Variables are ordered (t_j, Re x_j, Im x_j) per column.
    """
    N, m = A.shape
    Ar, Ai = A.real, A.imag
    # equality rows: [Re; Im] of sum_j x_j a_j
    eq = np.zeros((2 * N, 3 * m))
    eq[:N, 1::3] = Ar
    eq[:N, 2::3] = -Ai
    eq[N:, 1::3] = Ai
    eq[N:, 2::3] = Ar
    Amat = sp.vstack([sp.csc_matrix(eq), -sp.identity(3 * m, format="csc")], format="csc")
    rhs = np.concatenate([b.real, b.imag, np.zeros(3 * m)])
    q = np.zeros(3 * m)
    q[0::3] = 1.0
    P = sp.csc_matrix((3 * m, 3 * m))
    cones = [clarabel.ZeroConeT(2 * N)] + [clarabel.SecondOrderConeT(3)] * m
    return P, q, Amat, rhs, cones


def solve_restricted(C: ColumnSet | np.ndarray, b, cfg: CGConfig | None = None) -> RestrictedSolution:
    """Solve the primal/dual pair restricted to the columns of ``C``."""
    cfg = cfg or CGConfig()
    A = C.matrix() if isinstance(C, ColumnSet) else np.asarray(C, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128).ravel()
    if A.ndim != 2 or A.shape[1] == 0:
        raise ValueError("column set is empty")
    if A.shape[0] != b.size:
        raise ValueError("column length does not match the target vector")
    N, m = A.shape
    P, q, Amat, rhs, cones = _socp_data(A, b)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = settings.tol_gap_rel = 1e-11
    settings.tol_feas = 1e-11
    settings.tol_ktratio = 1e-9
    settings.max_iter = 400
    solver = clarabel.DefaultSolver(P, q, Amat, rhs, cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    if "Infeasible" in status and "Dual" not in status:
        raise RestrictedInfeasible(f"column set does not span b ({status})")
    x_raw = np.asarray(sol.x)
    z = np.asarray(sol.z)
    x = x_raw[1::3] + 1j * x_raw[2::3]
    y = -(z[:N] + 1j * z[N:2 * N])
    if np.vdot(b, y).real < 0:
        y = -y
    residual = float(np.linalg.norm(A @ x - b))
    primal = float(np.abs(x).sum())
    dual = float(np.vdot(b, y).real)
    max_in = float(np.abs(A.conj().T @ y).max())
    solved = status in ("Solved", "AlmostSolved")
    if not solved or residual > cfg.feas_tol or abs(primal - dual) > cfg.gap_tol or max_in > 1 + cfg.dual_tol:
        if not solved or residual > 1e3 * cfg.feas_tol:
            raise SolverError(f"SOCP solve ended with status {status}: residual={residual:.3g}, "
                              f"gap={abs(primal - dual):.3g}, max|a^H y|={max_in:.12g}")
        log.warning("restricted SOCP tolerances missed: residual=%.3g gap=%.3g max|a^H y|-1=%.3g",
                    residual, abs(primal - dual), max_in - 1)
    return RestrictedSolution(x, y, primal, dual, residual, max_in, status)


@dataclass
class ExtentResult:
    n: int
    extent: float
    sqrt_extent: float
    forms: FormBatch
    coefficients: np.ndarray
    y: np.ndarray
    max_abs_ay: float
    dual_value: float
    certified: bool
    real_path: bool
    trace: list[dict]

    def decomposition(self, cutoff: float = 0.0) -> list[tuple[str, complex]]:
        keep = np.flatnonzero(np.abs(self.coefficients) > cutoff)
        return [(self.forms.form(i).token(), complex(self.coefficients[i])) for i in keep]

    def reconstruct(self) -> np.ndarray:
        return self.forms.columns() @ self.coefficients


def _check_input(b) -> tuple[np.ndarray, int]:
    b, n = overlap._as_vector(b)
    if not np.any(b):
        raise ValueError("zero vector has no extent")
    overlap._check_normalized(b)
    return b, n


def _use_real(b: np.ndarray, mode: str) -> bool:
    is_real = float(np.abs(b.imag).max()) < REAL_TOL
    if mode == "on" and not is_real:
        raise ValueError("real mode requested for a vector with complex amplitudes")
    return mode == "on" or (mode == "auto" and is_real)


def initial_columns(b, size: int, real_only: bool, threads=None) -> ColumnSet:
    """Top-``size`` stabilizer states by ``|<phi|b>|``."""
    n = overlap._as_vector(b)[1]
    limit = count_real_states(n) if real_only else count_states(n)[0]
    res = overlap.scan_batch(b, SearchBudget(top_m=max(1, min(size, limit)), real_only=real_only), threads)
    return ColumnSet(res.batch)


def _solve_spanning(C: ColumnSet, b, cfg: CGConfig, real: bool) -> RestrictedSolution:
    # small or warm-started sets may not span b; grow with top overlaps until they do
    n = C.n
    while True:
        try:
            return solve_restricted(C, b, cfg)
        except RestrictedInfeasible:
            extra = initial_columns(b, max(len(C), 1 << n) * 2, real, cfg.threads)
            if not len(C.add(extra.forms)):
                raise


def compute_extent(b, cfg: CGConfig | None = None, initial: ColumnSet | None = None) -> ExtentResult:
    """Exact stabilizer extent with a dual certificate.

    When the iteration budget runs out the best upper bound is returned
    with ``certified=False``.
    """
    cfg = cfg or CGConfig()
    b, n = _check_input(b)
    real = _use_real(b, cfg.real_mode)
    if real:
        b = b.real.astype(np.complex128)
    t0 = time.perf_counter()
    if initial is None:
        C = initial_columns(b, cfg.resolved_init_size(n), real, cfg.threads)
    else:
        if initial.n != n:
            raise ValueError("warm-start columns have the wrong qubit count")
        C = ColumnSet(initial.forms)
        if real:
            C = ColumnSet(C.forms.take(np.flatnonzero(C.forms.is_real())))
    trace = []
    certified = False
    sol = None
    for it in range(cfg.max_iters):
        t_it = time.perf_counter()
        sol = _solve_spanning(C, b, cfg, real)
        viol = overlap.violations_batch(sol.y, cfg.eps_violation, real, cfg.violation_cap, cfg.threads)
        added = C.add(viol.batch)
        trace.append({
            "iteration": it,
            "columns": len(C) - len(added),
            "value": sol.primal_value ** 2,
            "violations": len(viol.batch),
            "added": len(added),
            "wall": time.perf_counter() - t_it,
        })
        log.info("CG iter %d: |C|=%d xi_hat=%.12g violations=%d", it, trace[-1]["columns"],
                 trace[-1]["value"], len(viol.batch))
        if not len(viol.batch):
            certified = True
            break
        if not len(added):
            # every violator is already in C: the solver's dual is off by more than eps
            log.warning("violating columns already present; stopping uncertified")
            break
    if sol is None:
        raise SolverError("no restricted problem was solved")
    max_ay = overlap.max_dual_overlap(sol.y, real, cfg.threads)[0]
    m = len(sol.x)
    forms = C.forms.take(np.arange(m))
    log.info("extent done in %.2fs", time.perf_counter() - t0)
    return ExtentResult(
        n=n, extent=sol.primal_value ** 2, sqrt_extent=sol.primal_value, forms=forms,
        coefficients=sol.x, y=sol.y, max_abs_ay=max_ay, dual_value=sol.dual_value,
        certified=certified, real_path=real, trace=trace,
    )


def product_warm_start(results: list[ExtentResult]) -> tuple[ColumnSet, np.ndarray]:
    """Tensor products of the factors' decompositions; factor 0 holds the lowest qubits.

    Returns the column set and the matching product coefficients.
    """
    if not results:
        raise ValueError("need at least one factor")
    for r in results:
        if not r.certified:
            raise ValueError("warm start needs certified factor results")
    supports = []
    for r in results:
        keep = np.flatnonzero(np.abs(r.coefficients) > 1e-9 * np.abs(r.coefficients).max())
        supports.append([(r.forms.form(i), complex(r.coefficients[i])) for i in keep])
    combos: list[tuple[list[CanonicalForm], complex]] = [([], 1.0 + 0j)]
    for sup in supports:
        combos = [(fs + [f], c * cf) for fs, c in combos for f, cf in sup]
    n = sum(r.n for r in results)
    forms = [tensor(fs) for fs, _ in combos]
    coeffs = np.array([c for _, c in combos])
    batch = FormBatch.from_forms(forms, n)
    # tensor products of distinct factor forms are distinct, so no merging is needed
    return ColumnSet(batch), coeffs


def warm_start_value(coeffs: np.ndarray) -> float:
    return float(np.abs(coeffs).sum() ** 2)
