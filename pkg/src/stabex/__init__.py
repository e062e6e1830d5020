"""Stabilizer fidelity and exact stabilizer extent of pure states."""

from .extent import CGConfig, ColumnSet, ExtentResult, RestrictedSolution, compute_extent, product_warm_start, \
    solve_restricted
from .gf2 import GF2Matrix, enumerate_rcef, qbinom, quotient_reps, rank
from .overlap import OverlapHit, SearchBudget, bound, build_p, fidelity, max_over_qc, scan, violations
from .stabilizer import CanonicalForm, count_states, enumerate_forms, identify, random_form, synthesize

__all__ = [
    "CGConfig", "CanonicalForm", "ColumnSet", "ExtentResult", "GF2Matrix", "OverlapHit", "RestrictedSolution",
    "SearchBudget", "bound", "build_p", "compute_extent", "count_states", "enumerate_forms", "enumerate_rcef",
    "fidelity", "identify", "max_over_qc", "product_warm_start", "qbinom", "quotient_reps", "random_form",
    "rank", "scan", "solve_restricted", "synthesize", "violations",
]
