"""Command-line interface: count, gen, fidelity, extent, verify."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import io, overlap
from .extent import CGConfig, ColumnSet, ExtentResult, RestrictedInfeasible, SolverError, compute_extent, \
    product_warm_start
from .stabilizer import count_states, random_form, synthesize

EXIT_OK = 0
EXIT_UNCERTIFIED = 2
EXIT_INPUT = 3
EXIT_SOLVER = 4

FEAS_TOL = 1e-8
GAP_TOL = 1e-7
DUAL_TOL = 1e-7

GEN_KINDS = ("haar", "real", "ghz", "w", "t-tensor", "stab")


def generate(kind: str, n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    dim = 1 << n
    if kind == "haar":
        b = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    elif kind == "real":
        b = rng.standard_normal(dim) + 0j
    elif kind == "ghz":
        b = np.zeros(dim, dtype=np.complex128)
        b[0] = b[-1] = 1.0
    elif kind == "w":
        b = np.zeros(dim, dtype=np.complex128)
        b[[1 << j for j in range(n)]] = 1.0
    elif kind == "t-tensor":
        t = np.array([1.0, np.exp(1j * np.pi / 4)])
        b = np.ones(1, dtype=np.complex128)
        for _ in range(n):
            b = np.kron(t, b)
    elif kind == "stab":
        return synthesize(random_form(n, rng))
    else:
        raise ValueError(f"unknown state kind {kind!r}")
    return b / np.linalg.norm(b)


def result_from_document(doc: dict) -> ExtentResult:
    forms, coeffs = io.decomposition_from_document(doc)
    return ExtentResult(
        n=int(doc["n"]), extent=float(doc["value"]), sqrt_extent=float(doc["sqrt_value"]), forms=forms,
        coefficients=coeffs, y=io.dual_from_document(doc), max_abs_ay=float(doc["certificate"]["max_abs_ay"]),
        dual_value=float(doc["certificate"]["dual_value"]), certified=bool(doc["certified"]),
        real_path=bool(doc.get("real_path", False)), trace=[],
    )


def verify(doc: dict, b: np.ndarray, threads=None) -> list[tuple[str, float, float, bool]]:
    """Independent re-check of an extent document; rows are (name, value, tolerance, ok)."""
    n = int(doc["n"])
    if b.size != 1 << n:
        raise io.InputError(f"document has n={n} but the state has {b.size} amplitudes")
    forms, coeffs = io.decomposition_from_document(doc)
    y = io.dual_from_document(doc)
    if y.size != b.size:
        raise io.InputError("certificate length does not match the state")
    recon = forms.columns() @ coeffs if len(forms) else np.zeros_like(b)
    l1 = float(np.abs(coeffs).sum())
    feas = float(np.linalg.norm(recon - b))
    value_err = abs(l1 ** 2 - float(doc["value"]))
    gap = abs(l1 - float(np.vdot(b, y).real))
    max_ay = overlap.max_dual_overlap(y, threads=threads)[0]
    rows = [
        ("feasibility ||sum x_j a_j - b||", feas, FEAS_TOL),
        ("value |(||x||_1)^2 - value|", value_err, GAP_TOL),
        ("duality gap |  ||x||_1 - Re(b^H y) |", gap, GAP_TOL),
        ("dual excess max|a^H y| - 1", max_ay - 1.0, DUAL_TOL),
    ]
    return [(name, v, tol, v <= tol) for name, v, tol in rows]


def _load_state(args) -> np.ndarray:
    b = io.read_state(args.state, allow_unnormalized=args.allow_unnormalized)
    norm = float(np.linalg.norm(b))
    if norm == 0.0:
        raise io.InputError("state vector is zero")
    if args.allow_unnormalized and abs(norm - 1) > 1e-9:
        logging.getLogger(__name__).warning("normalizing input state (norm %.12g)", norm)
        b = b / norm
    return b


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_count(args) -> int:
    if not 1 <= args.n <= 20:
        raise io.InputError("n must be in 1..20")
    total, per_k = count_states(args.n)
    print(f"n={args.n} total={total}")
    for k, c in enumerate(per_k):
        print(f"k={k} {c}")
    return EXIT_OK


def cmd_gen(args) -> int:
    _emit(io.format_state(generate(args.kind, args.n, args.seed)), args.output)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    b = _load_state(args)
    n = b.size.bit_length() - 1
    is_real = float(np.abs(b.imag).max()) < 1e-12
    if args.real == "on" and not is_real:
        raise io.InputError("--real on given for a state with complex amplitudes")
    real = args.real == "on" or (args.real == "auto" and is_real)
    t0 = time.perf_counter()
    F, form = overlap.fidelity(b.real + 0j if real else b, real_only=real, threads=args.threads)
    doc = io.fidelity_document(n, F, form, real, {"real": args.real, "threads": args.threads},
                               {"total": time.perf_counter() - t0})
    _emit(io.dump_document(doc), args.output)
    return EXIT_OK


def cmd_extent(args) -> int:
    b = _load_state(args)
    cfg = CGConfig(init_size=args.init_size, eps_violation=args.eps, max_iters=args.max_iters,
                   real_mode=args.real, threads=args.threads)
    initial = None
    if args.warm_start:
        factors = [result_from_document(io.load_document(p)) for p in args.warm_start]
        if sum(f.n for f in factors) != b.size.bit_length() - 1:
            raise io.InputError("warm-start factors do not add up to the state's qubit count")
        initial, _ = product_warm_start(factors)
    t0 = time.perf_counter()
    res = compute_extent(b, cfg, initial)
    config = {
        "init_size": cfg.resolved_init_size(res.n), "eps_violation": cfg.eps_violation,
        "max_iters": cfg.max_iters, "real_mode": cfg.real_mode, "threads": args.threads,
        "warm_start": list(args.warm_start or []),
    }
    doc = io.extent_document(res, config, {"total": time.perf_counter() - t0})
    _emit(io.dump_document(doc), args.output)
    return EXIT_OK if res.certified else EXIT_UNCERTIFIED


def cmd_verify(args) -> int:
    doc = io.load_document(args.result)
    b = _load_state(args)
    ok = True
    for name, value, tol, passed in verify(doc, b, args.threads):
        print(f"{'PASS' if passed else 'FAIL'}  {name} = {value:.3e}  (tol {tol:.0e})")
        ok &= passed
    print("verify:", "pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_UNCERTIFIED


def build_parser() -> argparse.ArgumentParser:
    threads_default = int(os.environ.get("STABEX_THREADS", "1"))
    p = argparse.ArgumentParser(prog="stabex", description="Stabilizer fidelity and extent of pure states.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("count", help="count stabilizer states")
    s.add_argument("n", type=int)
    s.set_defaults(func=cmd_count)

    s = sub.add_parser("gen", help="write a state file")
    s.add_argument("kind", choices=GEN_KINDS)
    s.add_argument("n", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_gen)

    for name, func in (("fidelity", cmd_fidelity), ("extent", cmd_extent)):
        s = sub.add_parser(name, help=f"stabilizer {name} of a state file")
        s.add_argument("state")
        s.add_argument("--real", choices=("auto", "on", "off"), default="auto")
        s.add_argument("--threads", type=int, default=threads_default)
        s.add_argument("-o", "--output")
        s.add_argument("--allow-unnormalized", action="store_true", help="rescale the input to unit norm")
        s.set_defaults(func=func)
        if name == "extent":
            s.add_argument("--init-size", type=int, default=None)
            s.add_argument("--eps", type=float, default=1e-8)
            s.add_argument("--max-iters", type=int, default=50)
            s.add_argument("--warm-start", nargs="+", metavar="RESULT")

    s = sub.add_parser("verify", help="re-check an extent result against its input state")
    s.add_argument("result")
    s.add_argument("state")
    s.add_argument("--threads", type=int, default=threads_default)
    s.add_argument("--allow-unnormalized", action="store_true", help="rescale the input to unit norm")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (io.InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, RestrictedInfeasible) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
