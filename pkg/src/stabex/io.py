"""State files and result documents."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .overlap import FormBatch
from .stabilizer import CanonicalForm

STATE_FORMAT = "relist"


class InputError(ValueError):
    pass


def format_state(b) -> str:
    b = np.asarray(b, dtype=np.complex128).ravel()
    n = b.size.bit_length() - 1
    lines = [f"n={n} format={STATE_FORMAT}"]
    lines += [f"{z.real:.17g} {z.imag:.17g}" for z in b]
    return "\n".join(lines) + "\n"


def parse_state(text: str, allow_unnormalized: bool = False) -> np.ndarray:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise InputError("empty state file")
    try:
        header = dict(tok.split("=", 1) for tok in lines[0].split())
        n = int(header["n"])
    except (KeyError, ValueError) as exc:
        raise InputError(f"bad header line {lines[0]!r}") from exc
    if header.get("format") != STATE_FORMAT:
        raise InputError(f"unsupported state format {header.get('format')!r}")
    if not 1 <= n <= 20:
        raise InputError(f"qubit count {n} out of range")
    body = lines[1:]
    if len(body) != 1 << n:
        raise InputError(f"expected {1 << n} amplitude lines, found {len(body)}")
    b = np.empty(1 << n, dtype=np.complex128)
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != 2:
            raise InputError(f"line {i + 2}: expected '<re> <im>'")
        try:
            b[i] = complex(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise InputError(f"line {i + 2}: {exc}") from exc
    if not np.all(np.isfinite(b)):
        raise InputError("non-finite amplitude")
    if not allow_unnormalized and abs(np.linalg.norm(b) - 1) > 1e-9:
        raise InputError(f"state is not normalized (norm={np.linalg.norm(b):.12g})")
    return b


def read_state(path, allow_unnormalized: bool = False) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    return parse_state(text, allow_unnormalized)


def write_state(path, b):
    Path(path).write_text(format_state(b))


def _cpx(z) -> list[float]:
    return [float(z.real), float(z.imag)]


def extent_document(result, config: dict, timings: dict) -> dict:
    trace = [{k: v for k, v in rec.items() if k != "wall"} for rec in result.trace]
    return {
        "command": "extent",
        "n": result.n,
        "value": result.extent,
        "sqrt_value": result.sqrt_extent,
        "certified": result.certified,
        "real_path": result.real_path,
        "decomposition": [
            {"form": tok, "re": z.real, "im": z.imag} for tok, z in result.decomposition()
        ],
        "certificate": {
            "max_abs_ay": result.max_abs_ay,
            "dual_value": result.dual_value,
            "dual_gap": abs(result.sqrt_extent - result.dual_value),
            "y": [_cpx(z) for z in result.y],
        },
        "trace": trace,
        "config": config,
        "timings": {**timings, "iterations": [rec["wall"] for rec in result.trace]},
    }


def fidelity_document(n: int, value: float, form: CanonicalForm, real_path: bool, config: dict,
                      timings: dict) -> dict:
    return {
        "command": "fidelity",
        "n": n,
        "value": value,
        "sqrt_value": float(np.sqrt(value)),
        "form": form.token(),
        "real_path": real_path,
        "config": config,
        "timings": timings,
    }


def dump_document(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_document(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read result document {path}: {exc}") from exc


def decomposition_from_document(doc: dict) -> tuple[FormBatch, np.ndarray]:
    n = int(doc["n"])
    try:
        forms = [CanonicalForm.from_token(d["form"], n) for d in doc["decomposition"]]
        coeffs = np.array([complex(d["re"], d["im"]) for d in doc["decomposition"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed decomposition: {exc}") from exc
    batch = FormBatch.from_forms(forms, n) if forms else FormBatch.empty(n)
    return batch, coeffs


def dual_from_document(doc: dict) -> np.ndarray:
    try:
        return np.array([complex(re, im) for re, im in doc["certificate"]["y"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed certificate: {exc}") from exc
