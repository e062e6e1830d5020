import numpy as np
import pytest

from oracles import clifford_orbit, full_socp_sqrt_extent, haar, real_random
from stabex.extent import (
    CGConfig, ColumnSet, RestrictedInfeasible, compute_extent, initial_columns, product_warm_start,
    solve_restricted, warm_start_value,
)
from stabex.overlap import FormBatch, fidelity, max_dual_overlap, violations
from stabex.stabilizer import enumerate_forms, random_form, synthesize

T_STATE = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)
S2 = 1 / np.sqrt(2)


def column_set(forms):
    return ColumnSet(FormBatch.from_forms(list(forms)))


# ---- solve_restricted


def test_restricted_single_column():
    f = random_form(3, np.random.default_rng(0))
    b = synthesize(f)
    sol = solve_restricted(column_set([f]), b)
    assert sol.primal_value == pytest.approx(1.0, abs=1e-8)
    assert abs(abs(sol.x[0]) - 1) < 1e-8
    assert np.vdot(b, sol.y).real == pytest.approx(1.0, abs=1e-8)


def test_restricted_picks_plus_state():
    forms = [f for f in enumerate_forms(1) if tuple(np.round(synthesize(f), 12)) in {
        (1, 0), (0, 1), (round(S2, 12), round(S2, 12))}]
    assert len(forms) == 3
    b = np.array([S2, S2], dtype=complex)
    sol = solve_restricted(column_set(forms), b)
    assert sol.primal_value == pytest.approx(1.0, abs=1e-8)
    plus = [i for i, f in enumerate(forms) if f.k == 1][0]
    assert abs(sol.x[plus] - 1) < 1e-7


def test_restricted_t_state_against_full_socp():
    forms = list(enumerate_forms(1))
    sol = solve_restricted(column_set(forms), T_STATE)
    ref = full_socp_sqrt_extent(clifford_orbit(1), T_STATE)
    assert sol.primal_value == pytest.approx(ref, abs=1e-7)
    # closed form for the T state: 1/cos^2(pi/8)
    assert sol.primal_value ** 2 == pytest.approx(1 / np.cos(np.pi / 8) ** 2, abs=1e-7)


def test_restricted_invariants_hold():
    rng = np.random.default_rng(1)
    b = haar(3, rng)
    C = column_set(enumerate_forms(3))
    sol = solve_restricted(C, b)
    A = C.matrix()
    assert np.linalg.norm(A @ sol.x - b) <= 1e-8
    assert np.abs(A.conj().T @ sol.y).max() <= 1 + 1e-8
    assert abs(sol.primal_value - sol.dual_value) <= 1e-8
    assert sol.primal_value == pytest.approx(np.abs(sol.x).sum(), abs=1e-12)


def test_restricted_infeasible_is_reported_distinctly():
    f = [g for g in enumerate_forms(2) if g.k == 0][0]
    with pytest.raises(RestrictedInfeasible):
        solve_restricted(column_set([f]), haar(2, np.random.default_rng(2)))


# ---- compute_extent


def test_extent_of_stabilizer_state_is_one():
    rng = np.random.default_rng(3)
    for n in (1, 2, 4):
        res = compute_extent(synthesize(random_form(n, rng)))
        assert res.certified
        assert res.extent == pytest.approx(1.0, abs=1e-9)
        assert res.trace[0]["violations"] == 0


def test_extent_t_state():
    res = compute_extent(T_STATE)
    assert res.certified
    ref = full_socp_sqrt_extent(clifford_orbit(1), T_STATE) ** 2
    assert res.extent == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("n", [2, 3])
def test_extent_matches_full_socp(n):
    rng = np.random.default_rng(40 + n)
    A = clifford_orbit(n)
    for _ in range(3):
        b = haar(n, rng)
        res = compute_extent(b, CGConfig(init_size=20))
        assert res.certified
        assert res.sqrt_extent == pytest.approx(full_socp_sqrt_extent(A, b), rel=1e-6)


def test_certificate_is_sound():
    b = haar(4, np.random.default_rng(5))
    res = compute_extent(b, CGConfig(init_size=200))
    assert res.certified
    assert violations(res.y, 1e-8) == []
    assert np.linalg.norm(res.reconstruct() - b) <= 1e-8
    assert abs(res.sqrt_extent - np.vdot(b, res.y).real) <= 1e-8
    assert res.max_abs_ay == pytest.approx(max_dual_overlap(res.y)[0])
    assert res.extent == pytest.approx(res.sqrt_extent ** 2)


def test_upper_bounds_are_monotone():
    b = haar(4, np.random.default_rng(6))
    res = compute_extent(b, CGConfig(init_size=30))
    values = [r["value"] for r in res.trace]
    assert len(values) > 1
    assert all(v2 <= v1 + 1e-8 for v1, v2 in zip(values, values[1:]))
    cols = [r["columns"] for r in res.trace]
    assert cols == sorted(cols)


def test_extent_lower_bounds():
    rng = np.random.default_rng(7)
    for n in (1, 2, 3):
        b = haar(n, rng)
        res = compute_extent(b)
        F, _ = fidelity(b)
        assert res.extent >= 1 - 1e-9
        assert res.extent >= 1 / F - 1e-9


def test_bit_flip_invariance():
    rng = np.random.default_rng(8)
    b = haar(3, rng)
    base = compute_extent(b).sqrt_extent
    idx = np.arange(8)
    for m in (1, 5, 7):
        assert compute_extent(b[idx ^ m]).sqrt_extent == pytest.approx(base, abs=2e-8)


def test_real_path_equivalence():
    rng = np.random.default_rng(9)
    for n in (2, 3, 4):
        b = real_random(n, rng)
        real = compute_extent(b, CGConfig(real_mode="on"))
        cplx = compute_extent(b, CGConfig(real_mode="off"))
        assert real.real_path and not cplx.real_path
        assert real.certified and cplx.certified
        assert real.extent == pytest.approx(cplx.extent, abs=1e-6)
        assert all(f.k == 0 or f.c == 0 for f in real.forms.forms())
        # the real-path dual stays feasible for every complex column too
        assert real.max_abs_ay <= 1 + 1e-7


def test_real_mode_auto_detection():
    b = real_random(2, np.random.default_rng(10))
    assert compute_extent(b).real_path
    assert not compute_extent(haar(2, np.random.default_rng(10))).real_path
    with pytest.raises(ValueError):
        compute_extent(haar(2, np.random.default_rng(10)), CGConfig(real_mode="on"))


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        compute_extent(np.zeros(4))
    with pytest.raises(ValueError):
        compute_extent(np.array([1.0, 1.0, 0, 0]))
    with pytest.raises(ValueError):
        CGConfig(feas_tol=0)


def test_iteration_budget_gives_uncertified_upper_bound():
    b = haar(4, np.random.default_rng(11))
    full = compute_extent(b, CGConfig(init_size=20))
    short = compute_extent(b, CGConfig(init_size=20, max_iters=1))
    assert not short.certified
    assert short.extent >= full.extent - 1e-8
    assert np.linalg.norm(short.reconstruct() - b) <= 1e-8


def test_init_size_clamps():
    b = haar(2, np.random.default_rng(12))
    assert len(initial_columns(b, 10**6, False)) == 60
    res = compute_extent(b, CGConfig(init_size=10**6))
    assert res.certified and len(res.trace) == 1


def test_decomposition_tokens():
    res = compute_extent(T_STATE)
    decomp = res.decomposition(cutoff=1e-9)
    assert decomp and all(tok.startswith("k=") for tok, _ in decomp)
    assert sum(abs(x) for _, x in res.decomposition()) == pytest.approx(res.sqrt_extent, abs=1e-8)


# ---- warm starts


def test_warm_start_t_tensor_t():
    t1 = compute_extent(T_STATE)
    C, x = product_warm_start([t1, t1])
    assert warm_start_value(x) == pytest.approx(t1.extent ** 2, abs=1e-8)
    tt = np.kron(T_STATE, T_STATE)
    res = compute_extent(tt, initial=C)
    assert res.certified
    assert res.extent == pytest.approx(t1.extent ** 2, abs=1e-6)
    # product coefficients reconstruct the product state
    np.testing.assert_allclose(C.matrix() @ x, tt, atol=1e-8)


def test_warm_start_one_by_three():
    rng = np.random.default_rng(13)
    a, c = haar(1, rng), haar(3, rng)
    ra, rc = compute_extent(a), compute_extent(c)
    C, x = product_warm_start([ra, rc])
    b = np.kron(c, a)
    res = compute_extent(b, initial=C)
    assert res.certified
    assert warm_start_value(x) >= res.extent - 1e-8
    assert res.extent == pytest.approx(ra.extent * rc.extent, rel=1e-6)


def test_warm_start_of_stabilizer_factors():
    rng = np.random.default_rng(14)
    rs = [compute_extent(synthesize(random_form(m, rng))) for m in (1, 2)]
    C, x = product_warm_start(rs)
    assert warm_start_value(x) == pytest.approx(1.0, abs=1e-8)


def test_warm_start_requires_certified_factors():
    b = haar(4, np.random.default_rng(15))
    short = compute_extent(b, CGConfig(init_size=20, max_iters=1))
    with pytest.raises(ValueError):
        product_warm_start([short])
