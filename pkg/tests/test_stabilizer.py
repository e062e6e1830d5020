import numpy as np
import pytest

from oracles import clifford_orbit
from stabex.gf2 import GF2Matrix, qbinom
from stabex.stabilizer import (
    CanonicalForm, count_enumerated, count_real_states, count_states, enumerate_forms, identify, random_form,
    synthesize, tensor,
)

S2 = 1 / np.sqrt(2)


def one_qubit(q, c):
    return CanonicalForm.from_matrices(GF2Matrix(1, 1, (q,)), c, GF2Matrix.identity(1), 0)


@pytest.mark.parametrize("q,c,expected", [
    (0, 0, [S2, S2]),
    (0, 1, [S2, 1j * S2]),
    (1, 0, [S2, -S2]),
])
def test_synthesize_single_qubit(q, c, expected):
    np.testing.assert_allclose(synthesize(one_qubit(q, c)), expected, atol=1e-15)


def test_synthesize_uses_integer_lift_for_c():
    # k=2, Q=0, c=(1,1): x=3 carries i^2 = -1, not i^0
    f = CanonicalForm.from_matrices(GF2Matrix.zeros(2, 2), 0b11, GF2Matrix.identity(2), 0)
    np.testing.assert_allclose(synthesize(f), np.array([1, 1j, 1j, -1]) / 2, atol=1e-15)


def test_form_validation():
    with pytest.raises(ValueError):
        CanonicalForm(n=2, k=1, t=0b01, pivots=(0,))  # t nonzero on pivot row
    with pytest.raises(ValueError):
        CanonicalForm(n=2, k=0, t=0, q=1)
    with pytest.raises(ValueError):
        CanonicalForm.from_matrices(GF2Matrix.from_lists([[0, 0], [1, 0]]), 0, GF2Matrix.identity(2), 0)
    with pytest.raises(ValueError):
        CanonicalForm.from_matrices(None, 0, GF2Matrix.from_columns(2, [0b11, 0b10]), 0)


@pytest.mark.parametrize("n,real_only,expected", [(1, False, 6), (2, False, 60), (1, True, 4), (3, False, 1080)])
def test_enumeration_sizes(n, real_only, expected):
    assert sum(1 for _ in enumerate_forms(n, real_only)) == expected


def test_real_single_qubit_forms_are_z_and_x_eigenstates():
    vecs = sorted(tuple(np.round(synthesize(f), 12)) for f in enumerate_forms(1, real_only=True))
    expected = sorted(tuple(np.round(np.array(v, dtype=complex), 12))
                      for v in ([1, 0], [0, 1], [S2, S2], [S2, -S2]))
    assert vecs == expected


@pytest.mark.parametrize("n", [1, 2, 3])
def test_forms_give_every_stabilizer_state_once(n):
    V = np.array([synthesize(f) for f in enumerate_forms(n)]).T
    ref = clifford_orbit(n)
    assert V.shape == ref.shape
    # one-to-one up to phase: each form matches exactly one orbit state with |<a|b>| = 1
    G = np.abs(ref.conj().T @ V)
    assert np.all(np.isclose(G, 1.0).sum(axis=0) == 1)
    assert np.all(np.isclose(G, 1.0).sum(axis=1) == 1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_synthesized_vectors_pairwise_distinct_and_normalized(n):
    V = np.array([synthesize(f) for f in enumerate_forms(n)])
    assert len({tuple(np.round(v, 12)) for v in V}) == len(V) == count_states(n)[0]
    np.testing.assert_allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_real_forms_have_real_amplitudes_and_count(n):
    forms = list(enumerate_forms(n, real_only=True))
    assert len(forms) == count_real_states(n)
    assert all(np.all(synthesize(f).imag == 0) for f in forms)
    expected = (1 << n) + sum((1 << (k * (k + 1) // 2)) * qbinom(n, k) * (1 << (n - k)) for k in range(1, n + 1))
    assert len(forms) == expected


def test_each_form_has_uniform_support():
    for f in enumerate_forms(3):
        a = synthesize(f)
        nz = np.abs(a) > 0
        assert nz.sum() == 1 << f.k
        np.testing.assert_allclose(np.abs(a[nz]), 2.0 ** (-f.k / 2))


def test_enumeration_order():
    forms = list(enumerate_forms(3))
    assert [f.sort_key() for f in forms] == sorted(f.sort_key() for f in forms)


def test_count_states():
    assert count_states(1) == (6, [2, 4])
    assert count_states(2) == (60, [4, 24, 32])
    assert count_states(5)[0] == 2_423_520
    total9 = count_states(9)[0]
    assert abs(total9 / 4.29e16 - 1) < 0.005


@pytest.mark.parametrize("n", range(1, 6))
def test_branch_walk_count_agrees(n):
    assert count_enumerated(n) == count_states(n)[0]
    assert count_enumerated(n, real_only=True) == count_real_states(n)


def test_token_round_trip():
    for f in enumerate_forms(3):
        assert CanonicalForm.from_token(f.token(), 3) == f
    f = CanonicalForm.from_matrices(GF2Matrix(1, 1, (1,)), 1, GF2Matrix.identity(1), 0)
    assert f.token() == "k=1;Q=1;c=1;R=1;t=0"


def test_identify_recovers_form_and_phase():
    rng = np.random.default_rng(5)
    for _ in range(50):
        f = random_form(5, rng)
        g, phase = identify(np.exp(2.1j) * synthesize(f))
        assert g == f
        assert abs(phase - np.exp(2.1j)) < 1e-12
    with pytest.raises(ValueError):
        identify(np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2))


def test_tensor_of_forms_is_kron():
    rng = np.random.default_rng(6)
    a, b = random_form(2, rng), random_form(1, rng)
    np.testing.assert_allclose(synthesize(tensor([a, b])), np.kron(synthesize(b), synthesize(a)), atol=1e-14)


def test_random_form_covers_all_states():
    rng = np.random.default_rng(0)
    seen = {random_form(1, rng) for _ in range(300)}
    assert len(seen) == 6
    assert all(f.c == 0 for f in (random_form(3, rng, real_only=True) for _ in range(50)))
