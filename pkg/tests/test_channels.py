import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subalg import channels as C
from subalg import generators as G
from subalg.config import DimensionMismatch, NotDiagonalPreserving
from subalg.matcore import flip, haar_unitary, random_density
from conftest import oracle_S, oracle_T


def _rand(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def test_S_identity_and_flip(rng):
    beta = random_density(2, rng)
    x = _rand(rng, 2)
    spec = C.ChannelSpec(np.eye(4, dtype=complex), beta, 2, 2)
    assert np.allclose(C.apply_S(spec, x), x)
    assert np.allclose(C.apply_T(spec, x), x)
    spec = C.ChannelSpec(flip(2), beta, 2, 2)
    assert np.allclose(C.apply_S(spec, x), np.trace(x @ beta) * np.eye(2))
    assert np.allclose(C.apply_T(spec, x), np.trace(x) * beta)


@given(st.sampled_from([(2, 2), (2, 3), (3, 2)]), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_maps_agree_with_kraus_oracle(dims, seed):
    n, k = dims
    gen = np.random.default_rng(seed)
    u = haar_unitary(n * k, gen)
    beta = random_density(k, gen)
    x = _rand(gen, n)
    spec = C.ChannelSpec(u, beta, n, k)
    assert np.allclose(C.apply_T(spec, x), oracle_T(u, beta, x, n, k), atol=1e-12)
    assert np.allclose(C.apply_S(spec, x), oracle_S(u, beta, x, n, k), atol=1e-12)


@given(st.sampled_from([(2, 2), (2, 3), (3, 2)]), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_duality_unitality_trace(dims, seed):
    n, k = dims
    gen = np.random.default_rng(seed)
    spec = C.ChannelSpec(haar_unitary(n * k, gen), random_density(k, gen), n, k)
    x, y = _rand(gen, n), _rand(gen, n)
    lhs = C.hs_inner(C.apply_S(spec, x), y)
    rhs = C.hs_inner(x, C.apply_T(spec, y))
    assert abs(lhs - rhs) < 1e-12
    assert np.allclose(C.apply_S(spec, np.eye(n)), np.eye(n), atol=1e-12)
    assert abs(np.trace(C.apply_T(spec, y)) - np.trace(y)) < 1e-12
    assert np.linalg.eigvalsh(C.choi_T(spec))[0] > -1e-12


def test_controlled_unitary_fixes_basis_states(rng):
    n, k = 3, 2
    u = G.generate_pattern_unitary(G.PatternMatrix(n, k, k * np.eye(n, dtype=int)), rng)
    spec = C.ChannelSpec(u, random_density(k, rng), n, k)
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1
        assert np.allclose(C.apply_T(spec, e), e, atol=1e-12)
    assert np.allclose(C.markov_matrix(spec), np.eye(n), atol=1e-12)


def test_channel_spec_validation(rng):
    with pytest.raises(DimensionMismatch):
        C.ChannelSpec(np.eye(4), np.eye(3) / 3, 2, 2)
    with pytest.raises(ValueError):
        C.ChannelSpec(2 * np.eye(4), np.eye(2) / 2, 2, 2)
    with pytest.raises(ValueError):
        C.ChannelSpec(np.eye(4), np.diag([1.5, -0.5]), 2, 2)
    spec = C.ChannelSpec(np.eye(4, dtype=complex), np.eye(2) / 2, 2, 2)
    with pytest.raises(DimensionMismatch):
        C.apply_S(spec, np.eye(3))


def test_in_algebra_cases(rng):
    diag = C.AlgebraSpec.diagonal(3)
    assert C.in_algebra(np.diag([1.0, 2.0, 3.0]), diag) == 0
    e12 = np.zeros((3, 3))
    e12[0, 1] = 1
    assert C.in_algebra(e12, diag) == pytest.approx(1.0)
    a = _rand(rng, 2)
    assert C.in_algebra(np.kron(a, np.eye(3)), C.AlgebraSpec.tensor(2, 3)) < 1e-14
    assert C.in_algebra(np.kron(np.eye(2), a), C.AlgebraSpec.tensor(2, 2)) > 0.1
    z = C.AlgebraSpec.zero(1, 2)
    x = np.zeros((3, 3), dtype=complex)
    x[1:, 1:] = a
    assert C.in_algebra(x, z) == 0
    x[0, 0] = 1
    assert C.in_algebra(x, z) == pytest.approx(1.0)


def test_algebra_parse_and_labels():
    assert C.AlgebraSpec.parse("diagonal", 3) == C.AlgebraSpec.diagonal(3)
    assert C.AlgebraSpec.parse("blocks=2,1").n == 3
    assert C.AlgebraSpec.parse("tensor=2,3").n == 6
    assert C.AlgebraSpec.parse("zero=1,2").label() == "zero=1,2"
    assert C.AlgebraSpec.parse("full", 4).n == 4
    with pytest.raises(ValueError):
        C.AlgebraSpec.parse("nonsense=1")


@pytest.mark.parametrize("alg", [C.AlgebraSpec.diagonal(3), C.AlgebraSpec.blocks([2, 1]),
                                 C.AlgebraSpec.tensor(2, 2), C.AlgebraSpec.zero(1, 2)])
def test_algebra_generators_are_closed_and_projection_idempotent(alg, rng):
    gens = alg.generators()
    for g in gens:
        assert C.in_algebra(g, alg) < 1e-12
    for g in gens[:4]:
        for h in gens[:4]:
            assert C.in_algebra(g @ h, alg) < 1e-12
    x = _rand(rng, alg.n)
    p = alg.project(x)
    assert np.allclose(alg.project(p), p)


def test_spanning_family():
    fam = C.spanning_family(1)
    assert len(fam.states) == 1 and np.allclose(fam.states[0], 1)
    fam = C.spanning_family(2)
    assert len(fam.states) == 4 and fam.spans()
    g = np.array([[np.vdot(a, b) for b in fam.states] for a in fam.states])
    assert abs(np.linalg.det(g)) > 1e-3
    fam = C.spanning_family(3, np.random.default_rng(1), n_random=5)
    for s in fam.states:
        assert abs(np.trace(s) - 1) < 1e-12
        assert np.linalg.eigvalsh(s)[0] > -1e-12
    assert fam.spans() and np.isfinite(fam.gram_condition())


def test_invariance_oracle_positive_and_negative(rng):
    u = G.generate_pattern_unitary(G.random_pattern(3, 2, rng), rng)
    assert C.invariance_oracle(u, C.AlgebraSpec.diagonal(3), "S") <= 1e-9
    assert C.invariance_oracle(haar_unitary(4, rng), C.AlgebraSpec.diagonal(2), "S") > 1e-3
    u = G.generate_tensor_H(2, 2, 2, rng)
    assert C.invariance_oracle(u, C.AlgebraSpec.tensor(2, 2), "S") <= 1e-9
    u = G.fixtures()["sec5-3-b"].u
    assert C.invariance_oracle(u, C.AlgebraSpec.diagonal(3), "S") > 0.01
    with pytest.raises(DimensionMismatch):
        C.invariance_oracle(np.eye(5), C.AlgebraSpec.diagonal(2), "S")


def test_markov_matrix_rank_one_fixture(rng):
    f = G.fixtures()["rank-one-s"]
    b, c = f.extra["b"], f.extra["c"]
    bp = np.array([-np.conj(b[1]), np.conj(b[0])])
    cp = np.array([-np.conj(c[1]), np.conj(c[0])])
    beta = random_density(2, rng)

    def q(v):
        return np.vdot(v, beta @ v).real

    expected = np.array([[q(b), q(bp)], [q(c), q(cp)]])
    p = C.markov_matrix(C.ChannelSpec(f.u, beta, 2, 2))
    assert np.max(np.abs(p - expected)) <= 1e-10
    assert np.allclose(p.sum(axis=1), 1, atol=1e-12)


def test_markov_matrix_bistochastic_when_c1_holds(rng):
    # c = b-perp makes the initial spaces partition every row as well
    b = np.array([0.6, 0.8j])
    bp = np.array([-np.conj(b[1]), np.conj(b[0])])
    a = np.array([1, 0], dtype=complex)
    ap = np.array([0, 1], dtype=complex)
    u = np.block([[np.outer(a, b.conj()), np.outer(ap, bp.conj())],
                  [np.outer(ap, bp.conj()), np.outer(a, b.conj())]])
    p = C.markov_matrix(C.ChannelSpec(u, random_density(2, rng), 2, 2))
    assert np.allclose(p.sum(axis=0), 1, atol=1e-10)
    assert np.allclose(p.sum(axis=1), 1, atol=1e-10)


def test_markov_matrix_rejects_coherent_channel(rng):
    with pytest.raises(NotDiagonalPreserving):
        C.markov_matrix(C.ChannelSpec(haar_unitary(4, rng), random_density(2, rng), 2, 2))


def test_diag_schrodinger_gives_row_stochastic_markov(rng):
    n, k = 3, 2
    u = G.generate_schrodinger_diag_unitary(G.random_pattern(n, k, rng), rng)
    p = C.markov_matrix(C.ChannelSpec(u, random_density(k, rng), n, k))
    assert np.all(p >= -1e-12)
    assert np.allclose(p.sum(axis=1), 1, atol=1e-10)
