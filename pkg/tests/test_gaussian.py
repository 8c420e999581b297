import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from macronode.gaussian import (
    MACRONODE_BS_SEQUENCE,
    SQRT_PI,
    ModeType,
    QuadratureMeans,
    StatePrepConfig,
    apply,
    beamsplitter,
    bs_network,
    cx,
    cx_dagger,
    cz,
    cz_network,
    displace,
    elementary_symplectic,
    identity_op,
    macronode_bs_matrix,
    measure_with_noise,
    momentum_coupling,
    rotate,
    sample_inputs,
    sample_q,
    sample_types,
    squeeze,
    symplectic_form,
    verify_identities,
)
from macronode.lattice import build_lattice
from macronode.montecarlo import TrialContext
from macronode.reduction import select_central

R2 = math.sqrt(2.0)


def _means(q, p):
    return QuadratureMeans(np.asarray(q, float), np.asarray(p, float))


def _is_symplectic(S, tol=1e-12):
    n = S.shape[0] // 2
    O = symplectic_form(n).toarray()
    return np.abs(S.T @ O @ S - O).max() < tol


@pytest.fixture(scope="module")
def g2():
    return build_lattice(2)


# ---------------------------------------------------------------- gates


def test_cz_single_pair():
    out = apply(cz(0, 1), _means([1, 2], [0, 0]))
    assert out.q.tolist() == [1, 2] and out.p.tolist() == [2, 1]


def test_cz_network_restricted_to_pair_equals_cz():
    g = build_lattice(2)
    S = cz_network(g).dense()
    n = g.n_modes
    a, b = 0, 4 * int(g.neighbors[0, 0]) + int(g.reciprocal[0, 0])
    ref = cz(a, b, 1.0, n).dense()
    rows = [n + a, n + b]
    cols = [a, b]
    assert np.array_equal(S[np.ix_(rows, cols)], ref[np.ix_(rows, cols)])


def test_cz_network_additive(g2):
    twice = (cz_network(g2) @ cz_network(g2)).dense()
    assert np.allclose(twice, cz_network(g2, 2.0).dense(), atol=0)


def test_beamsplitter_convention_matches_generator():
    # U = exp(-i theta G) with G = q_j p_k - p_j q_k = x^T A x (A symmetric,
    # ordering (q_j, q_k, p_j, p_k)); Heisenberg: dx/dtheta = 2 Omega A x
    A = np.zeros((4, 4))
    A[0, 3] = A[3, 0] = 0.5
    A[2, 1] = A[1, 2] = -0.5
    O = symplectic_form(2).toarray()
    H = O @ (2 * A)
    S = expm(math.pi / 4 * H)
    assert np.allclose(S, beamsplitter(0, 1).dense(), atol=1e-12)
    out = apply(beamsplitter(0, 1), _means([R2, 0], [0, 0]))
    assert np.allclose(out.q, [1, 1], atol=1e-15)


def test_macronode_block_symplectic_and_orthogonal():
    M = macronode_bs_matrix()
    S = np.kron(np.eye(2), M)
    assert _is_symplectic(S)
    assert np.allclose(M @ M.T, np.eye(4), atol=1e-15)


def test_macronode_block_is_signed_hadamard():
    M = macronode_bs_matrix()
    assert np.allclose(np.abs(M), 0.5, atol=1e-15)
    # every input permutation equals a signed output permutation
    for perm in itertools.permutations(range(4)):
        Mp = M[:, perm]
        found = False
        for out in itertools.permutations(range(4)):
            D = Mp[list(out), :] @ M.T
            if np.allclose(np.abs(D), np.eye(4), atol=1e-12):
                found = True
                break
        assert found


def test_bs_sequence_order():
    M = np.eye(4)
    for j, k in MACRONODE_BS_SEQUENCE:
        M = beamsplitter(j, k, 4).dense()[:4, :4] @ M
    assert np.allclose(M, macronode_bs_matrix(), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8))
def test_bs_block_conserves_energy(x):
    x = np.asarray(x)
    m = _means(x[:4], x[4:])
    out = apply(_block_op(), m)
    assert math.isclose((out.q**2 + out.p**2).sum(), (x**2).sum(), rel_tol=1e-12, abs_tol=1e-12)


def _block_op():
    op = identity_op(4)
    for j, k in MACRONODE_BS_SEQUENCE:
        op = beamsplitter(j, k, 4) @ op
    return op


def test_rotation_twice_is_parity():
    out = apply(rotate(0, math.pi / 2) @ rotate(0, math.pi / 2), _means([1], [0]))
    assert np.allclose([out.q[0], out.p[0]], [-1, 0], atol=1e-15)
    out = apply(rotate(0, math.pi / 2), _means([1], [2]))
    assert np.allclose([out.q[0], out.p[0]], [-2, 1], atol=1e-15)


def test_squeeze_convention():
    # q -> xi q, p -> p / xi; the inverse factor maps (sqrt2, 1) -> (1, sqrt2)
    out = apply(squeeze(0, 1 / R2), _means([R2], [1]))
    assert np.allclose([out.q[0], out.p[0]], [1, R2], atol=1e-15)
    out = apply(squeeze(0, R2), _means([R2], [1]))
    assert np.allclose([out.q[0], out.p[0]], [2, 1 / R2], atol=1e-15)
    with pytest.raises(ValueError):
        squeeze(0, 0.0)


def test_cx_and_dagger():
    out = apply(cx(0, 1), _means([1, 2], [3, 4]))
    assert out.q.tolist() == [1, 3] and out.p.tolist() == [-1, 4]
    both = (cx_dagger(0, 1) @ cx(0, 1)).dense()
    assert np.allclose(both, np.eye(4))


def test_momentum_coupling():
    out = apply(momentum_coupling(0, 1, 0.5), _means([0, 0], [2, 4]))
    assert out.q.tolist() == [2, 1]


@pytest.mark.parametrize("kind, args", [("beamsplitter", (0, 1)), ("cz", (0, 1, 0.7)), ("cx", (0, 1)),
                                        ("cx_dagger", (1, 0)), ("squeeze", (0, 1.3)), ("rotate", (1, 0.4))])
def test_elementary_symplectic_is_symplectic(kind, args):
    S = elementary_symplectic(kind, *args, n=3)
    assert _is_symplectic(S.dense())
    assert S.symplectic_error() < 1e-12


def test_elementary_symplectic_unknown():
    with pytest.raises(ValueError):
        elementary_symplectic("kerr", 0)


def test_two_mode_gate_needs_distinct_modes():
    with pytest.raises(ValueError):
        cz(1, 1)


def test_displace_is_affine():
    m = displace(_means([0, 0], [0, 0]), 1, dq=SQRT_PI, dp=-1.0)
    assert m.q.tolist() == [0, SQRT_PI] and m.p.tolist() == [0, -1.0]


# ---------------------------------------------------------------- networks


def test_full_network_symplectic(g2):
    order = select_central(np.random.default_rng(0).integers(0, 2, (g2.n_nodes, 4)))
    S = (bs_network(g2, order) @ cz_network(g2)).dense()
    assert _is_symplectic(S)


def test_apply_identity_and_associativity(g2):
    rng = np.random.default_rng(1)
    m = _means(rng.normal(size=g2.n_modes), rng.normal(size=g2.n_modes))
    out = apply(identity_op(g2.n_modes), m)
    assert np.array_equal(out.q, m.q) and np.array_equal(out.p, m.p)
    a = apply(bs_network(g2) @ cz_network(g2), m)
    b = apply(bs_network(g2), apply(cz_network(g2), m))
    assert np.allclose(a.as_vector(), b.as_vector(), atol=1e-12)
    # dense oracle
    dense = (bs_network(g2).dense() @ cz_network(g2).dense()) @ m.as_vector()
    assert np.abs(a.as_vector() - dense).max() < 1e-10


def test_apply_dimension_check(g2):
    with pytest.raises(ValueError):
        apply(cz_network(g2), np.zeros(3))


@pytest.mark.parametrize("d", [2, 3])
def test_fast_propagation_matches_sparse_network(d):
    ctx = TrialContext(d)
    g = ctx.graph
    rng = np.random.default_rng(d)
    types, m_in = sample_inputs(StatePrepConfig("iid", 0.3), g, rng)
    order = select_central(types.reshape(-1, 4))
    ref = apply(bs_network(g, order) @ cz_network(g), m_in)
    q, p = ctx.propagate(m_in.q.reshape(-1, 4), order)
    assert np.abs(q.ravel() - ref.q).max() < 1e-12
    assert np.abs(p.ravel() - ref.p).max() < 1e-12


# ---------------------------------------------------------------- identities


def test_verify_identities():
    dev = verify_identities()
    assert set(dev) >= {"beamsplitter_cx", "beamsplitter_cz", "loss_commutes_bs", "additive_noise_commutes_bs"}
    assert max(dev.values()) < 1e-12


def test_additive_noise_commutes_with_beamsplitter():
    # isotropic covariance c * I is invariant under any orthogonal symplectic
    S = beamsplitter(0, 1).dense()
    c = 0.3
    assert np.allclose(S @ (c * np.eye(4)) @ S.T, c * np.eye(4), atol=1e-15)


def test_loss_as_noise_numeric():
    # loss eta followed by 1/sqrt(eta) amplification adds (1-eta)/(2 eta)
    # vacuum-units variance on a coherent input, independent of the input
    from macronode.noise import loss_variance

    eta = 0.9
    vac = 0.5
    for var_in in (0.5, 0.1, 2.0):
        after = (eta * var_in + (1 - eta) * vac) / eta
        assert math.isclose(after - var_in, loss_variance(eta) * (2 * vac), rel_tol=1e-12)


# ---------------------------------------------------------------- sampling


def test_sample_types_degenerate():
    rng = np.random.default_rng(0)
    assert sample_types(StatePrepConfig("iid", 0.0), 10, rng).all()
    assert not sample_types(StatePrepConfig("iid", 1.0), 10, rng).any()
    one = sample_types(StatePrepConfig("fixed_one_gkp"), 1000, rng)
    assert np.all(one.sum(axis=1) == 1)
    assert np.all(np.abs(np.bincount(one.argmax(axis=1)) - 250) < 80)


def test_sample_inputs_types_and_momenta(g2):
    rng = np.random.default_rng(3)
    types, m = sample_inputs(StatePrepConfig("iid", 1.0), g2, rng)
    assert np.all(types == ModeType.P_SQUEEZED)
    assert np.all(m.p == 0)
    types, m = sample_inputs(StatePrepConfig("iid", 0.0), g2, rng)
    assert np.all(types == ModeType.GKP_PLUS)
    assert set(np.round(m.q / SQRT_PI, 12).tolist()) <= {0.0, 1.0}


def test_gkp_q_mean():
    rng = np.random.default_rng(11)
    q = sample_q(np.ones(10**6, dtype=bool), rng)
    sigma = SQRT_PI / 2
    assert abs(q.mean() - SQRT_PI / 2) < 3 * sigma / 1000


def test_prep_validation():
    with pytest.raises(ValueError):
        StatePrepConfig("iid", 1.5)
    with pytest.raises(ValueError):
        StatePrepConfig("fixed_one_gkp", 0.2)
    with pytest.raises(ValueError):
        StatePrepConfig("bogus")


def test_measure_without_noise_is_exact():
    m = _means([1.0, 2.0], [3.0, 4.0])
    out = measure_with_noise(m, ["q", "p"], 0.0, np.random.default_rng(0))
    assert out.tolist() == [1.0, 4.0]


def test_measure_noise_variance():
    n = 10**6
    m = _means(np.zeros(n), np.zeros(n))
    out = measure_with_noise(m, np.ones(n, dtype=bool), 0.1, np.random.default_rng(5))
    assert abs(out.var() - 0.1) < 0.001
    with pytest.raises(ValueError):
        measure_with_noise(m, "q", -1.0, np.random.default_rng(0))
