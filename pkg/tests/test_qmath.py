import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import assert_close
from qtamper.qmath import (
    BoundKind,
    SpaceShape,
    basis_projector,
    bound_eval,
    check_permutation,
    helstrom_pair,
    inverse_permutation,
    kron_all,
    labeled_blocks,
    partial_trace,
    permute_factors,
    permutation_unitary,
    psd_sqrt,
    spectral_decompose,
    td_pure,
    tensor_product,
    trace_distance,
    trace_norm,
)
from qtamper.randomness import ginibre, make_rng, random_density, random_hermitian

PLUS = np.array([1, 1]) / math.sqrt(2)
MINUS = np.array([1, -1]) / math.sqrt(2)

seeds = st.integers(0, 2**32 - 1)


def proj(v):
    return np.outer(v, np.conj(v))


# ---------------------------------------------------------------- tensor product


def test_tensor_identities():
    assert_close(tensor_product(np.eye(2), np.eye(2)), np.eye(4), 0)


def test_tensor_basis_order():
    out = tensor_product(basis_projector(2, 0), basis_projector(2, 1))
    assert_close(out, np.diag([0, 1, 0, 0]), 0)


def test_tensor_matches_index_formula(rng):
    a, b = ginibre(rng, 2, 2), ginibre(rng, 2, 2)
    out = tensor_product(a, b)
    for i, j, k, l in np.ndindex(2, 2, 2, 2):
        assert abs(out[2 * i + k, 2 * j + l] - a[i, j] * b[k, l]) < 1e-14


# ---------------------------------------------------------------- permutations


def test_identity_permutation(rng):
    a = ginibre(rng, 6, 6)
    assert_close(permute_factors(a, (2, 3), (0, 1)), a, 0)


def test_swap_of_basis_states():
    a = np.kron(basis_projector(2, 0), basis_projector(2, 1))
    assert_close(permute_factors(a, (2, 2), (1, 0)), np.kron(basis_projector(2, 1), basis_projector(2, 0)), 0)


def test_three_factor_rebuild(rng):
    # factor i moves to slot perm[i]: rho -> 1, sigma -> 2, tau -> 0
    rho, sigma, tau = random_density(rng, 2), random_density(rng, 3), random_density(rng, 2)
    out = permute_factors(kron_all(rho, sigma, tau), (2, 3, 2), (1, 2, 0))
    assert_close(out, kron_all(tau, rho, sigma), 1e-14)


@given(seeds, st.permutations(range(4)))
def test_permutation_unitary_agrees_with_reshape(seed, perm):
    rng = make_rng(seed)
    dims = (2, 1, 3, 2)
    a = ginibre(rng, 12, 12)
    u = permutation_unitary(dims, perm)
    assert_close(u @ a @ u.conj().T, permute_factors(a, dims, perm), 1e-12)
    back = permute_factors(permute_factors(a, dims, perm), [dims[i] for i in np.argsort(perm)],
                           inverse_permutation(perm))
    assert_close(back, a, 1e-12)


def test_bad_permutation_rejected():
    with pytest.raises(ValueError):
        check_permutation((0, 0), 2)


# ---------------------------------------------------------------- partial trace


def test_partial_trace_keep_all(rng):
    a = ginibre(rng, 4, 4)
    assert_close(partial_trace(a, (2, 2), [0, 1]), a, 0)


def test_partial_trace_product(rng):
    rho, sigma = random_density(rng, 3), random_density(rng, 2)
    assert_close(partial_trace(np.kron(rho, sigma), (3, 2), [0]), rho, 1e-14)


def test_partial_trace_bell():
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert_close(partial_trace(proj(bell), (2, 2), [0]), np.eye(2) / 2, 1e-15)


@given(seeds)
def test_partial_trace_sum_over_basis(seed):
    rng = make_rng(seed)
    a = ginibre(rng, 6, 6)
    want = sum(a.reshape(2, 3, 2, 3)[:, j, :, j] for j in range(3))
    assert_close(partial_trace(a, (2, 3), [0]), want, 1e-12)


# ---------------------------------------------------------------- spectra and norms


def test_spectral_diagonal():
    sd = spectral_decompose(np.diag([2.0, 3.0]))
    assert_close(sd.eigenvalues, [2, 3], 0)
    assert_close(sd.projectors[0], basis_projector(2, 0), 1e-15)


def test_spectral_pauli_x():
    sd = spectral_decompose(np.array([[0, 1], [1, 0]]))
    assert_close(sd.eigenvalues, [-1, 1], 1e-15)
    assert abs(abs(np.vdot(sd.vectors[:, 1], PLUS)) - 1) < 1e-12
    assert abs(abs(np.vdot(sd.vectors[:, 0], MINUS)) - 1) < 1e-12


def test_spectral_rejects_non_hermitian():
    with pytest.raises(ValueError, match="not Hermitian"):
        spectral_decompose(np.array([[0, 1], [0, 0]]))


@given(seeds, st.integers(1, 6))
def test_spectral_reconstruction(seed, d):
    h = random_hermitian(make_rng(seed), d)
    assert_close(spectral_decompose(h).reconstruct(), h, 1e-9)


def test_psd_sqrt_squares_back(rng):
    rho = random_density(rng, 4)
    r = psd_sqrt(rho)
    assert_close(r @ r, rho, 1e-12)
    with pytest.raises(ValueError):
        psd_sqrt(-np.eye(2))


def test_trace_norm_zero():
    assert trace_norm(np.zeros((3, 3))) == 0


@given(seeds, st.integers(1, 8))
def test_trace_norm_eigenvalue_oracle(seed, d):
    h = random_hermitian(make_rng(seed), d)
    assert abs(trace_norm(h) - np.abs(spectral_decompose(h).eigenvalues).sum()) < 1e-10


@given(seeds, st.integers(1, 5))
def test_trace_norm_general_is_singular_value_sum(seed, d):
    a = ginibre(make_rng(seed), d, d)
    assert abs(trace_norm(a) - np.linalg.svd(a, compute_uv=False).sum()) < 1e-10


def test_trace_distance_examples(rng):
    rho = random_density(rng, 3)
    assert trace_distance(rho, rho) == 0
    assert abs(trace_distance(proj(PLUS), proj(MINUS)) - 1) < 1e-15
    p0 = basis_projector(2, 0)
    assert trace_distance(p0, p0 / 2) == 0.25
    with pytest.raises(ValueError):
        trace_distance(np.eye(2), np.eye(3))


@given(seeds, st.integers(1, 6))
def test_trace_distance_triangle_and_bounds(seed, d):
    rng = make_rng(seed)
    a, b, c = (random_density(rng, d) for _ in range(3))
    ab = trace_distance(a, b)
    assert -1e-12 <= ab <= 1 + 1e-12
    assert ab <= trace_distance(a, c) + trace_distance(c, b) + 1e-12


def test_td_pure_examples():
    e0, e1 = np.array([1, 0]), np.array([0, 1])
    assert td_pure(e0, e1) == 1
    assert td_pure(e0, e0) == 0
    assert abs(td_pure(e0, PLUS) - 1 / math.sqrt(2)) < 1e-15
    assert abs(td_pure(e0, PLUS) - trace_distance(proj(e0), proj(PLUS))) < 1e-12


@given(seeds, st.integers(1, 8), st.floats(0.01, 1), st.floats(0.01, 1))
def test_td_pure_subnormalized(seed, d, r0, r1):
    rng = make_rng(seed)
    psi = ginibre(rng, d, 1)[:, 0]
    phi = ginibre(rng, d, 1)[:, 0]
    psi *= r0 / np.linalg.norm(psi)
    phi *= r1 / np.linalg.norm(phi)
    assert abs(td_pure(psi, phi) - trace_distance(proj(psi), proj(phi))) < 1e-9


# ---------------------------------------------------------------- Helstrom


def test_helstrom_orthogonal():
    hp = helstrom_pair(basis_projector(2, 0), basis_projector(2, 1))
    assert_close(hp.positive, basis_projector(2, 0), 1e-15)
    assert_close(hp.negative, basis_projector(2, 1), 1e-15)
    assert abs(hp.saturation - 2) < 1e-15


def test_helstrom_tie_rule(rng):
    rho = random_density(rng, 3)
    hp = helstrom_pair(rho, rho)
    assert hp.saturation == 0
    assert_close(hp.positive, np.eye(3), 1e-14)


@given(seeds, st.integers(1, 8))
def test_helstrom_saturates(seed, d):
    rng = make_rng(seed)
    a, b = random_hermitian(rng, d), random_hermitian(rng, d)
    hp = helstrom_pair(a, b)
    assert abs(hp.saturation - trace_norm(a - b)) < 1e-9
    # any other two-outcome measurement does no better
    g = ginibre(rng, d, d)
    e = g @ g.conj().T
    e /= np.linalg.eigvalsh(e).max()
    other = np.trace(e @ (a - b)).real - np.trace((np.eye(d) - e) @ (a - b)).real
    assert other <= hp.saturation + 1e-9


# ---------------------------------------------------------------- bounds and blocks


def test_bound_examples():
    assert bound_eval("markov_ub", expect=0.5, alpha=1) == 0.5
    assert abs(bound_eval(BoundKind.COPIES_LB, t=2, d=1) - (1 - 2 / math.e)) < 1e-15
    assert bound_eval("scaled_td_lb", t0=1, t1=0, d=1) == 0.5
    assert bound_eval("conc_lb", expect=0.75, alpha=0.5, beta=1) == 0.5


@pytest.mark.parametrize("kind,params", [
    ("markov_ub", dict(expect=1, alpha=0)),
    ("conc_lb", dict(expect=1, alpha=1, beta=1)),
    ("copies_lb", dict(t=1.5, d=0.5)),
    ("scaled_td_lb", dict(t0=-1, t1=0, d=0.5)),
])
def test_bound_domain_errors(kind, params):
    with pytest.raises(ValueError):
        bound_eval(kind, **params)


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_block_additivity(seed, n, d):
    rng = make_rng(seed)
    blocks = [ginibre(rng, d, d) for _ in range(n)]
    assert abs(trace_norm(labeled_blocks(blocks)) - sum(trace_norm(b) for b in blocks)) < 1e-9


def test_shape_concatenation_renames():
    a = SpaceShape.of(("C", 2))
    joined = a + a
    assert joined.labels == ("C", "C'")
    assert joined.dim == 4
    with pytest.raises(ValueError):
        SpaceShape.of(("C", 2), ("C", 3))
    with pytest.raises(ValueError):
        SpaceShape.of(("C", 0))
