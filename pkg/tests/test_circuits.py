import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import assert_close
from qtamper.channels import identity_channel, structured_channel
from qtamper.circuits import (
    BlockState,
    Circuit,
    DimensionCapError,
    current_dim_cap,
    dim_cap,
    group_permutation,
    prepared,
)
from qtamper.qmath import SpaceShape, basis_projector, kron_all, partial_trace, permute_factors
from qtamper.randomness import make_rng, random_channel, random_density

seeds = st.integers(0, 2**32 - 1)
ABC = SpaceShape.of(("A", 2), ("B", 3), ("C", 2))


@given(seeds)
def test_local_on_middle_factor_matches_dense(seed):
    rng = make_rng(seed)
    ch = random_channel(rng, SpaceShape.of(("B", 3)), SpaceShape.of(("D", 2)))
    rho = random_density(rng, 12)
    got = Circuit(ABC).on(ch, [1], 1).apply(rho)
    ops = [np.kron(np.kron(np.eye(2), k), np.eye(2)) for k in ch.kraus]
    want = sum(k @ rho @ k.conj().T for k in ops)
    assert_close(got, want, 1e-12)


@given(seeds, st.permutations(range(3)))
def test_permute_matches_dense(seed, perm):
    rng = make_rng(seed)
    rho = random_density(rng, 12)
    assert_close(Circuit(ABC).permute(perm).apply(rho), permute_factors(rho, ABC.dims, perm), 1e-14)


def test_trace_select_prepare(rng):
    rho = random_density(rng, 12)
    assert_close(Circuit(ABC).trace([1]).apply(rho), partial_trace(rho, ABC.dims, [0, 2]), 1e-14)
    sel = Circuit(ABC).select([0], [1]).apply(rho)
    assert_close(sel, rho.reshape(2, 6, 2, 6)[1, :, 1, :], 1e-15)
    sigma = random_density(rng, 2)
    out = Circuit(ABC).prepare(sigma, SpaceShape.of(("P", 2)), 0).apply(rho)
    assert_close(out, np.kron(sigma, rho), 1e-14)


def test_product_state_stays_blocked(rng):
    parts = [(random_density(rng, 2), (2,)), (random_density(rng, 3), (3,))]
    st_ = BlockState.product(parts)
    assert_close(st_.to_dense(), np.kron(parts[0][0], parts[1][0]), 1e-15)
    assert abs(st_.trace() - 1) < 1e-12


def test_embedded_circuit_and_then(rng):
    inner = Circuit(SpaceShape.of(("B", 3))).prepare(basis_projector(2, 1), SpaceShape.of(("Q", 2)))
    outer = Circuit(ABC).on(inner, [1], 0)
    rho = random_density(rng, 12)
    out = outer.apply(rho)
    assert outer.out_shape.labels[:2] == ("B", "Q")
    want = permute_factors(np.kron(rho, basis_projector(2, 1)), (2, 3, 2, 2), (2, 0, 3, 1))
    assert_close(out, want, 1e-14)


@given(seeds)
def test_choi_and_kraus_agree_with_channel(seed):
    rng = make_rng(seed)
    ch = random_channel(rng, SpaceShape.of(("A", 2)), SpaceShape.of(("B", 3)))
    c = ch.as_circuit()
    assert_close(c.choi(), ch.choi(), 1e-12)
    rho = random_density(rng, 2)
    assert_close(c.to_kraus().apply(rho), ch.apply(rho), 1e-12)


def test_group_permutation_blocks():
    # groups of sizes (1, 2): swapping them sends factor 0 to slot 2
    assert list(group_permutation([1, 2], [1, 0])) == [2, 0, 1]


def test_dim_cap_enforced(rng):
    big = SpaceShape.qubits(5)
    assert current_dim_cap() == 256
    with dim_cap(16):
        with pytest.raises(DimensionCapError):
            Circuit(big).on(identity_channel(2), [0]).apply(np.eye(32) / 32)
    assert current_dim_cap() == 256


def test_prepared_state(rng):
    sigma = random_density(rng, 3)
    assert_close(prepared(sigma, SpaceShape.of(("S", 3))).apply(np.ones((1, 1))), sigma, 1e-15)


def test_dephase_inside_circuit():
    deph = structured_channel("dephase", shape=SpaceShape.of(("C", 2)))
    plus = np.full((2, 2), 0.5)
    rho = kron_all(basis_projector(2, 0), np.eye(3) / 3, plus)
    out = Circuit(ABC).on(deph, [2], 2).apply(rho)
    assert_close(out, kron_all(basis_projector(2, 0), np.eye(3) / 3, np.eye(2) / 2), 1e-15)
