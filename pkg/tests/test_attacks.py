import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import assert_close
from qtamper import attacks as atk
from qtamper import constructions as cons
from qtamper.channels import identity_channel
from qtamper.circuits import Circuit
from qtamper.qmath import SpaceShape, trace_distance
from qtamper.randomness import make_rng, random_aqecm, random_channel, random_qecmr
from qtamper.schemes import (
    averaged_ciphertext,
    dbar_circuit,
    encrypt_then,
    encryption_gap,
    revocation_profile,
    revoked_state,
    tamper_profile,
)

seeds = st.integers(0, 2**32 - 1)
OTP = cons.baseline_scheme("otp_accept")
ID = cons.baseline_scheme("id_accept")


def s_plus(n=2):
    return cons.otp_with_te_key(cons.conj_parity_pad(n))


@pytest.mark.parametrize("n", [2, 3])
def test_bitflip_flips_the_padded_share(n):
    s = s_plus(n)
    flip = atk.bitflip(s.cipher_shape)
    for k, _ in s.keys.support():
        for b in s.messages:
            st_ = encrypt_then(s, k, b, flip)
            assert abs(dbar_circuit(s, k).select([0], [1 - b]).run(st_).trace() - 1) < 1e-10


def test_double_split_halves():
    d = cons.double_of(cons.conj_parity_pad(2))
    split = atk.double_split(d.cipher_shape)
    assert split.out_shape.dims == d.cipher_shape.dims * 2
    nc = d.n_cipher
    key = d.keys.keys[17]
    for m in d.messages:
        st_ = encrypt_then(d, key, m, split)
        for h in (0, 1):
            post = Circuit(split.out_shape).on(d.dec(key), range(h * nc, (h + 1) * nc), 0)
            post = post.trace([1]).trace(range(1, 1 + nc)).select([0], [d.msg_index(m)])
            assert abs(post.run(st_).trace() - 1) < 1e-10
    with pytest.raises(ValueError):
        atk.double_split(SpaceShape.of(("A", 2), ("B", 2)))


def test_share_split_halves():
    star = cons.star_of(OTP, cons.baseline_scheme("qotp_accept"))
    split = atk.share_split(star.cipher_shape, OTP.n_cipher)
    assert split.out_shape.dims == star.cipher_shape.dims * 2
    with pytest.raises(ValueError):
        atk.share_split(star.cipher_shape, 0)


def test_counterfeit_adapter():
    note = OTP.cipher_shape
    passthrough = atk.double_split(cons.double_of(OTP).cipher_shape)
    assert atk.qm_counterfeit_adapter(passthrough, passthrough.in_shape) is passthrough
    junked = atk.qm_counterfeit_adapter(atk.random_isometry(note, 3, 0), note)
    assert junked.out_shape.dims == note.dims * 2
    with pytest.raises(ValueError):
        atk.qm_counterfeit_adapter(identity_channel(3), note)


def test_full_measure_copies_outcomes():
    shape = SpaceShape.of(("C", 3))
    c = atk.full_measure(shape)
    rho = np.diag([0.2, 0.3, 0.5]).astype(complex)
    out = c.apply(rho)
    assert c.out_shape.labels == ("C", "A0")
    assert_close(np.diag(out).real, [0.2, 0, 0, 0, 0.3, 0, 0, 0, 0.5], 1e-15)


def test_identity_attack_profile_matches_no_attack():
    s = cons.conj_parity_pad(2)
    a = tamper_profile(s, atk.builtin_attack("identity", s.cipher_shape), 0, 1)
    assert np.all(np.abs(a.distances) < 1e-12)


def test_distinguisher_vs_otp_is_useless():
    a = atk.cgm_distinguisher_attack(OTP, 0, 1)
    assert tamper_profile(OTP, a, 0, 1).max_distance() < 1e-12
    with pytest.raises(ValueError):
        atk.cgm_distinguisher_attack(OTP, 0, 0)


def test_distinguisher_guess_success_matches_encryption_gap():
    s = s_plus(2)
    a = atk.cgm_distinguisher_attack(s, 0, 1)
    success = 0.0
    for b in (0, 1):
        for k, p in s.keys.support():
            out = Circuit(a.out_shape).trace(range(s.n_cipher)).run(encrypt_then(s, k, b, a)).to_dense()
            success += 0.5 * p * out[b, b].real
    assert abs(success - 0.5 * (1 + encryption_gap(s).value)) < 1e-9


def test_helstrom_channel_optimal(rng):
    s = cons.conj_parity_pad(2)
    r0, r1 = averaged_ciphertext(s, 0), averaged_ciphertext(s, 1)
    h = atk.helstrom_channel(r0, r1, s.cipher_shape)
    success = 0.5 * (h.apply(r0)[0, 0] + h.apply(r1)[1, 1]).real
    assert abs(success - 0.5 * (1 + trace_distance(r0, r1))) < 1e-12


def test_lifted_identity_attack_flag_marginal(rng):
    s1, s2 = random_aqecm(rng), random_aqecm(rng)
    par = cons.parallel_compose(s1, s2)
    lifted = atk.lift_hybrid_attack(identity_channel(par.cipher_shape), s2, 1, 0)
    k1 = 0
    st_ = encrypt_then(s1, k1, 1, lifted)
    flag = Circuit(lifted.out_shape).trace(range(s1.n_cipher)).run(st_).to_dense()
    honest = 1 - correctness_gap_flag(s2, 1, 0)
    assert abs(flag[1, 1].real - honest) < 1e-12


def correctness_gap_flag(s, k, m):
    st_ = encrypt_then(s, k, m)
    return s.dec(k).as_circuit().trace(range(s.n_msg)).run(st_).to_dense()[0, 0].real


def test_random_isometry_is_isometric():
    v = atk.random_isometry(SpaceShape.of(("C", 3)), 2, 5)
    assert_close(v.kraus[0].conj().T @ v.kraus[0], np.eye(3), 1e-12)


def test_gallery_and_best_delta():
    gallery = atk.attack_gallery(ID, n_random=2, seed=0)
    names = [n for n, _ in gallery]
    assert names[0] == "identity" and "cgm[0,1]" in names
    delta, name = atk.best_attack_delta(ID, gallery)
    assert abs(delta - 1) < 1e-9
    # measuring a basis-state ciphertext is already a perfect leak
    assert name in ("measure[0]", "cgm[0,1]")


# ---------------------------------------------------------------- revocation


def test_rev_and_tamper_translation():
    rev = cons.rev_of(OTP)
    ident = identity_channel(OTP.cipher_shape)
    assert atk.rev_from_tamper(ident) is ident
    a = atk.tamper_from_rev(atk.full_measure(OTP.cipher_shape), rev)
    assert a.out_shape.dims == (2, 2)


def _honest_return(s, mem=SpaceShape.of(("A", 2))):
    return Circuit(s.cipher_shape + mem).trace([s.n_cipher]).on(s.rev, range(s.n_cipher), 0)


def test_honest_return_game_is_worthless():
    s = cons.rev_of(cons.conj_parity_pad(2))
    a0, a1, a2, a2f = atk.game_from_rev(identity_channel(s.cipher_shape), s, 0, 1)
    assert atk.game_value(atk.RevocationGame(a0, a1, a2), s) < 1e-12
    assert atk.game_value(atk.RevocationGame(a0, a1, a2f), s) < 1e-12
    with pytest.raises(ValueError):
        atk.game_from_rev(identity_channel(s.cipher_shape), s, 0, 0)


def test_same_message_game_is_zero(rng):
    s = random_qecmr(rng)
    a = random_channel(rng, s.cipher_shape, s.token_shape + SpaceShape.of(("A", 2)))
    assert np.all(revocation_profile(s, a, 1, 1).distances == 0)


def test_deterministic_prep_gives_single_attack(rng):
    s = random_qecmr(rng)
    a0, a1, a2, _ = atk.game_from_rev(random_channel(rng, s.cipher_shape, s.token_shape), s, 0, 1)
    pieces = atk.rev_from_game(atk.RevocationGame(a0, a1, a2), s)
    assert list(pieces) == [(0, 1)]
    assert abs(pieces[(0, 1)][0] - 1) < 1e-12
    # the extracted attack reproduces the original revocation statistics
    a = random_channel(rng, s.cipher_shape, s.token_shape + SpaceShape.of(("A", 2)))
    a0, a1, a2, _ = atk.game_from_rev(a, s, 0, 1)
    (_, attack), = atk.rev_from_game(atk.RevocationGame(a0, a1, a2), s).values()
    diff = s.message_state(0) - s.message_state(1)
    for k in s.keys.keys:
        assert_close(revoked_state(s, k, attack, diff), revoked_state(s, k, a, diff), 1e-12)


@given(seeds)
def test_flip_pair_identity(seed):
    rng = make_rng(seed)
    s = random_qecmr(rng)
    a = random_channel(rng, s.cipher_shape, s.token_shape + SpaceShape.of(("A", 2)))
    a0, a1, a2, a2f = atk.game_from_rev(a, s, 0, 1)
    total = atk.game_value(atk.RevocationGame(a0, a1, a2), s) + atk.game_value(atk.RevocationGame(a0, a1, a2f), s)
    want = 2 * revocation_profile(s, a, 0, 1).expectation()
    assert abs(total - want) < 1e-9


@given(seeds)
def test_tamper_chain(seed):
    rng = make_rng(seed)
    s = random_qecmr(rng)
    te = cons.te_of(s)
    a = atk.random_isometry(te.cipher_shape, 2, rng)
    lhs = tamper_profile(te, a, 0, 1).distances
    rhs = revocation_profile(s, atk.tamper_from_rev(a, s), 0, 1).distances
    assert_close(lhs, rhs, 1e-9)


def test_all_gallery_attacks_are_valid_shapes():
    s = s_plus(2)
    for name, a in atk.attack_gallery(s, 2, 0):
        assert a.in_shape.dims == s.cipher_shape.dims, name
        assert a.out_shape.dims[:s.n_cipher] == s.cipher_shape.dims, name
    for a, b in itertools.combinations(s.messages, 2):
        assert tamper_profile(s, atk.bitflip(s.cipher_shape), a, b).max_distance() < 1e-12
