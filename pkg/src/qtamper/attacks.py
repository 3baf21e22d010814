"""Tamper, forgery and revocation attacks, plus translations between the games."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .channels import (
    ChannelKind,
    KrausChannel,
    Povm,
    cgm_of_channel,
    identity_channel,
    structured_channel,
)
from .circuits import Circuit, current_dim_cap, group_permutation, prepared
from .qmath import Factor, SpaceShape, basis_projector, helstrom_pair, labeled_blocks
from .schemes import (
    AqecmScheme,
    QecmrScheme,
    averaged_ciphertext,
    revoked_state,
)


class AttackKind(Enum):
    BITFLIP = "bitflip"
    DOUBLE_SPLIT = "double_split"
    SHARE_SPLIT = "share_split"
    FULL_MEASURE = "full_measure"
    RANDOM_ISOMETRY = "random_isometry"
    IDENTITY = "identity"


def _shift_matrix(d: int) -> np.ndarray:
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def _mixed(shape: SpaceShape) -> np.ndarray:
    return np.eye(shape.dim, dtype=complex) / shape.dim


def bitflip(shape: SpaceShape, target: int = -1) -> KrausChannel:
    """Add one (mod d) to the basis label of a single factor, the last by default."""
    n = len(shape)
    t = target % n
    d = shape[t].dim
    dims = shape.dims
    u = np.eye(1, dtype=complex)
    for i in range(n):
        u = np.kron(u, _shift_matrix(d) if i == t else np.eye(dims[i]))
    return KrausChannel(u, shape, shape)


def double_split(shape: SpaceShape) -> Circuit:
    """Split a selector-plus-two-copies ciphertext into two full ciphertexts.

    Output: ``(|0>, C_a, I/d) (x) (|1>, I/d, C_b)``.
    """
    if len(shape) % 2 == 0:
        raise ValueError("expected a selector qubit followed by two equal ciphertext blocks")
    nc = (len(shape) - 1) // 2
    ca, cb = shape[1:1 + nc], shape[1 + nc:]
    if ca.dims != cb.dims or shape[0].dim != 2:
        raise ValueError("expected a selector qubit followed by two equal ciphertext blocks")
    sel = SpaceShape.of(("S", 2))
    c = Circuit(shape).trace([0])
    c = c.prepare(_mixed(ca), ca, 0).prepare(_mixed(ca), ca, 0)
    c = c.prepare(basis_projector(2, 1), sel, 0).prepare(basis_projector(2, 0), sel, 0)
    perm = group_permutation([1, 1, nc, nc, nc, nc], (0, 3, 2, 4, 1, 5))
    return c.permute(perm)


def share_split(shape: SpaceShape, split: int) -> Circuit:
    """Split a two-share ciphertext ``C1 (x) C2`` into ``(C1, I/d2) (x) (I/d1, C2)``."""
    c1, c2 = shape[:split], shape[split:]
    if not len(c1) or not len(c2):
        raise ValueError("split point must leave both shares nonempty")
    c = Circuit(shape).prepare(_mixed(c2), c2).prepare(_mixed(c1), c1)
    perm = group_permutation([len(c1), len(c2), len(c2), len(c1)], (0, 3, 1, 2))
    return c.permute(perm)


def full_measure(shape: SpaceShape, factors: Sequence[int] | None = None) -> Circuit:
    """Measure the listed factors in the computational basis, copying outcomes into ``A``."""
    factors = list(range(len(shape))) if factors is None else list(factors)
    tags = [("C", i) for i in range(len(shape))]
    c = Circuit(shape)
    for t in factors:
        d = shape[t].dim
        copy = np.zeros((d, d * d, d), dtype=complex)
        for j in range(d):
            copy[j, j * d + j, j] = 1.0
        pos = tags.index(("C", t))
        out = SpaceShape((Factor(shape[t].label, d, True), Factor(f"A{t}", d, True)))
        c = c.local(copy, [pos], out, pos)
        tags[pos + 1:pos + 1] = [("A", t)]
    want = [("C", i) for i in range(len(shape))] + [("A", t) for t in factors]
    return c.permute([want.index(tag) for tag in tags])


def random_isometry(shape: SpaceShape, a_dim: int, seed) -> KrausChannel:
    """Isometry ``C -> C (x) A`` from the QR factor of a complex Gaussian matrix."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d = shape.dim
    g = rng.normal(size=(d * a_dim, d)) + 1j * rng.normal(size=(d * a_dim, d))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return KrausChannel(q, shape, shape + SpaceShape.of(("A", a_dim)))


def builtin_attack(kind: AttackKind | str, shape: SpaceShape, **params):
    """Named attack on ciphertext space ``shape``.

    BITFLIP(target=-1), DOUBLE_SPLIT, SHARE_SPLIT(split), FULL_MEASURE(factors=None),
    RANDOM_ISOMETRY(a_dim, seed), IDENTITY.
    """
    kind = AttackKind(kind.lower()) if isinstance(kind, str) else kind
    if kind is AttackKind.IDENTITY:
        return identity_channel(shape)
    if kind is AttackKind.BITFLIP:
        return bitflip(shape, params.get("target", -1))
    if kind is AttackKind.DOUBLE_SPLIT:
        return double_split(shape)
    if kind is AttackKind.SHARE_SPLIT:
        return share_split(shape, params.get("split", len(shape) // 2))
    if kind is AttackKind.FULL_MEASURE:
        return full_measure(shape, params.get("factors"))
    if kind is AttackKind.RANDOM_ISOMETRY:
        return random_isometry(shape, params.get("a_dim", 2), params.get("seed", 0))
    raise ValueError(f"unknown attack {kind}")


def helstrom_channel(rho0: np.ndarray, rho1: np.ndarray, shape: SpaceShape) -> KrausChannel:
    """Two-outcome measurement guessing 0 on the nonnegative part of ``rho0 - rho1``."""
    hp = helstrom_pair(rho0, rho1)
    return structured_channel(ChannelKind.MEASURE, povm=Povm((0, 1), (hp.positive, hp.negative)),
                              shape=shape, out_shape=SpaceShape.of(("G", 2, True)))


def cgm_distinguisher_attack(s: AqecmScheme, m0, m1) -> KrausChannel:
    """Gentle coherent version of the optimal key-averaged distinguisher; keeps the guess in ``A``."""
    if m0 == m1:
        raise ValueError("messages must differ")
    phi = helstrom_channel(averaged_ciphertext(s, m0), averaged_ciphertext(s, m1), s.cipher_shape)
    return cgm_of_channel(phi)


def lift_hybrid_attack(a, s2: AqecmScheme, k2, m2) -> Circuit:
    """Attack on the first component of a parallel pair, simulating the second.

    Prepares ``E''_k2(m2)``, runs ``a`` on both ciphertexts, decodes the
    second with ``D''_k2`` and keeps its flag: ``C' -> C' (x) F (x) A``.
    """
    n2 = s2.n_cipher
    n1 = len(a.in_shape) - n2
    if a.in_shape.dims[n1:] != s2.cipher_shape.dims:
        raise ValueError("attack input must end with the second scheme's ciphertext")
    c1 = a.in_shape[:n1]
    note = prepared(s2.message_state(m2), s2.msg_shape).then(s2.enc(k2))
    c = Circuit(c1).on(note, [], n1).then(a)
    c = c.on(s2.dec(k2), range(n1, n1 + n2), n1)
    return c.trace(range(n1, n1 + s2.n_msg))


def rev_from_tamper(a):
    """A tamper attack on ``S`` is a revocation attack on ``rev_of(S)`` as is."""
    return a


def tamper_from_rev(a, s: QecmrScheme) -> Circuit:
    """Follow an attack ``C -> C (x) A`` with the revocation map: ``(R (x) Id_A) o a``."""
    nc = s.n_cipher
    if a.in_shape.dims != s.cipher_shape.dims or a.out_shape.dims[:nc] != s.cipher_shape.dims:
        raise ValueError("attack must map the ciphertext space to ciphertext (x) A")
    return a.as_circuit().on(s.rev, range(nc), 0)


# ------------------------------------------------------------ revocation game


@dataclass(frozen=True, eq=False)
class RevocationGame:
    """Three-stage revocation adversary.

    ``prep`` outputs ``M (x) M (x) A``; ``mid`` maps ``C (x) A -> R (x) B``;
    ``guess`` maps ``K (x) B`` to a classical bit, where ``K`` indexes the
    positive-probability keys in order.
    """

    prep: object
    mid: object
    guess: object


def _key_index_shape(s) -> SpaceShape:
    return SpaceShape((Factor("K", len(s.keys.support()), True),))


def _stage_encrypt(s: QecmrScheme, key, b: int, mem: SpaceShape) -> Circuit:
    """``M (x) M (x) A -> C (x) A``: keep message ``b``, drop the other, encrypt."""
    nm = s.n_msg
    c = Circuit(s.msg_shape + s.msg_shape + mem)
    deph = structured_channel(ChannelKind.DEPHASE, shape=s.msg_shape)
    c = c.on(deph, range(nm), 0).on(deph, range(nm, 2 * nm), nm)
    c = c.trace(range(nm, 2 * nm) if b == 0 else range(nm))
    return c.on(s.enc(key), range(nm), 0)


def game_value(g: RevocationGame, s: QecmrScheme) -> float:
    """``| E_k <1| guess_k (Vbar_k (x) Id) mid ((E^0_k - E^1_k) (x) Id) prep |1> |``."""
    mem = g.prep.out_shape[2 * s.n_msg:]
    nr = len(s.token_shape)
    kshape = _key_index_shape(s)
    total = 0.0
    for idx, (k, p) in enumerate(s.keys.support()):
        kstate = basis_projector(kshape.dim, idx)
        tail = Circuit(g.mid.out_shape).on(s.ver(k), range(nr), 0).select([0], [1])
        tail = tail.prepare(kstate, kshape, 0).then(g.guess).select([0], [1])
        val = 0.0
        for b, sign in ((0, 1.0), (1, -1.0)):
            c = g.prep.as_circuit().then(_stage_encrypt(s, k, b, mem)).then(g.mid).then(tail)
            val += sign * float(np.real(c.apply(np.ones((1, 1)))[0, 0]))
        total += p * val
    return abs(total)


def game_from_rev(a, s: QecmrScheme, m, m2, mem_dim: int = 2) -> tuple:
    """Game adversaries ``(A0, A1, A2, A2_flip)`` built from a revocation attack ``a``.

    ``A0`` prepares ``m (x) m2`` with a maximally mixed dummy memory, ``A1``
    discards the memory and runs ``a``, and ``A2`` is the Helstrom
    measurement of the key-labeled conditioned operators.
    """
    if m == m2:
        raise ValueError("messages must differ")
    mem = SpaceShape.of(("A", mem_dim))
    start = np.kron(np.kron(s.message_state(m), s.message_state(m2)), np.eye(mem_dim) / mem_dim)
    a0 = prepared(start, s.msg_shape + s.msg_shape + mem)
    nc = s.n_cipher
    a1 = Circuit(s.cipher_shape + mem).trace([nc]).then(a)
    diff = s.message_state(m) - s.message_state(m2)
    blocks = [revoked_state(s, k, a, diff) for k, _ in s.keys.support()]
    probs = [p for _, p in s.keys.support()]
    x = labeled_blocks([p * y for p, y in zip(probs, blocks)])
    hp = helstrom_pair(x, np.zeros_like(x))
    in_shape = _key_index_shape(s) + a.out_shape[len(s.token_shape):]
    out = SpaceShape.of(("G", 2, True))
    a2 = structured_channel(ChannelKind.MEASURE, povm=Povm((0, 1), (hp.negative, hp.positive)),
                            shape=in_shape, out_shape=out)
    a2_flip = structured_channel(ChannelKind.MEASURE, povm=Povm((0, 1), (hp.positive, hp.negative)),
                                 shape=in_shape, out_shape=out)
    return a0, a1, a2, a2_flip


def rev_from_game(g: RevocationGame, s: QecmrScheme) -> dict:
    """Per message pair ``(m, m2)``: probability and the attack ``rho -> mid(rho (x) sigma)``.

    ``sigma`` is the memory left by ``prep`` conditioned on measuring the
    message pair.
    """
    nm = s.n_msg
    mem = g.prep.out_shape[2 * nm:]
    rho = g.prep.as_circuit().apply(np.ones((1, 1)))
    dm = s.msg_shape.dim
    da = mem.dim
    t = rho.reshape(dm, dm, da, dm, dm, da)
    out = {}
    for i, j in itertools.product(range(dm), repeat=2):
        block = t[i, j, :, i, j, :]
        p = float(np.real(np.trace(block)))
        if p <= 1e-15:
            continue
        sigma = block / p
        attack = Circuit(s.cipher_shape).prepare(sigma, mem).then(g.mid)
        out[(s.messages[i], s.messages[j])] = (p, attack)
    return out


# ------------------------------------------------------------ money adapter


def qm_counterfeit_adapter(a, note_shape: SpaceShape):
    """Reshape an attack ``N -> N (x) X`` into a forgery ``N -> N (x) N``.

    Outputs that already consist of two banknotes pass through.  Otherwise
    the output must start with a banknote; the rest is discarded and
    replaced by maximally mixed junk.
    """
    nd = note_shape.dims
    od = a.out_shape.dims
    if a.in_shape.dims != nd:
        raise ValueError("attack input is not the banknote space")
    if od == nd + nd:
        return a
    if od[:len(nd)] != nd:
        raise ValueError(f"cannot split output dims {od} into banknotes {nd}")
    n = len(nd)
    c = a.as_circuit().trace(range(n, len(od)))
    return c.prepare(_mixed(note_shape), note_shape)


# ------------------------------------------------------------ gallery


def attack_gallery(s: AqecmScheme, n_random: int = 2, seed=0, max_a_dim: int = 4) -> list[tuple[str, object]]:
    """Fixed attacks plus seeded random isometries, each ``C -> C (x) A`` with ``dim A <= max_a_dim``."""
    shape = s.cipher_shape
    out: list[tuple[str, object]] = [("identity", identity_channel(shape))]
    if shape[len(shape) - 1].dim == 2:
        out.append(("bitflip", bitflip(shape)))
    for t in range(len(shape)):
        if shape[t].dim <= max_a_dim:
            out.append((f"measure[{t}]", full_measure(shape, [t])))
    for m0, m1 in itertools.combinations(s.messages, 2):
        out.append((f"cgm[{m0},{m1}]", cgm_distinguisher_attack(s, m0, m1)))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cap = current_dim_cap()
    for i in range(n_random):
        a_dim = 2 + i % (max_a_dim - 1)
        if shape.dim * a_dim <= cap:
            out.append((f"random[{i}]", random_isometry(shape, a_dim, rng)))
    return out


def best_attack_delta(s: AqecmScheme, gallery: Sequence[tuple[str, object]]) -> tuple[float, str]:
    """Largest ``min_delta`` over the gallery and message pairs (a lower bound on the true delta)."""
    from .schemes import tamper_profile

    best, name = 0.0, "none"
    for label, a in gallery:
        for m0, m1 in itertools.combinations(s.messages, 2):
            d = tamper_profile(s, a, m0, m1).min_delta()
            if d > best:
                best, name = d, label
    return best, name
