"""Scheme-to-scheme constructions and baseline schemes."""

from __future__ import annotations

import itertools
from enum import Enum
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from .channels import (
    FLAG,
    KrausChannel,
    and_flags,
    cgm_of_channel,
    classical_channel,
    compose_channels,
    identity_channel,
    or_flags,
)
from .circuits import Circuit
from .qmath import Factor, SpaceShape, basis_projector, ket
from .schemes import (
    AqecmScheme,
    GroupTable,
    KeyDist,
    QecmrScheme,
    QecmScheme,
    QmScheme,
    _decode_success,
)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
G_TOL = 1e-12


class BaselineKind(Enum):
    TRIV_REJECT = "triv_reject"
    ID_ACCEPT = "id_accept"
    OTP_ACCEPT = "otp_accept"
    QOTP_ACCEPT = "qotp_accept"
    CONJ_PARITY_PAD = "conj_parity_pad"


def message_shape(messages: Sequence, label: str = "M") -> SpaceShape:
    return SpaceShape((Factor(label, len(messages), True),))


def _with_flag(kraus_m: np.ndarray, flag: int) -> np.ndarray:
    """Kraus ops ``K -> K (x) |flag>`` (flag factor appended)."""
    f = ket(2, flag)[:, None]
    return np.stack([np.kron(k, f) for k in kraus_m])


def _shift(n: int, g: GroupTable, p: int) -> np.ndarray:
    u = np.zeros((n, n), dtype=complex)
    for m in range(n):
        u[g.mul_index(p, m), m] = 1.0
    return u


def _parity(bits) -> int:
    return sum(bits) % 2


def _conj_state(theta, d) -> np.ndarray:
    v = np.ones(1, dtype=complex)
    for t, b in zip(theta, d):
        e = ket(2, b)
        v = np.kron(v, HADAMARD @ e if t else e)
    return v


def conj_parity_pad(n: int) -> AqecmScheme:
    """Conjugate-coded pad: ``(x)_i H^theta_i |d_i>`` plus ``m xor parity(d)`` in the clear.

    Decoding measures each qubit in basis ``theta_i``, accepts iff the
    outcomes equal ``d`` and outputs the clear bit xor the outcome parity.
    Perfectly correct by construction.
    """
    if n < 1:
        raise ValueError("need at least one conjugate-coded qubit")
    messages = (0, 1)
    msg = message_shape(messages)
    cipher = SpaceShape.qubits(n) + SpaceShape.of(("P", 2, True))
    bits = list(itertools.product((0, 1), repeat=n))
    keys = KeyDist.uniform((theta, d) for theta in bits for d in bits)
    dq = 2 ** n

    def enc(key):
        theta, d = key
        psi = _conj_state(theta, d)
        ops = np.zeros((2, 2 * dq, 2), dtype=complex)
        for j in (0, 1):
            ops[j, :, j] = np.kron(psi, ket(2, j ^ _parity(d)))
        return KrausChannel(ops, msg, cipher)

    def dec(key):
        theta, d = key
        ops = np.zeros((2 * dq, 4, 2 * dq), dtype=complex)
        i = 0
        for o in bits:
            bra = _conj_state(theta, o).conj()
            for c in (0, 1):
                out = 2 * (c ^ _parity(o)) + int(o == d)
                ops[i, out, :] = np.kron(bra, ket(2, c))
                i += 1
        return KrausChannel(ops, cipher, msg + FLAG)

    return AqecmScheme(f"conj_parity_pad(n={n})", keys, messages, msg, cipher, enc, dec)


def baseline_scheme(kind: BaselineKind | str, messages: Sequence = (0, 1), n: int = 2) -> AqecmScheme:
    """Reference schemes: always-reject, identity, one-time pads and the conjugate-coded pad."""
    kind = BaselineKind(kind.lower()) if isinstance(kind, str) else kind
    if kind is BaselineKind.CONJ_PARITY_PAD:
        return conj_parity_pad(n)
    messages = tuple(messages)
    if kind is BaselineKind.QOTP_ACCEPT and len(messages) != 2:
        raise ValueError("the quantum one-time pad baseline needs two messages")
    if len(messages) < 2:
        raise ValueError("need at least two messages")
    d = len(messages)
    msg = message_shape(messages)
    cipher = SpaceShape.of(("C", d))
    eye = np.eye(d, dtype=complex)[None]
    if kind in (BaselineKind.TRIV_REJECT, BaselineKind.ID_ACCEPT):
        flag = 0 if kind is BaselineKind.TRIV_REJECT else 1
        e = KrausChannel(eye, msg, cipher)
        dch = KrausChannel(_with_flag(eye, flag), cipher, msg + FLAG)
        return AqecmScheme(kind.value, KeyDist.uniform([()]), messages, msg, cipher,
                           lambda k: e, lambda k: dch)
    if kind is BaselineKind.OTP_ACCEPT:
        g = GroupTable.cyclic(range(d))

        def enc(p):
            return KrausChannel(_shift(d, g, p), msg, cipher)

        def dec(p):
            u = _shift(d, g, g.inv_index(p))
            return KrausChannel(_with_flag(u[None], 1), cipher, msg + FLAG)

        return AqecmScheme(kind.value, KeyDist.uniform(range(d)), messages, msg, cipher, enc, dec)
    if kind is BaselineKind.QOTP_ACCEPT:
        def pauli(key):
            a, b = key
            return np.linalg.matrix_power(PAULI_X, a) @ np.linalg.matrix_power(PAULI_Z, b)

        keys = KeyDist.uniform(itertools.product((0, 1), repeat=2))
        return AqecmScheme(kind.value, keys, messages, msg, cipher,
                           lambda k: KrausChannel(pauli(k), msg, cipher),
                           lambda k: KrausChannel(_with_flag(pauli(k).conj().T[None], 1),
                                                  cipher, msg + FLAG))
    raise ValueError(f"unknown baseline {kind}")


# ------------------------------------------------------------ composition


def _flag_sort(n1: int, n2: int) -> list[int]:
    """Permutation ``M1 F1 M2 F2 -> M1 M2 F1 F2`` with ``M1``/``M2`` of ``n1``/``n2`` factors."""
    perm = list(range(n1))
    perm.append(n1 + n2)
    perm.extend(n1 + j for j in range(n2))
    perm.append(n1 + n2 + 1)
    return perm


def _pair_decoder(s1: AqecmScheme, s2: AqecmScheme, k1, k2, combine: KrausChannel) -> Circuit:
    """``D1 (x) D2`` followed by sorting to ``M1 M2 F1 F2`` and merging the flags."""
    circ = s1.dec(k1).as_circuit().tensor(s2.dec(k2))
    n1, n2 = s1.n_msg, s2.n_msg
    circ = circ.permute(_flag_sort(n1, n2))
    return circ.on(combine, [n1 + n2, n1 + n2 + 1])


def parallel_compose(s1: AqecmScheme, s2: AqecmScheme) -> AqecmScheme:
    """Independent keys, tensor-product encryption, decoder accepts iff both accept."""
    keys = s1.keys.product(s2.keys)
    messages = tuple(itertools.product(s1.messages, s2.messages))
    msg = s1.msg_shape + s2.msg_shape
    cipher = s1.cipher_shape + s2.cipher_shape
    land = and_flags()

    def enc(key):
        return s1.enc(key[0]).as_circuit().tensor(s2.enc(key[1]))

    def dec(key):
        return _pair_decoder(s1, s2, key[0], key[1], land)

    return AqecmScheme(f"({s1.name} || {s2.name})", keys, messages, msg, cipher, enc, dec)


def nfold(s: AqecmScheme, n: int) -> AqecmScheme:
    if n < 1:
        raise ValueError("n must be at least 1")
    return reduce(lambda acc, _: parallel_compose(acc, s), range(n - 1), s)


def _copy_channel(shape: SpaceShape) -> KrausChannel:
    return classical_channel(shape, shape + shape, lambda *x: x + x)


def double_of(s: AqecmScheme) -> AqecmScheme:
    """Copy the message into two independently keyed encryptions plus a selector qubit.

    The selector is prepared in ``|0>``; decoding runs both decoders,
    keeps the AND of their flags and outputs the copy chosen by the
    measured selector.
    """
    keys = s.keys.product(s.keys)
    nm = s.n_msg
    sel = SpaceShape.of(("S", 2))
    cipher = sel + s.cipher_shape + s.cipher_shape
    copy = _copy_channel(s.msg_shape)
    land = and_flags()
    pick_in = SpaceShape.of(("S", 2)) + s.msg_shape + s.msg_shape
    pick = classical_channel(pick_in, s.msg_shape,
                             lambda sv, *ab: tuple(ab[:nm]) if sv == 0 else tuple(ab[nm:]))
    zero = basis_projector(2, 0)
    nc = s.n_cipher

    def enc(key):
        k0, k1 = key
        c = Circuit(s.msg_shape).on(copy, range(nm))
        c = c.on(s.enc(k0), range(nm), 0)
        c = c.on(s.enc(k1), range(nc, nc + nm), nc)
        return c.prepare(zero, sel, 0)

    def dec(key):
        k0, k1 = key
        inner = _pair_decoder(s, s, k0, k1, land)
        c = Circuit(cipher).on(inner, range(1, 1 + 2 * nc), 1)
        return c.on(pick, range(1 + 2 * nm), 0)

    return AqecmScheme(f"double({s.name})", keys, s.messages, s.msg_shape, cipher, enc, dec)


def _group_unitary(g: GroupTable, inverse: bool = False) -> np.ndarray:
    """``|a, b> -> |a, a * b>`` (or ``|a, a^-1 * b>``)."""
    n = g.order
    u = np.zeros((n * n, n * n), dtype=complex)
    for a in range(n):
        left = g.inv_index(a) if inverse else a
        for b in range(n):
            u[a * n + g.mul_index(left, b), a * n + b] = 1.0
    return u


def star_of(s1: AqecmScheme, s2: AqecmScheme, g: GroupTable | None = None) -> AqecmScheme:
    """Two-out-of-two group secret sharing of the message across two schemes.

    Encryption draws a uniform pad ``p`` and outputs
    ``E_k(p) (x) E'_k'(p * m)``; decoding runs both decoders, undoes the
    sharing coherently, keeps the second share's message register and
    accepts iff either decoder accepts.
    """
    if s1.messages != s2.messages:
        raise ValueError("both schemes must share one message alphabet")
    if s1.n_msg != 1 or s2.n_msg != 1:
        raise ValueError("secret sharing needs a single-factor message register")
    g = g or GroupTable.cyclic(s1.messages)
    d = len(s1.messages)
    if g.order != d:
        raise ValueError("group order does not match the message alphabet")
    keys = s1.keys.product(s2.keys)
    msg = s1.msg_shape
    cipher = s1.cipher_shape + s2.cipher_shape
    pair = msg + msg
    share = KrausChannel(_group_unitary(g), pair, pair)
    unshare = KrausChannel(_group_unitary(g, inverse=True), pair, pair)
    lor = or_flags()
    pad = np.eye(d, dtype=complex) / d
    pad_shape = SpaceShape((Factor("Pad", d, True),))
    n1 = s1.n_cipher

    def enc(key):
        k, k2 = key
        c = Circuit(msg).prepare(pad, pad_shape, 0).on(share, [0, 1])
        c = c.on(s1.enc(k), [0], 0)
        return c.on(s2.enc(k2), [n1], n1)

    def dec(key):
        k, k2 = key
        c = s1.dec(k).as_circuit().tensor(s2.dec(k2)).permute(_flag_sort(1, 1))
        c = c.on(unshare, [0, 1]).trace([0])
        return c.on(lor, [1, 2])

    return AqecmScheme(f"star({s1.name}, {s2.name})", keys, s1.messages, msg, cipher, enc, dec)


def otp_with_te_key(s: AqecmScheme) -> AqecmScheme:
    """``S * Triv``: the one-time pad whose key is sent under ``s``."""
    triv = baseline_scheme(BaselineKind.TRIV_REJECT, s.messages)
    return star_of(s, triv)


# ---------------------------------------------------------- transformers


def extend_messages(s: AqecmScheme, new_messages: Sequence, inj: Mapping, retr: Mapping) -> AqecmScheme:
    """Embed ``s`` in a larger message alphabet via ``inj`` / ``retr`` classical maps.

    ``inj`` maps the new alphabet into the old one and ``retr`` maps old
    messages back; ``retr o inj`` must be the identity on the new alphabet.
    """
    new_messages = tuple(new_messages)
    for m in new_messages:
        if retr.get(inj.get(m)) != m:
            raise ValueError(f"retraction fails on {m!r}")
    if set(retr) != set(s.messages):
        raise ValueError("retraction must be total on the original alphabet")
    new_shape = message_shape(new_messages)
    old = s.msg_shape

    def to_old(i):
        return tuple(int(x) for x in np.unravel_index(s.msg_index(inj[new_messages[i]]), old.dims))

    def to_new(*digits):
        return (new_messages.index(retr[s.messages[int(np.ravel_multi_index(digits, old.dims))]]),)

    inj_ch = classical_channel(new_shape, old, to_old)
    retr_ch = classical_channel(old, new_shape, to_new)
    nm = s.n_msg

    def enc(k):
        return inj_ch.as_circuit().then(s.enc(k))

    def dec(k):
        return s.dec(k).as_circuit().on(retr_ch, range(nm), 0)

    return AqecmScheme(f"extend({s.name})", s.keys, new_messages, new_shape, s.cipher_shape, enc, dec)


def drop_flag(s: AqecmScheme) -> QecmScheme:
    return QecmScheme(f"drop_flag({s.name})", s.keys, s.messages, s.msg_shape, s.cipher_shape,
                      s.enc, lambda k: s.dec(k).as_circuit().trace([s.flag_pos]))


def rev_of(s: AqecmScheme) -> QecmrScheme:
    """Revocation by returning the ciphertext; verification is the decoder's flag."""
    rev = identity_channel(s.cipher_shape)
    return QecmrScheme(
        f"rev({s.name})", s.keys, s.messages, s.msg_shape, s.cipher_shape,
        s.enc,
        lambda k: s.dec(k).as_circuit().trace([s.flag_pos]),
        rev=rev,
        ver=lambda k: s.dec(k).as_circuit().trace(range(s.n_msg)),
    )


def te_of(s: QecmrScheme) -> AqecmScheme:
    """Decode after gently measuring whether the revocation token would verify."""
    def dec(k):
        check = compose_channels(s.ver(k), s.rev).to_kraus()
        gentle = cgm_of_channel(check)
        return gentle.as_circuit().on(s.dec(k), range(s.n_cipher), 0)

    return AqecmScheme(f"te({s.name})", s.keys, s.messages, s.msg_shape, s.cipher_shape, s.enc, dec)


def good_pairs(s: AqecmScheme, gamma: float) -> list[tuple]:
    """Positive-probability key/message pairs decoded and accepted with probability ``>= 1 - gamma``."""
    return [(k, m) for k, _ in s.keys.support() for m in s.messages
            if _decode_success(s, k, m) >= 1 - gamma - G_TOL]


def qm_of(s: AqecmScheme, gamma: float = 0.0, weak: bool = False) -> QmScheme:
    """Money from encryption: banknote ``E_k(m)``, verified by decoding to ``m`` and accepting."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    nm = s.n_msg
    n_msgs = len(s.messages)
    note = s.cipher_shape
    pairs = [] if weak else good_pairs(s, gamma)
    if pairs:
        p_good = sum(s.keys.prob(k) / n_msgs for k, _ in pairs)
        keys = KeyDist(tuple(pairs), tuple(s.keys.prob(k) / (p_good * n_msgs) for k, _ in pairs))
    else:
        keys = s.keys.product(KeyDist.uniform(s.messages))

    def mint(key):
        k, m = key
        return Circuit(SpaceShape()).prepare(s.message_state(m), s.msg_shape).then(s.enc(k))

    def honest_ver(key):
        k, m = key
        target = s.msg_index(m)
        dims = s.msg_shape.dims
        check = classical_channel(
            s.msg_shape + FLAG, FLAG,
            lambda *x: (int(x[-1] == 1 and int(np.ravel_multi_index(x[:-1], dims)) == target),))
        return s.dec(k).as_circuit().on(check, range(nm + 1), 0)

    accept_all = Circuit(note).trace(range(len(note))).prepare(basis_projector(2, 1), FLAG)

    if weak:
        ver, label = honest_ver, "qm_weak"
    elif pairs:
        ver, label = honest_ver, f"qm_{gamma:g}"
    else:
        ver, label = (lambda key: accept_all), f"qm_{gamma:g}"
    return QmScheme(f"{label}({s.name})", keys, note, mint, ver)
