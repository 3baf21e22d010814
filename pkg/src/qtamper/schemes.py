"""Encryption, revocation and money schemes with classical keys, and the
scalar functionals (correctness, encryption gap, tamper distances) that
are computed from them.

Keys are sampled classically, so every scheme stores a :class:`KeyDist`
plus keyed channel families ``key -> channel``.  Channels may be dense
:class:`~qtamper.channels.KrausChannel` objects or
:class:`~qtamper.circuits.Circuit` objects; every evaluator here runs them
as circuits on block states, which keeps composite ciphertext spaces
tractable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .circuits import BlockState, Circuit
from .qmath import SpaceShape, basis_projector, trace_norm

PROB_TOL = 1e-12


@dataclass(frozen=True)
class KeyDist:
    """Finite distribution over hashable keys (zero-probability keys allowed)."""

    keys: tuple
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.keys) != len(self.probs) or not self.keys:
            raise ValueError("need one probability per key and at least one key")
        if len(set(self.keys)) != len(self.keys):
            raise ValueError("duplicate keys")
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0):
            raise ValueError(f"negative key probability {p.min()}")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"key probabilities sum to {p.sum():.15g}, not 1")

    @classmethod
    def uniform(cls, keys: Iterable[Hashable]) -> "KeyDist":
        keys = tuple(keys)
        return cls(keys, (1.0 / len(keys),) * len(keys))

    @classmethod
    def from_mapping(cls, probs: Mapping) -> "KeyDist":
        return cls(tuple(probs), tuple(float(v) for v in probs.values()))

    def product(self, other: "KeyDist") -> "KeyDist":
        keys, probs = [], []
        for (a, p), (b, q) in itertools.product(self.items(), other.items()):
            keys.append((a, b))
            probs.append(p * q)
        return KeyDist(tuple(keys), tuple(probs))

    def items(self):
        return zip(self.keys, self.probs)

    def support(self):
        return [(k, p) for k, p in self.items() if p > 0]

    def prob(self, key) -> float:
        return self.probs[self.keys.index(key)]

    def __len__(self) -> int:
        return len(self.keys)


class Keyed:
    """Memoized keyed channel family."""

    __slots__ = ("fn", "_cache")

    def __init__(self, fn: Callable) -> None:
        self.fn = fn
        self._cache: dict = {}

    def __call__(self, key):
        try:
            return self._cache[key]
        except KeyError:
            ch = self._cache[key] = self.fn(key)
            return ch


def keyed(fn: Callable) -> Keyed:
    return fn if isinstance(fn, Keyed) else Keyed(fn)


@dataclass(frozen=True, eq=False)
class _Base:
    name: str
    keys: KeyDist
    messages: tuple
    msg_shape: SpaceShape
    cipher_shape: SpaceShape
    enc: Keyed
    dec: Keyed

    def __post_init__(self) -> None:
        if self.msg_shape.dim != len(self.messages):
            raise ValueError(f"{self.name}: {len(self.messages)} messages but message space "
                             f"has dimension {self.msg_shape.dim}")
        if len(set(self.messages)) != len(self.messages):
            raise ValueError(f"{self.name}: duplicate messages")
        object.__setattr__(self, "enc", keyed(self.enc))
        object.__setattr__(self, "dec", keyed(self.dec))

    def msg_index(self, m) -> int:
        try:
            return self.messages.index(m)
        except ValueError:
            raise ValueError(f"{m!r} is not a message of {self.name}") from None

    def msg_digits(self, m) -> tuple[int, ...]:
        """Basis index of ``m`` on each message factor."""
        return tuple(int(i) for i in np.unravel_index(self.msg_index(m), self.msg_shape.dims))

    def message_state(self, m) -> np.ndarray:
        return basis_projector(len(self.messages), self.msg_index(m))

    @property
    def n_msg(self) -> int:
        return len(self.msg_shape)

    @property
    def n_cipher(self) -> int:
        return len(self.cipher_shape)

    def check_shapes(self, key) -> None:
        e, d = self.enc(key), self.dec(key)
        if e.in_shape.dims != self.msg_shape.dims or e.out_shape.dims != self.cipher_shape.dims:
            raise ValueError(f"{self.name}: encoder for key {key!r} has the wrong shape")
        if d.in_shape.dims != self.cipher_shape.dims or d.out_shape.dims != self._dec_out_dims:
            raise ValueError(f"{self.name}: decoder for key {key!r} has the wrong shape")

    @property
    def _dec_out_dims(self) -> tuple[int, ...]:
        return self.msg_shape.dims

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name})"


@dataclass(frozen=True, eq=False, repr=False)
class QecmScheme(_Base):
    """Keyed encoder ``M -> C`` and decoder ``C -> M``."""


@dataclass(frozen=True, eq=False, repr=False)
class AqecmScheme(_Base):
    """Keyed encoder ``M -> C`` and decoder ``C -> M (x) F`` with accept flag last."""

    @property
    def _dec_out_dims(self) -> tuple[int, ...]:
        return self.msg_shape.dims + (2,)

    @property
    def flag_pos(self) -> int:
        return self.n_msg


@dataclass(frozen=True, eq=False, repr=False)
class QecmrScheme(_Base):
    """QECM plus an unkeyed revocation map ``C -> R`` and keyed verifier ``R -> F``."""

    rev: object = None
    ver: Keyed = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.rev is None or self.ver is None:
            raise ValueError("a revocation scheme needs both rev and ver")
        if self.rev.in_shape.dims != self.cipher_shape.dims:
            raise ValueError("revocation map must act on the ciphertext space")
        object.__setattr__(self, "ver", keyed(self.ver))

    @property
    def token_shape(self) -> SpaceShape:
        return self.rev.out_shape


@dataclass(frozen=True, eq=False)
class QmScheme:
    """Private-key money: keyed banknote preparation and keyed verifier ``N -> F``."""

    name: str
    keys: KeyDist
    note_shape: SpaceShape
    mint: Keyed
    ver: Keyed

    def __post_init__(self) -> None:
        object.__setattr__(self, "mint", keyed(self.mint))
        object.__setattr__(self, "ver", keyed(self.ver))

    @property
    def n_note(self) -> int:
        return len(self.note_shape)

    def banknote(self, key) -> np.ndarray:
        return self.mint(key).as_circuit().run(BlockState()).to_dense()


@dataclass(frozen=True)
class GroupTable:
    """Finite group given by its multiplication table on index labels."""

    alphabet: tuple
    table: tuple[tuple[int, ...], ...]

    @classmethod
    def cyclic(cls, alphabet: Sequence) -> "GroupTable":
        n = len(alphabet)
        return cls(tuple(alphabet), tuple(tuple((a + b) % n for b in range(n)) for a in range(n)))

    @classmethod
    def from_function(cls, alphabet: Sequence, op: Callable) -> "GroupTable":
        alphabet = tuple(alphabet)
        return cls(alphabet, tuple(tuple(alphabet.index(op(a, b)) for b in alphabet) for a in alphabet))

    def __post_init__(self) -> None:
        n = len(self.alphabet)
        if n == 0 or len(self.table) != n or any(len(r) != n for r in self.table):
            raise ValueError("group table must be square over a nonempty alphabet")
        if any(not 0 <= v < n for r in self.table for v in r):
            raise ValueError("group table entry out of range")
        t = self.table
        for a, b, c in itertools.product(range(n), repeat=3):
            if t[t[a][b]][c] != t[a][t[b][c]]:
                raise ValueError("not associative: witness "
                                 f"{(self.alphabet[a], self.alphabet[b], self.alphabet[c])}")
        ids = [e for e in range(n) if all(t[e][x] == x and t[x][e] == x for x in range(n))]
        if not ids:
            raise ValueError("no two-sided identity")
        for a in range(n):
            if not any(t[a][b] == ids[0] and t[b][a] == ids[0] for b in range(n)):
                raise ValueError(f"no inverse for {self.alphabet[a]!r}")

    @property
    def order(self) -> int:
        return len(self.alphabet)

    @property
    def identity_index(self) -> int:
        n = self.order
        return next(e for e in range(n) if all(self.table[e][x] == x for x in range(n)))

    @property
    def identity(self):
        return self.alphabet[self.identity_index]

    def mul_index(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inv_index(self, a: int) -> int:
        e = self.identity_index
        return next(b for b in range(self.order) if self.table[a][b] == e)

    def apply(self, a, b):
        i, j = self.alphabet.index(a), self.alphabet.index(b)
        return self.alphabet[self.table[i][j]]

    def inverse(self, a):
        return self.alphabet[self.inv_index(self.alphabet.index(a))]


# ---------------------------------------------------------------- evaluation


def _state(rho: np.ndarray, shape: SpaceShape) -> BlockState:
    return BlockState.from_dense(rho, shape.dims)


def _select_flag(circ: Circuit, pos: int) -> Circuit:
    return circ.select([pos], [1])


def encrypt_then(scheme, key, m, attack=None) -> BlockState:
    """Ciphertext state of ``m`` under ``key``, optionally after an attack."""
    st = scheme.enc(key).as_circuit().run(_state(scheme.message_state(m), scheme.msg_shape))
    if attack is not None:
        st = attack.as_circuit().run(st)
    return st


def dbar_vbar_apply(scheme, key, rho: np.ndarray) -> np.ndarray | float:
    """Accept branch of the decoder (AQECM) or verifier (QECMR / money).

    AQECM: ``(I (x) <1|) D_k(rho) (I (x) |1>)`` as a matrix on ``M``.
    QECMR / QM: the scalar ``<1| V_k(rho) |1>``.
    """
    if isinstance(scheme, AqecmScheme):
        circ = _select_flag(scheme.dec(key).as_circuit(), scheme.flag_pos)
        return circ.apply(rho)
    if isinstance(scheme, (QecmrScheme, QmScheme)):
        v = scheme.ver(key).as_circuit()
        return float(np.real(_select_flag(v, 0).apply(rho)[0, 0]))
    raise TypeError(f"no accept branch for {type(scheme).__name__}")


def dbar_circuit(scheme: AqecmScheme, key) -> Circuit:
    return _select_flag(scheme.dec(key).as_circuit(), scheme.flag_pos)


def vbar_circuit(scheme, key) -> Circuit:
    return _select_flag(scheme.ver(key).as_circuit(), 0)


@dataclass(frozen=True)
class Metrics:
    """One scalar functional with the per-item values it was computed from."""

    kind: str
    value: float
    per_item: Mapping = field(default_factory=dict)


def _decode_success(scheme, key, m) -> float:
    st = encrypt_then(scheme, key, m)
    dec = scheme.dec(key).as_circuit()
    digits = scheme.msg_digits(m)
    if isinstance(scheme, AqecmScheme):
        circ = dec.select(list(range(scheme.n_msg)) + [scheme.flag_pos], list(digits) + [1])
    else:
        circ = dec.select(list(range(scheme.n_msg)), list(digits))
    return float(np.real(circ.run(st).trace()))


def correctness_gap(scheme) -> Metrics:
    """``1 - min_m E_k <m| Dbar_k E_k(m) |m>`` (scheme-type specific, see below).

    QECM uses the plain decoder; QECMR takes the worse of decoding and
    honest revocation acceptance; money takes the worst positive-probability
    key.
    """
    if isinstance(scheme, QmScheme):
        per = {}
        for k, p in scheme.keys.support():
            st = scheme.mint(k).as_circuit().run(BlockState())
            per[k] = float(np.real(vbar_circuit(scheme, k).run(st).trace()))
        return Metrics("qm_eps", 1.0 - min(per.values()), per)
    per = {}
    for m in scheme.messages:
        per[m] = sum(p * _decode_success(scheme, k, m) for k, p in scheme.keys.support())
    eps = 1.0 - min(per.values())
    if isinstance(scheme, QecmrScheme):
        rev_per = {}
        for m in scheme.messages:
            acc = 0.0
            for k, p in scheme.keys.support():
                st = encrypt_then(scheme, k, m, scheme.rev)
                acc += p * float(np.real(vbar_circuit(scheme, k).run(st).trace()))
            rev_per[m] = acc
        eps = max(eps, 1.0 - min(rev_per.values()))
        return Metrics("qecmr_eps", eps, {"decode": per, "revoke": rev_per})
    return Metrics("eps", eps, per)


def averaged_ciphertext(scheme, m) -> np.ndarray:
    """``E_k(m)`` averaged over the key distribution, as a dense matrix."""
    d = scheme.cipher_shape.dim
    out = np.zeros((d, d), dtype=complex)
    for k, p in scheme.keys.support():
        out += p * encrypt_then(scheme, k, m).to_dense()
    return out


def encryption_gap(scheme) -> Metrics:
    """Largest trace distance between key-averaged ciphertexts of two messages."""
    avg = {m: averaged_ciphertext(scheme, m) for m in scheme.messages}
    per = {}
    for a, b in itertools.combinations(scheme.messages, 2):
        per[(a, b)] = 0.5 * trace_norm(avg[a] - avg[b])
    return Metrics("alpha", max(per.values(), default=0.0), per)


@dataclass(frozen=True, eq=False)
class TamperProfile:
    """Per-key conditioned distances ``d_k`` of one attack and message pair."""

    keys: tuple
    probs: np.ndarray
    distances: np.ndarray

    def expectation(self) -> float:
        return float(np.dot(self.probs, self.distances))

    def prob_form_holds(self, delta: float) -> bool:
        """``Pr_k[d_k <= delta] >= 1 - delta``."""
        return float(self.probs[self.distances <= delta].sum()) >= 1.0 - delta - PROB_TOL

    def min_delta(self) -> float:
        """Smallest ``delta`` for which :meth:`prob_form_holds`."""
        order = np.argsort(self.distances, kind="stable")
        d = self.distances[order]
        cum = np.cumsum(self.probs[order])
        best = 1.0
        for j in range(len(d)):
            if j + 1 < len(d) and d[j + 1] == d[j]:
                continue
            best = min(best, max(float(d[j]), 1.0 - float(cum[j])))
        return max(best, 0.0)

    def sqrt_witness(self) -> float:
        """``sqrt(E d_k)``: the profile satisfies the probability form at this value."""
        return math.sqrt(max(self.expectation(), 0.0))

    @staticmethod
    def expectation_bound(delta: float) -> float:
        """Expectation ceiling implied by the probability form at ``delta``."""
        return 2 * delta - delta * delta

    def max_distance(self) -> float:
        return float(self.distances.max()) if self.distances.size else 0.0


def _profile(keys, probs, dists) -> TamperProfile:
    return TamperProfile(tuple(keys), np.asarray(probs, dtype=float), np.asarray(dists, dtype=float))


def conditioned_state(scheme: AqecmScheme, key, attack, rho: np.ndarray) -> np.ndarray:
    """``((Tr_M o Dbar_k) (x) Id_A) o attack o E_k (rho)`` as a matrix on ``A``."""
    st = scheme.enc(key).as_circuit().run(_state(rho, scheme.msg_shape))
    st = attack.as_circuit().run(st)
    nc = scheme.n_cipher
    post = Circuit(attack.out_shape).on(scheme.dec(key), range(nc), 0)
    post = post.select([scheme.flag_pos], [1]).trace(range(scheme.n_msg))
    return post.run(st).to_dense()


def tamper_profile(scheme: AqecmScheme, attack, m, m2) -> TamperProfile:
    """Per-key ``d_k = 1/2 || ((Tr_M o Dbar_k) (x) Id_A) A E_k(m - m2) ||_1``."""
    if attack.in_shape.dims != scheme.cipher_shape.dims:
        raise ValueError("attack input does not match the ciphertext space")
    if attack.out_shape.dims[:scheme.n_cipher] != scheme.cipher_shape.dims:
        raise ValueError("attack output must start with the ciphertext space")
    diff = scheme.message_state(m) - scheme.message_state(m2)
    keys, probs, dists = [], [], []
    for k, p in scheme.keys.support():
        keys.append(k)
        probs.append(p)
        dists.append(0.5 * trace_norm(conditioned_state(scheme, k, attack, diff)))
    return _profile(keys, probs, dists)


def revoked_state(scheme: QecmrScheme, key, attack, rho: np.ndarray) -> np.ndarray:
    """``(Vbar_k (x) Id_A) o attack o E_k (rho)`` on ``A`` for a revocation attack ``C -> R (x) A``."""
    st = scheme.enc(key).as_circuit().run(_state(rho, scheme.msg_shape))
    st = attack.as_circuit().run(st)
    nr = len(scheme.token_shape)
    post = Circuit(attack.out_shape).on(scheme.ver(key), range(nr), 0).select([0], [1])
    return post.run(st).to_dense()


def revocation_profile(scheme: QecmrScheme, attack, m, m2) -> TamperProfile:
    """Per-key ``1/2 || (Vbar_k (x) Id_A) A E_k(m - m2) ||_1``."""
    if attack.in_shape.dims != scheme.cipher_shape.dims:
        raise ValueError("attack input does not match the ciphertext space")
    diff = scheme.message_state(m) - scheme.message_state(m2)
    keys, probs, dists = [], [], []
    for k, p in scheme.keys.support():
        keys.append(k)
        probs.append(p)
        dists.append(0.5 * trace_norm(revoked_state(scheme, k, attack, diff)))
    return _profile(keys, probs, dists)


def qm_forgery_value(scheme: QmScheme, attack) -> float:
    """``E_k (Vbar_k (x) Vbar_k) o A o mint(k)`` for a forgery channel ``N -> N (x) N``."""
    nd = scheme.note_shape.dims
    if attack.in_shape.dims != nd or attack.out_shape.dims != nd + nd:
        raise ValueError("forgery must map one banknote space to two")
    n = scheme.n_note
    total = 0.0
    for k, p in scheme.keys.support():
        st = scheme.mint(k).as_circuit().run(BlockState())
        st = attack.as_circuit().run(st)
        post = Circuit(attack.out_shape).on(scheme.ver(k), range(n), 0)
        post = post.on(scheme.ver(k), range(1, n + 1), 1).select([0, 1], [1, 1])
        total += p * float(np.real(post.run(st).trace()))
    return total


def certified_deletion_defect(scheme: QecmrScheme) -> float:
    """Largest ``|| V_k - V_k o Delta_R ||`` entry over keys, on a basis of ``L(R)``."""
    from .channels import ChannelKind, structured_channel

    deph = structured_channel(ChannelKind.DEPHASE, shape=scheme.token_shape)
    worst = 0.0
    for k in scheme.keys.keys:
        v = scheme.ver(k).as_circuit()
        a = v.choi()
        b = deph.as_circuit().then(v).choi()
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def is_certified_deletion(scheme: QecmrScheme, tol: float = 1e-9) -> bool:
    return certified_deletion_defect(scheme) <= tol
