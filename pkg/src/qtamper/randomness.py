"""Seeded random matrices, channels and small schemes.

Every function takes an explicit ``numpy.random.Generator``; nothing here
touches global random state.
"""

from __future__ import annotations

import numpy as np

from .channels import FLAG, KrausChannel
from .qmath import Factor, SpaceShape, dagger
from .schemes import AqecmScheme, KeyDist, QecmrScheme


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """Independent stream for ``(seed, spawn_key)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(spawn_key)))


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    return random_isometry(rng, d, d)


def random_isometry(rng: np.random.Generator, din: int, dout: int) -> np.ndarray:
    if dout < din:
        raise ValueError("an isometry needs dout >= din")
    q, r = np.linalg.qr(ginibre(rng, dout, din))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    g = ginibre(rng, d, d)
    return (g + dagger(g)) / 2


def random_density(rng: np.random.Generator, d: int, rank: int | None = None,
                   trace: float = 1.0) -> np.ndarray:
    g = ginibre(rng, d, rank or d)
    rho = g @ dagger(g)
    return trace * rho / np.trace(rho).real


def random_pure(rng: np.random.Generator, d: int, norm: float = 1.0) -> np.ndarray:
    v = ginibre(rng, d, 1)[:, 0]
    return norm * v / np.linalg.norm(v)


def random_kraus(rng: np.random.Generator, din: int, dout: int, n_kraus: int) -> np.ndarray:
    """Stinespring-style random family; ``n_kraus`` is raised to ``ceil(din / dout)`` if needed."""
    n_kraus = max(n_kraus, -(-din // dout))
    v = random_isometry(rng, din, dout * n_kraus)
    return v.reshape(n_kraus, dout, din)


def random_channel(rng: np.random.Generator, in_shape: SpaceShape, out_shape: SpaceShape,
                   n_kraus: int = 2) -> KrausChannel:
    return KrausChannel(random_kraus(rng, in_shape.dim, out_shape.dim, n_kraus), in_shape, out_shape)


def random_classical_output(rng: np.random.Generator, in_shape: SpaceShape, n_out: int,
                            n_kraus: int = 2, label: str = "Y") -> KrausChannel:
    """Random measurement channel into ``n_out`` classical outcomes."""
    din = in_shape.dim
    n_kraus = max(n_kraus, -(-din // n_out))
    w = random_isometry(rng, din, n_out * n_kraus).reshape(n_out, n_kraus, din)
    ops = np.zeros((n_out * n_kraus, n_out, din), dtype=complex)
    for y in range(n_out):
        for i in range(n_kraus):
            ops[y * n_kraus + i, y, :] = w[y, i]
    out = SpaceShape((Factor(label, n_out, True),))
    return KrausChannel(ops, in_shape, out)


def random_distribution(rng: np.random.Generator, n: int) -> np.ndarray:
    p = rng.exponential(size=n)
    return p / p.sum()


def _keys(rng: np.random.Generator, n_keys: int) -> KeyDist:
    p = random_distribution(rng, n_keys)
    p[-1] = 1.0 - p[:-1].sum()
    return KeyDist(tuple(range(n_keys)), tuple(float(x) for x in p))


def random_aqecm(rng: np.random.Generator, n_msgs: int = 2, cipher_dim: int = 2,
                 n_keys: int = 2, n_kraus: int = 2) -> AqecmScheme:
    """Small scheme with random (valid, generally incorrect) keyed channels."""
    messages = tuple(range(n_msgs))
    msg = SpaceShape((Factor("M", n_msgs, True),))
    cipher = SpaceShape.of(("C", cipher_dim))
    keys = _keys(rng, n_keys)
    enc = {k: random_channel(rng, msg, cipher, n_kraus) for k in keys.keys}
    dec = {k: random_channel(rng, cipher, msg + FLAG, n_kraus) for k in keys.keys}
    return AqecmScheme("random_aqecm", keys, messages, msg, cipher, enc.__getitem__, dec.__getitem__)


def random_qecmr(rng: np.random.Generator, n_msgs: int = 2, cipher_dim: int = 2,
                 token_dim: int = 2, n_keys: int = 2, n_kraus: int = 2) -> QecmrScheme:
    messages = tuple(range(n_msgs))
    msg = SpaceShape((Factor("M", n_msgs, True),))
    cipher = SpaceShape.of(("C", cipher_dim))
    token = SpaceShape.of(("R", token_dim))
    keys = _keys(rng, n_keys)
    enc = {k: random_channel(rng, msg, cipher, n_kraus) for k in keys.keys}
    dec = {k: random_channel(rng, cipher, msg, n_kraus) for k in keys.keys}
    rev = random_channel(rng, cipher, token, n_kraus)
    ver = {k: random_classical_output(rng, token, 2, n_kraus, "F") for k in keys.keys}
    return QecmrScheme("random_qecmr", keys, messages, msg, cipher,
                       enc.__getitem__, dec.__getitem__, rev=rev, ver=ver.__getitem__)
