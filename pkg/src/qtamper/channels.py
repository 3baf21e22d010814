"""Completely positive trace-preserving maps in Kraus form.

Besides the dense :class:`KrausChannel`, every function here also accepts a
:class:`~qtamper.circuits.Circuit`; when a dense view is needed it is
materialized through the Choi operator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from ._kernels import sandwich
from .circuits import Circuit
from .qmath import (
    PSD_FLOOR,
    Factor,
    SpaceShape,
    dagger,
    permutation_unitary,
    spectral_decompose,
)

TP_TOL = 1e-9
CHOI_FLOOR = -1e-9
CLASSICAL_TOL = 1e-9


def _shape(shape) -> SpaceShape:
    if isinstance(shape, SpaceShape):
        return shape
    if isinstance(shape, int):
        return SpaceShape.of(("X", shape))
    return SpaceShape.of(*shape)


class KrausChannel:
    """``rho -> sum_i K_i rho K_i^dag`` with labeled input and output spaces.

    Construction does not insist on trace preservation; use
    :func:`validate_channel` for that.  The builders in this module only
    ever return valid channels.
    """

    __slots__ = ("kraus", "in_shape", "out_shape")

    def __init__(self, kraus, in_shape, out_shape) -> None:
        k = np.asarray(kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        in_shape, out_shape = _shape(in_shape), _shape(out_shape)
        if k.ndim != 3 or k.shape[0] == 0:
            raise ValueError("need a nonempty stack of Kraus matrices")
        if k.shape[1:] != (out_shape.dim, in_shape.dim):
            raise ValueError(f"Kraus shape {k.shape[1:]} does not match "
                             f"{out_shape.dim}x{in_shape.dim}")
        k.setflags(write=False)
        self.kraus = k
        self.in_shape = in_shape
        self.out_shape = out_shape

    @property
    def dim_in(self) -> int:
        return self.in_shape.dim

    @property
    def dim_out(self) -> int:
        return self.out_shape.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.dim_in, self.dim_in):
            raise ValueError(f"input shape {rho.shape} does not match dimension {self.dim_in}")
        d = self.dim_in
        y = sandwich(self.kraus, rho.reshape(d, 1, d, 1))
        return y.reshape(self.dim_out, self.dim_out)

    def adjoint_apply(self, obs: np.ndarray) -> np.ndarray:
        """Heisenberg picture: ``sum_i K_i^dag obs K_i``."""
        return np.einsum("iba,bc,icd->ad", self.kraus.conj(), obs, self.kraus)

    def choi(self) -> np.ndarray:
        """Choi operator ordered as output (x) input."""
        v = self.kraus.reshape(self.kraus.shape[0], -1)
        return v.T @ v.conj()

    def to_kraus(self) -> "KrausChannel":
        return self

    def as_circuit(self) -> Circuit:
        return Circuit(self.in_shape).local(self.kraus, range(len(self.in_shape)), self.out_shape, 0)

    def __repr__(self) -> str:
        return (f"KrausChannel({self.in_shape.labels} -> {self.out_shape.labels}, "
                f"{self.kraus.shape[0]} ops)")


def kraus_from_choi(choi: np.ndarray, din: int, dout: int, tol: float = 1e-13) -> np.ndarray:
    """Minimal Kraus family of a Choi operator ordered output (x) input."""
    choi = (choi + dagger(choi)) / 2
    lam, vec = np.linalg.eigh(choi)
    keep = lam > tol * max(1.0, float(np.max(np.abs(lam))))
    if not np.any(keep):
        return np.zeros((1, dout, din), dtype=complex)
    ops = (vec[:, keep] * np.sqrt(lam[keep])).T
    return ops.reshape(-1, dout, din)


def compress(channel: KrausChannel) -> KrausChannel:
    """Equivalent channel with a linearly independent Kraus family."""
    k = channel.kraus
    r = k.shape[0]
    flat = k.reshape(r, -1)
    gram = flat.conj() @ flat.T
    lam, w = np.linalg.eigh((gram + dagger(gram)) / 2)
    keep = lam > 1e-13 * max(1.0, float(lam.max()))
    if keep.sum() == r:
        return channel
    new = (w[:, keep].T @ flat).reshape(-1, *k.shape[1:])
    return KrausChannel(new, channel.in_shape, channel.out_shape)


@dataclass(frozen=True)
class ChannelDiagnostics:
    tp_deviation: float
    choi_min_eigenvalue: float

    @property
    def trace_preserving(self) -> bool:
        return self.tp_deviation <= TP_TOL

    @property
    def completely_positive(self) -> bool:
        return self.choi_min_eigenvalue >= CHOI_FLOOR

    @property
    def valid(self) -> bool:
        return self.trace_preserving and self.completely_positive


def validate_channel(channel) -> ChannelDiagnostics:
    """Trace-preservation defect and smallest Choi eigenvalue."""
    c = channel.to_kraus()
    k = c.kraus
    gram = np.einsum("iba,ibc->ac", k.conj(), k)
    tp = float(np.max(np.abs(gram - np.eye(c.dim_in))))
    lam = np.linalg.eigvalsh(c.choi())
    return ChannelDiagnostics(tp, float(lam.min()))


def apply_channel(channel, rho: np.ndarray) -> np.ndarray:
    return channel.apply(rho)


def compose_channels(f, g):
    """``f o g`` (``g`` first)."""
    if g.out_shape.dims != f.in_shape.dims:
        raise ValueError(f"cannot compose: {g.out_shape.dims} -> {f.in_shape.dims}")
    if isinstance(f, KrausChannel) and isinstance(g, KrausChannel):
        ops = np.einsum("iab,jbc->ijac", f.kraus, g.kraus).reshape(-1, f.dim_out, g.dim_in)
        out = KrausChannel(ops, g.in_shape, f.out_shape)
        return compress(out) if ops.shape[0] > g.dim_in * f.dim_out else out
    return g.as_circuit().then(f)


def tensor_channels(f, g):
    if isinstance(f, KrausChannel) and isinstance(g, KrausChannel):
        ops = np.einsum("iab,jcd->ijacbd", f.kraus, g.kraus)
        ops = ops.reshape(-1, f.dim_out * g.dim_out, f.dim_in * g.dim_in)
        return KrausChannel(ops, f.in_shape + g.in_shape, f.out_shape + g.out_shape)
    return f.as_circuit().tensor(g)


@dataclass(frozen=True, eq=False)
class Povm:
    """Finite measurement: outcome label -> positive effect."""

    outcomes: tuple
    effects: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.outcomes) != len(self.effects) or not self.effects:
            raise ValueError("need one effect per outcome")
        d = self.effects[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for y, e in zip(self.outcomes, self.effects):
            lam = spectral_decompose(e).eigenvalues
            if lam.min() < PSD_FLOOR:
                raise ValueError(f"effect {y!r} is not positive (min eigenvalue {lam.min():.3e})")
            total = total + e
        dev = float(np.max(np.abs(total - np.eye(d))))
        if dev > TP_TOL:
            raise ValueError(f"effects do not sum to identity (deviation {dev:.3e})")

    @classmethod
    def from_mapping(cls, effects: Mapping) -> "Povm":
        return cls(tuple(effects), tuple(np.asarray(e, dtype=complex) for e in effects.values()))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def effect(self, outcome) -> np.ndarray:
        return self.effects[self.outcomes.index(outcome)]


class ChannelKind(Enum):
    DEPHASE = "dephase"
    MEASURE = "measure"
    SWAP = "swap"
    UNITARY = "unitary"
    CLASSICAL = "classical"
    PREP = "prep"
    DISCARD = "discard"


def _is_basis_projector(e: np.ndarray) -> int | None:
    diag = np.diag(e)
    if np.allclose(e, np.diag(diag), atol=0, rtol=0):
        ones = np.flatnonzero(diag != 0)
        if len(ones) == 1 and diag[ones[0]] == 1:
            return int(ones[0])
    return None


def _measure_kraus(povm: Povm) -> np.ndarray:
    n, d = len(povm.outcomes), povm.dim
    ops = []
    for y, e in enumerate(povm.effects):
        j = _is_basis_projector(e)
        if j is not None:
            k = np.zeros((n, d), dtype=complex)
            k[y, j] = 1.0
            ops.append(k)
            continue
        sd = spectral_decompose(e)
        for lam, v in zip(sd.eigenvalues, sd.vectors.T):
            if lam > 1e-14:
                k = np.zeros((n, d), dtype=complex)
                k[y] = math.sqrt(lam) * v.conj()
                ops.append(k)
    return np.array(ops)


def _stochastic_kraus(table: np.ndarray) -> np.ndarray:
    dout, din = table.shape
    ops = []
    for x in range(din):
        for y in range(dout):
            p = table[y, x]
            if p > 0:
                k = np.zeros((dout, din), dtype=complex)
                k[y, x] = math.sqrt(p)
                ops.append(k)
    return np.array(ops)


def classical_table(in_shape: SpaceShape, out_shape: SpaceShape,
                    fn: Callable[..., object]) -> np.ndarray:
    """Stochastic matrix ``T[y, x]`` of a function on basis labels.

    ``fn`` receives one integer per input factor and returns either an
    output tuple (deterministic) or a mapping ``output tuple -> probability``.
    """
    din, dout = in_shape.dim, out_shape.dim
    table = np.zeros((dout, din))
    for x, labels in enumerate(itertools.product(*(range(d) for d in in_shape.dims))):
        res = fn(*labels)
        dist = res if isinstance(res, Mapping) else {res: 1.0}
        for y, p in dist.items():
            y = (y,) if isinstance(y, (int, np.integer)) else tuple(y)
            table[np.ravel_multi_index(y, out_shape.dims), x] += p
    return table


def structured_channel(kind: ChannelKind | str, **params) -> KrausChannel:
    """Build one of the standard channels.

    DEPHASE(shape)                      computational-basis dephasing
    MEASURE(povm, shape?, out_shape?)   outcome register holds the result
    SWAP(shape, perm)                   factor i moves to slot perm[i]
    UNITARY(u, shape)
    CLASSICAL(in_shape, out_shape, table | fn)
    PREP(state, shape)                  trivial input space
    DISCARD(shape)                      trivial output space
    """
    kind = ChannelKind(kind.lower()) if isinstance(kind, str) else kind
    if kind is ChannelKind.DEPHASE:
        shape = _shape(params["shape"])
        d = shape.dim
        ops = np.zeros((d, d, d), dtype=complex)
        ops[np.arange(d), np.arange(d), np.arange(d)] = 1.0
        return KrausChannel(ops, shape, shape.as_classical())
    if kind is ChannelKind.MEASURE:
        povm = params["povm"]
        shape = _shape(params.get("shape", povm.dim))
        out = params.get("out_shape") or SpaceShape.of(("Y", len(povm.outcomes), True))
        out = _shape(out).as_classical()
        if shape.dim != povm.dim or out.dim != len(povm.outcomes):
            raise ValueError("measurement shapes do not match the POVM")
        return KrausChannel(_measure_kraus(povm), shape, out)
    if kind is ChannelKind.SWAP:
        shape = _shape(params["shape"])
        perm = params["perm"]
        return KrausChannel(permutation_unitary(shape.dims, perm), shape, shape.permuted(perm))
    if kind is ChannelKind.UNITARY:
        u = np.asarray(params["u"], dtype=complex)
        shape = _shape(params.get("shape", u.shape[0]))
        dev = float(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0]))))
        if u.shape != (shape.dim, shape.dim) or dev > TP_TOL:
            raise ValueError(f"not a unitary on the given space (deviation {dev:.3e})")
        return KrausChannel(u, shape, params.get("out_shape", shape))
    if kind is ChannelKind.CLASSICAL:
        in_shape = _shape(params["in_shape"])
        out_shape = _shape(params["out_shape"]).as_classical()
        table = params.get("table")
        if table is None:
            table = classical_table(in_shape, out_shape, params["fn"])
        table = np.asarray(table, dtype=float)
        if table.shape != (out_shape.dim, in_shape.dim):
            raise ValueError("stochastic table has the wrong shape")
        if np.any(table < 0) or np.max(np.abs(table.sum(axis=0) - 1)) > 1e-12:
            raise ValueError("table columns must be probability vectors")
        return KrausChannel(_stochastic_kraus(table), in_shape, out_shape)
    if kind is ChannelKind.PREP:
        rho = np.asarray(params["state"], dtype=complex)
        shape = _shape(params.get("shape", rho.shape[0]))
        sd = spectral_decompose(rho)
        if sd.eigenvalues.min() < PSD_FLOOR or abs(np.trace(rho) - 1) > TP_TOL:
            raise ValueError("prepared operator is not a density operator")
        keep = sd.eigenvalues > 1e-14
        ops = (sd.vectors[:, keep] * np.sqrt(sd.eigenvalues[keep])).T[:, :, None]
        return KrausChannel(ops, SpaceShape(), shape)
    if kind is ChannelKind.DISCARD:
        shape = _shape(params["shape"])
        d = shape.dim
        return KrausChannel(np.eye(d, dtype=complex)[:, None, :], shape, SpaceShape())
    raise ValueError(f"unknown channel kind {kind}")


def identity_channel(shape) -> KrausChannel:
    shape = _shape(shape)
    return KrausChannel(np.eye(shape.dim, dtype=complex), shape, shape)


def classical_channel(in_shape, out_shape, fn) -> KrausChannel:
    return structured_channel(ChannelKind.CLASSICAL, in_shape=in_shape, out_shape=out_shape, fn=fn)


FLAG = SpaceShape.of(("F", 2, True))


def and_flags() -> KrausChannel:
    two = SpaceShape.of(("F1", 2, True), ("F2", 2, True))
    return classical_channel(two, FLAG, lambda a, b: (a & b,))


def or_flags() -> KrausChannel:
    two = SpaceShape.of(("F1", 2, True), ("F2", 2, True))
    return classical_channel(two, FLAG, lambda a, b: (a | b,))


def classical_output_defect(channel) -> float:
    """Largest entry of ``J - (Delta (x) Id) J`` for the Choi operator ``J``."""
    c = channel.to_kraus()
    j = c.choi().reshape(c.dim_out, c.dim_in, c.dim_out, c.dim_in)
    off = j.copy()
    idx = np.arange(c.dim_out)
    off[idx, :, idx, :] = 0.0
    return float(np.max(np.abs(off))) if off.size else 0.0


def povm_of_channel(channel) -> Povm:
    """The measurement ``y -> sum_i K_i^dag |y><y| K_i`` of a classical-output channel."""
    c = channel.to_kraus()
    if not c.out_shape.is_classical:
        raise ValueError("output space is not marked classical")
    defect = classical_output_defect(c)
    if defect > CLASSICAL_TOL:
        raise ValueError(f"channel output is not classical (off-diagonal defect {defect:.3e})")
    k = c.kraus
    effects = tuple(np.einsum("ia,ib->ab", k[:, y, :].conj(), k[:, y, :]) for y in range(c.dim_out))
    return Povm(tuple(range(c.dim_out)), effects)


def cgm_of_channel(channel) -> KrausChannel:
    """Coherent gentle measurement: the isometry ``sum_y sqrt(mu(y)) (x) |y>``.

    Output space is the input space followed by the outcome register.
    """
    c = channel.to_kraus()
    povm = povm_of_channel(c)
    dx, dy = c.dim_in, c.dim_out
    v = np.zeros((dx, dy, dx), dtype=complex)
    for y, e in enumerate(povm.effects):
        v[:, y, :] = spectral_decompose(e).psd_sqrt()
    return KrausChannel(v.reshape(dx * dy, dx), c.in_shape, c.in_shape + c.out_shape)


def flag_factor(label: str = "F") -> Factor:
    return Factor(label, 2, True)
