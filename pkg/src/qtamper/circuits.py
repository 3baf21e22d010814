"""Channels as sequences of local steps, simulated on product-block states.

A :class:`Circuit` is a channel written as a list of steps that each touch
a few tensor factors: local Kraus maps, partial traces, state preparation,
factor permutations and basis-vector selection.  Simulating one on a
:class:`BlockState` keeps independent factors in separate dense blocks, so
composite schemes whose full ciphertext space is far too large for a dense
matrix can still be evaluated exactly.

Dense matrices are only ever built block by block, and every block must
stay within the active dimension cap (see :func:`dim_cap`).
"""

from __future__ import annotations

import contextvars
import math
from contextlib import contextmanager
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from ._kernels import sandwich
from .qmath import Factor, SpaceShape, check_permutation, inverse_permutation

if TYPE_CHECKING:
    from .channels import KrausChannel

DEFAULT_DIM_CAP = 256

_CAP = contextvars.ContextVar("qtamper_dim_cap", default=DEFAULT_DIM_CAP)


class DimensionCapError(RuntimeError):
    """A dense block would exceed the configured dimension cap."""


def current_dim_cap() -> int:
    return _CAP.get()


@contextmanager
def dim_cap(cap: int):
    """Temporarily change the largest dense block dimension allowed."""
    token = _CAP.set(int(cap))
    try:
        yield cap
    finally:
        _CAP.reset(token)


def _check_cap(dim: int, what: str) -> None:
    cap = _CAP.get()
    if dim > cap:
        raise DimensionCapError(f"{what} needs a dense block of dimension {dim} > cap {cap}")


class BlockState:
    """Operator on an ordered list of wires, stored as a product of dense blocks.

    Blocks are tensors of shape ``dims + dims`` (ket axes then bra axes).
    Arrays are never modified in place, so copies may share them.
    """

    __slots__ = ("order", "dims", "blocks", "home", "scale", "_wid", "_bid")

    def __init__(self) -> None:
        self.order: list[int] = []
        self.dims: dict[int, int] = {}
        self.blocks: dict[int, tuple[tuple[int, ...], np.ndarray]] = {}
        self.home: dict[int, int] = {}
        self.scale: complex = 1.0
        self._wid = 0
        self._bid = 0

    def copy(self) -> "BlockState":
        s = BlockState()
        s.order = list(self.order)
        s.dims = dict(self.dims)
        s.blocks = dict(self.blocks)
        s.home = dict(self.home)
        s.scale = self.scale
        s._wid = self._wid
        s._bid = self._bid
        return s

    @classmethod
    def from_dense(cls, rho: np.ndarray, dims: Sequence[int]) -> "BlockState":
        st = cls()
        rho = np.asarray(rho, dtype=complex)
        d = math.prod(dims)
        if rho.shape != (d, d):
            raise ValueError(f"operator shape {rho.shape} does not match dims {tuple(dims)}")
        st.insert(rho, dims, 0)
        return st

    @classmethod
    def product(cls, parts: Iterable[tuple[np.ndarray, Sequence[int]]]) -> "BlockState":
        st = cls()
        for rho, dims in parts:
            st.insert(np.asarray(rho, dtype=complex), dims, len(st.order))
        return st

    @property
    def shape_dims(self) -> tuple[int, ...]:
        return tuple(self.dims[w] for w in self.order)

    def _new_wires(self, dims: Sequence[int]) -> list[int]:
        ws = list(range(self._wid, self._wid + len(dims)))
        self._wid += len(dims)
        for w, d in zip(ws, dims):
            self.dims[w] = int(d)
        return ws

    def _add_block(self, wires: Sequence[int], data: np.ndarray) -> int:
        if not wires:
            self.scale *= complex(data.reshape(()))
            return -1
        bid = self._bid
        self._bid += 1
        self.blocks[bid] = (tuple(wires), data)
        for w in wires:
            self.home[w] = bid
        return bid

    def insert(self, rho: np.ndarray, dims: Sequence[int], at: int) -> None:
        dims = tuple(int(d) for d in dims)
        if not dims:
            self.scale *= complex(np.asarray(rho).reshape(()))
            return
        _check_cap(math.prod(dims), "preparing a state")
        ws = self._new_wires(dims)
        self._add_block(ws, np.asarray(rho, dtype=complex).reshape(dims + dims))
        self.order[at:at] = ws

    def _gather(self, wires: Sequence[int]) -> int:
        bids = list(dict.fromkeys(self.home[w] for w in wires))
        if len(bids) == 1:
            return bids[0]
        all_wires: list[int] = []
        for b in bids:
            all_wires.extend(self.blocks[b][0])
        _check_cap(math.prod(self.dims[w] for w in all_wires), "merging blocks")
        bw, data = self.blocks.pop(bids[0])
        for b in bids[1:]:
            bw2, d2 = self.blocks.pop(b)
            k1, k2 = len(bw), len(bw2)
            t = np.multiply.outer(data, d2)
            axes = list(range(k1)) + list(range(2 * k1, 2 * k1 + k2)) \
                + list(range(k1, 2 * k1)) + list(range(2 * k1 + k2, 2 * k1 + 2 * k2))
            data = t.transpose(axes)
            bw = bw + bw2
        return self._add_block(bw, data)

    def apply_kraus(self, kraus: np.ndarray, targets: Sequence[int],
                    out_dims: Sequence[int], at: int) -> None:
        out_dims = tuple(out_dims)
        if not targets:
            y = sandwich(kraus, np.ones((1, 1, 1, 1), dtype=complex))
            d = y.shape[0]
            self.insert(y.reshape(d, d), out_dims, at)
            return
        wires = [self.order[t] for t in targets]
        bid = self._gather(wires)
        bw, data = self.blocks.pop(bid)
        k = len(bw)
        tpos = [bw.index(w) for w in wires]
        rest = [i for i in range(k) if i not in tpos]
        axes = tpos + rest + [k + i for i in tpos] + [k + i for i in rest]
        din = math.prod(self.dims[w] for w in wires)
        rest_w = [bw[i] for i in rest]
        rest_d = tuple(self.dims[w] for w in rest_w)
        nr = math.prod(rest_d)
        x = data.transpose(axes).reshape(din, nr, din, nr)
        _check_cap(math.prod(out_dims) * nr, "applying a local map")
        y = sandwich(kraus, x)
        for w in wires:
            del self.home[w]
            del self.dims[w]
        gone = set(wires)
        self.order = [w for w in self.order if w not in gone]
        new = self._new_wires(out_dims)
        self._add_block(new + rest_w, y.reshape(out_dims + rest_d + out_dims + rest_d))
        self.order[at:at] = new

    def _drop_wire(self, w: int, reducer) -> None:
        bid = self.home.pop(w)
        bw, data = self.blocks.pop(bid)
        i = bw.index(w)
        k = len(bw)
        data = reducer(data, i, k)
        bw = bw[:i] + bw[i + 1:]
        del self.dims[w]
        self._add_block(bw, data)

    def trace_out(self, targets: Sequence[int]) -> None:
        wires = [self.order[t] for t in targets]
        for w in wires:
            self._drop_wire(w, lambda d, i, k: np.trace(d, axis1=i, axis2=k + i))
        gone = set(wires)
        self.order = [w for w in self.order if w not in gone]

    def select(self, targets: Sequence[int], indices: Sequence[int]) -> None:
        """Replace each target factor by the matrix element ``<j| . |j>``."""
        wires = [self.order[t] for t in targets]
        for w, j in zip(wires, indices):
            def take(d, i, k, j=j):
                d = np.take(d, j, axis=k + i)
                return np.take(d, j, axis=i)
            self._drop_wire(w, take)
        gone = set(wires)
        self.order = [w for w in self.order if w not in gone]

    def permute(self, perm: Sequence[int], offset: int = 0) -> None:
        window = self.order[offset:offset + len(perm)]
        out = [0] * len(perm)
        for i, p in enumerate(perm):
            out[p] = window[i]
        self.order[offset:offset + len(perm)] = out

    def to_dense(self) -> np.ndarray:
        if not self.order:
            return np.array([[self.scale]], dtype=complex)
        d = math.prod(self.shape_dims)
        _check_cap(d, "densifying a state")
        bid = self._gather(self.order)
        bw, data = self.blocks[bid]
        k = len(bw)
        pos = [bw.index(w) for w in self.order]
        return self.scale * data.transpose(pos + [k + p for p in pos]).reshape(d, d)

    def trace(self) -> complex:
        total = self.scale
        for bw, data in self.blocks.values():
            d = math.prod(self.dims[w] for w in bw)
            total *= np.trace(data.reshape(d, d))
        return complex(total)


def _insert_factors(factors: list[Factor], at: int, new: Sequence[Factor]) -> list[Factor]:
    taken = {f.label for f in factors}
    fresh = []
    for f in new:
        label = f.label
        while label in taken:
            label += "'"
        taken.add(label)
        fresh.append(Factor(label, f.dim, f.classical))
    return factors[:at] + fresh + factors[at:]


class Step:
    """One local operation of a circuit."""

    def reshape(self, factors: list[Factor]) -> list[Factor]:
        raise NotImplementedError

    def run(self, state: BlockState) -> None:
        raise NotImplementedError

    def shifted(self, offset: int) -> "Step":
        raise NotImplementedError


class Local(Step):
    __slots__ = ("kraus", "targets", "out", "at")

    def __init__(self, kraus: np.ndarray, targets: Sequence[int], out: SpaceShape, at: int) -> None:
        self.kraus = kraus
        self.targets = tuple(targets)
        self.out = out
        self.at = at

    def reshape(self, factors):
        din = math.prod(factors[t].dim for t in self.targets)
        if din != self.kraus.shape[2]:
            raise ValueError(f"local map expects input dimension {self.kraus.shape[2]}, got {din}")
        gone = set(self.targets)
        rest = [f for i, f in enumerate(factors) if i not in gone]
        return _insert_factors(rest, self.at, self.out.factors)

    def run(self, state):
        state.apply_kraus(self.kraus, self.targets, self.out.dims, self.at)

    def shifted(self, offset):
        return Local(self.kraus, [t + offset for t in self.targets], self.out, self.at + offset)


class Trace(Step):
    __slots__ = ("targets",)

    def __init__(self, targets: Sequence[int]) -> None:
        self.targets = tuple(targets)

    def reshape(self, factors):
        gone = set(self.targets)
        return [f for i, f in enumerate(factors) if i not in gone]

    def run(self, state):
        state.trace_out(self.targets)

    def shifted(self, offset):
        return Trace([t + offset for t in self.targets])


class Select(Step):
    __slots__ = ("targets", "indices")

    def __init__(self, targets: Sequence[int], indices: Sequence[int]) -> None:
        self.targets = tuple(targets)
        self.indices = tuple(indices)

    def reshape(self, factors):
        for t, j in zip(self.targets, self.indices):
            if not 0 <= j < factors[t].dim:
                raise ValueError(f"basis index {j} out of range for factor {factors[t].label}")
        gone = set(self.targets)
        return [f for i, f in enumerate(factors) if i not in gone]

    def run(self, state):
        state.select(self.targets, self.indices)

    def shifted(self, offset):
        return Select([t + offset for t in self.targets], self.indices)


class Prepare(Step):
    __slots__ = ("rho", "shape", "at")

    def __init__(self, rho: np.ndarray, shape: SpaceShape, at: int) -> None:
        self.rho = rho
        self.shape = shape
        self.at = at

    def reshape(self, factors):
        return _insert_factors(factors, self.at, self.shape.factors)

    def run(self, state):
        state.insert(self.rho, self.shape.dims, self.at)

    def shifted(self, offset):
        return Prepare(self.rho, self.shape, self.at + offset)


class Permute(Step):
    __slots__ = ("perm", "offset")

    def __init__(self, perm: Sequence[int], offset: int = 0) -> None:
        check_permutation(perm, len(perm))
        self.perm = tuple(perm)
        self.offset = offset

    def reshape(self, factors):
        o = self.offset
        window = factors[o:o + len(self.perm)]
        if len(window) != len(self.perm):
            raise ValueError("permutation window exceeds factor count")
        out: list[Factor] = [None] * len(self.perm)  # type: ignore[list-item]
        for i, p in enumerate(self.perm):
            out[p] = window[i]
        return factors[:o] + out + factors[o + len(self.perm):]

    def run(self, state):
        state.permute(self.perm, self.offset)

    def shifted(self, offset):
        return Permute(self.perm, self.offset + offset)


def _front_perm(n: int, targets: Sequence[int]) -> list[int]:
    """Permutation bringing ``targets`` (in order) to the front."""
    perm = [0] * n
    for j, t in enumerate(targets):
        perm[t] = j
    rest = [i for i in range(n) if i not in set(targets)]
    for j, i in enumerate(rest):
        perm[i] = len(targets) + j
    return perm


def _place_perm(n: int, k: int, at: int) -> list[int]:
    """Permutation moving the first ``k`` factors to start at slot ``at``."""
    perm = []
    for i in range(k):
        perm.append(at + i)
    for j in range(n - k):
        perm.append(j if j < at else j + k)
    return perm


class Circuit:
    """A channel given as a sequence of local steps."""

    __slots__ = ("in_shape", "out_shape", "steps")

    def __init__(self, in_shape: SpaceShape, steps: Sequence[Step] = ()) -> None:
        factors = list(in_shape.factors)
        for s in steps:
            factors = s.reshape(factors)
        self.in_shape = in_shape
        self.steps = tuple(steps)
        self.out_shape = SpaceShape(tuple(factors))

    @classmethod
    def identity(cls, shape: SpaceShape) -> "Circuit":
        return cls(shape)

    @property
    def dim_in(self) -> int:
        return self.in_shape.dim

    @property
    def dim_out(self) -> int:
        return self.out_shape.dim

    def as_circuit(self) -> "Circuit":
        return self

    def _extend(self, *steps: Step) -> "Circuit":
        return Circuit(self.in_shape, self.steps + steps)

    def local(self, kraus: np.ndarray, targets: Sequence[int], out: SpaceShape,
              at: int | None = None) -> "Circuit":
        if at is None:
            at = min(targets) if targets else len(self.out_shape) - len(targets)
        return self._extend(Local(np.asarray(kraus, dtype=complex), targets, out, at))

    def trace(self, targets: Sequence[int]) -> "Circuit":
        return self._extend(Trace(targets))

    def select(self, targets: Sequence[int], indices: Sequence[int]) -> "Circuit":
        return self._extend(Select(targets, indices))

    def prepare(self, rho: np.ndarray, shape: SpaceShape, at: int | None = None) -> "Circuit":
        if at is None:
            at = len(self.out_shape)
        return self._extend(Prepare(np.asarray(rho, dtype=complex), shape, at))

    def permute(self, perm: Sequence[int], offset: int = 0) -> "Circuit":
        return self._extend(Permute(perm, offset))

    def on(self, channel, targets: Sequence[int], at: int | None = None) -> "Circuit":
        """Apply ``channel`` to the listed factors; outputs land at slot ``at``.

        ``at`` indexes the factor list after the targets are removed and
        defaults to the position of the first target.
        """
        targets = list(targets)
        n = len(self.out_shape)
        if len(set(targets)) != len(targets) or any(not 0 <= t < n for t in targets):
            raise ValueError(f"bad target list {targets} for {n} factors")
        if at is None:
            at = min(targets) if targets else n
        sub = self.out_shape.select(targets)
        if sub.dims != channel.in_shape.dims:
            raise ValueError(f"channel input dims {channel.in_shape.dims} do not match {sub.dims}")
        if not isinstance(channel, Circuit):
            return self._extend(Local(channel.kraus, targets, channel.out_shape, at))
        steps: list[Step] = []
        front = _front_perm(n, targets)
        if front != list(range(n)):
            steps.append(Permute(front))
        steps.extend(channel.steps)
        k = len(channel.out_shape)
        m = k + n - len(targets)
        place = _place_perm(m, k, at)
        if place != list(range(m)):
            steps.append(Permute(place))
        return self._extend(*steps)

    def then(self, channel) -> "Circuit":
        """Sequential composition: this circuit first, ``channel`` after."""
        return self.on(channel, range(len(self.out_shape)))

    def tensor(self, other) -> "Circuit":
        """Parallel composition acting on ``self.in (x) other.in``."""
        other = other.as_circuit()
        shape = self.in_shape + other.in_shape
        k = len(self.out_shape)
        return Circuit(shape, self.steps + tuple(s.shifted(k) for s in other.steps))

    def run(self, state: BlockState) -> BlockState:
        state = state.copy()
        for s in self.steps:
            s.run(state)
        return state

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return self.run(BlockState.from_dense(rho, self.in_shape.dims)).to_dense()

    def choi(self) -> np.ndarray:
        """Choi operator ordered as output (x) input."""
        din = self.dim_in
        omega = np.zeros((din, din, din, din), dtype=complex)
        for i in range(din):
            for j in range(din):
                omega[i, i, j, j] = 1.0
        omega = omega.reshape(din * din, din * din)
        with dim_cap(current_dim_cap() * din):
            st = BlockState.from_dense(omega, self.in_shape.dims + (din,))
            st = self.run(st)
            return st.to_dense()

    def to_kraus(self) -> "KrausChannel":
        from .channels import KrausChannel, kraus_from_choi

        if (len(self.steps) == 1 and isinstance(self.steps[0], Local)
                and self.steps[0].targets == tuple(range(len(self.in_shape)))):
            return KrausChannel(self.steps[0].kraus, self.in_shape, self.out_shape)
        if not self.steps:
            return KrausChannel(np.eye(self.dim_in, dtype=complex)[None], self.in_shape, self.out_shape)
        return KrausChannel(kraus_from_choi(self.choi(), self.dim_in, self.dim_out),
                            self.in_shape, self.out_shape)

    def __repr__(self) -> str:
        return f"Circuit({self.in_shape.labels} -> {self.out_shape.labels}, {len(self.steps)} steps)"


def as_circuit(channel) -> Circuit:
    return channel.as_circuit()


def prepared(rho: np.ndarray, shape: SpaceShape) -> Circuit:
    """Circuit with trivial input that outputs ``rho``."""
    return Circuit(SpaceShape()).prepare(rho, shape)


def permutation_circuit(shape: SpaceShape, perm: Sequence[int]) -> Circuit:
    return Circuit(shape).permute(perm)


def group_permutation(sizes: Sequence[int], perm: Sequence[int]) -> list[int]:
    """Expand a permutation of factor groups into one on individual factors.

    ``sizes[g]`` is the number of factors in group ``g``; group ``g`` is
    sent to group slot ``perm[g]``.
    """
    check_permutation(perm, len(sizes))
    inv = inverse_permutation(perm)
    starts = np.cumsum([0] + list(sizes))
    new_sizes = [sizes[inv[s]] for s in range(len(sizes))]
    new_starts = np.cumsum([0] + new_sizes)
    out = [0] * int(starts[-1])
    for g, size in enumerate(sizes):
        for j in range(size):
            out[int(starts[g]) + j] = int(new_starts[perm[g]]) + j
    return out
