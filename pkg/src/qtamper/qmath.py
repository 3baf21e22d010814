"""Dense complex linear algebra on labeled tensor-product spaces.

Operators are plain ``numpy`` complex arrays.  The tensor structure of a
space is carried separately by :class:`SpaceShape`, an ordered list of
labeled factors.  All contracts are positional; labels are advisory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_FLOOR = -1e-10


@dataclass(frozen=True)
class Factor:
    label: str
    dim: int
    classical: bool = False

    def __post_init__(self) -> None:
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"factor {self.label!r}: dimension must be a positive integer")


@dataclass(frozen=True)
class SpaceShape:
    """Ordered tensor factorization of a finite-dimensional Hilbert space."""

    factors: tuple[Factor, ...] = ()

    def __post_init__(self) -> None:
        labels = [f.label for f in self.factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels in {labels}")

    @classmethod
    def of(cls, *specs) -> "SpaceShape":
        """Build from ``(label, dim)`` or ``(label, dim, classical)`` tuples."""
        return cls(tuple(s if isinstance(s, Factor) else Factor(*s) for s in specs))

    @classmethod
    def qubits(cls, n: int, prefix: str = "q") -> "SpaceShape":
        return cls(tuple(Factor(f"{prefix}{i}", 2) for i in range(n)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.factors)

    @property
    def is_classical(self) -> bool:
        return all(f.classical for f in self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return SpaceShape(self.factors[idx])
        return self.factors[idx]

    def select(self, indices: Iterable[int]) -> "SpaceShape":
        return SpaceShape(tuple(self.factors[i] for i in indices))

    def permuted(self, perm: Sequence[int]) -> "SpaceShape":
        """Shape after sending factor ``i`` to position ``perm[i]``."""
        out: list[Factor | None] = [None] * len(perm)
        for i, p in enumerate(perm):
            out[p] = self.factors[i]
        return SpaceShape(tuple(out))  # type: ignore[arg-type]

    def relabel(self, prefix: str) -> "SpaceShape":
        return SpaceShape(tuple(Factor(f"{prefix}{f.label}", f.dim, f.classical) for f in self.factors))

    def as_classical(self, classical: bool = True) -> "SpaceShape":
        return SpaceShape(tuple(Factor(f.label, f.dim, classical) for f in self.factors))

    def __add__(self, other: "SpaceShape") -> "SpaceShape":
        """Concatenate, renaming clashing labels of ``other`` with primes."""
        taken = set(self.labels)
        extra = []
        for f in other.factors:
            label = f.label
            while label in taken:
                label += "'"
            taken.add(label)
            extra.append(Factor(label, f.dim, f.classical))
        return SpaceShape(self.factors + tuple(extra))


TRIVIAL = SpaceShape()


def ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def basis_projector(dim: int, index: int) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return p


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def kron_all(*mats: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def inverse_permutation(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


def check_permutation(perm: Sequence[int], n: int) -> None:
    if len(perm) != n or sorted(perm) != list(range(n)):
        raise ValueError(f"{tuple(perm)} is not a permutation of {n} factors")


def permute_factors(a: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Conjugate ``a`` by the factor permutation sending factor ``i`` to slot ``perm[i]``.

    ``perm`` is zero-based one-line notation.  With ``perm = (1, 2, 0)`` the
    operator ``r (x) s (x) t`` becomes ``t (x) r (x) s``.
    """
    n = len(dims)
    check_permutation(perm, n)
    if a.shape != (math.prod(dims),) * 2:
        raise ValueError(f"operator shape {a.shape} does not match factor dims {tuple(dims)}")
    inv = inverse_permutation(perm)
    t = a.reshape(tuple(dims) * 2)
    axes = list(inv) + [n + i for i in inv]
    new_dims = [dims[i] for i in inv]
    d = math.prod(new_dims)
    return t.transpose(axes).reshape(d, d)


def permutation_unitary(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Unitary ``W`` with ``W a W^dag == permute_factors(a, dims, perm)``."""
    n = len(dims)
    check_permutation(perm, n)
    inv = inverse_permutation(perm)
    d = math.prod(dims)
    eye = np.eye(d, dtype=complex).reshape(tuple(dims) + (d,))
    return eye.transpose(list(inv) + [n]).reshape(d, d)


def partial_trace(a: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not in ``keep``; kept factors stay in order."""
    n = len(dims)
    keep = sorted(set(keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} factors")
    t = a.reshape(tuple(dims) * 2)
    letters = "abcdefghijklmnopqrstuvwxyz"
    upper = letters.upper()
    if n > 26:
        raise ValueError("too many factors for partial_trace")
    ket_idx = [letters[i] for i in range(n)]
    bra_idx = [letters[i] if i not in keep else upper[i] for i in range(n)]
    out = "".join(letters[i] for i in keep) + "".join(upper[i] for i in keep)
    r = np.einsum("".join(ket_idx) + "".join(bra_idx) + "->" + out, t)
    d = math.prod(dims[i] for i in keep)
    return r.reshape(d, d)


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return a.shape[0] == a.shape[1] and hermiticity_defect(a) <= tol


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Eigenvalues with orthonormal eigenvectors (columns of ``vectors``)."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def projectors(self) -> list[np.ndarray]:
        return [np.outer(v, v.conj()) for v in self.vectors.T]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ dagger(self.vectors)

    def psd_sqrt(self) -> np.ndarray:
        lam = self.eigenvalues
        if np.any(lam < PSD_FLOOR):
            raise ValueError(f"operator is not positive semidefinite (min eigenvalue {lam.min():.3e})")
        root = np.sqrt(np.clip(lam, 0.0, None))
        return (self.vectors * root) @ dagger(self.vectors)


def spectral_decompose(h: np.ndarray, tol: float = HERMITIAN_TOL) -> SpectralDecomp:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    defect = hermiticity_defect(h)
    if defect > tol:
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e})")
    lam, vec = np.linalg.eigh((h + dagger(h)) / 2)
    return SpectralDecomp(lam, vec)


def psd_sqrt(h: np.ndarray) -> np.ndarray:
    return spectral_decompose(h).psd_sqrt()


def trace_norm(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    if a.shape[0] == a.shape[1] and hermiticity_defect(a) <= HERMITIAN_TOL:
        return float(np.sum(np.abs(np.linalg.eigvalsh((a + dagger(a)) / 2))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return 0.5 * trace_norm(a - b)


def td_pure(psi: np.ndarray, phi: np.ndarray) -> float:
    """Trace distance of the rank-one operators of two (unnormalized) vectors."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if psi.shape != phi.shape:
        raise ValueError(f"dimension mismatch: {psi.shape} vs {phi.shape}")
    npsi = np.vdot(psi, psi).real
    nphi = np.vdot(phi, phi).real
    # |psi|^2 |phi|^2 - |<psi|phi>|^2 via the Lagrange identity, free of cancellation
    wedge = np.outer(psi, phi) - np.outer(phi, psi)
    gram_defect = 0.5 * np.vdot(wedge, wedge).real
    return math.sqrt(((npsi - nphi) / 2) ** 2 + gram_defect)


class HelstromPair(NamedTuple):
    positive: np.ndarray
    negative: np.ndarray
    saturation: float


def helstrom_pair(a: np.ndarray, b: np.ndarray) -> HelstromPair:
    """Projectors onto the nonnegative / negative eigenspaces of ``a - b``.

    Eigenvalues in ``[-1e-10, 0)`` count as nonnegative so that the two
    projectors always sum to the identity.
    """
    diff = np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)
    sd = spectral_decompose(diff)
    pos = sd.eigenvalues >= -HERMITIAN_TOL
    vp = sd.vectors[:, pos]
    vn = sd.vectors[:, ~pos]
    p = vp @ dagger(vp)
    q = vn @ dagger(vn)
    sat = float(np.real(np.trace(p @ diff) - np.trace(q @ diff)))
    return HelstromPair(p, q, sat)


class BoundKind(Enum):
    MARKOV_UB = "markov_ub"
    CONC_LB = "conc_lb"
    COPIES_LB = "copies_lb"
    SCALED_TD_LB = "scaled_td_lb"


def bound_eval(kind: BoundKind | str, **params: float) -> float:
    """Evaluate one of the closed-form probability / distance bounds.

    MARKOV_UB(expect, alpha)        expect / alpha
    CONC_LB(expect, alpha, beta)    (expect - alpha) / (beta - alpha)
    COPIES_LB(t, d)                 1 - 2 exp(-t d^2 / 2)
    SCALED_TD_LB(t0, t1, d)         max(t0, t1) / 2 * d
    """
    kind = BoundKind(kind.lower()) if isinstance(kind, str) else kind
    if kind is BoundKind.MARKOV_UB:
        alpha = params["alpha"]
        if alpha <= 0:
            raise ValueError("alpha must be strictly positive")
        return params["expect"] / alpha
    if kind is BoundKind.CONC_LB:
        alpha, beta = params["alpha"], params["beta"]
        if not 0 < alpha < beta:
            raise ValueError("need 0 < alpha < beta")
        return (params["expect"] - alpha) / (beta - alpha)
    if kind is BoundKind.COPIES_LB:
        t, d = params["t"], params["d"]
        if int(t) != t or t < 0 or not 0 <= d <= 1:
            raise ValueError("need integer t >= 0 and d in [0, 1]")
        return 1 - 2 * math.exp(-(t / 2) * d * d)
    if kind is BoundKind.SCALED_TD_LB:
        t0, t1, d = params["t0"], params["t1"], params["d"]
        if t0 < 0 or t1 < 0 or not 0 <= d <= 1:
            raise ValueError("need t0, t1 >= 0 and d in [0, 1]")
        return max(t0, t1) / 2 * d
    raise ValueError(f"unknown bound kind {kind}")


def labeled_blocks(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """``sum_x |x><x| (x) B_x`` for a list of equally sized square blocks."""
    n = len(blocks)
    d = blocks[0].shape[0]
    out = np.zeros((n * d, n * d), dtype=complex)
    for x, b in enumerate(blocks):
        out[x * d:(x + 1) * d, x * d:(x + 1) * d] = b
    return out
