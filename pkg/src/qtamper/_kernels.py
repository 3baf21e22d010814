"""Hot kernel: apply a Kraus family to one tensor slot of a larger operator.

The operator is viewed as ``X[x, u, y, v]`` where ``x, y`` index the
targeted factors (ket/bra) and ``u, v`` everything else.  The kernel
returns ``sum_i K_i X K_i^dag`` acting on the targeted slot only.

Two implementations exist.  The compiled one skips zero Kraus entries,
which pays off for the measurement and classical channels that make up
most schemes.  Set ``QTAMPER_NUMBA=0`` to force the pure numpy path.
"""

from __future__ import annotations

import os

import numpy as np

_CHUNK_ELEMS = 1 << 22


def sandwich_numpy(kraus: np.ndarray, x: np.ndarray) -> np.ndarray:
    r, dout, din = kraus.shape
    _, nu, _, nv = x.shape
    out = np.zeros((dout, nu, dout, nv), dtype=complex)
    per_op = dout * nu * din * nv
    step = max(1, _CHUNK_ELEMS // max(per_op, 1))
    kc = kraus.conj()
    for s in range(0, r, step):
        ks = kraus[s:s + step]
        # (k, a, u, y, v)
        t = np.tensordot(ks, x, axes=([2], [0]))
        # contract Kraus index and bra slot -> (a, u, v, b)
        out += np.tensordot(t, kc[s:s + step], axes=([0, 3], [0, 2])).transpose(0, 1, 3, 2)
    return out


try:
    if os.environ.get("QTAMPER_NUMBA", "1") == "0":
        raise ImportError("numba disabled by QTAMPER_NUMBA=0")
    from numba import njit

    @njit(cache=True)
    def _sandwich_nb(kraus, x):
        r, dout, din = kraus.shape
        nu = x.shape[1]
        nv = x.shape[3]
        out = np.zeros((dout, nu, dout, nv), dtype=np.complex128)
        tmp = np.empty((dout, nu, din, nv), dtype=np.complex128)
        for i in range(r):
            tmp[:] = 0.0
            for a in range(dout):
                for xx in range(din):
                    c = kraus[i, a, xx]
                    if c == 0:
                        continue
                    for u in range(nu):
                        for y in range(din):
                            for v in range(nv):
                                tmp[a, u, y, v] += c * x[xx, u, y, v]
            for b in range(dout):
                for y in range(din):
                    c = np.conj(kraus[i, b, y])
                    if c == 0:
                        continue
                    for a in range(dout):
                        for u in range(nu):
                            for v in range(nv):
                                out[a, u, b, v] += c * tmp[a, u, y, v]
        return out

    def _c128(a: np.ndarray) -> np.ndarray:
        if a.dtype == np.complex128 and a.flags.c_contiguous:
            return a
        return np.ascontiguousarray(a, dtype=np.complex128)

    def sandwich_numba(kraus: np.ndarray, x: np.ndarray) -> np.ndarray:
        return _sandwich_nb(_c128(kraus), _c128(x))

    BACKEND = "numba"
except ImportError:  # pragma: no cover - exercised only without numba
    sandwich_numba = None
    BACKEND = "numpy"


def sandwich(kraus: np.ndarray, x: np.ndarray) -> np.ndarray:
    if sandwich_numba is not None:
        return sandwich_numba(kraus, x)
    return sandwich_numpy(kraus, x)
