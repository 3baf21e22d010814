import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtamper import _kernels
from qtamper.randomness import make_rng, random_kraus

needs_numba = pytest.mark.skipif(_kernels.sandwich_numba is None, reason="numba path disabled")


@needs_numba
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4), st.integers(1, 3),
       st.integers(1, 5), st.integers(1, 5))
def test_backends_agree(seed, din, dout, r, nu, nv):
    rng = make_rng(seed)
    k = random_kraus(rng, din, dout, r)
    x = rng.normal(size=(din, nu, din, nv)) + 1j * rng.normal(size=(din, nu, din, nv))
    a = _kernels.sandwich_numpy(k, x)
    b = _kernels.sandwich_numba(k, x)
    assert np.max(np.abs(a - b)) < 1e-12


@needs_numba
def test_non_contiguous_inputs():
    rng = make_rng(0)
    k = random_kraus(rng, 2, 2, 2)
    x = (rng.normal(size=(2, 3, 2, 3)) + 0j).transpose(0, 3, 2, 1)
    assert np.allclose(_kernels.sandwich_numba(k, x), _kernels.sandwich_numpy(k, x), atol=1e-13)


def test_env_switch_selects_numpy():
    env = dict(os.environ, QTAMPER_NUMBA="0")
    code = "from qtamper import _kernels, BACKEND; print(BACKEND, _kernels.sandwich_numba is None)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]


def test_numpy_backend_runs_an_audit():
    env = dict(os.environ, QTAMPER_NUMBA="0")
    code = ("from qtamper.audit import run_audit, AuditCase; "
            "r = run_audit(AuditCase('T16', {'n': 2})); print(r.passed)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "True"
