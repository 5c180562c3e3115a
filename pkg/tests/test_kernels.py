import os
import subprocess
import sys

import numpy as np
import pytest

from qpmdesign import _kernels
from qpmdesign.dispersion import C_UM_PER_PS, axis_model, wavenumber

needs_numba = pytest.mark.skipif(not hasattr(_kernels, "jsa_grid_nb"), reason="numba path unavailable")


def _args(n=40):
    ls = np.linspace(1.57, 1.59, n)
    li = np.linspace(1.575, 1.589, n + 3)
    pm = axis_model("KTP", "o")
    return (ls, li, pm.packed(), pm.delta_t(50.0), -0.1365, 30000.0, 1190.0, 0.2,
            wavenumber("KTP", "o", ls), wavenumber("KTP", "e", li), C_UM_PER_PS)


@needs_numba
def test_jsa_parity():
    a = _args()
    assert np.allclose(_kernels.jsa_grid_py(*a), _kernels.jsa_grid_nb(*a), rtol=0, atol=1e-14)


@needs_numba
def test_delta_k_parity():
    a = _args()
    dk = (a[0], a[1], a[2], a[3], a[4], a[8], a[9])
    assert np.allclose(_kernels.delta_k_grid_py(*dk), _kernels.delta_k_grid_nb(*dk), rtol=0, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("name", ["KTP", "CTA", "RTP"])
@pytest.mark.parametrize("axis", ["o", "e"])
def test_index_parity(name, axis):
    m = axis_model(name, axis)
    lam = np.linspace(0.4, 3.5, 301)
    for fpy, fnb in ((_kernels.refractive_index_py, _kernels.refractive_index_nb),
                     (_kernels.dindex_py, _kernels.dindex_nb)):
        assert np.allclose(fpy(*m.packed(), lam, 12.5), fnb(*m.packed(), lam, 12.5), rtol=1e-15, atol=0)
        assert fpy(*m.packed(), 1.3, 0.0) == pytest.approx(float(fnb(*m.packed(), 1.3, 0.0)), rel=1e-15)


def test_env_flag_selects_numpy():
    code = "from qpmdesign import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, QPMDESIGN_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True).stdout.strip()
    assert out == "numpy"


def test_backends_agree_end_to_end():
    code = ("from qpmdesign.joint_spectrum import *; from qpmdesign.design_search import phase_matched_process;"
            "p = phase_matched_process('KTP', 'o:oe', 0.791, 1.582);"
            "print(repr(schmidt_decompose(build_jsa(p, 2.5, GridSpec(128)), with_distinguishability=False).K))")
    vals = []
    for flag in ("0", "1"):
        env = dict(os.environ, QPMDESIGN_DISABLE_NUMBA=flag)
        vals.append(float(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                         text=True, check=True).stdout))
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)
