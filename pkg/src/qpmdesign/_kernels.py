"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``QPMDESIGN_DISABLE_NUMBA`` is
unset (or ``0``).  Both paths evaluate the same arithmetic; the numpy one
broadcasts, the numba one loops.  ``*_py`` / ``*_nb`` names stay importable
for parity tests and the benchmark.
"""

import os

import numpy as np

TWO_PI = 2.0 * np.pi

FORM_CODES = {"two_pole": 0, "two_pole_l0": 1, "two_pole_ir": 2, "kato": 3}


def _env_disabled() -> bool:
    return os.environ.get("QPMDESIGN_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


try:
    if _env_disabled():
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _index_py(code, c, a, b, lam, dT):
    # works on scalars and arrays alike
    l2 = lam * lam
    if code == 0:
        n2 = c[0] + c[1] / (1.0 - c[2] / l2) - c[3] * l2
    elif code == 1:
        n2 = c[0] + c[1] / (1.0 - c[2] * c[2] / l2) - c[3] * l2
    elif code == 2:
        n2 = c[0] + c[1] / (1.0 - c[2] / l2) + c[3] / (1.0 - c[4] / l2) - c[5] * l2
    else:
        n2 = c[0] + c[1] / (l2 - c[2]) + c[3] / (l2 - c[4])
    inv = 1.0 / lam
    lin = a[0] + inv * (a[1] + inv * (a[2] + inv * a[3]))
    quad = b[0] + inv * (b[1] + inv * (b[2] + inv * b[3]))
    return np.sqrt(n2) + dT * lin + dT * dT * quad


def _dindex_py(code, c, a, b, lam, dT):
    """dn/dlambda in 1/um."""
    l2 = lam * lam
    l3 = l2 * lam
    if code == 0:
        n2 = c[0] + c[1] / (1.0 - c[2] / l2) - c[3] * l2
        q = 1.0 - c[2] / l2
        dn2 = -2.0 * c[1] * c[2] / (l3 * q * q) - 2.0 * c[3] * lam
    elif code == 1:
        cc = c[2] * c[2]
        n2 = c[0] + c[1] / (1.0 - cc / l2) - c[3] * l2
        q = 1.0 - cc / l2
        dn2 = -2.0 * c[1] * cc / (l3 * q * q) - 2.0 * c[3] * lam
    elif code == 2:
        n2 = c[0] + c[1] / (1.0 - c[2] / l2) + c[3] / (1.0 - c[4] / l2) - c[5] * l2
        q1 = 1.0 - c[2] / l2
        q2 = 1.0 - c[4] / l2
        dn2 = -2.0 * c[1] * c[2] / (l3 * q1 * q1) - 2.0 * c[3] * c[4] / (l3 * q2 * q2) - 2.0 * c[5] * lam
    else:
        n2 = c[0] + c[1] / (l2 - c[2]) + c[3] / (l2 - c[4])
        r1 = l2 - c[2]
        r2 = l2 - c[4]
        dn2 = -2.0 * c[1] * lam / (r1 * r1) - 2.0 * c[3] * lam / (r2 * r2)
    inv = 1.0 / lam
    inv2 = inv * inv
    dlin = -inv2 * (a[1] + inv * (2.0 * a[2] + inv * 3.0 * a[3]))
    dquad = -inv2 * (b[1] + inv * (2.0 * b[2] + inv * 3.0 * b[3]))
    return dn2 / (2.0 * np.sqrt(n2)) + dT * dlin + dT * dT * dquad


def refractive_index_py(code, c, a, b, lam, dT):
    return _index_py(code, c, a, b, np.asarray(lam, dtype=np.float64), dT)


def dindex_py(code, c, a, b, lam, dT):
    return _dindex_py(code, c, a, b, np.asarray(lam, dtype=np.float64), dT)


def jsa_grid_py(ls, li, pump_axis, dT, grating, length_um, wp0, sigma, ks, ki, c_light):
    """Complex mu*psi on the (signal, idler) wavelength grid.

    ``pump_axis`` = (code, coeffs, lin, quad); ``ks``/``ki`` are the
    precomputed signal/idler wavenumbers on their axes (rad/um).
    """
    code, c, a, b = pump_axis
    inv_s = 1.0 / ls[:, None]
    inv_i = 1.0 / li[None, :]
    inv_p = inv_s + inv_i
    lp = 1.0 / inv_p
    kp = TWO_PI * _index_py(code, c, a, b, lp, dT) * inv_p
    dk = kp - ks[:, None] - ki[None, :] - grating
    x = 0.5 * dk * length_um
    safe = np.where(x == 0.0, 1.0, x)
    sinc = np.where(x == 0.0, 1.0, np.sin(safe) / safe)
    dw = TWO_PI * c_light * inv_p - wp0
    mu = np.exp(-dw * dw / (4.0 * sigma * sigma))
    return mu * sinc * np.exp(1j * x)


def delta_k_grid_py(ls, li, pump_axis, dT, grating, ks, ki):
    code, c, a, b = pump_axis
    inv_p = 1.0 / ls[:, None] + 1.0 / li[None, :]
    kp = TWO_PI * _index_py(code, c, a, b, 1.0 / inv_p, dT) * inv_p
    return kp - ks[:, None] - ki[None, :] - grating


if HAVE_NUMBA:
    _index_scalar = njit(cache=True)(_index_py)
    _dindex_scalar = njit(cache=True)(_dindex_py)

    @njit(cache=True)
    def _index_loop(code, c, a, b, lam, dT, out):
        for k in range(lam.size):
            out[k] = _index_scalar(code, c, a, b, lam[k], dT)

    @njit(cache=True)
    def _dindex_loop(code, c, a, b, lam, dT, out):
        for k in range(lam.size):
            out[k] = _dindex_scalar(code, c, a, b, lam[k], dT)

    def refractive_index_nb(code, c, a, b, lam, dT):
        arr = np.asarray(lam, dtype=np.float64)
        flat = np.ascontiguousarray(arr).ravel()
        out = np.empty_like(flat)
        _index_loop(code, c, a, b, flat, float(dT), out)
        return out.reshape(arr.shape) if arr.ndim else out[0]

    def dindex_nb(code, c, a, b, lam, dT):
        arr = np.asarray(lam, dtype=np.float64)
        flat = np.ascontiguousarray(arr).ravel()
        out = np.empty_like(flat)
        _dindex_loop(code, c, a, b, flat, float(dT), out)
        return out.reshape(arr.shape) if arr.ndim else out[0]

    @njit(cache=True)
    def _jsa_loop(ls, li, code, c, a, b, dT, grating, length_um, wp0, sigma, ks, ki, c_light, out):
        inv4s2 = 1.0 / (4.0 * sigma * sigma)
        for i in range(ls.size):
            inv_s = 1.0 / ls[i]
            for j in range(li.size):
                inv_p = inv_s + 1.0 / li[j]
                kp = TWO_PI * _index_scalar(code, c, a, b, 1.0 / inv_p, dT) * inv_p
                x = 0.5 * (kp - ks[i] - ki[j] - grating) * length_um
                if x == 0.0:
                    sinc = 1.0
                else:
                    sinc = np.sin(x) / x
                dw = TWO_PI * c_light * inv_p - wp0
                mu = np.exp(-dw * dw * inv4s2)
                out[i, j] = mu * sinc * (np.cos(x) + 1j * np.sin(x))

    @njit(cache=True)
    def _dk_loop(ls, li, code, c, a, b, dT, grating, ks, ki, out):
        for i in range(ls.size):
            inv_s = 1.0 / ls[i]
            for j in range(li.size):
                inv_p = inv_s + 1.0 / li[j]
                kp = TWO_PI * _index_scalar(code, c, a, b, 1.0 / inv_p, dT) * inv_p
                out[i, j] = kp - ks[i] - ki[j] - grating

    def jsa_grid_nb(ls, li, pump_axis, dT, grating, length_um, wp0, sigma, ks, ki, c_light):
        code, c, a, b = pump_axis
        out = np.empty((ls.size, li.size), dtype=np.complex128)
        _jsa_loop(ls, li, code, c, a, b, float(dT), float(grating), float(length_um),
                  float(wp0), float(sigma), ks, ki, float(c_light), out)
        return out

    def delta_k_grid_nb(ls, li, pump_axis, dT, grating, ks, ki):
        code, c, a, b = pump_axis
        out = np.empty((ls.size, li.size), dtype=np.float64)
        _dk_loop(ls, li, code, c, a, b, float(dT), float(grating), ks, ki, out)
        return out

    refractive_index = refractive_index_nb
    dindex = dindex_nb
    jsa_grid = jsa_grid_nb
    delta_k_grid = delta_k_grid_nb
else:
    refractive_index = refractive_index_py
    dindex = dindex_py
    jsa_grid = jsa_grid_py
    delta_k_grid = delta_k_grid_py

BACKEND = "numba" if HAVE_NUMBA else "numpy"
