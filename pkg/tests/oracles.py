"""Independent reference implementations used only by the tests.

Written from the formula grammar in the data file header, in mpmath, with
no code shared with the package.
"""

import math

import mpmath as mp

from qpmdesign.crystal_db import get_crystal

mp.mp.dps = 30
C = mp.mpf("299.792458")


def n_ref(name, axis, lam, T=None):
    cr = get_crystal(name)
    s = cr.sellmeier(axis)
    c = [mp.mpf(v) for v in s.coefficients]
    l = mp.mpf(lam)
    l2 = l * l
    if s.form == "two_pole":
        A, B, Cc, D = c
        n2 = A + B / (1 - Cc / l2) - D * l2
    elif s.form == "two_pole_l0":
        A, B, Cc, D = c
        n2 = A + B / (1 - (Cc / l) ** 2) - D * l2
    elif s.form == "two_pole_ir":
        A, B, Cc, D, E, F = c
        n2 = A + B / (1 - Cc / l2) + D / (1 - E / l2) - F * l2
    elif s.form == "kato":
        A, B, Cc, D, E = c
        n2 = A + B / (l2 - Cc) + D / (l2 - E)
    else:
        raise AssertionError(s.form)
    n = mp.sqrt(n2)
    T = cr.default_temperature if T is None else T
    th = cr.thermo(axis)
    if th is not None:
        dT = mp.mpf(T) - mp.mpf(cr.reference_temperature)
        n += sum(mp.mpf(a) / l ** m for m, a in enumerate(th.linear)) * dT
        n += sum(mp.mpf(b) / l ** m for m, b in enumerate(th.quadratic)) * dT ** 2
    return n


def gd_ref(name, axis, lam, T=None):
    """dk/domega in ps/mm via mpmath differentiation of k(omega)."""

    def k_of_w(w):
        l = 2 * mp.pi * C / w
        return n_ref(name, axis, l, T) * w / C

    w0 = 2 * mp.pi * C / mp.mpf(lam)
    return float(mp.diff(k_of_w, w0) * 1000)


def idler(lp, ls):
    return 1.0 / (1.0 / lp - 1.0 / ls)


def jsa_direct(name, pols, lp, ls_axis, li_axis, period, order, L_mm, tau_ps, T=None):
    """Pair amplitude by explicit loops in plain floats (unnormalised)."""
    tb = 0.441 / tau_ps
    sigma = 2 * math.pi * tb / (2 * math.sqrt(2 * math.log(2)))
    w0 = 2 * math.pi * float(C) / lp
    g = 0.0 if math.isinf(period) else 2 * math.pi * order / period
    out = []
    for s in ls_axis:
        row = []
        ks = 2 * math.pi * float(n_ref(name, pols[2], s, T)) / s
        for i in li_axis:
            ki = 2 * math.pi * float(n_ref(name, pols[3], i, T)) / i
            lpp = 1.0 / (1.0 / s + 1.0 / i)
            kp = 2 * math.pi * float(n_ref(name, pols[0], lpp, T)) / lpp
            dk = kp - ks - ki - g
            x = dk * L_mm * 1000 / 2
            sinc = 1.0 if x == 0 else math.sin(x) / x
            dw = 2 * math.pi * float(C) / lpp - w0
            row.append(math.exp(-dw * dw / (4 * sigma * sigma)) * sinc * complex(math.cos(x), math.sin(x)))
        out.append(row)
    return out
