import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qpmdesign import joint_spectrum as jsm
from qpmdesign import qpm
from qpmdesign.crystal_db import CRYSTAL_NAMES
from qpmdesign.dispersion import group_delay, group_delay_analytic

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
matrices = st.integers(2, 12).flatmap(
    lambda n: st.integers(2, 12).flatmap(lambda m: st.tuples(arrays(float, (n, m), elements=finite),
                                                             arrays(float, (n, m), elements=finite))))
square = st.integers(2, 12).flatmap(
    lambda n: st.tuples(arrays(float, (n, n), elements=finite), arrays(float, (n, n), elements=finite)))
crystals = st.sampled_from(CRYSTAL_NAMES)
type2 = st.sampled_from(["o:oe", "e:ee", "e:oo", "o:eo"])
slow = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _complex(pair):
    re, im = pair
    A = re + 1j * im
    assume(np.linalg.norm(A) > 1e-6)
    return A


@given(matrices)
def test_schmidt_normalisation(pair):
    A = _complex(pair)
    lam = jsm.schmidt_coefficients(A)
    assert abs(lam.sum() - 1) < 1e-9
    K = jsm.schmidt_number(A)
    assert abs(1 / K - float(np.sum(lam ** 2))) < 1e-9
    assert 1 - 1e-12 <= K <= min(A.shape) + 1e-9


@given(matrices)
def test_transpose_invariance(pair):
    A = _complex(pair)
    assert np.allclose(jsm.schmidt_coefficients(A), jsm.schmidt_coefficients(A.T), atol=1e-12)


@given(st.integers(2, 30), st.integers(2, 30), st.data())
def test_rank_one(n, m, data):
    x = data.draw(arrays(float, n, elements=st.floats(0.1, 5)))
    y = data.draw(arrays(float, m, elements=st.floats(0.1, 5)))
    ph = data.draw(arrays(float, m, elements=st.floats(-3, 3)))
    A = np.outer(x, y * np.exp(1j * ph))
    assert abs(jsm.schmidt_number(A) - 1) < 1e-9


@given(square)
def test_distinguishability_bounds(pair):
    A = _complex(pair)
    js = jsm.JointSpectrum.from_array(A)
    d = jsm.distinguishability(js, compensate_delay=False, details=True)
    assert 0 <= d.delta <= 1
    rho_s, rho_i = jsm.reduced_states(js)
    # Cauchy-Schwarz on the Hilbert-Schmidt product
    assert d.overlap <= math.sqrt(jsm.purity_of(rho_s) * jsm.purity_of(rho_i)) + 1e-12


@slow
@given(crystals, type2, st.floats(0.45, 1.2), st.floats(0.05, 0.95))
def test_inverse_pair(name, pols, lp, frac):
    w = qpm.signal_window(name, lp)
    assume(w is not None)
    ls = w[0] + frac * (min(w[1], 2 * lp) - w[0])
    assume(ls > lp * 1.01)
    try:
        order = qpm.default_order(name, pols, lp, ls)
        period = qpm.solve_poling_period(name, pols, lp, ls, order=order)
    except qpm.BulkPhaseMatchedError:
        return
    roots = qpm.solve_signal_wavelength(name, pols, lp, period, order=order)
    assert min(abs(r - ls) for r in roots) < 1e-9
    for r in roots:
        p = qpm.SpdcProcess(name, pols, lp, r, period=period, order=order)
        assert abs(qpm.phase_mismatch(p)) * period / (2 * math.pi) < 1e-10


@given(st.floats(0.3, 2.0), st.floats(1.01, 20.0))
def test_energy_conservation(lp, ratio):
    p = qpm.SpdcProcess("KTP", "o:oe", lp, lp * ratio)
    assert qpm.energy_residual(p.lambda_p, p.lambda_s, p.lambda_i) < 1e-12


@slow
@given(crystals, st.sampled_from("oe"), st.floats(0.4, 3.0))
def test_group_delay_routes_agree(name, axis, lam):
    assert abs(group_delay(name, axis, lam, warn=False) - group_delay_analytic(name, axis, lam, warn=False)) < 1e-6


@slow
@given(crystals, st.floats(0.5, 0.8), st.floats(1.3, 1.95))
def test_dispersion_parameter_branches(name, lp, r):
    d = jsm.dispersion_parameter(name, "o:oe", lp, lp * r)
    if math.isfinite(d.branch_a) and d.branch_a != 0:
        assert abs(d.branch_a * d.branch_b - 1) < 1e-9
        assert abs(d.value) <= 1 + 1e-12


@given(st.floats(0.5, 50), st.sampled_from(["amplitude", "intensity"]))
def test_filter_profile_peak_and_width(fwhm_nm, convention):
    x = np.linspace(-3 * fwhm_nm, 3 * fwhm_nm, 4001) / 1000
    t = jsm.filter_profile(x, 0.0, fwhm_nm, convention)
    assert t.max() <= 1 and abs(t[2000] - 1) < 1e-15
    power = t if convention == "amplitude" else t ** 2
    assert abs(jsm.fwhm(x, power) * 1000 / fwhm_nm - 1) < 1e-3
