import math
import warnings

import numpy as np
import pytest

from qpmdesign import dispersion as dp
from qpmdesign.crystal_db import CRYSTAL_NAMES, get_crystal

from .oracles import gd_ref, n_ref

# group delays of degenerate type-II KTP at 50 degC, ps/mm
GD_KTP = [
    (0.791, "o", 6.027),
    (1.582, "o", 5.880),
    (1.582, "e", 6.175),
    (0.612, "o", 6.209),
    (1.224, "e", 6.208),
    (1.224, "o", 5.903),
]


@pytest.mark.parametrize("name", CRYSTAL_NAMES)
@pytest.mark.parametrize("axis", ["o", "e"])
@pytest.mark.parametrize("lam", [0.45, 0.8, 1.55, 2.5])
def test_index_matches_oracle(name, axis, lam):
    n = dp.refractive_index(name, axis, lam)
    assert n == pytest.approx(float(n_ref(name, axis, lam)), abs=1e-12)


@pytest.mark.parametrize("name", CRYSTAL_NAMES)
@pytest.mark.parametrize("axis", ["o", "e"])
@pytest.mark.parametrize("lam", [0.5, 0.9, 1.6])
def test_group_delay_matches_oracle(name, axis, lam):
    ref = gd_ref(name, axis, lam)
    assert dp.group_delay(name, axis, lam) == pytest.approx(ref, abs=1e-7)
    assert dp.group_delay_analytic(name, axis, lam) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("lam,axis,expected", GD_KTP)
def test_ktp_group_delays(lam, axis, expected):
    assert dp.group_delay("KTP", axis, lam) == pytest.approx(expected, abs=0.02)


def test_ktp_index_spot_values():
    # literature n_z(1064 nm) of flux-grown KTP is about 1.830
    assert dp.refractive_index("KTP", "e", 1.064, 25.0) == pytest.approx(1.830, abs=2e-3)


def test_vectorised():
    lam = np.linspace(0.5, 2.0, 7)
    n = dp.refractive_index("KTP", "o", lam)
    assert n.shape == lam.shape
    assert np.allclose(n, [dp.refractive_index("KTP", "o", float(x)) for x in lam], rtol=0, atol=0)


def test_normal_dispersion():
    lam = np.linspace(0.5, 3.0, 200)
    for name in CRYSTAL_NAMES:
        for axis in "oe":
            assert np.all(np.diff(dp.refractive_index(name, axis, lam)) < 0)


def test_temperature_dependence():
    a = dp.refractive_index("KTP", "e", 1.0, 25.0)
    b = dp.refractive_index("KTP", "e", 1.0, 80.0)
    assert b > a
    # reference temperature gives the bare Sellmeier value
    assert dp.refractive_index("KTP", "e", 1.0, 25.0) == pytest.approx(float(n_ref("KTP", "e", 1.0, 25.0)), abs=1e-13)


def test_flags_and_warning():
    with pytest.warns(dp.TransparencyWarning):
        _, flags = dp.refractive_index("KTP", "o", 5.0, return_flags=True)
    assert dp.FLAG_OUTSIDE in flags
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        dp.refractive_index("KTP", "o", 5.0, warn=False)
    # crystals without thermo-optic data flag off-reference temperatures
    cta = get_crystal("CTA")
    assert not cta.has_thermo_optic
    assert dp.FLAG_NO_THERMO in dp.query_flags(cta, 1.0, cta.reference_temperature + 10)
    assert dp.FLAG_NO_THERMO not in dp.query_flags(cta, 1.0, cta.reference_temperature)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_rejects_non_positive(bad):
    with pytest.raises(ValueError):
        dp.refractive_index("KTP", "o", bad)


def test_wavenumber_and_omega():
    k = dp.wavenumber("KTP", "o", 1.0)
    assert k == pytest.approx(2 * math.pi * dp.refractive_index("KTP", "o", 1.0))
    assert dp.wavelength_of(dp.omega_of(1.3)) == pytest.approx(1.3, rel=1e-15)


def test_constant_index_group_delay_exact(monkeypatch):
    # with a wavelength-independent index the group delay is n/c exactly
    from qpmdesign import _kernels

    monkeypatch.setattr(_kernels, "refractive_index", lambda code, c, a, b, lam, dT: np.full_like(np.asarray(lam, float), 1.75))
    assert dp.group_delay("KTP", "o", 1.0) == pytest.approx(1.75 / dp.C_UM_PER_PS * 1000, rel=1e-14)
