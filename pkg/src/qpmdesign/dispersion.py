"""Refractive index, wavenumber and group delay per crystal axis.

Units at this boundary: wavelength in um (vacuum), angular frequency in
rad/ps, wavenumber in rad/um, group delay in ps/mm.

Queries outside the transparency window still evaluate; they are reported
through :func:`query_flags` and, when ``warn=True``, a
:class:`TransparencyWarning`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .crystal_db import Crystal, get_crystal

C_UM_PER_PS = 299.792458
TWO_PI = 2.0 * np.pi

FLAG_OUTSIDE = "outside-transparency"
FLAG_NO_THERMO = "no-thermo-optic-data"

# relative step in omega for the numerical derivative
FD_REL_STEP = 1e-5


class TransparencyWarning(UserWarning):
    """A wavelength fell outside the crystal transparency window."""


@dataclass(frozen=True)
class AxisModel:
    """Packed coefficients for one crystal axis, ready for the kernels."""

    code: int
    coeffs: np.ndarray
    linear: np.ndarray
    quadratic: np.ndarray
    reference_temperature: float
    has_thermo: bool

    def delta_t(self, temperature: float) -> float:
        return float(temperature - self.reference_temperature) if self.has_thermo else 0.0

    def packed(self):
        return self.code, self.coeffs, self.linear, self.quadratic


@lru_cache(maxsize=64)
def _axis_model(crystal: Crystal, axis: str) -> AxisModel:
    sell = crystal.sellmeier(axis)
    coeffs = np.zeros(6)
    coeffs[: len(sell.coefficients)] = sell.coefficients
    thermo = crystal.thermo(axis)
    lin = np.zeros(4)
    quad = np.zeros(4)
    if thermo is not None:
        lin[:] = thermo.linear
        quad[:] = thermo.quadratic
    for arr in (coeffs, lin, quad):
        arr.setflags(write=False)
    return AxisModel(
        code=_kernels.FORM_CODES[sell.form],
        coeffs=coeffs,
        linear=lin,
        quadratic=quad,
        reference_temperature=crystal.reference_temperature,
        has_thermo=thermo is not None,
    )


def axis_model(crystal, axis: str) -> AxisModel:
    return _axis_model(get_crystal(crystal), axis)


def _resolve(crystal, temperature):
    crystal = get_crystal(crystal)
    T = crystal.default_temperature if temperature is None else float(temperature)
    return crystal, T


def query_flags(crystal, wavelength, temperature=None) -> frozenset[str]:
    """Flags attached to a dispersion query (any of ``wavelength`` may be an array)."""
    crystal, T = _resolve(crystal, temperature)
    lam = np.asarray(wavelength, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("wavelength must be positive")
    lo, hi = crystal.transparency
    flags = set()
    if np.any((lam < lo) | (lam > hi)):
        flags.add(FLAG_OUTSIDE)
    if not crystal.has_thermo_optic and T != crystal.reference_temperature:
        flags.add(FLAG_NO_THERMO)
    return frozenset(flags)


def _check(crystal, lam, T, warn):
    flags = query_flags(crystal, lam, T)
    if warn and FLAG_OUTSIDE in flags:
        lo, hi = crystal.transparency
        warnings.warn(
            f"{crystal.name}: wavelength outside transparency window [{lo}, {hi}] um",
            TransparencyWarning,
            stacklevel=3,
        )
    return flags


def refractive_index(crystal, axis: str, wavelength, temperature=None, *, warn=True, return_flags=False):
    """Refractive index on a principal axis.

    Parameters
    ----------
    crystal : Crystal or str
    axis : {"o", "e"}
    wavelength : float or ndarray
        Vacuum wavelength in um.
    temperature : float, optional
        Crystal temperature in degC; defaults to the crystal's default.
    warn : bool
        Emit :class:`TransparencyWarning` for out-of-window queries.
    return_flags : bool
        Also return the query flags.

    Returns
    -------
    n : float or ndarray
    flags : frozenset of str, only when ``return_flags``
    """
    crystal, T = _resolve(crystal, temperature)
    flags = _check(crystal, wavelength, T, warn)
    model = _axis_model(crystal, axis)
    n = _kernels.refractive_index(*model.packed(), wavelength, model.delta_t(T))
    return (n, flags) if return_flags else n


def wavenumber(crystal, axis: str, wavelength, temperature=None, *, warn=True):
    """k = 2 pi n / lambda in rad/um."""
    n = refractive_index(crystal, axis, wavelength, temperature, warn=warn)
    return TWO_PI * n / np.asarray(wavelength, dtype=float)


def omega_of(wavelength):
    """Angular frequency (rad/ps) of a vacuum wavelength in um."""
    return TWO_PI * C_UM_PER_PS / np.asarray(wavelength, dtype=float)


def wavelength_of(omega):
    return TWO_PI * C_UM_PER_PS / np.asarray(omega, dtype=float)


def group_delay(crystal, axis: str, wavelength, temperature=None, *, warn=True):
    """Inverse group velocity dk/domega in ps/mm, by numerical differentiation.

    Uses dk/dw = (n + w dn/dw)/c with dn/dw from a central difference in
    omega (relative step 1e-5), Richardson-extrapolated once.
    """
    crystal, T = _resolve(crystal, temperature)
    _check(crystal, wavelength, T, warn)
    model = _axis_model(crystal, axis)
    packed = model.packed()
    dT = model.delta_t(T)
    w = omega_of(wavelength)
    h = FD_REL_STEP * w

    def n_at(om):
        return _kernels.refractive_index(*packed, wavelength_of(om), dT)

    d1 = (n_at(w + h) - n_at(w - h)) / (2 * h)
    d2 = (n_at(w + h / 2) - n_at(w - h / 2)) / h
    dn_dw = (4 * d2 - d1) / 3
    n = n_at(w)
    return (n + w * dn_dw) / C_UM_PER_PS * 1000.0


def group_index(crystal, axis: str, wavelength, temperature=None, *, warn=True):
    """n_g = n - lambda dn/dlambda from the closed-form Sellmeier derivative."""
    crystal, T = _resolve(crystal, temperature)
    _check(crystal, wavelength, T, warn)
    model = _axis_model(crystal, axis)
    dT = model.delta_t(T)
    lam = np.asarray(wavelength, dtype=float)
    n = _kernels.refractive_index(*model.packed(), lam, dT)
    dn = _kernels.dindex(*model.packed(), lam, dT)
    return n - lam * dn


def group_delay_analytic(crystal, axis: str, wavelength, temperature=None, *, warn=True):
    """Group delay in ps/mm from the closed-form derivative."""
    return group_index(crystal, axis, wavelength, temperature, warn=warn) / C_UM_PER_PS * 1000.0
