"""Phase mismatch and the root solvers around the quasi-phase-matching condition.

Sign convention: ``dk_m = k_p - k_s - k_i - 2 pi m / period``.  An infinite
period means no grating (bulk phase matching).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .crystal_db import Crystal, PolarizationConfig, get_crystal
from .dispersion import query_flags, wavenumber

BULK = math.inf
# periods above this are reported as bulk candidates (um)
BULK_THRESHOLD = 1e5
ENERGY_RTOL = 1e-12
SCAN_SAMPLES = 2000


class NoGratingError(ValueError):
    """No positive poling period exists for the requested QPM order."""


class BulkPhaseMatchedError(ValueError):
    """The wavelengths are phase matched without a grating."""


def _pols(pols) -> PolarizationConfig:
    return PolarizationConfig.parse(pols) if isinstance(pols, str) else pols


def idler_wavelength(lambda_p, lambda_s):
    """Idler wavelength from energy conservation (um)."""
    return 1.0 / (1.0 / np.asarray(lambda_p, dtype=float) - 1.0 / np.asarray(lambda_s, dtype=float))


def energy_residual(lambda_p, lambda_s, lambda_i) -> float:
    """Relative residual of 1/lp = 1/ls + 1/li."""
    inv_p = 1.0 / lambda_p
    return abs(inv_p - 1.0 / lambda_s - 1.0 / lambda_i) / inv_p


@dataclass(frozen=True)
class SpdcProcess:
    """A fully specified collinear SPDC process.

    Wavelengths are in um, ``length_mm`` in mm and ``period`` in um
    (``BULK`` for no grating).  ``lambda_i`` may be omitted and is then
    filled in from energy conservation.
    """

    crystal: Crystal
    pols: PolarizationConfig
    lambda_p: float
    lambda_s: float
    lambda_i: float | None = None
    temperature: float | None = None
    period: float = BULK
    order: int = 1
    length_mm: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "crystal", get_crystal(self.crystal))
        object.__setattr__(self, "pols", _pols(self.pols))
        if self.temperature is None:
            object.__setattr__(self, "temperature", self.crystal.default_temperature)
        if not (self.lambda_s > self.lambda_p > 0):
            raise ValueError("need lambda_s > lambda_p > 0")
        if self.lambda_i is None:
            object.__setattr__(self, "lambda_i", float(idler_wavelength(self.lambda_p, self.lambda_s)))
        elif energy_residual(self.lambda_p, self.lambda_s, self.lambda_i) > ENERGY_RTOL:
            raise ValueError("energy conservation violated: 1/lp != 1/ls + 1/li")
        if int(self.order) != self.order or self.order % 2 == 0:
            raise ValueError(f"QPM order must be an odd integer, got {self.order}")
        if not self.length_mm > 0:
            raise ValueError("crystal length must be positive")
        if not self.period > 0:
            raise ValueError("poling period must be positive (or BULK)")

    @property
    def is_bulk(self) -> bool:
        return math.isinf(self.period)

    @property
    def flags(self) -> frozenset[str]:
        return query_flags(self.crystal, [self.lambda_p, self.lambda_s, self.lambda_i], self.temperature)

    def with_(self, **changes) -> "SpdcProcess":
        if "lambda_p" in changes or "lambda_s" in changes:
            changes.setdefault("lambda_i", None)
        return replace(self, **changes)


def grating_wavenumber(period: float, order: int = 1) -> float:
    """2 pi m / period in rad/um; zero for bulk."""
    if math.isinf(period):
        return 0.0
    return 2.0 * math.pi * order / period


def material_mismatch(crystal, pols, lambda_p, lambda_s, temperature=None, *, warn=False):
    """k_p - k_s - k_i with no grating term; vectorised over ``lambda_s``."""
    crystal = get_crystal(crystal)
    pols = _pols(pols)
    lambda_i = idler_wavelength(lambda_p, lambda_s)
    return (
        wavenumber(crystal, pols.pump, lambda_p, temperature, warn=warn)
        - wavenumber(crystal, pols.signal, lambda_s, temperature, warn=warn)
        - wavenumber(crystal, pols.idler, lambda_i, temperature, warn=warn)
    )


def phase_mismatch(process: SpdcProcess) -> float:
    """dk_m in rad/um for a process."""
    p = process
    dk0 = (
        wavenumber(p.crystal, p.pols.pump, p.lambda_p, p.temperature, warn=False)
        - wavenumber(p.crystal, p.pols.signal, p.lambda_s, p.temperature, warn=False)
        - wavenumber(p.crystal, p.pols.idler, p.lambda_i, p.temperature, warn=False)
    )
    return float(dk0 - grating_wavenumber(p.period, p.order))


def solve_poling_period(crystal, pols, lambda_p, lambda_s, temperature=None, order=None) -> float:
    """Poling period (um) that phase-matches the given wavelengths.

    ``order=None`` picks the first order whose sign admits a positive period.

    Raises
    ------
    NoGratingError
        The requested order has the wrong sign.
    BulkPhaseMatchedError
        The material mismatch is exactly zero.
    """
    dk0 = float(material_mismatch(crystal, pols, lambda_p, lambda_s, temperature))
    if dk0 == 0.0:
        raise BulkPhaseMatchedError("bulk phase-matched: use period=BULK")
    if order is None:
        order = 1 if dk0 > 0 else -1
    period = 2.0 * math.pi * order / dk0
    if period <= 0:
        raise NoGratingError(f"no grating of order {order}: material mismatch has sign {math.copysign(1, dk0):+.0f}")
    return period


def default_order(crystal, pols, lambda_p, lambda_s, temperature=None) -> int:
    dk0 = float(material_mismatch(crystal, pols, lambda_p, lambda_s, temperature))
    return 1 if dk0 >= 0 else -1


def is_bulk_candidate(period: float) -> bool:
    return period > BULK_THRESHOLD


def signal_window(crystal, lambda_p) -> tuple[float, float] | None:
    """Signal wavelengths whose signal and idler both lie in the transparency window."""
    lo, hi = get_crystal(crystal).transparency
    inv = 1.0 / lambda_p - 1.0 / hi
    if inv <= 0:
        return None
    start = max(lo, 1.0 / inv, lambda_p * (1 + 1e-9))
    if start >= hi:
        return None
    return start, hi


def solve_signal_wavelength(crystal, pols, lambda_p, period, temperature=None, order=1,
                            *, samples=SCAN_SAMPLES, window=None) -> list[float]:
    """All signal wavelengths (um) with dk_m = 0 in the window.

    Bracketed sign-change scan over ``samples`` points followed by Brent
    refinement.  Roots closer than one sample spacing are merged.
    """
    crystal = get_crystal(crystal)
    pols = _pols(pols)
    window = window or signal_window(crystal, lambda_p)
    if window is None:
        return []
    g = grating_wavenumber(period, order)
    xs = np.linspace(window[0], window[1], samples)
    vals = material_mismatch(crystal, pols, lambda_p, xs, temperature) - g

    def f(x):
        return float(material_mismatch(crystal, pols, lambda_p, x, temperature)) - g

    roots = []
    finite = np.isfinite(vals)
    for k in range(samples - 1):
        if not (finite[k] and finite[k + 1]):
            continue
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            roots.append(float(xs[k]))
        elif a * b < 0:
            roots.append(brentq(f, xs[k], xs[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if finite[-1] and vals[-1] == 0.0:
        roots.append(float(xs[-1]))

    spacing = xs[1] - xs[0]
    merged = []
    for r in roots:
        if not merged or r - merged[-1] > spacing:
            merged.append(r)
    return merged


def qpm_amplitude(delta_k, length_mm):
    """psi = exp(i dk L/2) sinc(dk L/2) with the unnormalised sinc."""
    if not length_mm > 0:
        raise ValueError("crystal length must be positive")
    x = 0.5 * np.asarray(delta_k, dtype=float) * (length_mm * 1000.0)
    return np.sinc(x / np.pi) * np.exp(1j * x)


def bulk_phasematch_locus(crystal, pols, lambda_p_values, temperature=None, *, samples=SCAN_SAMPLES):
    """(lambda_p, lambda_s) pairs with k_p - k_s - k_i = 0, in um."""
    out = []
    for lp in np.asarray(lambda_p_values, dtype=float):
        for ls in solve_signal_wavelength(crystal, pols, float(lp), BULK, temperature, samples=samples):
            out.append((float(lp), ls))
    return out
