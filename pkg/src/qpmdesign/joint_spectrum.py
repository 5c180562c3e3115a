"""Joint spectral amplitude on a wavelength grid and the figures of merit derived from it.

The JSA is the product of a Gaussian pump envelope in omega_s + omega_i and
the QPM amplitude evaluated with the full (not linearised) dispersion.  Grids
are uniform in wavelength and normalised so that sum |A|^2 = 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .dispersion import C_UM_PER_PS, axis_model, group_delay, omega_of, wavenumber
from .qpm import SpdcProcess, grating_wavenumber, phase_mismatch, qpm_amplitude

TIME_BANDWIDTH = 0.441
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
DEFAULT_RESOLUTION = 512
DEFAULT_WINDOW_FACTOR = 4.0
# |dk_m| at the grid centre must be below this (rad/um) unless the check is skipped
PHASE_MATCH_TOL = 1e-6

FLAG_AXES_DIFFER = "axes-differ"
FLAG_WINDOW_CLIPPED = "window-clipped"


class NotPhaseMatchedError(ValueError):
    """The process is not phase matched at the requested grid centre."""


class FilterResolutionError(ValueError):
    """Filter narrower than the grid can represent."""


class EmptySpectrumError(ValueError):
    """Every grid sample underflowed to zero (features narrower than the grid spacing)."""


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PumpPulse:
    """Transform-limited Gaussian pump.

    ``tau_ps`` is the intensity FWHM duration; the intensity FWHM bandwidth
    is 0.441/tau in THz.
    """

    lambda_p0: float
    tau_ps: float

    def __post_init__(self):
        if not self.tau_ps > 0:
            raise ValueError("pulse duration must be positive")
        if not self.lambda_p0 > 0:
            raise ValueError("pump wavelength must be positive")

    @property
    def fwhm_thz(self) -> float:
        return TIME_BANDWIDTH / self.tau_ps

    @property
    def sigma_omega(self) -> float:
        """Standard deviation of the spectral intensity in rad/ps."""
        return 2.0 * math.pi * self.fwhm_thz * FWHM_TO_SIGMA

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * C_UM_PER_PS / self.lambda_p0


def pump_amplitude(pump: PumpPulse, omega_sum):
    """Gaussian amplitude in omega_s + omega_i with flat spectral phase."""
    dw = np.asarray(omega_sum, dtype=float) - pump.omega0
    return np.exp(-dw * dw / (4.0 * pump.sigma_omega ** 2)) + 0j


@dataclass(frozen=True)
class GridSpec:
    """Grid resolution and window.

    ``half_width_um`` overrides the automatic window, which spans
    ``window_factor`` times the estimated joint-spectrum half-width.
    """

    resolution: int = DEFAULT_RESOLUTION
    window_factor: float = DEFAULT_WINDOW_FACTOR
    half_width_um: float | None = None

    def __post_init__(self):
        if self.resolution < 8:
            raise ValueError("grid resolution must be at least 8")
        if not self.window_factor > 0:
            raise ValueError("window factor must be positive")


@dataclass(frozen=True, eq=False)
class JointSpectrum:
    amplitude: np.ndarray
    lambda_s: np.ndarray
    lambda_i: np.ndarray
    process: SpdcProcess | None = None
    pump: PumpPulse | None = None
    flags: frozenset = frozenset()

    def __post_init__(self):
        A = np.asarray(self.amplitude, dtype=np.complex128)
        if A.ndim != 2 or A.shape != (len(self.lambda_s), len(self.lambda_i)):
            raise ValueError("amplitude shape must match the axes")
        if not np.all(np.isfinite(A)):
            raise ValueError("joint spectrum contains non-finite entries")
        norm = np.sqrt(np.sum(np.abs(A) ** 2))
        if norm == 0:
            raise EmptySpectrumError("joint spectrum is identically zero on this grid")
        object.__setattr__(self, "amplitude", _frozen(A / norm))
        object.__setattr__(self, "lambda_s", _frozen(np.asarray(self.lambda_s, dtype=float)))
        object.__setattr__(self, "lambda_i", _frozen(np.asarray(self.lambda_i, dtype=float)))
        object.__setattr__(self, "flags", frozenset(self.flags))

    @classmethod
    def from_array(cls, amplitude, lambda_s=None, lambda_i=None, **kw) -> "JointSpectrum":
        A = np.asarray(amplitude)
        ls = np.arange(A.shape[0], dtype=float) if lambda_s is None else lambda_s
        li = np.arange(A.shape[1], dtype=float) if lambda_i is None else lambda_i
        return cls(A, ls, li, **kw)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    @property
    def shape(self):
        return self.amplitude.shape

    @property
    def spacing_um(self) -> tuple[float, float]:
        return float(self.lambda_s[1] - self.lambda_s[0]), float(self.lambda_i[1] - self.lambda_i[0])

    def transpose(self) -> "JointSpectrum":
        return JointSpectrum(self.amplitude.T, self.lambda_i, self.lambda_s, flags=self.flags)

    def metadata(self) -> dict:
        meta = {
            "shape": list(self.shape),
            "lambda_s_um": [float(self.lambda_s[0]), float(self.lambda_s[-1])],
            "lambda_i_um": [float(self.lambda_i[0]), float(self.lambda_i[-1])],
            "normalization": "sum |A|^2 = 1",
            "flags": sorted(self.flags),
        }
        if self.process is not None:
            p = self.process
            meta["process"] = {
                "crystal": p.crystal.name,
                "pols": str(p.pols),
                "lambda_p_um": p.lambda_p,
                "lambda_s_um": p.lambda_s,
                "lambda_i_um": p.lambda_i,
                "temperature_C": p.temperature,
                "period_um": None if p.is_bulk else p.period,
                "order": p.order,
                "length_mm": p.length_mm,
            }
        if self.pump is not None:
            meta["pump"] = {"lambda_p0_um": self.pump.lambda_p0, "tau_ps": self.pump.tau_ps}
        return meta

    def to_matrix_text(self, mode: str = "amplitude") -> str:
        """One row per signal sample; complex entries written as ``re,im``."""
        rows = []
        if mode == "amplitude":
            for row in self.amplitude:
                rows.append(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
        elif mode == "intensity":
            for row in self.intensity:
                rows.append(" ".join(f"{v:.17g}" for v in row))
        else:
            raise ValueError("mode must be 'amplitude' or 'intensity'")
        return "\n".join(rows) + "\n"

    def save(self, directory, stem: str = "jsa", modes=("amplitude", "intensity")) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for mode in modes:
            path = directory / f"{stem}_{mode}.txt"
            path.write_text(self.to_matrix_text(mode))
            written.append(path)
        meta = self.metadata()
        meta["lambda_s_axis_um"] = self.lambda_s.tolist()
        meta["lambda_i_axis_um"] = self.lambda_i.tolist()
        path = directory / f"{stem}_meta.json"
        path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        written.append(path)
        return written


def load_matrix_text(text: str) -> np.ndarray:
    """Inverse of :meth:`JointSpectrum.to_matrix_text`."""
    rows = [line.split() for line in text.strip().splitlines()]
    if rows and "," in rows[0][0]:
        return np.array([[complex(*map(float, z.split(","))) for z in r] for r in rows])
    return np.array([[float(v) for v in r] for r in rows])


def _beta2(crystal, axis, lam, T):
    """d(GD)/domega in ps^2/um."""
    w = float(omega_of(lam))
    h = 1e-3 * w
    lo = group_delay(crystal, axis, 2 * math.pi * C_UM_PER_PS / (w - h), T, warn=False)
    hi = group_delay(crystal, axis, 2 * math.pi * C_UM_PER_PS / (w + h), T, warn=False)
    return (hi - lo) / (2 * h) / 1000.0


@lru_cache(maxsize=4096)
def _gvm_terms(process: SpdcProcess):
    """(a, b, beta) for the window estimate: GVM in ps/um and summed GVD in ps^2/um."""
    p = process
    c, T = p.crystal, p.temperature
    gd_p = group_delay(c, p.pols.pump, p.lambda_p, T, warn=False) / 1000.0
    a = gd_p - group_delay(c, p.pols.signal, p.lambda_s, T, warn=False) / 1000.0
    b = gd_p - group_delay(c, p.pols.idler, p.lambda_i, T, warn=False) / 1000.0
    beta = abs(_beta2(c, p.pols.signal, p.lambda_s, T) + _beta2(c, p.pols.idler, p.lambda_i, T))
    return float(a), float(b), float(beta)


def window_half_width(process: SpdcProcess, pump: PumpPulse, window_factor=DEFAULT_WINDOW_FACTOR) -> float:
    """Half-width (um) of the wavelength window shared by both axes.

    Intersects the pump band |Ws + Wi| <= 2 sigma with the first-order
    phase-matching band |a Ws + b Wi| <= 2 pi / L.  When the two bands are
    nearly parallel the anti-diagonal extent is bounded by the second-order
    dispersion instead.
    """
    a, b, beta = _gvm_terms(process)
    P = 2.0 * pump.sigma_omega
    Q = 2.0 * math.pi / (process.length_mm * 1000.0)
    w_quad = P + math.sqrt(2.0 * Q / beta) if beta > 0 else math.inf
    w_lin = (max(abs(a), abs(b)) * P + Q) / abs(b - a) if b != a else math.inf
    w = window_factor * min(w_lin, w_quad)
    lam = max(process.lambda_s, process.lambda_i)
    return lam * lam / (2.0 * math.pi * C_UM_PER_PS) * w


def build_jsa(process: SpdcProcess, pump: PumpPulse | float, grid: GridSpec | None = None,
              *, components: str = "both", check_phase_matched: bool = True) -> JointSpectrum:
    """Sample mu * psi on a uniform (lambda_s, lambda_i) grid.

    Parameters
    ----------
    process : SpdcProcess
        Centre wavelengths, grating and crystal length.
    pump : PumpPulse or float
        A float is taken as the pulse duration in ps at the process pump wavelength.
    grid : GridSpec, optional
    components : {"both", "pump", "phasematching"}
        Which factors to include; the single-factor grids feed plots.
    check_phase_matched : bool
        Refuse processes whose centre is not phase matched.
    """
    if not isinstance(pump, PumpPulse):
        pump = PumpPulse(process.lambda_p, float(pump))
    grid = grid or GridSpec()
    if check_phase_matched and abs(phase_mismatch(process)) > PHASE_MATCH_TOL:
        raise NotPhaseMatchedError(
            f"process not phase matched at the grid centre (|dk| = {abs(phase_mismatch(process)):.3g} rad/um)"
        )
    flags = set(process.flags)
    d = grid.half_width_um or window_half_width(process, pump, grid.window_factor)
    limit = 0.5 * min(process.lambda_s, process.lambda_i)
    if d > limit:
        d = limit
        flags.add(FLAG_WINDOW_CLIPPED)
    n = grid.resolution
    ls = np.linspace(process.lambda_s - d, process.lambda_s + d, n)
    li = np.linspace(process.lambda_i - d, process.lambda_i + d, n)
    lo, hi = process.crystal.transparency
    if ls[0] < lo or li[0] < lo or ls[-1] > hi or li[-1] > hi:
        flags.add("outside-transparency")

    c, T, pols = process.crystal, process.temperature, process.pols
    ks = wavenumber(c, pols.signal, ls, T, warn=False)
    ki = wavenumber(c, pols.idler, li, T, warn=False)
    pm = axis_model(c, pols.pump)
    packed = pm.packed()
    dT = pm.delta_t(T)
    g = grating_wavenumber(process.period, process.order)
    L_um = process.length_mm * 1000.0

    if components == "both":
        A = _kernels.jsa_grid(ls, li, packed, dT, g, L_um, pump.omega0, pump.sigma_omega, ks, ki, C_UM_PER_PS)
    elif components == "pump":
        wsum = 2 * math.pi * C_UM_PER_PS * (1.0 / ls[:, None] + 1.0 / li[None, :])
        A = pump_amplitude(pump, wsum)
    elif components == "phasematching":
        dk = _kernels.delta_k_grid(ls, li, packed, dT, g, ks, ki)
        A = qpm_amplitude(dk, process.length_mm)
    else:
        raise ValueError("components must be 'both', 'pump' or 'phasematching'")
    return JointSpectrum(A, ls, li, process=process, pump=pump, flags=frozenset(flags))


# ---------------------------------------------------------------- decomposition


def schmidt_coefficients(matrix) -> np.ndarray:
    """Squared singular values normalised to unit sum, descending."""
    M = np.asarray(matrix)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains non-finite entries")
    s = np.linalg.svd(M, compute_uv=False)
    lam = s * s
    return lam / lam.sum()


def schmidt_number(matrix) -> float:
    lam = schmidt_coefficients(matrix)
    return float(1.0 / np.sum(lam * lam))


def schmidt_number_gram(matrix) -> float:
    """Schmidt number without an SVD: K = ||M||_F^4 / ||M M^H||_F^2.

    Same quantity as :func:`schmidt_number` (sum of s^4 is the squared
    Frobenius norm of the Gram matrix); roughly ten times cheaper, used by
    the search loops.
    """
    M = np.asarray(matrix)
    G = M @ M.conj().T
    n2 = float(np.sum(np.abs(M) ** 2))
    return n2 * n2 / float(np.sum(np.abs(G) ** 2))


@dataclass(frozen=True)
class Marginals:
    signal: np.ndarray
    idler: np.ndarray
    fwhm_s_nm: float
    fwhm_i_nm: float
    peak_s_um: float
    peak_i_um: float

    @property
    def bandwidth_ratio(self) -> float:
        return self.fwhm_s_nm / self.fwhm_i_nm


def fwhm(x, y) -> float:
    """Full width at half maximum with linear interpolation between samples.

    Returns nan when the curve does not fall to half maximum inside ``x``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = int(np.argmax(y))
    half = 0.5 * y[k]
    left = k
    while left > 0 and y[left - 1] >= half:
        left -= 1
    right = k
    while right < len(y) - 1 and y[right + 1] >= half:
        right += 1
    if left == 0 or right == len(y) - 1:
        return float("nan")
    xl = x[left - 1] + (half - y[left - 1]) * (x[left] - x[left - 1]) / (y[left] - y[left - 1])
    xr = x[right] + (y[right] - half) * (x[right + 1] - x[right]) / (y[right] - y[right + 1])
    return float(xr - xl)


def marginals(js: JointSpectrum) -> Marginals:
    I = js.intensity
    ms = I.sum(axis=1)
    mi = I.sum(axis=0)
    return Marginals(
        signal=ms,
        idler=mi,
        fwhm_s_nm=fwhm(js.lambda_s, ms) * 1000.0,
        fwhm_i_nm=fwhm(js.lambda_i, mi) * 1000.0,
        peak_s_um=float(js.lambda_s[np.argmax(ms)]),
        peak_i_um=float(js.lambda_i[np.argmax(mi)]),
    )


def reduced_states(js_or_matrix):
    """Trace-normalised reduced density matrices (rho_s, rho_i)."""
    A = js_or_matrix.amplitude if isinstance(js_or_matrix, JointSpectrum) else np.asarray(js_or_matrix)
    rho_s = A @ A.conj().T
    rho_i = A.T @ A.conj()
    return rho_s / np.trace(rho_s).real, rho_i / np.trace(rho_i).real


def purity_of(rho) -> float:
    return float(np.real(np.sum(rho * rho.T)))


def hom_visibility_bound(rho_a, rho_b) -> float:
    """(P_a + P_b)/2 - ||rho_a - rho_b||_F^2 / 2, i.e. Tr(rho_a rho_b)."""
    rho_a = np.asarray(rho_a)
    rho_b = np.asarray(rho_b)
    if rho_a.shape != rho_b.shape:
        raise ValueError("density matrices must share one wavelength axis")
    diff = np.linalg.norm(rho_a - rho_b) ** 2
    return float(0.5 * (purity_of(rho_a) + purity_of(rho_b)) - 0.5 * diff)


@dataclass(frozen=True)
class Distinguishability:
    delta: float
    overlap: float
    delay_ps: float
    delta_uncompensated: float
    axes_differ: bool


def _idler_omega(js: JointSpectrum):
    if js.process is None and js.lambda_i[0] == 0.0:
        return None
    return omega_of(js.lambda_i) if js.lambda_i[0] > 0 else None


def distinguishability(js: JointSpectrum, *, compensate_delay: bool = True, details: bool = False):
    """Spectral distinguishability of signal and idler from the same pair.

    Compares the reduced states index by index on their own axes.  With
    ``compensate_delay`` the idler state is first shifted by the relative
    delay that maximises the overlap Tr(rho_s V rho_i V^H), V = diag(exp(i w t));
    a fixed delay line does not change spectral purity but removes the
    linear spectral phase left by group-velocity mismatch.
    """
    rho_s, rho_i = reduced_states(js)
    Ps, Pi = purity_of(rho_s), purity_of(rho_i)
    raw_overlap = float(np.real(np.sum(rho_s * rho_i.T)))
    raw_delta = 0.5 * (Ps + Pi) - raw_overlap
    axes_differ = not np.allclose(js.lambda_s, js.lambda_i, rtol=1e-12, atol=0)

    overlap, delay = raw_overlap, 0.0
    w = _idler_omega(js)
    if compensate_delay and w is not None:
        M = rho_s.T * rho_i  # Tr(rho_s V rho_i V^H) = v^T M v*
        wc = w - w.mean()
        dw = abs(wc[1] - wc[0])
        mi = np.real(np.diag(rho_i))
        spread = math.sqrt(max(float(np.sum(mi * wc ** 2) - np.sum(mi * wc) ** 2), dw * dw))
        step = 0.25 / spread
        t_max = math.pi / dw
        ts = np.arange(-t_max, t_max + step / 2, step)

        def ov(t):
            v = np.exp(1j * np.multiply.outer(np.atleast_1d(t), wc))
            return np.real(np.sum((v @ M) * v.conj(), axis=1))

        vals = np.concatenate([ov(ts[k:k + 256]) for k in range(0, len(ts), 256)])
        t0 = ts[int(np.argmax(vals))]
        res = minimize_scalar(lambda t: -ov(t)[0], bounds=(t0 - step, t0 + step), method="bounded",
                              options={"xatol": 1e-9 * max(1.0, abs(t0))})
        best = -float(res.fun)
        if best >= vals.max():
            overlap, delay = best, float(res.x)
        else:
            overlap, delay = float(vals.max()), float(t0)
        if raw_overlap > overlap:
            overlap, delay = raw_overlap, 0.0
    delta = min(max(0.5 * (Ps + Pi) - overlap, 0.0), 1.0)
    if not details:
        return delta
    return Distinguishability(delta, overlap, delay, raw_delta, axes_differ)


@dataclass(frozen=True)
class SchmidtReport:
    coefficients: np.ndarray
    K: float
    P: float
    K_jsi: float
    fwhm_s_nm: float
    fwhm_i_nm: float
    distinguishability: float | None = None
    v_hom: float | None = None
    delay_ps: float | None = None
    mode: str = "amplitude"
    flags: frozenset = field(default_factory=frozenset)

    @property
    def P_jsi(self) -> float:
        return 1.0 / self.K_jsi

    @property
    def bandwidth_ratio(self) -> float:
        return self.fwhm_s_nm / self.fwhm_i_nm

    def to_dict(self, n_coefficients: int = 16) -> dict:
        def num(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)

        return {
            "mode": self.mode,
            "K": num(self.K),
            "P": num(self.P),
            "K_jsi": num(self.K_jsi),
            "P_jsi": num(self.P_jsi),
            "fwhm_s_nm": num(self.fwhm_s_nm),
            "fwhm_i_nm": num(self.fwhm_i_nm),
            "distinguishability": num(self.distinguishability),
            "v_hom": num(self.v_hom),
            "delay_ps": num(self.delay_ps),
            "coefficients": [float(v) for v in self.coefficients[:n_coefficients]],
            "flags": sorted(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def schmidt_decompose(js: JointSpectrum, on: str = "amplitude", *, with_distinguishability: bool = True) -> SchmidtReport:
    """Schmidt decomposition of the JSA (``on="amplitude"``) or the JSI.

    ``K``/``P``/``coefficients`` follow ``on``; ``K_jsi`` is always the
    Schmidt number of the intensity grid.
    """
    if on not in ("amplitude", "intensity"):
        raise ValueError("on must be 'amplitude' or 'intensity'")
    I = js.intensity
    lam_jsi = schmidt_coefficients(I / I.sum())
    lam = schmidt_coefficients(js.amplitude) if on == "amplitude" else lam_jsi
    P = float(np.sum(lam * lam))
    m = marginals(js)
    flags = set(js.flags)
    delta = v_hom = delay = None
    if with_distinguishability:
        d = distinguishability(js, details=True)
        delta, delay = d.delta, d.delay_ps
        v_hom = P - delta if on == "amplitude" else None
        if d.axes_differ:
            flags.add(FLAG_AXES_DIFFER)
    return SchmidtReport(
        coefficients=_frozen(lam),
        K=1.0 / P,
        P=P,
        K_jsi=float(1.0 / np.sum(lam_jsi * lam_jsi)),
        fwhm_s_nm=m.fwhm_s_nm,
        fwhm_i_nm=m.fwhm_i_nm,
        distinguishability=delta,
        v_hom=v_hom,
        delay_ps=delay,
        mode=on,
        flags=frozenset(flags),
    )


# ---------------------------------------------------------------- GVM


@dataclass(frozen=True)
class DispersionParameter:
    value: float
    branch_a: float
    branch_b: float


def _ratio(num, den):
    if den == 0:
        return math.copysign(math.inf, -num) if num != 0 else math.nan
    return -num / den


def dispersion_parameter(crystal, pols, lambda_p, lambda_s, lambda_i=None, temperature=None) -> DispersionParameter:
    """D = -(GD_p - GD_s)/(GD_p - GD_i) and its reciprocal; ``value`` is the one with smaller |D|."""
    from .crystal_db import PolarizationConfig, get_crystal

    crystal = get_crystal(crystal)
    pols = PolarizationConfig.parse(pols) if isinstance(pols, str) else pols
    if lambda_i is None:
        lambda_i = 1.0 / (1.0 / lambda_p - 1.0 / lambda_s)
    gp = float(group_delay(crystal, pols.pump, lambda_p, temperature))
    gs = float(group_delay(crystal, pols.signal, lambda_s, temperature))
    gi = float(group_delay(crystal, pols.idler, lambda_i, temperature))
    da = _ratio(gp - gs, gp - gi)
    db = _ratio(gp - gi, gp - gs)
    candidates = [v for v in (da, db) if not math.isnan(v)]
    value = min(candidates, key=abs) if candidates else math.nan
    return DispersionParameter(value, da, db)


# ---------------------------------------------------------------- filtering


@dataclass(frozen=True)
class FilterResult:
    spectrum: JointSpectrum
    transmitted_fraction: float


def filter_profile(x, center, fwhm_nm: float, convention: str = "amplitude"):
    """Gaussian filter amplitude transmission.

    ``convention="amplitude"``: the amplitude transmission has FWHM = fwhm.
    ``convention="intensity"``: the intensity transmission has FWHM = fwhm.
    """
    if math.isinf(fwhm_nm):
        return np.ones_like(np.asarray(x, dtype=float))
    sigma = fwhm_nm / 1000.0 * FWHM_TO_SIGMA
    z = (np.asarray(x, dtype=float) - center) / sigma
    if convention == "amplitude":
        return np.exp(-0.5 * z * z)
    if convention == "intensity":
        return np.exp(-0.25 * z * z)
    raise ValueError("convention must be 'amplitude' or 'intensity'")


def apply_bandpass(js: JointSpectrum, fwhm_s_nm: float, fwhm_i_nm: float | None = None,
                   *, convention: str = "amplitude") -> tuple[JointSpectrum, float]:
    """Gaussian bandpass filters centred on the marginal peaks.

    Returns the renormalised filtered spectrum and the transmitted fraction
    of the pair intensity.
    """
    if fwhm_i_nm is None:
        fwhm_i_nm = fwhm_s_nm
    ds, di = js.spacing_um
    for f, d in ((fwhm_s_nm, ds), (fwhm_i_nm, di)):
        if not f > 0:
            raise ValueError("filter FWHM must be positive")
        if f / 1000.0 < 3.0 * d:
            raise FilterResolutionError(f"filter under-resolved: {f} nm is below 3 grid spacings ({3000 * d:.4g} nm)")
    m = marginals(js)
    ts = filter_profile(js.lambda_s, m.peak_s_um, fwhm_s_nm, convention)
    ti = filter_profile(js.lambda_i, m.peak_i_um, fwhm_i_nm, convention)
    B = js.amplitude * ts[:, None] * ti[None, :]
    frac = float(np.sum(np.abs(B) ** 2) / np.sum(js.intensity))
    out = JointSpectrum(B, js.lambda_s, js.lambda_i, process=js.process, pump=js.pump,
                        flags=js.flags | {f"filtered:{fwhm_s_nm:g},{fwhm_i_nm:g}nm:{convention}"})
    return out, frac
