"""Configuration sweeps: tau-L optimisation, pure-state atlases, degenerate GVM
scans, filter scans and the collinear double-downconversion (CDDC) search.

Every sweep iterates in a fixed order and uses no randomness, so repeated runs
give identical output files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy
from scipy.optimize import brentq, minimize_scalar

from . import __version__, _kernels
from .crystal_db import PolarizationConfig, default_crystals, get_crystal
from .dispersion import C_UM_PER_PS, group_delay, wavenumber
from .joint_spectrum import (
    EmptySpectrumError,
    GridSpec,
    PumpPulse,
    SchmidtReport,
    apply_bandpass,
    build_jsa,
    schmidt_decompose,
    schmidt_number_gram,
)
from .qpm import (
    BULK,
    BulkPhaseMatchedError,
    SpdcProcess,
    default_order,
    idler_wavelength,
    signal_window,
    solve_poling_period,
)

PURE_THRESHOLD = 1.01
SEARCH_RESOLUTION = 128
ATLAS_RESOLUTION = 96
D_SCREEN = -0.1
SINC_HALF_POWER = 1.391557377  # x with (sin x / x)^2 = 1/2


class NonConvergenceError(RuntimeError):
    """A numerical search failed to converge."""


def _pols(pols) -> PolarizationConfig:
    return PolarizationConfig.parse(pols) if isinstance(pols, str) else pols


def phase_matched_process(crystal, pols, lambda_p, lambda_s, temperature=None, length_mm=30.0) -> SpdcProcess:
    """Process with the first-order grating (or none) that phase-matches the centre."""
    order = default_order(crystal, pols, lambda_p, lambda_s, temperature)
    try:
        period = solve_poling_period(crystal, pols, lambda_p, lambda_s, temperature, order)
    except BulkPhaseMatchedError:
        period, order = BULK, 1
    return SpdcProcess(crystal, pols, lambda_p, lambda_s, temperature=temperature,
                       period=period, order=order, length_mm=length_mm)


# ---------------------------------------------------------------- objectives


def _score(f, process, tau, spec) -> float:
    # an all-zero grid means the features fell between samples: treat as worst
    try:
        js = build_jsa(process, PumpPulse(process.lambda_p, tau), spec)
    except EmptySpectrumError:
        return -math.inf
    return f(js)


def _objective(name):
    if callable(name):
        return name
    if name in ("P", "purity", "max P"):
        return lambda js: 1.0 / schmidt_number_gram(js.amplitude)
    if name in ("K_jsi", "min K_JSI", "kjsi"):
        return lambda js: -schmidt_number_gram(js.intensity)
    raise ValueError(f"unknown objective {name!r}")


@dataclass(frozen=True)
class OptimizationResult:
    tau_ps: float
    length_mm: float
    report: SchmidtReport
    objective_value: float
    flat: bool
    evaluations: int
    # (tau_ps, length_mm, objective) rows of the coarse scan
    table: tuple = ()


def optimize_tau_L(process: SpdcProcess, tau_bounds=(0.05, 50.0), length_bounds=(1.0, 100.0),
                   objective="P", *, grid_points: int = 24, search_resolution: int = SEARCH_RESOLUTION,
                   final_resolution: int = 512, refine: bool = True) -> OptimizationResult:
    """Maximise an objective over pulse duration and crystal length.

    A log-spaced ``grid_points`` x ``grid_points`` scan is followed by
    coordinate refinement in log space.  ``objective`` is ``"P"`` (maximise
    JSA purity), ``"K_jsi"`` (minimise the JSI Schmidt number) or a callable
    mapping a :class:`JointSpectrum` to a score to maximise.
    """
    if min(tau_bounds) <= 0 or min(length_bounds) <= 0:
        raise ValueError("bounds must be positive")
    f = _objective(objective)
    spec = GridSpec(search_resolution)
    count = 0

    def score(log_tau, log_L):
        nonlocal count
        count += 1
        return _score(f, process.with_(length_mm=float(math.exp(log_L))), float(math.exp(log_tau)), spec)

    lt = np.linspace(math.log(tau_bounds[0]), math.log(tau_bounds[1]), grid_points)
    lL = np.linspace(math.log(length_bounds[0]), math.log(length_bounds[1]), grid_points)
    table = np.array([[score(a, b) for b in lL] for a in lt])
    i, j = np.unravel_index(int(np.argmax(table)), table.shape)
    best_t, best_L, best = lt[i], lL[j], float(table[i, j])
    flat = bool(np.ptp(table) <= 1e-12 * max(1.0, abs(best)))

    if refine and not flat:
        dt, dL = lt[1] - lt[0], lL[1] - lL[0]
        for _ in range(3):
            prev = best
            r = minimize_scalar(lambda x: -score(x, best_L), method="bounded",
                                bounds=(max(lt[0], best_t - dt), min(lt[-1], best_t + dt)),
                                options={"xatol": 1e-3})
            if -r.fun > best:
                best, best_t = -float(r.fun), float(r.x)
            r = minimize_scalar(lambda x: -score(best_t, x), method="bounded",
                                bounds=(max(lL[0], best_L - dL), min(lL[-1], best_L + dL)),
                                options={"xatol": 1e-3})
            if -r.fun > best:
                best, best_L = -float(r.fun), float(r.x)
            if best - prev < 1e-6:
                break

    tau, L = float(math.exp(best_t)), float(math.exp(best_L))
    js = build_jsa(process.with_(length_mm=L), PumpPulse(process.lambda_p, tau), GridSpec(final_resolution))
    rows = tuple((float(math.exp(a)), float(math.exp(b)), float(table[m, n]))
                 for m, a in enumerate(lt) for n, b in enumerate(lL))
    return OptimizationResult(tau, L, schmidt_decompose(js), best, flat, count, rows)


def _tau_scale(process: SpdcProcess) -> float:
    """Rough optimum duration (ps): crystal length times the largest GVM."""
    c, T, p = process.crystal, process.temperature, process.pols
    gp = group_delay(c, p.pump, process.lambda_p, T, warn=False)
    gs = group_delay(c, p.signal, process.lambda_s, T, warn=False)
    gi = group_delay(c, p.idler, process.lambda_i, T, warn=False)
    return max(process.length_mm * max(abs(gp - gs), abs(gp - gi)), 0.01)


def optimize_tau(process: SpdcProcess, objective="P", *, resolution: int = SEARCH_RESOLUTION,
                 points: int = 12, span=(0.03, 5.0)):
    """1-D pulse-duration optimisation at the process crystal length.

    The objective depends on tau and L mostly through their ratio, so a
    fixed-length search reaches the same optimum as the 2-D one.
    Returns ``(tau, score)``.
    """
    f = _objective(objective)
    spec = GridSpec(resolution)
    t0 = _tau_scale(process)

    def score(log_tau):
        return _score(f, process, float(math.exp(log_tau)), spec)

    xs = np.linspace(math.log(t0 * span[0]), math.log(t0 * span[1]), points)
    vals = [score(x) for x in xs]
    k = int(np.argmax(vals))
    r = minimize_scalar(lambda x: -score(x), method="bounded",
                        bounds=(xs[max(k - 1, 0)], xs[min(k + 1, points - 1)]), options={"xatol": 1e-3})
    if -r.fun >= vals[k]:
        return float(math.exp(r.x)), -float(r.fun)
    return float(math.exp(xs[k])), float(vals[k])


def k_jsi_at(process: SpdcProcess, tau: float, resolution: int) -> float:
    return -_score(_objective("K_jsi"), process, tau, GridSpec(resolution))


def min_k_jsi(process: SpdcProcess, resolution: int = ATLAS_RESOLUTION, *, verify_below: float = 1.05,
              max_resolution: int = 768, tol: float = 2e-3):
    """Smallest JSI Schmidt number over pulse durations; returns ``(K_jsi, tau)``.

    Coarse grids can alias a narrow phase-matching stripe into an apparently
    separable JSI, so any result below ``verify_below`` is recomputed on
    doubled grids until two successive values agree to ``tol``.  An
    unconverged result is returned as ``inf``.
    """
    tau, s = optimize_tau(process, "K_jsi", resolution=resolution)
    k = -s
    if k > verify_below:
        return k, tau
    n = resolution
    while n * 2 <= max_resolution:
        n *= 2
        k2 = k_jsi_at(process, tau, n)
        if abs(k2 - k) <= tol:
            return k2, tau
        k = k2
    return math.inf, tau


# ---------------------------------------------------------------- atlas


@dataclass(frozen=True)
class AtlasPoint:
    """One contiguous signal interval with K_JSI <= threshold at a pump wavelength."""

    lambda_p: float
    lambda_s_min: float
    lambda_s_max: float
    period_at_min: float
    period_at_max: float
    best_lambda_s: float
    best_tau_ps: float
    best_length_mm: float
    best_k_jsi: float

    def row(self):
        return [self.lambda_p, self.lambda_s_min, self.lambda_s_max, self.period_at_min, self.period_at_max,
                self.best_lambda_s, self.best_tau_ps, self.best_length_mm, self.best_k_jsi]


ATLAS_HEADER = ["lambda_p_um", "lambda_s_min_um", "lambda_s_max_um", "period_at_min_um", "period_at_max_um",
                "best_lambda_s_um", "best_tau_ps", "best_length_mm", "best_k_jsi"]


def canonical_d(gd_p, gd_s, gd_i):
    """Vectorised canonical dispersion parameter (branch with the smaller magnitude)."""
    a = np.asarray(gd_p - gd_s, dtype=float)
    b = np.asarray(gd_p - gd_i, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = -a / b
        db = -b / a
    return np.where(np.abs(da) <= np.abs(db), da, db)


def _period(process_args):
    crystal, pols, lp, ls, T = process_args
    try:
        return abs(solve_poling_period(crystal, pols, lp, ls, T))
    except BulkPhaseMatchedError:
        return BULK


def purity_atlas(crystal, pols, lambda_p_values: Sequence[float], temperature=None, *,
                 length_mm: float = 30.0, samples: int = 2000, coarse: int = 16,
                 resolution: int = ATLAS_RESOLUTION, threshold: float = PURE_THRESHOLD,
                 bisections: int = 6, d_screen: float = D_SCREEN,
                 max_points: int | None = None) -> list[AtlasPoint]:
    """Signal intervals that admit K_JSI <= threshold, per pump wavelength.

    Signal wavelengths are first screened on the canonical dispersion
    parameter (separable states need the pump group delay between or near
    the daughters').  Surviving runs are sampled at ``coarse`` points, each
    given its best pulse duration at fixed length, and pass/fail edges are
    bisected.  ``max_points`` stops the sweep early, e.g. for emptiness checks.
    """
    crystal = get_crystal(crystal)
    pols = _pols(pols)
    T = crystal.default_temperature if temperature is None else temperature
    out: list[AtlasPoint] = []

    def evaluate(lp, ls):
        proc = phase_matched_process(crystal, pols, lp, ls, T, length_mm)
        k, tau = min_k_jsi(proc, resolution)
        return k, tau

    for lp in map(float, lambda_p_values):
        window = signal_window(crystal, lp)
        if window is None:
            continue
        xs = np.linspace(window[0], window[1], samples)
        li = idler_wavelength(lp, xs)
        gp = group_delay(crystal, pols.pump, lp, T, warn=False)
        with np.errstate(invalid="ignore"):
            D = canonical_d(gp, group_delay(crystal, pols.signal, xs, T, warn=False),
                            group_delay(crystal, pols.idler, li, T, warn=False))
        keep = np.isfinite(D) & (D >= d_screen)
        # contiguous candidate runs
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            continue
        runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        for run in runs:
            picks = np.unique(np.linspace(run[0], run[-1], min(coarse, run.size)).round().astype(int))
            evals = [evaluate(lp, float(xs[k])) for k in picks]
            ok = [e[0] <= threshold for e in evals]
            k = 0
            while k < len(picks):
                if not ok[k]:
                    k += 1
                    continue
                start = k
                while k + 1 < len(picks) and ok[k + 1]:
                    k += 1
                stop = k
                lo = float(xs[picks[start]])
                hi = float(xs[picks[stop]])
                if start > 0:
                    lo = _bisect_edge(evaluate, lp, float(xs[picks[start - 1]]), lo, threshold, bisections)
                if stop + 1 < len(picks):
                    hi = _bisect_edge(evaluate, lp, float(xs[picks[stop + 1]]), hi, threshold, bisections)
                seg = range(start, stop + 1)
                b = min(seg, key=lambda q: evals[q][0])
                out.append(AtlasPoint(
                    lambda_p=lp,
                    lambda_s_min=lo,
                    lambda_s_max=hi,
                    period_at_min=_period((crystal, pols, lp, lo, T)),
                    period_at_max=_period((crystal, pols, lp, hi, T)),
                    best_lambda_s=float(xs[picks[b]]),
                    best_tau_ps=evals[b][1],
                    best_length_mm=length_mm,
                    best_k_jsi=evals[b][0],
                ))
                if max_points is not None and len(out) >= max_points:
                    return out
                k += 1
    return out


def _bisect_edge(evaluate, lp, bad, good, threshold, steps):
    for _ in range(steps):
        mid = 0.5 * (bad + good)
        if evaluate(lp, mid)[0] <= threshold:
            good = mid
        else:
            bad = mid
    return good


def atlas_curves(points: Sequence[AtlasPoint]):
    """Plot-ready edge curves: rows of (lambda_p, lambda_s, period) for both interval ends."""
    rows = []
    for p in points:
        rows.append((p.lambda_p, p.lambda_s_min, p.period_at_min))
        rows.append((p.lambda_p, p.lambda_s_max, p.period_at_max))
    return rows


# ---------------------------------------------------------------- degenerate GVM


def _gvm_balance(crystal, lambda_p, T):
    gp = group_delay(crystal, "o", lambda_p, T, warn=False)
    gs = group_delay(crystal, "o", 2 * lambda_p, T, warn=False)
    gi = group_delay(crystal, "e", 2 * lambda_p, T, warn=False)
    return gp - 0.5 * (gs + gi)


def degenerate_gvm_point(crystal, temperature=None, *, window=None, samples: int = 400,
                         tol_nm: float = 0.01) -> float | None:
    """Pump wavelength (um) where o -> o + e degenerate SPDC has D = 1.

    D = 1 means the pump group delay equals the mean of the daughters', so
    the root of GD_p - (GD_s + GD_i)/2 is bisected.  Returns ``None`` when the
    balance does not change sign inside the window.
    """
    crystal = get_crystal(crystal)
    T = crystal.default_temperature if temperature is None else temperature
    lo, hi = crystal.transparency
    window = window or (lo, hi / 2)
    xs = np.linspace(window[0], window[1], samples)
    g = _gvm_balance(crystal, xs, T)
    for k in range(samples - 1):
        if np.isfinite(g[k]) and np.isfinite(g[k + 1]) and g[k] * g[k + 1] <= 0 and g[k] != g[k + 1]:
            a, b = float(xs[k]), float(xs[k + 1])
            ga = float(g[k])
            while (b - a) * 1000 > tol_nm:
                m = 0.5 * (a + b)
                gm = float(_gvm_balance(crystal, m, T))
                if (gm < 0) == (ga < 0):
                    a, ga = m, gm
                else:
                    b = m
            return 0.5 * (a + b)
    return None


@dataclass(frozen=True)
class DegenerateScanRow:
    lambda_p: float
    tau_ps: float
    P: float
    v_hom: float
    distinguishability: float
    bandwidth_ratio: float
    k_jsi: float
    D: float


DEGENERATE_HEADER = ["lambda_p_um", "tau_ps", "P", "v_hom", "distinguishability", "bandwidth_ratio", "k_jsi", "D"]


def degenerate_scan(crystal, lambda_p_values, temperature=None, *, length_mm: float = 30.0,
                    search_resolution: int = SEARCH_RESOLUTION, resolution: int = 256) -> list[DegenerateScanRow]:
    """Best purity, HOM bound and bandwidth ratio for degenerate o -> o + e SPDC."""
    from .joint_spectrum import dispersion_parameter

    crystal = get_crystal(crystal)
    T = crystal.default_temperature if temperature is None else temperature
    rows = []
    for lp in map(float, lambda_p_values):
        proc = phase_matched_process(crystal, "o:oe", lp, 2 * lp, T, length_mm)
        tau, _ = optimize_tau(proc, "P", resolution=search_resolution)
        rep = schmidt_decompose(build_jsa(proc, tau, GridSpec(resolution)))
        D = dispersion_parameter(crystal, "o:oe", lp, 2 * lp, 2 * lp, T).value
        rows.append(DegenerateScanRow(lp, tau, rep.P, rep.v_hom, rep.distinguishability,
                                      rep.bandwidth_ratio, rep.K_jsi, D))
    return rows


# ---------------------------------------------------------------- filters


@dataclass(frozen=True)
class FilterScanRow:
    fwhm_nm: float
    P: float
    v_hom: float
    transmitted_fraction: float
    fwhm_s_nm: float
    fwhm_i_nm: float


FILTER_HEADER = ["filter_fwhm_nm", "P", "v_hom", "transmitted_fraction", "fwhm_s_nm", "fwhm_i_nm"]


def filter_scan(process: SpdcProcess, pump: PumpPulse | float, fwhm_values, *, resolution: int = 512,
                convention: str = "amplitude") -> list[FilterScanRow]:
    """Identical Gaussian filters on both arms; the first row is unfiltered."""
    js = build_jsa(process, pump, GridSpec(resolution))
    base = schmidt_decompose(js)
    rows = [FilterScanRow(math.inf, base.P, base.v_hom, 1.0, base.fwhm_s_nm, base.fwhm_i_nm)]
    for f in sorted(map(float, fwhm_values), reverse=True):
        filt, frac = apply_bandpass(js, f, f, convention=convention)
        rep = schmidt_decompose(filt)
        rows.append(FilterScanRow(f, rep.P, rep.v_hom, frac, rep.fwhm_s_nm, rep.fwhm_i_nm))
    return rows


# ---------------------------------------------------------------- CDDC


@dataclass(frozen=True)
class CddcConfig:
    """Two type-II processes sharing one grating through orders +1 and -1.

    Process 1 emits lambda_b in the signal axis and lambda_r in the idler
    axis; process 2 swaps the axes.  ``dgd_1``/``dgd_2`` are the daughter
    group-delay differences of each process (ps/mm); bandwidths are CW
    phase-matching FWHMs at lambda_b (nm).
    """

    period: float
    lambda_p: float
    lambda_b: float
    lambda_r: float
    bandwidth_1_nm: float
    bandwidth_2_nm: float
    dgd_1: float
    dgd_2: float
    residual_1: float
    residual_2: float
    relative_residual: float
    branch: int = 0

    def row(self):
        return [self.branch, self.period, self.lambda_p, self.lambda_b, self.lambda_r, self.bandwidth_1_nm,
                self.bandwidth_2_nm, self.dgd_1, self.dgd_2, self.residual_1, self.residual_2, self.relative_residual]


CDDC_HEADER = ["branch", "period_um", "lambda_p_um", "lambda_b_um", "lambda_r_um", "bandwidth_1_nm",
               "bandwidth_2_nm", "dgd_1_ps_per_mm", "dgd_2_ps_per_mm", "residual_1", "residual_2",
               "relative_residual"]


def _cddc_mismatches(crystal, pols, lp, lb, T):
    lr = idler_wavelength(lp, lb)
    kp = wavenumber(crystal, pols.pump, lp, T, warn=False)
    d1 = kp - wavenumber(crystal, pols.signal, lb, T, warn=False) - wavenumber(crystal, pols.idler, lr, T, warn=False)
    d2 = kp - wavenumber(crystal, pols.idler, lb, T, warn=False) - wavenumber(crystal, pols.signal, lr, T, warn=False)
    return d1, d2


def _newton_cddc(crystal, pols, period, lp, lb, T, sign, *, step=1e-4, max_iter=50, tol=1e-10):
    """Damped Newton on (lambda_p, lambda_b) for d1 = +s 2pi/period, d2 = -s 2pi/period."""
    g = 2 * math.pi / period

    def F(x):
        d1, d2 = _cddc_mismatches(crystal, pols, x[0], x[1], T)
        return np.array([float(d1) - sign * g, float(d2) + sign * g])

    x = np.array([lp, lb], dtype=float)
    fx = F(x)
    for _ in range(max_iter):
        if not np.all(np.isfinite(fx)):
            return None
        J = np.empty((2, 2))
        for c in range(2):
            e = np.zeros(2)
            e[c] = step
            J[:, c] = (F(x + e) - F(x - e)) / (2 * step)
        try:
            dx = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        norm0 = np.linalg.norm(fx)
        while lam > 1e-6:
            xn = x + lam * dx
            if xn[1] > xn[0] > 0:
                fn = F(xn)
                if np.all(np.isfinite(fn)) and np.linalg.norm(fn) < norm0:
                    break
            lam *= 0.5
        else:
            break
        x, fx = xn, fn
        if np.max(np.abs(fx)) < 1e-3 * tol:
            break
    if np.max(np.abs(fx)) < tol:
        return x
    return None


def _cw_bandwidth_nm(lam, gd_a, gd_b, length_mm):
    dgd = abs(gd_a - gd_b) / 1000.0  # ps/um
    if dgd == 0:
        return math.inf
    dw = 4 * SINC_HALF_POWER / (length_mm * 1000.0 * dgd)
    return float(lam * lam / (2 * math.pi * C_UM_PER_PS) * dw * 1000.0)


def _make_config(crystal, pols, period, lp, lb, T, length_mm, branch):
    lr = float(idler_wavelength(lp, lb))
    d1, d2 = (float(v) for v in _cddc_mismatches(crystal, pols, lp, lb, T))
    sign = 1.0 if d1 - d2 > 0 else -1.0
    g = 2 * math.pi / period
    gd = {(ax, w): float(group_delay(crystal, ax, lam, T, warn=False))
          for ax in ("o", "e") for w, lam in (("b", lb), ("r", lr))}
    s, i = pols.signal, pols.idler
    return CddcConfig(
        period=period,
        lambda_p=float(lp),
        lambda_b=float(lb),
        lambda_r=lr,
        bandwidth_1_nm=_cw_bandwidth_nm(lb, gd[(s, "b")], gd[(i, "r")], length_mm),
        bandwidth_2_nm=_cw_bandwidth_nm(lb, gd[(i, "b")], gd[(s, "r")], length_mm),
        dgd_1=abs(gd[(s, "b")] - gd[(i, "r")]),
        dgd_2=abs(gd[(i, "b")] - gd[(s, "r")]),
        residual_1=abs(d1 - sign * g),
        residual_2=abs(d2 + sign * g),
        relative_residual=abs(d1 + d2) / (abs(d1) + abs(d2)),
        branch=branch,
    )


def _trace_cddc_curve(crystal, pols, T, pump_samples, daughter_samples):
    """Points on the period-independent curve d1 + d2 = 0, linked into branches."""
    lo, hi = crystal.transparency
    pumps = np.linspace(lo, hi / 2, pump_samples)
    branches: list[list[tuple[float, float, float]]] = []
    open_ends: list[int] = []
    step_p = pumps[1] - pumps[0]
    for lp in pumps:
        start = max(lp * (1 + 1e-6), 1.0 / (1.0 / lp - 1.0 / hi)) if lp < hi / 2 else None
        if start is None or start >= 2 * lp:
            open_ends = []
            continue
        xs = np.linspace(start, 2 * lp * (1 - 1e-9), daughter_samples)
        d1, d2 = _cddc_mismatches(crystal, pols, lp, xs, T)
        S = d1 + d2
        roots = []
        for k in range(len(xs) - 1):
            if np.isfinite(S[k]) and np.isfinite(S[k + 1]) and S[k] * S[k + 1] < 0:
                lb = brentq(lambda x: float(sum(_cddc_mismatches(crystal, pols, lp, x, T))), xs[k], xs[k + 1],
                            xtol=1e-14)
                a, b = _cddc_mismatches(crystal, pols, lp, lb, T)
                if a != b:
                    roots.append((float(lp), float(lb), 4 * math.pi / abs(float(a) - float(b))))
        new_ends = []
        used = set()
        for r in roots:
            match = None
            for bi in open_ends:
                if bi in used:
                    continue
                last = branches[bi][-1]
                if abs(last[1] - r[1]) < 20 * step_p + 0.02:
                    match = bi
                    break
            if match is None:
                branches.append([r])
                match = len(branches) - 1
            else:
                branches[match].append(r)
            used.add(match)
            new_ends.append(match)
        open_ends = new_ends
    return branches


def cddc_search(crystal, pols="o:oe", period_range=None, temperature=None, *, period_samples: int = 200,
                pump_samples: int = 400, daughter_samples: int = 2000, length_mm: float = 30.0,
                max_step_nm: float = 1.0, max_refinements: int = 2000) -> list[CddcConfig]:
    """Periods at which both type-II processes are quasi-phase-matched at once.

    The sum of the two mismatches does not involve the grating, so the
    solutions lie on a fixed curve in (lambda_p, lambda_b); along it the
    period is 4 pi / |d1 - d2|.  Log-spaced period targets are bracketed on
    the traced curve and polished by damped Newton iteration; midpoints are
    inserted until neighbouring configurations differ by less than
    ``max_step_nm`` in every wavelength.
    """
    crystal = get_crystal(crystal)
    pols = _pols(pols)
    if pols.spdc_type != "II":
        raise ValueError("CDDC needs a type-II polarization configuration")
    T = crystal.default_temperature if temperature is None else temperature
    branches = _trace_cddc_curve(crystal, pols, T, pump_samples, daughter_samples)
    branches = [b for b in branches if len(b) >= 2]
    if not branches:
        return []
    if period_range is None:
        periods = [p[2] for b in branches for p in b]
        period_range = (min(periods), min(max(periods), 1e5))
    targets = np.geomspace(period_range[0], period_range[1], period_samples)

    out: list[CddcConfig] = []
    for bi, branch in enumerate(branches):
        found: dict[float, CddcConfig] = {}

        def solve(target, seed_lp, seed_lb):
            d1, d2 = _cddc_mismatches(crystal, pols, seed_lp, seed_lb, T)
            sign = 1.0 if float(d1) - float(d2) > 0 else -1.0
            x = _newton_cddc(crystal, pols, target, seed_lp, seed_lb, T, sign)
            if x is None:
                return None
            cfg = _make_config(crystal, pols, float(target), x[0], x[1], T, length_mm, bi)
            if cfg.relative_residual >= 1e-8 or not (cfg.lambda_b < cfg.lambda_r):
                return None
            return cfg

        def seed(target):
            lt = math.log(target)
            for (p0, b0, L0), (p1, b1, L1) in zip(branch[:-1], branch[1:]):
                l0, l1 = math.log(L0), math.log(L1)
                if (l0 - lt) * (l1 - lt) <= 0 and l0 != l1:
                    w = (lt - l0) / (l1 - l0)
                    return p0 + w * (p1 - p0), b0 + w * (b1 - b0)
            return None

        for target in targets:
            s = seed(float(target))
            if s is None:
                continue
            cfg = solve(float(target), *s)
            if cfg is not None:
                found[cfg.period] = cfg

        # refine until neighbouring rows are close in every wavelength
        for _ in range(max_refinements):
            keys = sorted(found)
            inserted = False
            for a, b in zip(keys[:-1], keys[1:]):
                ca, cb = found[a], found[b]
                gap = max(abs(ca.lambda_p - cb.lambda_p), abs(ca.lambda_b - cb.lambda_b),
                          abs(ca.lambda_r - cb.lambda_r)) * 1000
                if gap >= max_step_nm:
                    mid = math.sqrt(a * b)
                    if mid in found or mid == a or mid == b:
                        continue
                    cfg = solve(mid, 0.5 * (ca.lambda_p + cb.lambda_p), 0.5 * (ca.lambda_b + cb.lambda_b))
                    if cfg is not None:
                        found[cfg.period] = cfg
                        inserted = True
                        break
            if not inserted:
                break
        out.extend(found[k] for k in sorted(found))
    return out


# ---------------------------------------------------------------- output


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_value(v) for v in r])
    return path


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def environment_versions() -> dict:
    return {
        "qpmdesign": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": _kernels.BACKEND,
    }


def build_manifest(command: str, config: dict, outputs: Sequence[Path], crystal_set=None, base_dir=None) -> dict:
    """Run manifest: resolved configuration, data digest, versions and output hashes."""
    cset = crystal_set or default_crystals()
    base = Path(base_dir) if base_dir else None
    files = {}
    for p in outputs:
        p = Path(p)
        name = str(p.relative_to(base)) if base else p.name
        files[name] = file_digest(p)
    return {
        "command": command,
        "config": config,
        "crystal_data": {"path": Path(cset.path).name if cset.path else "", "sha256": cset.digest},
        "versions": environment_versions(),
        "outputs": dict(sorted(files.items())),
    }


def write_manifest(path, manifest: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=format_value) + "\n")
    return path
