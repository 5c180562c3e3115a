import math

import numpy as np
import pytest

from qpmdesign import design_search as ds
from qpmdesign.joint_spectrum import GridSpec, PumpPulse, build_jsa, schmidt_decompose
from qpmdesign.qpm import phase_mismatch


def test_phase_matched_process():
    p = ds.phase_matched_process("KTP", "o:oe", 0.791, 1.582)
    assert p.order == -1 and abs(phase_mismatch(p)) < 1e-12


def test_optimizer_beats_exhaustive_scan(ktp791):
    # brute-force oracle on a coarse log grid at low resolution
    spec = GridSpec(32)
    taus = np.geomspace(0.3, 30, 40)
    Ls = np.geomspace(3, 100, 40)
    best = max(
        schmidt_decompose(build_jsa(ktp791.with_(length_mm=float(L)), PumpPulse(0.791, float(t)), spec),
                          with_distinguishability=False).P
        for t in taus for L in Ls
    )
    res = ds.optimize_tau_L(ktp791, (0.3, 30), (3, 100), grid_points=12, search_resolution=32,
                            final_resolution=32)
    assert res.objective_value >= best - 2e-3
    assert len(res.table) == 144 and not res.flat


def test_optimizer_reference_point(ktp791):
    res = ds.optimize_tau_L(ktp791, (0.5, 20), (5, 60), grid_points=10, final_resolution=256)
    assert 0.80 <= res.report.P <= 0.86


def test_tau_scale_invariance(ktp791):
    # the purity depends on tau/L only: doubling both leaves P unchanged
    spec = GridSpec(128)
    a = schmidt_decompose(build_jsa(ktp791, 2.5, spec), with_distinguishability=False).P
    b = schmidt_decompose(build_jsa(ktp791.with_(length_mm=60.0), 5.0, spec), with_distinguishability=False).P
    assert a == pytest.approx(b, abs=5e-3)


def test_objectives():
    with pytest.raises(ValueError):
        ds._objective("nonsense")
    assert callable(ds._objective(lambda js: 1.0))


def test_canonical_d():
    assert ds.canonical_d(1.0, 0.0, 2.0) == pytest.approx(1.0)
    assert ds.canonical_d(1.0, 0.5, 3.0) == pytest.approx(0.25)


def test_degenerate_gvm_ktp():
    lp = ds.degenerate_gvm_point("KTP")
    assert lp == pytest.approx(0.791, abs=0.003)


def test_degenerate_scan_short():
    rows = ds.degenerate_scan("KTP", [0.7, 0.791], search_resolution=64, resolution=128)
    assert len(rows) == 2
    near = rows[1]
    assert abs(near.D - 1) < 0.05
    assert near.v_hom > rows[0].v_hom


@pytest.mark.slow
def test_atlas_contains_degenerate_ktp():
    pts = ds.purity_atlas("KTP", "o:oe", [0.791])
    assert any(p.lambda_s_min <= 1.582 <= p.lambda_s_max for p in pts)
    for p in pts:
        assert p.best_k_jsi <= ds.PURE_THRESHOLD
        assert p.lambda_s_min <= p.best_lambda_s <= p.lambda_s_max


def test_atlas_type1_e_oo_empty_ktp():
    assert ds.purity_atlas("KTP", "e:oo", np.arange(0.4, 0.8, 0.05)) == []


def test_atlas_max_points():
    pts = ds.purity_atlas("KTP", "o:oe", [0.791], max_points=1)
    assert len(pts) == 1


def test_filter_scan(ktp791):
    rows = ds.filter_scan(ktp791, 2.5, [4.0, 8.0], resolution=256)
    assert math.isinf(rows[0].fwhm_nm) and rows[0].transmitted_fraction == 1.0
    assert [r.fwhm_nm for r in rows[1:]] == [8.0, 4.0]
    assert rows[-1].P > rows[1].P > rows[0].P
    assert rows[-1].transmitted_fraction < rows[1].transmitted_fraction


@pytest.mark.slow
def test_cddc_ktp():
    cfgs = ds.cddc_search("KTP")
    assert cfgs
    assert max(c.relative_residual for c in cfgs) < 1e-8
    best = min(cfgs, key=lambda c: abs(c.lambda_p - 0.5323) + abs(c.lambda_b - 0.9043) + abs(c.lambda_r - 1.2939))
    assert best.lambda_p == pytest.approx(0.5323, abs=0.005)
    assert best.lambda_b == pytest.approx(0.9043, abs=0.005)
    assert best.lambda_r == pytest.approx(1.2939, abs=0.005)


def test_cddc_newton_residual():
    cfgs = ds.cddc_search("KTP", period_range=(10.0, 12.0), period_samples=5)
    for c in cfgs:
        assert c.residual_1 < 1e-8 and c.residual_2 < 1e-8
        # the blue daughter of one process is the signal of the other
        assert 1 / c.lambda_p == pytest.approx(1 / c.lambda_b + 1 / c.lambda_r, rel=1e-12)


def test_csv_and_manifest(tmp_path):
    path = ds.write_csv(tmp_path / "t.csv", ["a", "b"], [[1, math.inf], [0.5, float("nan")]])
    assert path.read_text() == "a,b\n1,inf\n0.5,nan\n"
    m = ds.build_manifest("x", {"k": 1}, [path], base_dir=tmp_path)
    assert m["outputs"] == {"t.csv": ds.file_digest(path)}
    assert m["crystal_data"]["sha256"]
