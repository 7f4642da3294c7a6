import json

import numpy as np
import pytest

from filtreg.montecarlo import (
    StudyConfig,
    beta1_inverse,
    draw_latent,
    run_study,
    sample_dgp,
    silverman_bandwidth,
    true_g,
    worker_count,
)

# 0.4054 * P(V < Y) by quadrature over (x, eps); a 10^6-draw simulation gives 0.3901
CENSORING_ORACLE = 0.3895


def test_true_g_values():
    np.testing.assert_allclose(true_g([0.5, 0.0, 0.25, 1.0]), [0.5, 0.5, 1.25, 0.5], atol=1e-15)


def test_beta_inverse():
    assert beta1_inverse(0.875, 3.0) == pytest.approx(0.5, abs=1e-15)
    assert beta1_inverse(0.0, 0.75) == 0.0
    assert beta1_inverse(1.0, 3.0) == 1.0


def test_censoring_fraction_large_sample():
    _, frac = sample_dgp(10_000, 11)
    assert abs(frac - CENSORING_ORACLE) < 0.03


def test_latent_marginals():
    d = draw_latent(100_000, 5)
    assert abs(np.mean(d["w"] < 0.5) - (1 - 0.5**0.75)) < 0.005
    assert abs(d["eps"].mean() - 1.0) < 0.01
    assert abs(d["v"].mean() - 0.25) < 0.005  # Beta(1, 3) mean


def test_sample_dgp_is_deterministic():
    a, fa = sample_dgp(50, 3)
    b, fb = sample_dgp(50, 3)
    assert a.records == b.records and fa == fb
    with pytest.raises(ValueError):
        sample_dgp(0, 1)


def test_silverman():
    x = np.random.default_rng(0).random(250)
    assert silverman_bandwidth(x) == pytest.approx(0.1017, rel=0.2)
    assert 0 < silverman_bandwidth([0.0, 1.0]) < np.inf
    assert silverman_bandwidth(3.0 * x) == pytest.approx(3.0 * silverman_bandwidth(x), rel=1e-14)
    with pytest.raises(ValueError):
        silverman_bandwidth([2.0, 2.0, 2.0])


SMALL = {"n": 60, "reps": 4, "grid_size": 12, "seed": 9}


def test_single_replication_has_undefined_spread():
    res = run_study(StudyConfig(**{**SMALL, "reps": 1}))
    assert np.all(np.isnan(res.std("local-constant")))
    np.testing.assert_array_equal(res.mean("two-step"), res.estimates["two-step"][0])
    assert res.has_undefined


def test_study_determinism_and_standardization():
    cfg = StudyConfig(**SMALL)
    a, b = run_study(cfg), run_study(cfg)
    for m in cfg.methods:
        np.testing.assert_array_equal(a.estimates[m], b.estimates[m])
        z = a.standardized(m)
        ok = np.all(np.isfinite(z), axis=0)
        np.testing.assert_allclose(z[:, ok].mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(z[:, ok].var(axis=0, ddof=1), 1.0, atol=1e-12)
        assert np.all(a.std(m)[ok] >= 0)


def test_parallel_matches_serial():
    cfg = StudyConfig(**{**SMALL, "reps": 2, "methods": ["local-constant"]})
    a, b = run_study(cfg, workers=1), run_study(cfg, workers=2)
    np.testing.assert_array_equal(a.estimates["local-constant"], b.estimates["local-constant"])


def test_study_outputs(tmp_path):
    res = run_study(StudyConfig(**SMALL))
    names = sorted(p.name for p in res.write(tmp_path))
    assert names == ["mean_curve.csv", "qq_efficient.csv", "qq_inefficient.csv", "spread.csv", "summary.json"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["censoring_fraction"]) == 4
    header = (tmp_path / "spread.csv").read_text().splitlines()[0]
    assert header == "x,std_local_constant,iqr13_local_constant,std_two_step,iqr13_two_step,defined"
    qq = np.loadtxt(tmp_path / "qq_inefficient.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(qq[:, 0]) > 0) and np.all(np.diff(qq[:, 1]) >= 0)


def test_iqr_divided_by_one_point_three():
    res = run_study(StudyConfig(**{**SMALL, "methods": ["local-constant"]}))
    est = res.estimates["local-constant"]
    q75, q25 = np.percentile(est, [75, 25], axis=0)
    np.testing.assert_allclose(res.iqr13("local-constant"), (q75 - q25) / 1.3)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        StudyConfig(n=5)
    with pytest.raises(ValueError):
        StudyConfig(methods=["spline"])
    with pytest.raises(ValueError, match="unknown"):
        StudyConfig.from_dict({"sample_size": 10})
    with pytest.raises(ValueError):
        StudyConfig(schema_version=2)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**SMALL, "truncation": "inf"}))
    cfg = StudyConfig.from_json(p)
    assert cfg.truncation == np.inf and cfg.to_dict()["truncation"] == "inf"


def test_worker_count(monkeypatch):
    monkeypatch.delenv("FILTREG_THREADS", raising=False)
    assert worker_count(10) == 1
    monkeypatch.setenv("FILTREG_THREADS", "4")
    assert worker_count(10) == 4 and worker_count(2) == 2
    monkeypatch.setenv("FILTREG_THREADS", "many")
    assert worker_count(10) == 1
