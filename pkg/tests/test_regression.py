import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filtreg.data import from_right_censored
from filtreg.errors import QuantileUndefined
from filtreg.kernels import QUARTIC
from filtreg.montecarlo import sample_dgp
from filtreg.regression import (
    CurveEstimate,
    default_truncation,
    estimate_curve,
    mean_truncated,
    nadaraya_watson,
    quantile,
    variance_identity,
)
from filtreg.survivor import StepFunction, integrated_hazard_lc, product_limit

S_TWO = StepFunction([1.0, 2.0], [2 / 3, 0.0], 1.0)


def test_mean_truncated_examples():
    assert mean_truncated(S_TWO, 3.0) == pytest.approx(5 / 3, abs=1e-15)
    assert mean_truncated(S_TWO, 1.5) == pytest.approx(1 / 3, abs=1e-15)
    assert mean_truncated(StepFunction([], [], 1.0), 5.0) == 0.0
    with pytest.raises(ValueError):
        mean_truncated(S_TWO, 0.0)


def test_mean_of_two_points_is_sample_mean():
    s = from_right_censored([0.0, 0.0], [1.0, 3.0], [np.inf, np.inf])
    S = product_limit(integrated_hazard_lc(s, "quartic", 1.0, 0.0))
    assert mean_truncated(S, 100.0) == pytest.approx(2.0, abs=1e-15)


def test_quantile_examples():
    assert quantile(S_TWO, 0.5) == 2.0
    assert quantile(StepFunction([1.0], [0.5], 1.0), 0.5) == 1.0
    with pytest.raises(QuantileUndefined):
        quantile(StepFunction([1.0], [0.8], 1.0), 0.5)
    with pytest.raises(ValueError):
        quantile(S_TWO, 1.0)


def test_quantile_boundary_cases():
    S = StepFunction([1.0, 2.0, 3.0], [0.75, 0.5, 0.25], 1.0)
    assert quantile(S, 0.25) == 1.0  # S(1) = 0.75 meets <= 0.75 exactly
    assert quantile(S, 0.2500001) == 2.0
    assert quantile(S, 0.75) == 3.0
    assert quantile(S, 0.1) == 1.0
    with pytest.raises(QuantileUndefined):
        quantile(S, 0.8)


def _survivor(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 30))
    s = from_right_censored(r.random(n), r.exponential(1, n) + 0.01, r.exponential(2, n) + 0.01)
    return product_limit(integrated_hazard_lc(s, "quartic", 0.7, 0.5))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_monotone_in_truncation_and_level(seed):
    S = _survivor(seed)
    Ts = np.linspace(0.05, 6, 25)
    means = [mean_truncated(S, T) for T in Ts]
    assert np.all(np.diff(means) >= -1e-15)
    qs = []
    for p in np.linspace(0.05, 0.95, 19):
        try:
            qs.append(quantile(S, p))
        except QuantileUndefined:
            break
    assert np.all(np.diff(qs) >= 0)


def test_nadaraya_watson_oracle_examples():
    s = from_right_censored([0.0, 0.0], [1.0, 3.0], [np.inf, np.inf])
    assert nadaraya_watson(s, "quartic", 1.0, 0.0) == 2.0
    assert nadaraya_watson(from_right_censored([0.3], [1.7], [np.inf]), "quartic", 1.0, 0.3) == 1.7
    with pytest.raises(ValueError):
        nadaraya_watson(from_right_censored([0.3], [1.7], [1.0]), "quartic", 1.0, 0.3)
    with pytest.raises(ZeroDivisionError):
        nadaraya_watson(s, "quartic", 0.1, 5.0)


def test_reduction_to_nadaraya_watson_ten_points():
    r = np.random.default_rng(10)
    x, y = r.random(10), r.exponential(1, 10)
    s = from_right_censored(x, y, np.full(10, np.inf))
    grid = np.linspace(0.1, 0.9, 9)
    est = estimate_curve(s, "lc", QUARTIC, 0.5, grid, T=np.inf)
    for xv, v in zip(grid, est.values):
        assert v == pytest.approx(nadaraya_watson(s, QUARTIC, 0.5, xv), abs=1e-10)


def test_points_without_covariate_mass_are_flagged():
    s = from_right_censored([0.0, 0.1], [1.0, 2.0], [np.inf, np.inf])
    est = estimate_curve(s, "lc", "quartic", 0.2, [0.05, 3.0], T=10.0)
    assert np.isfinite(est.values[0]) and np.isnan(est.values[1])
    assert "no covariate mass" in est.reasons[3.0]
    assert est.fraction_defined == 0.5


def test_median_undefined_is_flagged():
    s = from_right_censored([0.0, 0.0, 0.0], [1.0, 5.0, 5.0], [np.inf, 2.0, 2.0])
    est = estimate_curve(s, "lc", "quartic", 1.0, [0.0], T=10.0, target="median")
    assert np.isnan(est.values[0]) and "stays above" in est.reasons[0.0]


def test_simulation_design_smoke():
    s, _ = sample_dgp(250, 0)
    grid = np.linspace(0.05, 0.95, 50)
    for method in ("lc", "ll"):
        est = estimate_curve(s, method, "quartic", 0.1, grid)
        assert est.defined.all()


def test_default_truncation():
    s = from_right_censored(np.zeros(101), np.arange(1, 102, dtype=float), np.full(101, np.inf))
    assert default_truncation(s) == pytest.approx(96.0)


def test_variance_identity_exponential():
    lhs, rhs = variance_identity(lambda u: np.exp(-u), lambda u: np.ones_like(u))
    assert lhs == pytest.approx(1.0, abs=1e-3)
    assert rhs == pytest.approx(1.0, abs=1e-3)


def test_variance_identity_weibull():
    # shape 2 Weibull: Var = 1 - pi / 4
    lhs, rhs = variance_identity(lambda u: np.exp(-(u**2)), lambda u: 2 * u, upper=8.0)
    assert lhs == pytest.approx(1 - np.pi / 4, abs=1e-3)
    assert rhs == pytest.approx(1 - np.pi / 4, abs=1e-3)


def test_curve_estimate_io(tmp_path):
    est = CurveEstimate([0.0, 0.5, 1.0], [1.0, np.nan, 3.0], "lc", np.inf, reasons={0.5: "why"})
    est.to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines() == [
        "x,estimate,defined", "0.0,1.0,1", "0.5,,0", "1.0,3.0,1",
    ]
    est.to_json(tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["method"] == "local-constant" and doc["truncation"] == "inf"
    assert doc["values"] == [1.0, None, 3.0] and doc["undefined"] == {"0.5": "why"}
    assert est(0.5) == 2.0
    with pytest.raises(ValueError):
        est(1.5)
    with pytest.raises(ValueError):
        CurveEstimate([0.0, 0.0], [1.0, 2.0], "lc", 1.0)
