import math
import os
from pathlib import Path

import numpy as np
import pytest

import ecfcc

SOURCE_DIR = Path(os.environ.get("ECFCC_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def test_sample_is_seeded():
    dims = [ecfcc.uniform(-5.0, 5.0), ecfcc.gamma(8.0, 0.5, scale=0.005)]
    a = ecfcc.sample(dims, 500, seed=3)
    b = ecfcc.sample(dims, 500, seed=3)
    assert a.shape == (500, 2)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a[:, 0]) <= 5.0)
    assert np.all(a[:, 1] > 0.0)


def test_gaussian_inversion_matches_erfc():
    t = ecfcc.gaussian_cdf(0.0, 1.0, -4.0, 4.0, grid=100)
    ref = np.array([normal_cdf(x) for x in t["grid"]])
    assert np.max(np.abs(t["values"] - ref)) <= 1e-6


def test_estimate_cdf_is_monotone_in_unit_interval():
    y = ecfcc.sample([ecfcc.mixture(0.5, ecfcc.gaussian(0.0, 0.2), ecfcc.weibull(4.0, 2.0))], 1000, seed=1)[:, 0]
    t = ecfcc.estimate_cdf(y)
    v = t["values"]
    assert t["sigma2"] > 0.0
    assert v.min() >= -1e-6 and v.max() <= 1.0 + 1e-6
    assert np.all(np.diff(v) >= -1e-6)


def test_under_approximation_gap():
    t = ecfcc.gaussian_cdf(0.0, 1.0, -6.0, 6.0, grid=400)
    pwa = ecfcc.under_approximate(t["grid"], t["values"], eps=1e-3, max_segments=20, quad_tol=t["quad_tol"])
    slopes = [a for a, _ in pwa["segments"]]
    assert all(s1 < s0 for s0, s1 in zip(slopes, slopes[1:]))
    for x, f in zip(t["grid"], t["values"]):
        if x >= pwa["x_lb"]:
            gap = f - ecfcc.evaluate_pwa(pwa, x)
            assert 0.0 <= gap <= 1e-3
    with pytest.raises(ValueError):
        ecfcc.evaluate_pwa(pwa, pwa["x_lb"] - 1.0)


def test_convex_table_has_no_restriction():
    x = np.linspace(0.0, 1.0, 50)
    with pytest.raises(ecfcc.RestrictionError):
        ecfcc.under_approximate(x, x**3, eps=1e-3)


def test_qp_box():
    r = ecfcc.solve_qp(np.eye(2), np.array([-2.0, -2.0]), np.eye(2), np.array([1.0, 1.0]))
    assert r["status"] == "optimal"
    np.testing.assert_allclose(r["z"], [1.0, 1.0], atol=1e-7)
    np.testing.assert_allclose(r["lambda"], [1.0, 1.0], atol=1e-6)


def test_qp_infeasible():
    A = np.array([[1.0], [-1.0]])
    r = ecfcc.solve_qp(np.eye(1), np.zeros(1), A, np.array([-1.0, -1.0]))
    assert r["status"] == "infeasible"


def test_dkw_margin():
    m = ecfcc.dkw_margin(1000, 0.05, 0.0, 1e-3)
    assert m["eps_E"] == pytest.approx(math.sqrt(math.log(40.0) / 2000.0))
    assert m["total"] == pytest.approx(m["eps_E"] + 1e-3)


def test_double_integrator_scenario():
    r = ecfcc.run_scenario(str(SOURCE_DIR / "scenarios" / "double_integrator.cfg"), rollouts=20000)
    assert r["status"] == "optimal"
    assert r["delta"].sum() <= 0.2 + 1e-8
    assert r["satisfaction"] >= 0.8
    assert len(r["u"]) == 10


def test_bad_scenario_path():
    with pytest.raises(ecfcc.Error):
        ecfcc.run_scenario(str(SOURCE_DIR / "scenarios" / "missing.cfg"))
