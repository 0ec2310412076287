import math

import numpy as np
import pytest

from conftest import bench_cell, standard_error
from vorint.bench import loglog_slope
from vorint.errors import EmptyFilter
from vorint.estimators import (
    Integrand,
    combine,
    estimate,
    estimate_cvor,
    estimate_fvor,
    estimate_mc,
    estimate_vor,
    voronoi_weights,
)
from vorint.geom2d import UNIT_WINDOW, Window
from vorint.pointproc import SpppParams, sample_sppp
from vorint.rng import make_rng


def const(c, w=UNIT_WINDOW):
    return Integrand(lambda p: np.full(len(p), c), w, c * w.area, None, f"const_{c}")


ZERO = const(0.0)


# -- exact cases ----------------------------------------------------------------------


@pytest.mark.parametrize("method", ["mc", "vor", "fvor", "cvor"])
def test_zero_function(method):
    r = estimate(method, make_rng(1), ZERO, 256)
    assert r.value == 0.0
    assert r.method == method


def test_mc_constant_exact():
    assert estimate_mc(make_rng(2), const(0.25), 4096).value == 0.25
    assert estimate_mc(make_rng(2), const(0.3), 1000).value == pytest.approx(0.3, rel=1e-15)


def test_fvor_constant_exact_per_realisation():
    params = SpppParams.create(256)
    for r in range(20):
        assert estimate_fvor(make_rng(3, r), const(0.7), params).value == pytest.approx(0.7, rel=1e-12)


def test_cvor_constant_exact_per_realisation():
    for r in range(20):
        assert estimate_cvor(make_rng(4, r), const(0.7), 300).value == pytest.approx(0.7, rel=1e-9)


def test_cvor_single_point():
    f = Integrand(lambda p: p[:, 0] + 2.0, UNIT_WINDOW)
    rep = estimate_cvor(make_rng(5), f, 1)
    x = make_rng(5).uniform(UNIT_WINDOW.lower, UNIT_WINDOW.upper, size=(1, 2))
    assert rep.value == pytest.approx(x[0, 0] + 2.0, rel=1e-12)


def test_vor_constant_in_expectation():
    params = SpppParams.create(256)
    vals = np.array([estimate_vor(make_rng(6, r), const(1.0), params).value for r in range(10_000)])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - 1.0) <= 4 * se
    # a single realisation is not exact
    assert vals.std() > 0


def test_general_window_area_factor():
    w = Window((2.0, 3.0), 1.5)  # area 9
    f = const(2.0, w)
    assert estimate_mc(make_rng(7), f, 100, w).value == pytest.approx(18.0, rel=1e-14)
    assert estimate_cvor(make_rng(7), f, 100, w).value == pytest.approx(18.0, rel=1e-9)
    params = SpppParams.create(100, window=w)
    assert estimate_fvor(make_rng(7), f, params, w).value == pytest.approx(18.0, rel=1e-12)
    assert estimate("mc", make_rng(7), f, 100, w).n_interior == 900


def test_strip_nuclei_are_not_evaluated():
    seen = []

    def f(p):
        seen.append(p.copy())
        return np.ones(len(p))

    params = SpppParams.create(500)
    rep = estimate_vor(make_rng(8), Integrand(f), params)
    pts = np.concatenate(seen)
    assert len(pts) == rep.n_interior and rep.n_strip > 0
    assert UNIT_WINDOW.contains(pts).all()


def test_vor_matches_manual_weighting():
    f = Integrand(lambda p: np.abs(p[:, 0] * p[:, 1]))
    params = SpppParams.create(400)
    rep = estimate_vor(make_rng(9), f, params)
    cfg = sample_sppp(make_rng(9), params)
    w = voronoi_weights(cfg)
    assert rep.value == pytest.approx(float(np.dot(f(cfg.interior), w)), rel=1e-12)
    wf = voronoi_weights(cfg, filtered=True)
    assert (wf <= w).all() and (wf > 0).any()


def test_combine_channelwise():
    vals = np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
    w = np.array([0.25, 0.75])
    np.testing.assert_allclose(combine(vals, w, "vor"), [2.5, 2.0, 1.5])
    np.testing.assert_allclose(combine(vals, w, "fvor"), [2.5, 2.0, 1.5])
    np.testing.assert_allclose(combine(vals, w, "mc"), [2.0, 2.0, 2.0])
    with pytest.raises(EmptyFilter):
        combine(vals, np.zeros(2), "fvor")


def test_non_finite_values_resampled():
    # infinite on a small disc; the estimators redraw rather than return inf
    def f(p):
        r = np.hypot(p[:, 0], p[:, 1])
        return np.where(r < 0.02, np.inf, 1.0)

    g = Integrand(f)
    assert math.isfinite(estimate_mc(make_rng(10), g, 500).value)
    assert math.isfinite(estimate_cvor(make_rng(10), g, 50).value)
    rep = estimate_vor(make_rng(10), g, SpppParams.create(50, max_retries=1000))
    assert math.isfinite(rep.value)


def test_empty_filter_counted_as_retry(monkeypatch):
    import vorint.estimators as est

    real = est.voronoi_weights
    calls = []

    def first_call_empty(cfg, filtered=False):
        calls.append(filtered)
        w = real(cfg, filtered)
        return np.zeros_like(w) if len(calls) == 1 else w

    monkeypatch.setattr(est, "voronoi_weights", first_call_empty)
    params = SpppParams.create(256)
    rep = estimate_fvor(make_rng(11), const(1.0), params)
    assert len(calls) == 2 and all(calls)
    assert rep.retries >= 1 and rep.value == pytest.approx(1.0, rel=1e-12)


def test_empty_filter_raised_when_retries_run_out(monkeypatch):
    import vorint.estimators as est

    monkeypatch.setattr(est, "voronoi_weights", lambda cfg, filtered=False: np.zeros(len(cfg.interior)))
    with pytest.raises(EmptyFilter):
        estimate_fvor(make_rng(11), const(1.0), SpppParams.create(64, max_retries=3))


def test_report_serialisation():
    d = estimate_mc(make_rng(12), const(1.0), 10).to_dict()
    assert set(d) == {"method", "value", "n_interior", "n_strip", "retries", "wall_time_ms"}


def test_unknown_method():
    with pytest.raises(ValueError):
        estimate("qmc", make_rng(0), ZERO, 10)


# -- statistical examples ---------------------------------------------------------------------


def test_mc_holder1_mean_and_std():
    c = bench_cell("holder_1", "mc", 4096, 10_000)
    assert abs(c.mean - 1 / 16) <= 3 * 0.00086 / math.sqrt(10_000)
    assert c.std_dev == pytest.approx(0.00086, rel=0.1)


def test_vor_holder1_std_within_band():
    c = bench_cell("holder_1", "vor", 4096, 10_000)
    assert abs(c.mean - 1 / 16) <= 3 * standard_error(c)
    assert 0.000171 / 1.5 <= c.std_dev <= 0.000171 * 1.5


def test_vor_poisson_holder_half_unbiased():
    c = bench_cell("holder_0.5", "vor", 1000, 10_000, mode="poisson")
    assert abs(c.mean - 2 / 9) <= 3 * standard_error(c)


@pytest.mark.parametrize("function", ["holder_1", "holder_0.5", "holder_0.1"])
def test_vor_unbiased_poisson_mode(function):
    c = bench_cell(function, "vor", 1000, 10_000, mode="poisson")
    alpha = float(function.split("_")[1])
    exact = (0.5**alpha / (alpha + 1)) ** 2
    assert c.failures == 0
    assert abs(c.mean - exact) <= 4 * standard_error(c)


def test_fvor_holder1_std_within_band():
    c = bench_cell("holder_1", "fvor", 4096, 1000)
    assert 0.000167 / 1.5 <= c.std_dev <= 0.000167 * 1.5


def test_fvor_holder01_std_within_band():
    c = bench_cell("holder_0.1", "fvor", 4096, 1000)
    mc = bench_cell("holder_0.1", "mc", 4096, 1000)
    assert 0.000297 / 1.5 <= c.std_dev <= 0.000297 * 1.5
    assert 0.001461 / 1.5 <= mc.std_dev <= 0.001461 * 1.5


@pytest.mark.parametrize("function", ["holder_1", "holder_0.5", "holder_0.1", "holder_0.01", "not_holder"])
@pytest.mark.parametrize("method", ["vor", "fvor"])
def test_variance_ordering(function, method):
    est = bench_cell(function, method, 4096, 1000)
    mc = bench_cell(function, "mc", 4096, 1000)
    assert est.std_dev < mc.std_dev


def test_discontinuity_vor_below_mc():
    vor = bench_cell("discontinuity", "vor", 4096, 1000)
    mc = bench_cell("discontinuity", "mc", 4096, 1000)
    assert vor.std_dev < mc.std_dev


def test_holder_001_vor_far_below_mc():
    vor = bench_cell("holder_0.01", "vor", 4096, 1000)
    mc = bench_cell("holder_0.01", "mc", 4096, 1000)
    assert mc.std_dev / vor.std_dev >= 10


def test_fvor_holder_001_far_below_mc():
    fvor = bench_cell("holder_0.01", "fvor", 4096, 1000)
    mc = bench_cell("holder_0.01", "mc", 4096, 1000)
    assert mc.std_dev / fvor.std_dev >= 10


def test_cvor_reduces_variance_on_not_holder():
    for n in (64, 256, 1024):
        cv = bench_cell("not_holder", "cvor", n, 300)
        mc = bench_cell("not_holder", "mc", n, 300)
        assert cv.std_dev < mc.std_dev


def test_vor_rate_for_integrand_vanishing_on_boundary():
    # cos^2 bump: smooth on the plane once extended by zero, so no boundary-area noise
    f = Integrand(lambda p: (np.cos(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1])) ** 2, name="bump")
    n_values = [2**k for k in range(5, 13)]
    variances = []
    for n in n_values:
        params = SpppParams.create(n)
        vals = [estimate_vor(make_rng(21, n, r), f, params).value for r in range(300)]
        variances.append(np.var(vals, ddof=1))
    assert loglog_slope(n_values, variances) <= -1.6
