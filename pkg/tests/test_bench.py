import csv
import io
import json
import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from conftest import bench_cell
from vorint.bench import (
    CSV_COLUMNS,
    DISCONTINUITY_EXACT,
    NOT_HOLDER_EXACT,
    BenchReport,
    BenchSpec,
    CellStats,
    emit_report,
    loglog_slope,
    make_function,
    report_csv,
    run_bench,
)
from vorint.errors import UnknownFunction

TABLE_FUNCTIONS = ["holder_1", "holder_0.5", "holder_0.1", "holder_0.01", "not_holder", "discontinuity"]


# -- integrands and their exact values ---------------------------------------------------------


def test_holder_exact_values():
    assert make_function("holder", 1).exact_value == 0.0625
    assert make_function("holder_0.5").exact_value == pytest.approx(2 / 9, rel=1e-15)


@pytest.mark.parametrize("alpha", [1.0, 0.5, 0.1, 0.01])
def test_holder_exact_matches_quadrature(alpha):
    one_d, _ = integrate.quad(lambda t: abs(t) ** alpha, -0.5, 0.5, points=[0.0], epsabs=1e-14, epsrel=1e-13)
    assert make_function("holder", alpha).exact_value == pytest.approx(one_d**2, rel=1e-10)


def test_discontinuity_exact_closed_form():
    assert DISCONTINUITY_EXACT == pytest.approx(8 * 0.5 * math.log(1 + math.sqrt(2)), rel=1e-15)
    assert DISCONTINUITY_EXACT == pytest.approx(3.5255, abs=1e-4)


def test_discontinuity_exact_matches_quadrature():
    # eight congruent triangles 0 <= y <= x <= 1/2; polar coordinates remove the singularity
    inner = lambda th: 0.5 / math.cos(th)  # noqa: E731  (integral of r^-1 * r dr up to the edge x=1/2)
    tri, _ = integrate.quad(inner, 0.0, math.pi / 4, epsabs=1e-14)
    assert 8 * tri == pytest.approx(DISCONTINUITY_EXACT, rel=1e-12)


def test_not_holder_exact_matches_oscillatory_quadrature():
    # the integrand factorises: (int_{-1/2}^{1/2} t sin(1/t) dt)^2, and with u = 1/t the
    # one-dimensional factor is 2 * int_2^inf sin(u) / u^3 du
    mpmath.mp.dps = 25
    one_d = 2 * mpmath.quadosc(lambda u: mpmath.sin(u) / u**3, [2, mpmath.inf], period=2 * mpmath.pi)
    assert NOT_HOLDER_EXACT == pytest.approx(float(one_d**2), rel=1e-10)


def test_not_holder_exact_matches_sine_integral_closed_form():
    # int_2^inf sin u / u^3 du = sin2/8 + cos2/4 - (pi/2 - Si(2))/2 by two integrations by parts
    from scipy.special import sici

    si2, _ = sici(2.0)
    tail = math.sin(2) / 8 + math.cos(2) / 4 - (math.pi / 2 - si2) / 2
    assert NOT_HOLDER_EXACT == pytest.approx((2 * tail) ** 2, rel=1e-12)


def test_not_holder_zero_on_axes():
    f = make_function("not_holder")
    vals = f(np.array([[0.0, 0.3], [0.2, 0.0], [0.0, 0.0]]))
    assert np.array_equal(vals, [0.0, 0.0, 0.0])


def test_discontinuity_singular_at_origin():
    f = make_function("discontinuity")
    assert f(np.array([[0.0, 0.0]]))[0] == math.inf
    assert f(np.array([[0.3, 0.4]]))[0] == pytest.approx(2.0)


def test_function_errors():
    with pytest.raises(UnknownFunction):
        make_function("gaussian")
    with pytest.raises(ValueError):
        make_function("holder")
    with pytest.raises(ValueError):
        make_function("holder", 1.5)


# -- BenchSpec ---------------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        BenchSpec("holder_1", n_values=[64, 32])
    with pytest.raises(ValueError):
        BenchSpec("holder_1", replications=1)
    with pytest.raises(ValueError):
        BenchSpec("holder_1", methods=["qmc"])
    with pytest.raises(ValueError):
        BenchSpec.from_dict({"function": "holder_1", "colour": "red"})


def test_spec_defaults():
    s = BenchSpec("holder_1")
    assert s.replications == 1000 and s.mode == "fixed" and s.delta == 1e-3
    assert s.n_values == [2**k for k in range(5, 13)]


def test_spec_json_round_trip(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"function": "holder", "alpha": 0.5, "methods": ["mc"], "n_values": [16], "replications": 3}))
    s = BenchSpec.from_json(p)
    assert s.integrand.exact_value == pytest.approx(2 / 9)


# -- reports -----------------------------------------------------------------------------------


def test_degenerate_run():
    rep = run_bench(BenchSpec("holder_1", methods=["mc", "vor"], n_values=[32, 64], replications=2))
    assert len(rep.cells) == 4
    assert rep.slopes == {"mc": None, "vor": None}
    for c in rep.cells:
        assert c.replications == 2 and c.std_dev >= 0 and math.isfinite(c.mean)
    json.dumps(rep.to_dict())


def test_slope_rule():
    n = [2**k for k in range(5, 13)]
    var = [1.0 / x for x in n]
    assert loglog_slope(n, var) == pytest.approx(-1.0)
    assert loglog_slope(n[:3], var[:3]) == pytest.approx(-1.0)  # too few to skip any
    assert loglog_slope(n[:2], var[:2]) is None
    # the two smallest sizes are dropped when enough remain
    bent = [10.0, 10.0] + var[2:]
    assert loglog_slope(n, bent) == pytest.approx(-1.0)


def test_empty_report_is_header_only(tmp_path):
    text = report_csv(BenchReport())
    assert text == ",".join(CSV_COLUMNS) + "\n"
    paths = emit_report(BenchReport(), tmp_path)
    assert paths["csv"].read_text() == text


def test_one_cell_row_matches_values():
    c = CellStats("holder_1", "mc", 4096, 0.0625123456789, 0.000861234567, 0.0012, 0.0011987654321, 10)
    rep = BenchReport([c], {"mc": -1.00123456})
    rows = list(csv.reader(io.StringIO(report_csv(rep))))
    assert rows[0] == list(CSV_COLUMNS)
    assert rows[1] == ["holder_1", "mc", "4096", "0.0625123", "0.000861235", "1.19877", "-1.00123"]
    assert len(rows) == 2


def test_emit_with_plot_tables(tmp_path):
    rep = run_bench(BenchSpec("holder_1", methods=["mc"], n_values=[32, 64, 128], replications=3))
    paths = emit_report(rep, tmp_path / "out", plots=True)
    assert set(paths) == {"csv", "json", "bands", "efficiency"}
    bands = paths["bands"].read_text().splitlines()
    assert bands[0].startswith("#") and len(bands) == 4
    assert json.loads(paths["json"].read_text())["cells"][0]["method"] == "mc"


def test_reproducible_bytes_and_worker_independence():
    spec = BenchSpec("not_holder", methods=["mc", "vor", "fvor", "cvor"], n_values=[32, 64, 128], replications=5, seed=3)
    a = report_csv(run_bench(spec)).splitlines()
    b = report_csv(run_bench(spec)).splitlines()
    c = report_csv(run_bench(spec, workers=2)).splitlines()

    # time_ms is a measurement; every other field is bit-identical
    def strip_time(lines):
        k = CSV_COLUMNS.index("time_ms")
        return [",".join(f for i, f in enumerate(line.split(",")) if i != k) for line in lines]

    assert strip_time(a) == strip_time(b) == strip_time(c)


def test_failures_are_flagged():
    # with no retries a small configuration is sometimes rejected outright
    rep = run_bench(BenchSpec("holder_1", methods=["vor"], n_values=[4], replications=200, delta=0.5, max_retries=0))
    c = rep.cells[0]
    assert c.failures > 0
    assert c.failures + c.replications == 200
    assert c.flagged == (c.failures > 2)


# -- statistical examples ------------------------------------------------------------------------


def test_mc_holder1_std_band():
    c = bench_cell("holder_1", "mc", 4096, 10_000)
    assert 0.0006 <= c.std_dev <= 0.0012


def test_mc_std_matches_analytic():
    sigma = math.sqrt((1 / 144 - 1 / 256) / 4096)
    assert sigma == pytest.approx(0.000861247171570505, rel=1e-12)
    c = bench_cell("holder_1", "mc", 4096, 10_000)
    assert c.std_dev == pytest.approx(sigma, rel=0.1)


def test_vor_not_holder_against_mc():
    vor = bench_cell("not_holder", "vor", 4096, 10_000)
    mc = bench_cell("not_holder", "mc", 4096, 10_000)
    assert 0.000179 / 1.5 <= vor.std_dev <= 0.000179 * 1.5
    assert 0.000585 / 1.5 <= mc.std_dev <= 0.000585 * 1.5
    assert vor.std_dev < mc.std_dev


def test_table_shape():
    cells = [bench_cell(f, m, 4096, 1000) for f in TABLE_FUNCTIONS for m in ("mc", "vor", "fvor")]
    rows = report_csv(BenchReport(cells)).splitlines()[1:]
    assert len(rows) == 18
    assert {r.split(",")[0] for r in rows} == {make_function(f).name for f in TABLE_FUNCTIONS}


@pytest.mark.parametrize("function", ["holder_1", "holder_0.5", "holder_0.1", "not_holder"])
def test_mc_is_more_efficient_on_analytic_functions(function):
    mc = bench_cell(function, "mc", 4096, 1000)
    for method in ("vor", "fvor"):
        assert mc.efficiency > bench_cell(function, method, 4096, 1000).efficiency
