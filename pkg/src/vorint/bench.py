"""Benchmark harness: analytic test integrands and replication statistics."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyFilter, RejectionExhausted, UnknownFunction
from .estimators import METHODS, Integrand, estimate
from .geom2d import UNIT_WINDOW
from .pointproc import SpppParams
from .rng import make_rng

__all__ = [
    "NOT_HOLDER_EXACT",
    "DISCONTINUITY_EXACT",
    "FUNCTION_NAMES",
    "make_function",
    "BenchSpec",
    "CellStats",
    "BenchReport",
    "run_bench",
    "loglog_slope",
    "emit_report",
    "CSV_COLUMNS",
]

# (2 * int_2^inf sin(u)/u^3 du)^2, frozen from three independent quadratures
NOT_HOLDER_EXACT = 0.0029017170844109758
DISCONTINUITY_EXACT = 4.0 * math.log(1.0 + math.sqrt(2.0))

FUNCTION_NAMES = ("holder", "not_holder", "discontinuity")
METHOD_CODES = {m: i for i, m in enumerate(METHODS)}


def _holder(alpha: float):
    def f(p):
        return np.abs(p[:, 0] * p[:, 1]) ** alpha

    return f


def _not_holder(p):
    x, y = p[:, 0], p[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        v = x * y * np.sin(1.0 / x) * np.sin(1.0 / y)
    # continuous extension by zero on the axes
    return np.where((x == 0) | (y == 0), 0.0, v)


def _discontinuity(p):
    with np.errstate(divide="ignore"):
        return 1.0 / np.hypot(p[:, 0], p[:, 1])


def make_function(name: str, alpha: float | None = None) -> Integrand:
    """Build one of the benchmark integrands on the unit window.

    ``name`` is ``holder`` (with ``alpha``), ``not_holder`` or
    ``discontinuity``; ``holder_0.5`` style names are accepted as well.
    """
    m = re.fullmatch(r"holder_([0-9.eE+-]+)", name)
    if m:
        name, alpha = "holder", float(m.group(1))
    if name == "holder":
        if alpha is None:
            raise ValueError("holder needs alpha")
        alpha = float(alpha)
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        exact = (0.5**alpha / (alpha + 1)) ** 2
        return Integrand(_holder(alpha), UNIT_WINDOW, exact, alpha, f"holder_{alpha:g}")
    if name == "not_holder":
        return Integrand(_not_holder, UNIT_WINDOW, NOT_HOLDER_EXACT, None, "not_holder")
    if name == "discontinuity":
        return Integrand(_discontinuity, UNIT_WINDOW, DISCONTINUITY_EXACT, None, "discontinuity")
    raise UnknownFunction(name)


@dataclass
class BenchSpec:
    function: str
    alpha: float | None = None
    methods: list[str] = field(default_factory=lambda: ["mc", "vor", "fvor"])
    n_values: list[int] = field(default_factory=lambda: [2**k for k in range(5, 13)])
    replications: int = 1000
    seed: int = 0
    mode: str = "fixed"
    delta: float = 1e-3
    max_retries: int = 100

    def __post_init__(self):
        if list(self.n_values) != sorted(self.n_values):
            raise ValueError("n_values must be sorted ascending")
        if self.replications < 2:
            raise ValueError("replications must be >= 2")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.mode not in ("fixed", "poisson"):
            raise ValueError(f"unknown mode {self.mode!r}")
        make_function(self.function, self.alpha)

    @property
    def integrand(self) -> Integrand:
        return make_function(self.function, self.alpha)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown BenchSpec fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "BenchSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class CellStats:
    function: str
    method: str
    n: int
    mean: float
    std_dev: float
    mean_time: float
    median_time: float
    replications: int
    failures: int = 0
    retries: int = 0
    flagged: bool = False

    @property
    def variance(self) -> float:
        return self.std_dev**2

    @property
    def efficiency(self) -> float:
        """Inverse of (variance x median seconds per estimate); higher is better."""
        cost = self.variance * self.median_time
        return math.inf if cost == 0 else 1.0 / cost


@dataclass
class BenchReport:
    cells: list[CellStats] = field(default_factory=list)
    slopes: dict[str, float | None] = field(default_factory=dict)
    spec: dict | None = None

    def cell(self, method: str, n: int, function: str | None = None) -> CellStats:
        for c in self.cells:
            if c.method == method and c.n == n and (function is None or c.function == function):
                return c
        raise KeyError((method, n, function))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "slopes": self.slopes,
            "cells": [dict(asdict(c), efficiency=c.efficiency) for c in self.cells],
        }


def loglog_slope(n_values, variances, skip_smallest: int = 2) -> float | None:
    """Least-squares slope of log(variance) against log(n).

    The ``skip_smallest`` smallest sample sizes are dropped when at least three
    points remain; with fewer than three usable points the slope is undefined.
    """
    pairs = [(n, v) for n, v in zip(n_values, variances) if v > 0 and math.isfinite(v)]
    if len(pairs) - skip_smallest >= 3:
        pairs = pairs[skip_smallest:]
    if len(pairs) < 3:
        return None
    x = np.log([p[0] for p in pairs])
    y = np.log([p[1] for p in pairs])
    return float(np.polyfit(x, y, 1)[0])


def _replicate(args) -> tuple[float | None, float, int]:
    spec_d, method, n, rep = args
    spec = BenchSpec.from_dict(spec_d)
    f = spec.integrand
    rng = make_rng(spec.seed, METHOD_CODES[method], n, rep)
    try:
        r = estimate(method, rng, f, n, UNIT_WINDOW, spec.delta, spec.mode, spec.max_retries)
    except (RejectionExhausted, EmptyFilter):
        return None, 0.0, spec.max_retries
    return r.value, r.wall_time, r.retries


def _summarise(function, method, n, results) -> CellStats:
    ok = [r for r in results if r[0] is not None]
    values = [r[0] for r in ok]
    times = [r[1] for r in ok]
    failures = len(results) - len(ok)
    if values:
        mean = math.fsum(values) / len(values)
        var = math.fsum((v - mean) ** 2 for v in values) / max(len(values) - 1, 1)
    else:
        mean = var = math.nan
    return CellStats(
        function=function,
        method=method,
        n=n,
        mean=mean,
        std_dev=math.sqrt(var),
        mean_time=math.fsum(times) / len(times) if times else math.nan,
        median_time=statistics.median(times) if times else math.nan,
        replications=len(values),
        failures=failures,
        retries=sum(r[2] for r in results),
        flagged=failures > 0.01 * len(results),
    )


def run_bench(spec: BenchSpec, workers: int = 1, progress=None) -> BenchReport:
    """Run ``spec.replications`` independent estimates for every (method, n) pair.

    Replication ``r`` of ``(method, n)`` always uses stream
    ``(seed, method, n, r)``, so results do not depend on ``workers``.
    """
    spec_d = asdict(spec)
    fname = spec.integrand.name
    report = BenchReport(spec=spec_d)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for method in spec.methods:
            variances = []
            for n in spec.n_values:
                jobs = [(spec_d, method, n, r) for r in range(spec.replications)]
                if pool is None:
                    results = [_replicate(j) for j in jobs]
                else:
                    results = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
                cell = _summarise(fname, method, n, results)
                report.cells.append(cell)
                variances.append(cell.variance)
                if progress is not None:
                    progress(cell)
            report.slopes[method] = loglog_slope(spec.n_values, variances)
    finally:
        if pool is not None:
            pool.shutdown()
    return report


CSV_COLUMNS = ("function", "method", "n", "mean", "std_dev", "time_ms", "slope")


def _g(x) -> str:
    if x is None:
        return ""
    return f"{x:.6g}"


def report_csv(report: BenchReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in report.cells:
        w.writerow(
            [c.function, c.method, c.n, _g(c.mean), _g(c.std_dev), _g(c.median_time * 1e3), _g(report.slopes.get(c.method))]
        )
    return buf.getvalue()


def emit_report(report: BenchReport, out_dir, plots: bool = False) -> dict[str, Path]:
    """Write ``report.csv`` and ``report.json`` (plus gnuplot tables with ``plots``)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "report.csv", "json": out / "report.json"}
    paths["csv"].write_text(report_csv(report))
    paths["json"].write_text(json.dumps(report.to_dict(), indent=2, allow_nan=True) + "\n")
    if plots:
        paths["bands"] = out / "bands.dat"
        paths["efficiency"] = out / "efficiency.dat"
        with open(paths["bands"], "w") as fh:
            fh.write("# function method n mean lo hi\n")
            for c in report.cells:
                fh.write(f"{c.function} {c.method} {c.n} {c.mean:.9g} {c.mean - c.std_dev:.9g} {c.mean + c.std_dev:.9g}\n")
        with open(paths["efficiency"], "w") as fh:
            fh.write("# function method n time_ms variance\n")
            for c in report.cells:
                fh.write(f"{c.function} {c.method} {c.n} {c.median_time * 1e3:.9g} {c.variance:.9g}\n")
    return paths


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
