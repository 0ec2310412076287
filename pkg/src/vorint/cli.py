"""Command-line entry point: ``vorint <subcommand> ...``.

Machine-readable JSON goes to stdout; diagnostics go to stderr as JSON
objects.  Exit status is 0 on success, 1 on usage errors and 2 when a
run fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

from . import __version__
from .errors import InvalidConfidence, UnknownFunction, VorintError

log = logging.getLogger("vorint")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser | None = None):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps(
            {"level": record.levelname.lower(), "logger": record.name, "message": record.getMessage(), "time": round(record.created, 3)}
        )


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # optional arguments without a default describe their fallback in the help text
    def _get_help_string(self, action):
        if action.default is None:
            return action.help
        return super()._get_help_string(action)


def _diagnose(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def _emit(obj, pretty: bool) -> None:
    if not pretty:
        print(json.dumps(obj))
        return
    width = max(len(k) for k in obj)
    for k, v in obj.items():
        print(f"{k:<{width}}  {v}")


def _out_path(args, explicit: str | None, default_name: str) -> Path:
    path = Path(explicit) if explicit else Path(args.output_dir) / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return v


def _positive_real(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive real, got {text}")
    return v


def _pixel(text: str) -> tuple[int, int]:
    try:
        x, y = (int(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"expected x,y pixel coordinates, got {text!r}") from None
    return x, y


# -- subcommands ---------------------------------------------------------------


def cmd_epsilon(args) -> int:
    from .pointproc import bound_reject_prob, solve_epsilon

    out = {"n": args.n, "delta": args.delta}
    try:
        eps = solve_epsilon(args.n, args.delta)
    except InvalidConfidence as exc:
        eps = exc.epsilon
        out["note"] = str(exc)
    out.update(epsilon=eps, bound=bound_reject_prob(args.n, eps))
    _emit(out, args.pretty)
    return EXIT_OK


def cmd_integrate(args) -> int:
    from .bench import make_function
    from .estimators import estimate
    from .rng import make_rng

    try:
        f = make_function(args.function, args.alpha)
    except UnknownFunction as exc:
        raise UsageError(f"unknown function {exc.args[0]!r}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rng = make_rng(args.seed)
    report = estimate(args.method, rng, f, args.n, delta=args.delta, mode=args.mode, max_retries=args.max_retries)
    out = report.to_dict()
    # timing stays out of stdout by default so that repeated runs print identical JSON
    wall_ms = out.pop("wall_time_ms")
    log.info("estimate took %.3f ms", wall_ms)
    if args.timing:
        out["wall_time_ms"] = wall_ms
    out.update(function=f.name, seed=args.seed, mode=args.mode)
    if f.exact_value is not None:
        out["exact"] = f.exact_value
    _emit(out, args.pretty)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import BenchSpec, default_workers, emit_report, run_bench

    try:
        spec = BenchSpec.from_json(args.spec)
    except (ValueError, TypeError, UnknownFunction) as exc:
        raise UsageError(f"invalid bench spec {args.spec}: {exc}") from None
    workers = args.threads or default_workers()
    out_dir = Path(args.out) if args.out else Path(args.output_dir)

    def progress(cell):
        log.info("%s %s n=%d std=%.3g failures=%d", cell.function, cell.method, cell.n, cell.std_dev, cell.failures)

    report = run_bench(spec, workers=workers, progress=progress)
    paths = emit_report(report, out_dir, plots=args.plots)
    if args.pretty:
        print(f"{'method':<6} {'n':>6} {'mean':>12} {'std_dev':>12} {'time_ms':>10}")
        for c in report.cells:
            print(f"{c.method:<6} {c.n:>6} {c.mean:>12.6g} {c.std_dev:>12.6g} {c.median_time * 1e3:>10.4g}")
        for m, s in report.slopes.items():
            print(f"slope[{m}] = {s if s is None else round(s, 4)}")
    else:
        print(json.dumps({k: str(v) for k, v in paths.items()}))
    return EXIT_OK


def _render_job(args):
    from .render.render import RenderJob
    from .render.scene import load_scene

    scene = load_scene(args.scene, tuple(args.resolution) if args.resolution else None)
    try:
        return RenderJob(
            scene,
            spp=args.spp,
            sampler=args.sampler,
            weighting=args.weighting,
            max_depth=args.depth,
            nee=args.nee,
            seed=args.seed,
            delta=args.delta,
            clamp_factor=args.clamp_factor,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_render(args) -> int:
    from .render.imageio import write_image
    from .render.render import render_image, render_pixel

    out = _out_path(args, args.out, "render.pfm")
    if out.suffix.lower() not in (".pfm", ".ppm"):
        raise UsageError(f"--out must end in .pfm or .ppm, got {out.name}")
    job = _render_job(args)
    cam = job.scene.camera
    if args.dump_pixel:
        x, y = _pixel(args.dump_pixel[0])
        if not (0 <= x < cam.width and 0 <= y < cam.height):
            raise UsageError(f"pixel ({x}, {y}) outside a {cam.width}x{cam.height} image")

    def progress(done, total):
        log.debug("rows %d/%d", done, total)

    result = render_image(job, progress=progress)
    write_image(out, result.image)
    summary = {"out": str(out), "width": cam.width, "height": cam.height, "spp": job.spp,
               "sampler": job.sampler, "weighting": job.weighting, "fallbacks": result.fallbacks,
               "wall_time_s": round(result.wall_time, 3)}
    if args.dump_pixel:
        _, info = render_pixel(None, job, y * cam.width + x, dump=True)
        dump_path = _out_path(args, args.dump_pixel[1], "pixel.json")
        dump_path.write_text(json.dumps(info, indent=2) + "\n")
        summary["dump"] = str(dump_path)
    _emit(summary, args.pretty)
    return EXIT_OK


def cmd_mse(args) -> int:
    from .render.imageio import compute_mse, read_pfm

    value = compute_mse(read_pfm(args.a), read_pfm(args.b))
    print(f"{value:.9g}" if not args.pretty else f"MSE = {value:.6g}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    p = _Parser(prog="vorint", description="Voronoi-weighted Monte Carlo integration toolkit.", formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=_seed, default=0, help="64-bit unsigned master seed")
    p.add_argument("--threads", type=_nonneg_int, default=0, help="worker threads/processes (0 = all cores)")
    p.add_argument("--log-level", default="warning", choices=["debug", "info", "warning", "error"], help="stderr log level")
    p.add_argument("--output-dir", default=".", help="directory for outputs without an explicit path")
    p.add_argument("--pretty", action="store_true", help="human-readable output instead of JSON")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def seed_opt(sp):
        # SUPPRESS keeps the global --seed unless the subcommand sets its own
        sp.add_argument("--seed", type=_seed, default=argparse.SUPPRESS, help="overrides the global --seed, which defaults to 0")

    e = sub.add_parser("epsilon", help="strip width for a rejection-probability budget", formatter_class=fmt)
    e.add_argument("--n", type=_positive_real, required=True, help="intensity per unit area")
    e.add_argument("--delta", type=_probability, default=1e-3, help="target rejection probability")
    e.set_defaults(parser=e, func=cmd_epsilon)

    i = sub.add_parser("integrate", help="one integral estimate", formatter_class=fmt)
    i.add_argument("--method", choices=["mc", "vor", "fvor", "cvor"], default="vor", help="estimator")
    i.add_argument("--function", required=True, help="holder, holder_<alpha>, not_holder or discontinuity")
    i.add_argument("--n", type=_positive_int, required=True, help="sample count / intensity")
    i.add_argument("--alpha", type=float, default=None, help="Hoelder exponent, required for --function holder")
    i.add_argument("--delta", type=_probability, default=1e-3, help="stretched-window rejection budget")
    i.add_argument("--mode", choices=["fixed", "poisson"], default="fixed", help="point-count model")
    i.add_argument("--max-retries", type=_nonneg_int, default=100, help="stretched-window redraws before giving up")
    i.add_argument("--timing", action="store_true", help="include wall_time_ms in the output")
    seed_opt(i)
    i.set_defaults(parser=i, func=cmd_integrate)

    b = sub.add_parser("bench", help="replicated benchmark from a JSON spec", formatter_class=fmt)
    b.add_argument("--spec", required=True, help="BenchSpec JSON file")
    b.add_argument("--out", default=None, help="report directory; --output-dir when omitted")
    b.add_argument("--plots", action="store_true", help="also write gnuplot-ready .dat tables")
    b.set_defaults(parser=b, func=cmd_bench)

    r = sub.add_parser("render", help="path-trace a scene", formatter_class=fmt)
    r.add_argument("--scene", default=None, help="scene JSON; the built-in Cornell Box when omitted")
    r.add_argument("--spp", type=_positive_int, default=256, help="samples per pixel")
    r.add_argument("--sampler", choices=["rnd", "stratified", "sppp"], default="rnd", help="sub-pixel sampler")
    r.add_argument("--weighting", choices=["mc", "vor", "fvor"], default="mc", help="per-pixel weighting (vor/fvor need sppp)")
    r.add_argument("--depth", type=_positive_int, default=8, help="maximum path depth")
    r.add_argument("--nee", action=argparse.BooleanOptionalAction, default=True, help="next event estimation")
    r.add_argument("--delta", type=_probability, default=1e-3, help="stretched-window rejection budget")
    r.add_argument("--clamp-factor", type=_positive_real, default=10.0, help="radiance cap as a multiple of the brightest emitter")
    r.add_argument("--resolution", type=_positive_int, nargs=2, metavar=("W", "H"), default=None, help="override the resolution stored in the scene")
    r.add_argument("--out", default=None, help="output image, .pfm or .ppm; <output-dir>/render.pfm when omitted")
    r.add_argument("--dump-pixel", nargs=2, metavar=("X,Y", "JSON"), default=None, help="write every sample of one pixel to JSON")
    seed_opt(r)
    r.set_defaults(parser=r, func=cmd_render)

    m = sub.add_parser("mse", help="mean squared error between two PFM images", formatter_class=fmt)
    m.add_argument("--a", required=True, help="first PFM")
    m.add_argument("--b", required=True, help="second PFM")
    m.set_defaults(parser=m, func=cmd_mse)
    return p


def _configure(args) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter())
    log.handlers[:] = [handler]
    log.setLevel(args.log_level.upper())
    log.propagate = False
    if args.threads:
        import numba

        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        _diagnose("usage", "no command given")
        return EXIT_USAGE
    args = None
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given", parser)
        _configure(args)
        t0 = time.perf_counter()
        code = args.func(args)
        log.info("%s finished in %.3f s", args.command, time.perf_counter() - t0)
        return code
    except UsageError as exc:
        (exc.parser or getattr(args, "parser", None) or parser).print_usage(sys.stderr)
        _diagnose("usage", str(exc))
        return EXIT_USAGE
    except (VorintError, OSError, ValueError) as exc:
        _diagnose(type(exc).__name__, str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
