"""Command-line front end: one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage or file-format error, 2 degenerate or
non-convergent estimation (the status also appears in the output CSV).
Every run echoes its resolved parameters to a ``<out>.meta`` sidecar of
``key=value`` lines; no subcommand touches paths other than those given by
flags (plus their sidecars).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ._textio import FormatError
from ._version import __version__
from .emission import (
    build_separated_model,
    ml_classify,
    read_emission_model,
    read_rimg,
    sample_emission,
    write_emission_model,
    write_rimg,
)
from .estimator import (
    CURVE_CSV_HEADER,
    ESTIMATE_CSV_HEADER,
    NonConvergenceError,
    ScoreContext,
    SolverOptions,
    estimate_beta,
    estimate_csv_row,
    root_condition,
    sample_curve,
)
from .experiments import read_config, run_experiment
from .lattice import GridDims, NeighborhoodSpec, read_lmap, write_lmap
from .rng import RNG_ALGORITHM, make_rng
from .sampler import SamplerConfig, simulate_potts
from .segmentation import IcmOptions, icm

USAGE_ERROR = 1
DEGENERATE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _write_meta(out_path: str | Path, entries: dict) -> None:
    lines = [f"{k}={v}" for k, v in entries.items()]
    Path(str(out_path) + ".meta").write_text("\n".join(lines) + "\n")


def _nbhd(args) -> NeighborhoodSpec:
    return NeighborhoodSpec(args.nbhd)


def _add_nbhd_flag(p) -> None:
    p.add_argument("--nbhd", choices=("first", "second"), default="second",
                   help="neighborhood order (default: second, 8 neighbors)")


def _load_evidence(args):
    if (args.image is None) != (args.model is None):
        raise _CliUsage("--image and --model must be given together")
    if args.image is None:
        return None
    return read_rimg(args.image), read_emission_model(args.model)


class _CliUsage(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pottspml",
                     description="Hidden Potts model pipeline and experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw a label field")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("emit", help="sample Gaussian observations of a map")
    p.add_argument("--map", required=True)
    p.add_argument("--model", help="emission model file (EMIT)")
    p.add_argument("--base-mean", type=float, help="first class mean")
    p.add_argument("--sigma", type=float, help="common standard deviation")
    p.add_argument("--k", type=float, help="mean separation in sigmas")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model-out", help="also write the model used (EMIT)")

    p = sub.add_parser("classify", help="per-site maximum likelihood map")
    p.add_argument("--image", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("icm", help="iterated conditional modes segmentation")
    p.add_argument("--image", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--init", required=True, help="initial map (LMAP)")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--max-sweeps", type=int, default=100)
    _add_nbhd_flag(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="estimate the smoothness parameter")
    p.add_argument("--method", choices=("prior", "post"), required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--image")
    p.add_argument("--model")
    _add_nbhd_flag(p)
    p.add_argument("--f-tolerance", type=float, default=1e-8)
    p.add_argument("--beta-tolerance", type=float, default=1e-10)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--bracket-halfwidth", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("curve", help="score values over a beta grid")
    p.add_argument("--method", choices=("prior", "post"), required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--image")
    p.add_argument("--model")
    _add_nbhd_flag(p)
    p.add_argument("--grid", required=True,
                   help="comma-separated strictly increasing beta values")
    p.add_argument("--variant", help="variant tag in the CSV "
                   "(default: the method name)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("check", help="root-condition (degeneracy) probe")
    p.add_argument("--map", required=True)
    _add_nbhd_flag(p)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--figures", action="store_true",
                   help="render report figures after writing the CSVs")

    p = sub.add_parser("report", help="render figures from experiment CSVs")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)

    return parser


def _cmd_simulate(args) -> int:
    config = SamplerConfig(args.beta, args.sweeps, args.seed)
    field = simulate_potts(GridDims(args.rows, args.cols),
                           args.num_classes, config)
    write_lmap(field, args.out)
    _write_meta(args.out, {
        "seed": args.seed, "beta": args.beta, "L": args.num_classes,
        "sweeps": args.sweeps, "rng": RNG_ALGORITHM,
        "rows": args.rows, "cols": args.cols,
    })
    return 0


def _cmd_emit(args) -> int:
    field = read_lmap(args.map)
    if args.model is not None:
        if args.base_mean is not None or args.sigma is not None or args.k is not None:
            raise _CliUsage("give either --model or --base-mean/--sigma/--k")
        model = read_emission_model(args.model)
        model_desc = {"model": args.model}
    else:
        if args.base_mean is None or args.sigma is None or args.k is None:
            raise _CliUsage("need --model, or all of --base-mean/--sigma/--k")
        model = build_separated_model(field.num_classes, args.base_mean,
                                      args.sigma, args.k)
        model_desc = {"base_mean": args.base_mean, "sigma": args.sigma,
                      "k": args.k}
    image = sample_emission(field, model, make_rng(args.seed))
    write_rimg(image, args.out)
    if args.model_out:
        write_emission_model(model, args.model_out)
    _write_meta(args.out, {
        "seed": args.seed, "map": args.map, "L": field.num_classes,
        "rng": RNG_ALGORITHM, **model_desc,
    })
    return 0


def _cmd_classify(args) -> int:
    image = read_rimg(args.image)
    model = read_emission_model(args.model)
    write_lmap(ml_classify(image, model), args.out)
    _write_meta(args.out, {"image": args.image, "model": args.model})
    return 0


def _cmd_icm(args) -> int:
    image = read_rimg(args.image)
    model = read_emission_model(args.model)
    init = read_lmap(args.init)
    result = icm(image, model, init,
                 IcmOptions(beta=args.beta, max_sweeps=args.max_sweeps),
                 nbhd=_nbhd(args))
    write_lmap(result.field, args.out)
    summary = f"sweeps={result.sweeps}, converged={str(result.converged).lower()}"
    print(summary)
    _write_meta(args.out, {
        "image": args.image, "model": args.model, "init": args.init,
        "beta": args.beta, "max_sweeps": args.max_sweeps, "nbhd": args.nbhd,
        "sweeps": result.sweeps,
        "converged": str(result.converged).lower(),
    })
    return 0


def _estimation_context(args) -> ScoreContext:
    field = read_lmap(args.map)
    evidence = _load_evidence(args)
    if args.method == "post" and evidence is None:
        raise _CliUsage("--method post needs --image and --model")
    if args.method == "prior":
        evidence = None
    return ScoreContext(field, _nbhd(args), evidence)


def _cmd_estimate(args) -> int:
    ctx = _estimation_context(args)
    opts = SolverOptions(args.f_tolerance, args.beta_tolerance,
                         args.max_iterations, args.bracket_halfwidth)
    status = 0
    try:
        result = estimate_beta(ctx, opts)
        if result.degenerate:
            status = DEGENERATE
    except NonConvergenceError as exc:
        print(f"estimation did not converge: {exc}", file=sys.stderr)
        Path(args.out).write_text(
            ESTIMATE_CSV_HEADER + "\n"
            f"{args.method},nan,nan,{args.max_iterations},false\n")
        return DEGENERATE
    Path(args.out).write_text(
        ESTIMATE_CSV_HEADER + "\n" + estimate_csv_row(result) + "\n")
    print(estimate_csv_row(result))
    _write_meta(args.out, {
        "method": args.method, "map": args.map,
        "image": args.image or "", "model": args.model or "",
        "nbhd": args.nbhd, "f_tolerance": args.f_tolerance,
        "beta_tolerance": args.beta_tolerance,
        "max_iterations": args.max_iterations,
        "bracket_halfwidth": args.bracket_halfwidth,
        "degenerate": str(result.degenerate).lower(),
    })
    return status


def _cmd_curve(args) -> int:
    ctx = _estimation_context(args)
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError:
        raise _CliUsage(f"bad --grid value: {args.grid!r}")
    points = sample_curve(ctx, grid)
    variant = args.variant or args.method
    lines = [CURVE_CSV_HEADER]
    lines += [f"{b!r},{s!r},{variant}" for b, s in points]
    Path(args.out).write_text("\n".join(lines) + "\n")
    _write_meta(args.out, {
        "method": args.method, "map": args.map,
        "image": args.image or "", "model": args.model or "",
        "nbhd": args.nbhd, "grid": args.grid, "variant": variant,
    })
    return 0


def _cmd_check(args) -> int:
    field = read_lmap(args.map)
    ok = root_condition(field, _nbhd(args))
    print(f"root_condition={str(ok).lower()}")
    return 0 if ok else DEGENERATE


def _cmd_experiment(args) -> int:
    cfg = read_config(args.config)

    def progress(done, total):
        if done == total or done % 10 == 0:
            print(f"  simulated {done}/{total} fields", flush=True)

    rows, _records = run_experiment(cfg, args.out, threads=args.threads,
                                    progress=progress)
    print(f"wrote {len(rows)} accuracy rows to {args.out}")
    if args.figures:
        from .report import render_report

        for path in render_report(args.out, args.out):
            print(f"wrote {path}")
    return 0


def _cmd_report(args) -> int:
    from .report import render_report

    written = render_report(args.in_dir, args.out)
    for path in written:
        print(f"wrote {path}")
    if not written:
        print("no experiment CSVs found", file=sys.stderr)
        return USAGE_ERROR
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "emit": _cmd_emit,
    "classify": _cmd_classify,
    "icm": _cmd_icm,
    "estimate": _cmd_estimate,
    "curve": _cmd_curve,
    "check": _cmd_check,
    "experiment": _cmd_experiment,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits itself on usage errors / --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _CliUsage as exc:
        print(f"pottspml {args.command}: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (FormatError, ValueError, OSError) as exc:
        print(f"pottspml {args.command}: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
