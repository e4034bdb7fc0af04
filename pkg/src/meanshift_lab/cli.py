"""Command-line interface: ``meanshift-lab <subcommand> [flags]``.

Exit codes: 0 ok, 2 input or configuration error, 3 non-convergence under
``--strict``, 4 cost guard (kernel horizon too large).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core_math.weights import WeightFunction
from .empirical import SamplingDistribution, read_sample
from .errors import CostGuard, InvalidParam, MeanShiftLabError
from .experiments.config import CONFIG_KEYS, ExperimentConfig, Study
from .experiments.runner import resolve_threads
from .experiments.studies import run_study
from .process import ConvergenceConfig, ProcessKind, run_to_convergence

EXIT_OK, EXIT_INPUT, EXIT_STRICT, EXIT_COST = 0, 2, 3, 4

STUDY_COMMANDS = {
    "simulate-mse": Study.MSE,
    "simulate-qq": Study.QQ,
    "consistency": Study.CONSISTENCY,
    "check-lemma3": Study.LEMMA3,
    "clt-check": Study.CLT,
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_convergence(p):
    p.add_argument("--tol", type=float, help="stopping tolerance on the max displacement (default 1e-8)")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap (default 1000)")


def _add_population(p, process: bool = True):
    p.add_argument("--t", type=int, required=True, help="iteration index t (at most 3)")
    p.add_argument("--dist", default="normal:0,1", help="base distribution: normal:<mean>,<sd> | uniform:<lo>,<hi> | t:<df>")
    p.add_argument("--weight", default="normal:1", help="weight spec normal:<sigma> or dexp:<b>")
    if process:
        p.add_argument("--process", default="blurring", choices=["blurring", "nonblurring"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meanshift-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"meanshift-lab v{__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="robust location estimate of a data file")
    p.add_argument("input", help="text file, one number per line, '#' comments")
    p.add_argument("--process", default="blurring", choices=[k.value for k in ProcessKind])
    p.add_argument("--weight", default="normal:1", help="weight spec normal:<sigma> or dexp:<b>")
    p.add_argument("--start", type=float, help="fixed-point start (default: sample median)")
    _add_convergence(p)
    p.add_argument("--strict", action="store_true", help="exit 3 if the process does not converge")
    p.add_argument("--report", help="also write the JSON report to this path")

    for name, study in STUDY_COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {study.value} study")
        p.add_argument("--config", help="JSON config; keys: " + ", ".join(CONFIG_KEYS) + " (flags win)")
        p.add_argument("--dist", help="sampling distribution, e.g. normal:0,1 | uniform:0,1 | t:3")
        p.add_argument("--weight", help="weight spec normal:<sigma> or dexp:<b>")
        p.add_argument("--n", type=_int_list, help="sample size(s), comma separated")
        p.add_argument("--m", type=int, help="number of replicates")
        p.add_argument("--seed", type=int, help="base RNG seed")
        p.add_argument("--kinds", help="estimators, comma separated: mean,median,blurring,nonblurring,fixed-point")
        _add_convergence(p)
        p.add_argument("--t", type=_int_list, help="iteration indices for the CLT check")
        p.add_argument("--probes", type=int, help="random probes per replicate (identity check)")
        p.add_argument("--threads", type=int, help="worker threads (default: $MEANSHIFT_LAB_THREADS or #cores)")
        p.add_argument("--full", action="store_true", help="large-scale budgets (hours)")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        p.add_argument("--no-plots", dest="plots", action="store_false", help="skip SVG output")

    p = sub.add_parser("kernel", help="tabulate H^(t)(u, z) as CSV")
    _add_population(p)
    p.add_argument("--grid", type=int, default=401, help="points per axis in [1e-3, 1 - 1e-3]")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("variance", help="bridge covariance at (u, v), or the CLT variance of S_n^(t)")
    _add_population(p)
    p.add_argument("--u", type=float, help="first bridge argument (with --v)")
    p.add_argument("--v", type=float, help="second bridge argument (with --u)")
    p.add_argument("--form", default="corrected", choices=["corrected", "textbook"],
                   help="CLT integrand: corrected (default) or the textbook display")
    return parser


def _eprint(*args):
    print(*args, file=sys.stderr)


def _cmd_estimate(args) -> int:
    w = WeightFunction.parse(args.weight)
    cfg = ConvergenceConfig(**{k: v for k, v in (("tol", args.tol), ("max_iter", args.max_iter)) if v is not None})
    kind = ProcessKind(args.process)
    resolved = {"input": args.input, "process": kind.value, "weight": w.spec(), "tol": cfg.tol,
                "max_iter": cfg.max_iter, "start": args.start, "strict": args.strict}
    _eprint("config:", json.dumps(resolved, sort_keys=True))
    data = read_sample(args.input)
    r = run_to_convergence(data, w, kind, cfg, start=args.start)
    pts = r.final_state.points if r.final_state is not None else np.array([r.estimate])
    report = {
        "estimate": r.estimate,
        "iterations": r.iterations_used,
        "converged": r.converged,
        "last_displacement": r.last_displacement,
        "n": data.n,
        "final_configuration": {"min": float(pts.min()), "median": float(np.median(pts)),
                                "max": float(pts.max()), "mean": float(pts.mean()), "spread": r.spread},
        "order_violations": r.order_violations,
        "config": resolved,
        "version": f"v{__version__}",
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    print(f"estimate: {r.estimate!r}")
    print(f"iterations: {r.iterations_used}")
    print(f"converged: {str(r.converged).lower()}")
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    if args.strict and not r.converged:
        _eprint(f"error: {kind.value} process did not converge in {cfg.max_iter} iterations")
        return EXIT_STRICT
    return EXIT_OK


def _study_config(args, study: Study) -> ExperimentConfig:
    mapping = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidParam(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise InvalidParam("config JSON must be an object")
        loaded.pop("study", None)
        mapping.update(loaded)
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    if args.full:
        base = ExperimentConfig.full_scale(study)
        mapping.setdefault("n", list(base.n_list))
        mapping.setdefault("m", base.replicates)
    return ExperimentConfig.from_mapping(mapping, study)


def _summarise(result) -> list[str]:
    study = result.config.study
    lines = []
    if study is Study.MSE:
        for r in result.rows:
            lines.append(f"{r.kind:12s} n={r.n:<6d} nMSE={r.n_mse:.5f} se={r.n * r.se:.5f}"
                         f" nonconverged={r.nonconverged}")
        for n in result.config.n_list:
            for g in result.gaps(n):
                lines.append(f"gap n={n} {g.lower}<{g.upper}: diff={g.difference:.3e}"
                             f" z_paired={g.z_paired:.2f} z_indep={g.z_independent:.2f}")
    elif study is Study.QQ:
        for r in result.rows:
            lines.append(f"{r.kind:12s} qq_correlation={r.correlation:.5f} nonconverged={r.nonconverged}")
    elif study is Study.CONSISTENCY:
        for r in result.rows:
            lines.append(f"{r.kind:12s} n={r.n:<6d} mean|err|={r.mean_abs_error:.5f} mse={r.mse:.3e}")
        lines.append(f"probe dominance (largest n beats smallest n): {result.dominance():.3f}")
    elif study is Study.LEMMA3:
        for r in result.rows:
            lines.append(f"n={r.n:<6d} panels={r.panels:<4d} max_residual={r.max_residual:.3e}")
        lines.append(f"non-increasing under refinement: {result.refinement_ok()}")
    else:
        for r in result.rows:
            lines.append(f"S_n^({r.t}) {r.kind:12s} quadrature={r.quadrature_variance:.5f}"
                         f" monte_carlo={r.mc_variance:.5f} (se {r.mc_se:.5f}) gap={r.relative_gap:.2%}")
        for c in result.covariance_rows:
            lines.append(f"Cov B1({c.u},{c.v}) quadrature={c.quadrature:.5f} monte_carlo={c.mc:.5f} z={c.z:+.2f}")
    return lines


def _cmd_study(args, study: Study) -> int:
    cfg = _study_config(args, study)
    threads = resolve_threads(args.threads)
    _eprint("config:", cfg.to_json(), f"threads={threads}")
    result = run_study(cfg, threads=threads)
    kwargs = {"plots": args.plots} if study in (Study.MSE, Study.QQ) else {}
    paths = result.write(args.out, **kwargs)
    for line in _summarise(result):
        print(line)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _population_args(args):
    from .population.kernels import T_MAX

    if args.t > T_MAX:
        raise CostGuard(f"t={args.t} exceeds the supported horizon {T_MAX}; "
                        "nested kernel recursion cost and error grow with t")
    if args.t < 0:
        raise InvalidParam("t must be >= 0")
    return SamplingDistribution.parse(args.dist), WeightFunction.parse(args.weight)


def _kernel_grid(dist, w, t, process, u_grid=None):
    from .population import PopulationDistribution, base_kernel, kernel_H_blurring, kernel_H_nonblurring
    from .population.kernels import KernelGrid

    F_0 = PopulationDistribution.from_base(dist, w=w)
    if t == 0:
        H = base_kernel(F_0)
        return H if u_grid is None else KernelGrid(0, "bridge", F_0, None, u_grid)
    build = kernel_H_blurring if process == "blurring" else kernel_H_nonblurring
    return build(t, F_0, w, u_grid)[-1]


def _cmd_kernel(args) -> int:
    from .population import default_u_grid

    dist, w = _population_args(args)
    if args.grid < 2:
        raise InvalidParam("--grid must be at least 2")
    resolved = {"t": args.t, "dist": dist.spec(), "weight": w.spec(), "process": args.process, "grid": args.grid}
    _eprint("config:", json.dumps(resolved, sort_keys=True))
    H = _kernel_grid(dist, w, args.t, args.process, default_u_grid(args.grid))
    meta = {"version": f"v{__version__}", "config": json.dumps(resolved, sort_keys=True),
            "convention": "H(u, z) = 1{z <= u} + R(u, z); B^(t)(u) = int H(u, z) dB^(0)(z), u on F^(t) quantiles"}
    if args.out:
        H.to_csv(args.out, meta)
        print(f"wrote {args.out}")
    else:
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "kernel.csv"
            H.to_csv(path, meta)
            sys.stdout.write(path.read_text(encoding="utf-8"))
    return EXIT_OK


def _cmd_variance(args) -> int:
    from .population import PopulationDistribution, clt_variance, default_quadrature

    dist, w = _population_args(args)
    resolved = {"t": args.t, "dist": dist.spec(), "weight": w.spec(), "process": args.process,
                "u": args.u, "v": args.v, "form": args.form}
    _eprint("config:", json.dumps(resolved, sort_keys=True))
    if (args.u is None) != (args.v is None):
        raise InvalidParam("--u and --v must be given together")
    if args.u is not None:
        H = _kernel_grid(dist, w, args.t, args.process)
        print(f"covariance: {H.covariance(args.u, args.v)!r}")
        return EXIT_OK
    quad, center = default_quadrature(dist, w)
    coarse = clt_variance(dist, w, args.t, args.process, args.form)
    fine = clt_variance(dist, w, args.t, args.process, args.form,
                        F_0=PopulationDistribution.from_base(dist, quad.refined(), center, w))
    print(f"variance: {coarse!r}")
    print(f"refined_variance: {fine!r}")
    print(f"refinement_delta: {abs(fine - coarse)!r}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command in STUDY_COMMANDS:
            return _cmd_study(args, STUDY_COMMANDS[args.command])
        if args.command == "kernel":
            return _cmd_kernel(args)
        return _cmd_variance(args)
    except CostGuard as exc:
        _eprint(f"error: {exc}")
        return EXIT_COST
    except (MeanShiftLabError, OSError) as exc:
        _eprint(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
