"""Command-line interface.

Subcommands: ``solve`` (one run), ``bench`` (the full budget-grid
experiment), ``account`` (print an RDP curve for given parameters), and
``calibrate`` (noise level for a target budget). Flags mirror the
experiment configuration; a ``key = value`` config file can override any
flag. Output files land in --outdir, defaulting to the PRIVFP_OUTDIR
environment variable (or the working directory).

Exit codes: 0 success, 2 parameter error, 3 structural error, 4 model
error, 5 out-of-regime condition, 1 anything else. Errors are printed to
stderr as ``error category=<category>: <message>``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import bench, privacy
from .errors import ConditionNotMet, ModelError, ParameterError, StructuralError

_EXIT_CODES = [
    (ParameterError, "parameter_error", 2),
    (StructuralError, "structural_error", 3),
    (ModelError, "model_error", 4),
    (ConditionNotMet, "condition_not_met", 5),
]


def _parse_alphas(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _read_config_file(path: str) -> dict[str, str]:
    """Parse the documented `key = value` format (one pair per line, # comments)."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_CONFIG_COERCIONS = {
    "setting": str, "algorithm": str, "n": int, "p": int, "support_size": int,
    "noise_std": float, "K": int, "lam": float, "gamma_scale": float, "step": float,
    "clip_threshold": float, "kappa": float, "kappa_fraction": float,
    "sample_fraction": float, "delta": float, "sigma": float, "data_seed": int,
    "test_fraction": float,
    "epsilons": lambda s: tuple(float(t) for t in s.replace(",", " ").split()),
    "seeds": lambda s: tuple(int(t) for t in s.replace(",", " ").split()),
    "alphas": _parse_alphas,
}


def _overrides_from_args(args) -> dict:
    overrides = {}
    if args.config:
        raw = _read_config_file(args.config)
        for key, value in raw.items():
            if key not in _CONFIG_COERCIONS:
                raise ParameterError(f"unknown config key {key!r}")
            overrides[key] = _CONFIG_COERCIONS[key](value)
    valid = {f.name for f in fields(bench.ExperimentConfig)}
    for name in valid:
        flag = getattr(args, name, None)
        if flag is not None:
            overrides[name] = flag
    return {k: v for k, v in overrides.items() if k in valid}


def _config_from_args(args) -> bench.ExperimentConfig:
    return replace(bench.ExperimentConfig(), **_overrides_from_args(args))


def _add_experiment_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key = value file overriding flags")
    parser.add_argument("--setting", choices=("centralized", "federated", "decentralized"))
    parser.add_argument("--algorithm", choices=("admm", "dpsgd"))
    parser.add_argument("--n", type=int)
    parser.add_argument("--p", type=int)
    parser.add_argument("--support-size", dest="support_size", type=int)
    parser.add_argument("--noise-std", dest="noise_std", type=float)
    parser.add_argument("--K", type=int)
    parser.add_argument("--lam", type=float, help="splitting step size in (0, 1]")
    parser.add_argument("--gamma-scale", dest="gamma_scale", type=float,
                        help="prox step as a multiple of 2*n_train")
    parser.add_argument("--step", type=float, help="DP-SGD step size")
    parser.add_argument("--clip-threshold", dest="clip_threshold", type=float)
    parser.add_argument("--kappa", type=float)
    parser.add_argument("--kappa-fraction", dest="kappa_fraction", type=float)
    parser.add_argument("--sample-fraction", dest="sample_fraction", type=float)
    parser.add_argument("--epsilons", type=lambda s: tuple(float(t) for t in s.split(",")))
    parser.add_argument("--delta", type=float)
    parser.add_argument("--sigma", type=float, help="fixed noise std (skips calibration; 0 = non-private)")
    parser.add_argument("--seeds", type=lambda s: tuple(int(t) for t in s.split(",")))
    parser.add_argument("--data-seed", dest="data_seed", type=int)
    parser.add_argument("--test-fraction", dest="test_fraction", type=float)
    parser.add_argument("--alphas", type=_parse_alphas)
    parser.add_argument("--outdir", default=None, help="output directory (default: $PRIVFP_OUTDIR or .)")


def _outdir(args) -> Path:
    out = args.outdir or os.environ.get("PRIVFP_OUTDIR", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_solve(args) -> int:
    config = _config_from_args(args)
    collect = bool(args.trace_out or args.observations_out)
    row, artifacts = bench.solve_once(config, collect=collect)
    print(f"setting={row.setting} algorithm={row.algorithm} sigma={row.sigma:.6g} "
          f"epsilon={row.epsilon:.6g} delta={row.delta:g}")
    print(f"train_obj={row.train_obj:.12g} test_obj={row.test_obj:.12g} "
          f"runtime_ms={row.runtime_ms:.1f}")
    outdir = _outdir(args)
    if args.out:
        bench.emit_csv([row], outdir / args.out)
        print(f"wrote {outdir / args.out}")
    if args.trace_out:
        if "trace" not in artifacts:
            raise ParameterError("trace export is only available for admm runs")
        bench.emit_trace_csv(artifacts["trace"], outdir / args.trace_out)
        print(f"wrote {outdir / args.trace_out}")
    if args.observations_out:
        if "observations" not in artifacts:
            raise ParameterError("observation logs exist only for decentralized runs")
        bench.emit_observations_csv(artifacts["observations"], outdir / args.observations_out)
        print(f"wrote {outdir / args.observations_out}")
    return 0


def _cmd_bench(args) -> int:
    overrides = _overrides_from_args(args)
    algorithms = ("admm", "dpsgd") if args.compare else \
        (overrides.get("algorithm", bench.ExperimentConfig().algorithm),)
    rows = []
    for algorithm in algorithms:
        # per-algorithm tuned defaults first, explicit flags on top
        config = bench.tuned_config(algorithm, **{k: v for k, v in overrides.items()
                                                  if k != "algorithm"})
        if args.tune:
            config = bench.tune(config)
            names = ("lam", "clip_threshold", "gamma_scale") if algorithm == "admm" \
                else ("step", "clip_threshold")
            print(f"{algorithm} tuned parameters:",
                  {k: getattr(config, k) for k in names})
        rows.extend(bench.run_experiment(config))
    path = _outdir(args) / args.out
    bench.emit_csv(rows, path)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_account(args) -> int:
    curve = privacy.setting_curve(
        args.setting, args.sigma, K=args.K, L=args.L, gamma=args.gamma, n=args.n,
        m=args.m, K_i=args.K_i, alphas=args.alphas or privacy.DEFAULT_ALPHAS)
    print("alpha,epsilon,provenance")
    for a, e in zip(curve.alphas, curve.epsilons):
        print(f"{format(a, '.17g')},{format(e, '.17g')},{curve.provenance}")
    if args.delta is not None:
        eps_dp = privacy.rdp_to_dp(curve, args.delta)
        print(f"# (epsilon, delta)-DP: epsilon={eps_dp:.12g} at delta={args.delta:g}",
              file=sys.stderr)
    if args.out:
        bench.emit_accountant_csv(curve, _outdir(args) / args.out)
    return 0


def _cmd_calibrate(args) -> int:
    sigma = privacy.calibrate_sigma(
        args.setting, epsilon=args.epsilon, delta=args.delta, alpha=args.alpha,
        K=args.K, L=args.L, gamma=args.gamma, n=args.n, m=args.m, K_i=args.K_i,
        alphas=args.alphas or privacy.DEFAULT_ALPHAS)
    print(format(sigma, ".12g"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privfp",
                                     description="Private fixed-point optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one configuration once")
    _add_experiment_flags(solve)
    solve.add_argument("--out", help="also write the result row as CSV")
    solve.add_argument("--trace-out", dest="trace_out",
                       help="write the per-round trace CSV (admm runs)")
    solve.add_argument("--observations-out", dest="observations_out",
                       help="write the per-user observation log CSV (decentralized runs)")
    solve.set_defaults(fn=_cmd_solve)

    bench_p = sub.add_parser("bench", help="run the budget-grid experiment")
    _add_experiment_flags(bench_p)
    bench_p.add_argument("--out", default="results.csv")
    bench_p.add_argument("--compare", action="store_true",
                         help="run both algorithms on the same grid")
    bench_p.add_argument("--tune", action="store_true",
                         help="grid-search hyperparameters at the smallest budget first")
    bench_p.set_defaults(fn=_cmd_bench)

    account = sub.add_parser("account", help="print an RDP curve")
    account.add_argument("--setting", required=True, choices=privacy.SETTINGS)
    account.add_argument("--sigma", type=float, required=True)
    account.add_argument("--K", type=int, required=True)
    account.add_argument("--L", type=float, required=True)
    account.add_argument("--gamma", type=float, required=True)
    account.add_argument("--n", type=int, required=True)
    account.add_argument("--m", type=int)
    account.add_argument("--K-i", dest="K_i", type=int)
    account.add_argument("--delta", type=float, help="also convert to (epsilon, delta)-DP")
    account.add_argument("--alphas", type=_parse_alphas)
    account.add_argument("--out", help="write the curve as CSV")
    account.add_argument("--outdir", default=None)
    account.set_defaults(fn=_cmd_account)

    calibrate = sub.add_parser("calibrate", help="noise std for a target budget")
    calibrate.add_argument("--setting", required=True, choices=privacy.SETTINGS)
    calibrate.add_argument("--epsilon", type=float, required=True)
    calibrate.add_argument("--delta", type=float)
    calibrate.add_argument("--alpha", type=float, help="fix a single Rényi order instead of delta")
    calibrate.add_argument("--K", type=int, required=True)
    calibrate.add_argument("--L", type=float, required=True)
    calibrate.add_argument("--gamma", type=float, required=True)
    calibrate.add_argument("--n", type=int, required=True)
    calibrate.add_argument("--m", type=int)
    calibrate.add_argument("--K-i", dest="K_i", type=int)
    calibrate.add_argument("--alphas", type=_parse_alphas)
    calibrate.set_defaults(fn=_cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - map to documented exit codes
        for exc_type, category, code in _EXIT_CODES:
            if isinstance(exc, exc_type):
                print(f"error category={category}: {exc}", file=sys.stderr)
                return code
        if isinstance(exc, OSError):
            print(f"error category=io_error: {exc}", file=sys.stderr)
            return 6
        raise


if __name__ == "__main__":
    sys.exit(main())
