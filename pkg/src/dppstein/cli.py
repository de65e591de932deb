"""Command-line front end.

Exit codes: 0 success, 1 domain error (invalid kernel, infeasible
configuration), 2 usage or configuration-format error.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigError, DomainError
from .kernels import fit_decay_envelope
from .sampler import (
    Window,
    binned_theoretical_pcf,
    empirical_pcf,
    sample_many,
    spectral_truncation,
)
from .stein_bounds import (
    BoundInputs,
    symmetric_geom_sum,
    wasserstein_bound,
    weighted_geom_sum,
)
from .verify import run_experiment

CSV_SCHEMAS = {
    "patterns.csv": ["replication_index", "x_1", "...", "x_d"],
    "pcf.csv": ["r_lo", "r_hi", "g_hat", "stderr", "g_theory", "n_used"],
    "bound.csv": ["n", "term1", "term2", "term3", "total", "l_star"],
    "report.csv": ["n", "sigma2_hat", "M_hat", "gamma_hat", "w1", "kolmogorov", "bound_total", "dominated"],
    "w_samples.csv": ["n", "replication_index", "w"],
}


def _schema_text() -> str:
    return "\n".join(f"  {name}: {', '.join(cols)}" for name, cols in CSV_SCHEMAS.items())


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.get("output", "directory"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _formats(cfg: RunConfig) -> set:
    fmts = set(cfg.get("output", "formats"))
    bad = fmts - {"json", "csv"}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}; allowed: csv, json")
    return fmts


def _write_metadata(out: Path, command: str, argv):
    # timestamps live only here so the result files stay byte-identical
    _write_json(out / "metadata.json", {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    })


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate_kernel(cfg: RunConfig, args) -> int:
    spec = cfg.kernel()
    amax = spec.alpha_max
    info = {
        **spec.to_dict(),
        "alpha_max": amax,
        "margin": amax - spec.alpha,
        "valid": spec.valid,
        "strictly_valid": spec.strictly_valid,
    }
    if spec.valid:
        env = fit_decay_envelope(spec, cfg.get("kernel", "lambda_envelope"))
        info["envelope"] = env.to_dict()
    print(json.dumps(info, indent=2, sort_keys=True))
    if not spec.valid:
        print(
            f"error: invalid kernel: alpha={spec.alpha:.6g} exceeds the existence maximum "
            f"alpha_max={amax:.4f} (alpha <= [binom(m-1+d/2, m-1) / (rho (m pi)^(d/2))]^(1/d))",
            file=sys.stderr,
        )
        return 1
    return 0


def _window_side(cfg: RunConfig) -> float:
    side = cfg.get("experiment", "window_side")
    if side is None:
        n_list = cfg.get("experiment", "n_list")
        if not n_list:
            raise ConfigError("missing required key experiment.window_side (or experiment.n_list)")
        side = float(n_list[0])
    return float(side)


def _sample_patterns(cfg: RunConfig):
    cfg.require("experiment", "replications", "seed")
    spec = cfg.kernel()
    window = Window(spec.d, _window_side(cfg))
    trunc = spectral_truncation(spec, window, kmax_cap=cfg.get("experiment", "kmax_cap"))
    R = cfg.get("experiment", "replications")
    patterns = sample_many(spec, window, cfg.get("experiment", "seed"), range(R), trunc,
                           cfg.get("experiment", "workers"))
    return spec, window, trunc, patterns


def cmd_sample(cfg: RunConfig, args) -> int:
    spec, window, trunc, patterns = _sample_patterns(cfg)
    out, fmts = _out_dir(cfg), _formats(cfg)
    if "csv" in fmts:
        header = ["replication_index"] + [f"x_{j + 1}" for j in range(spec.d)]
        rows = ([i, *pt] for i, p in enumerate(patterns) for pt in p.points)
        _write_csv(out / "patterns.csv", header, rows)
    if "json" in fmts:
        _write_json(out / "patterns.json", {
            "config": cfg.echo(),
            "seed": cfg.get("experiment", "seed"),
            "window": {"d": window.d, "side": window.side},
            "sum_lambda": trunc.expected_count,
            "k_max": trunc.k_max,
            "tail_fraction": trunc.tail_fraction,
            "counts": [len(p) for p in patterns],
        })
    print(f"wrote {len(patterns)} patterns to {out} (sum lambda_k = {trunc.expected_count:.6g}, k_max = {trunc.k_max})")
    return 0


def cmd_pcf(cfg: RunConfig, args) -> int:
    spec, window, trunc, patterns = _sample_patterns(cfg)
    r_max = cfg.get("experiment", "pcf_r_max") or 3.0 * spec.alpha
    edges = np.linspace(0.0, r_max, cfg.get("experiment", "pcf_bins") + 1)
    est = empirical_pcf(patterns, edges)
    theory = binned_theoretical_pcf(spec, edges)
    out, fmts = _out_dir(cfg), _formats(cfg)
    rows = list(zip(edges[:-1], edges[1:], est.g_hat, est.stderr, theory, est.n_used))
    if "csv" in fmts:
        _write_csv(out / "pcf.csv", CSV_SCHEMAS["pcf.csv"], rows)
    if "json" in fmts:
        _write_json(out / "pcf.json", {
            "config": cfg.echo(),
            "bins": [dict(zip(CSV_SCHEMAS["pcf.csv"], r)) for r in rows],
        })
    for r in rows:
        print(" ".join(_fmt(v) for v in r))
    return 0


def cmd_bound(cfg: RunConfig, args) -> int:
    cfg.require("bound", "d", "M", "kappa", "lambda", "gamma", "n_list")
    b = cfg.sections["bound"]
    reports = [
        wasserstein_bound(BoundInputs(d=b["d"], M=b["M"], kappa=b["kappa"], lam=b["lambda"], gamma=b["gamma"], n=int(n)))
        for n in b["n_list"]
    ]
    out, fmts = _out_dir(cfg), _formats(cfg)
    if "json" in fmts:
        _write_json(out / "bound.json", [r.to_dict() for r in reports])
    if "csv" in fmts:
        _write_csv(out / "bound.csv", CSV_SCHEMAS["bound.csv"],
                   [(r.n, r.term1, r.term2, r.term3, r.total, r.l_star) for r in reports])
    for r in reports:
        note = "" if r.l_star_optimal else " (n too small: l_star floored to 0, reported as 1)"
        print(f"n={r.n} total={r.total:.6g} term1={r.term1:.6g} l_star={r.l_star}{note}")
    return 0


def cmd_verify_clt(cfg: RunConfig, args) -> int:
    config = cfg.experiment()
    report = run_experiment(config)
    out, fmts = _out_dir(cfg), _formats(cfg)
    if "json" in fmts:
        _write_json(out / "report.json", {"config": cfg.echo(), "report": report.to_dict()})
    if "csv" in fmts:
        _write_csv(out / "report.csv", CSV_SCHEMAS["report.csv"], [
            (r.n, r.sigma2_hat, r.M_hat, r.gamma_hat, r.w1_empirical, r.kolmogorov_empirical,
             None if r.bound is None else r.bound.total, r.dominated)
            for r in report.rows
        ])
    if cfg.get("output", "dump_w"):
        _write_csv(out / "w_samples.csv", CSV_SCHEMAS["w_samples.csv"],
                   ((n, i, w) for n, ws in report.w_samples.items() for i, w in enumerate(ws)))
    for r in report.rows:
        total = "n/a" if r.bound is None else f"{r.bound.total:.6g}"
        print(f"n={r.n} w1={r.w1_empirical:.4g} kolmogorov={r.kolmogorov_empirical:.4g} "
              f"bound={total} dominated={r.dominated}" + (f" [{r.flag}]" if r.flag else ""))
    return 0


def cmd_identities(cfg: RunConfig, args) -> int:
    rng = np.random.default_rng(cfg.get("experiment", "seed") or 0)
    ok = True

    def check(name, passed):
        nonlocal ok
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'} {name}")

    worst = 0.0
    for x in rng.uniform(0.1, 5.0, 100):
        if abs(x - 1.0) < 1e-6:
            continue
        for n in range(2, 51):
            brute = sum((n - k) * x**k for k in range(1, n))
            worst = max(worst, abs(weighted_geom_sum(n, x) - brute) / abs(brute))
    check(f"weighted sum closed form vs brute force (max rel err {worst:.2e})", worst <= 1e-10)
    worst = 0.0
    for x in rng.uniform(0.1, 5.0, 100):
        if abs(x - 1.0) < 1e-6:
            continue
        for n in range(1, 51):
            brute = n + sum((n - a) * (x**a + x**-a) for a in range(1, n))
            worst = max(worst, abs(symmetric_geom_sum(n, x) - brute) / abs(brute))
    check(f"symmetric sum closed form vs brute force (max rel err {worst:.2e})", worst <= 1e-10)
    check("weighted sum at w = 1 equals n(n-1)/2", all(weighted_geom_sum(n, 1.0) == n * (n - 1) / 2 for n in range(2, 51)))
    check("symmetric sum at v = 1 equals n^2", all(symmetric_geom_sum(n, 1.0) == n * n for n in range(1, 51)))
    return 0 if ok else 1


def cmd_schema(cfg: RunConfig, args) -> int:
    print(json.dumps(CSV_SCHEMAS, indent=2))
    return 0


COMMANDS = {
    "validate-kernel": cmd_validate_kernel,
    "sample": cmd_sample,
    "pcf": cmd_pcf,
    "bound": cmd_bound,
    "verify-clt": cmd_verify_clt,
    "identities": cmd_identities,
    "schema": cmd_schema,
}

_WRITES_OUTPUT = {"sample", "pcf", "bound", "verify-clt"}


def _n_list(text: str):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty n list")
    return vals


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML configuration file")
    common.add_argument("--seed", type=_u64, help="master seed (overrides experiment.seed)")
    common.add_argument("--out", help="output directory (overrides output.directory)")
    common.add_argument("--replications", type=int, help="overrides experiment.replications")
    common.add_argument("--n", type=_n_list, help="comma-separated window sides (overrides experiment.n_list / bound.n_list)")

    parser = argparse.ArgumentParser(
        prog="dppstein",
        description="Explicit L1 normal-approximation bounds and DPP simulation.",
        epilog="CSV schemas (fixed column order):\n" + _schema_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    kernel_flags = argparse.ArgumentParser(add_help=False)
    kernel_flags.add_argument("--m", type=int)
    kernel_flags.add_argument("--alpha", type=float)
    kernel_flags.add_argument("--rho", type=float)
    kernel_flags.add_argument("--d", type=int)
    kernel_flags.add_argument("--lambda-envelope", type=float, dest="lambda_envelope")

    sub.add_parser("validate-kernel", parents=[common, kernel_flags], help="check the existence condition")
    p = sub.add_parser("sample", parents=[common, kernel_flags], help="simulate patterns to CSV")
    p.add_argument("--side", type=float, help="window side (overrides experiment.window_side)")
    p = sub.add_parser("pcf", parents=[common, kernel_flags], help="empirical pair correlation")
    p.add_argument("--side", type=float, help="window side (overrides experiment.window_side)")
    p = sub.add_parser("bound", parents=[common], help="evaluate the explicit bound")
    p.add_argument("--d", type=int)
    p.add_argument("--M", type=float, dest="M")
    p.add_argument("--kappa", type=float)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--gamma", type=float)
    p = sub.add_parser("verify-clt", parents=[common, kernel_flags], help="Monte-Carlo dominance check")
    p.add_argument("--dump-w", action="store_true", help="also write standardized samples")
    sub.add_parser("identities", parents=[common], help="summation identity self-test")
    sub.add_parser("schema", parents=[common], help="print CSV schemas")
    return parser


def _apply_flags(cfg: RunConfig, args):
    if args.out is not None:
        cfg.override("output", directory=args.out)
    cfg.override("experiment", seed=args.seed, replications=args.replications)
    if args.command == "bound":
        cfg.override("bound", d=args.d, M=args.M, kappa=args.kappa, gamma=args.gamma, n_list=args.n)
        cfg.override("bound", **{"lambda": args.lam})
        return
    cfg.override("experiment", n_list=args.n)
    if hasattr(args, "alpha"):
        cfg.override("kernel", m=args.m, alpha=args.alpha, rho=args.rho, d=args.d,
                     lambda_envelope=args.lambda_envelope)
    if getattr(args, "side", None) is not None:
        cfg.override("experiment", window_side=args.side)
    if getattr(args, "dump_w", False):
        cfg.override("output", dump_w=True)


def dispatch(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = RunConfig.load(args.config)
        _apply_flags(cfg, args)
        code = COMMANDS[args.command](cfg, args)
        if args.command in _WRITES_OUTPUT:
            _write_metadata(_out_dir(cfg), args.command, argv)
        return code
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
