"""Command-line pipeline: simulate, train, generate, evaluate, account, benchmark.

Every file-producing command takes --out and writes only inside it, ending with
a manifest.json recording the resolved configuration, seed, tool version, input
hashes, and output names, so any run can be re-derived. Exit codes: 0 success,
2 usage, 3 data ingestion, 4 numeric failure, 5 calibration failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, dp, metrics, models, semdata, tabular, training
from .errors import (
    CalibrationError,
    IngestionError,
    NumericError,
    UsageError,
)

TRAIN_FIELDS = (
    "steps",
    "batch",
    "t_g",
    "eta_theta",
    "eta_nu",
    "lam",
    "gamma",
    "tau",
    "clamp",
    "init_out_gain",
    "init_noise_gain",
    "seed",
)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, command: str, config: dict, seed, inputs, outputs, t0: float) -> None:
    payload = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "inputs": {Path(p).name: _sha256(Path(p)) for p in inputs},
        "outputs": sorted(outputs),
        "wall_clock": time.perf_counter() - t0,
    }
    _write_json(out / "manifest.json", payload)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    if args.d < 1:
        raise UsageError(f"--d must be >= 1, got {args.d}")
    if args.graph == "er" and args.attach is not None:
        raise UsageError("--attach applies to --graph sf only")
    if args.graph == "sf" and args.edges is not None:
        raise UsageError("--edges applies to --graph er only")
    out = _out_dir(args)

    if args.graph == "er":
        dag = semdata.sample_er_dag(args.d, args.edges, seed=args.seed)
    else:
        dag = semdata.sample_sf_dag(args.d, args.attach or 1, seed=args.seed)
    spec = semdata.SemSpec(kind=args.kind)
    weights = semdata.sample_weights(dag, spec, seed=args.seed)
    table = semdata.simulate(dag, weights, spec, args.n, seed=args.seed)

    tabular.write_csv(table, out / "data.csv")
    semdata.save_dag(out / "dag.json", dag, args.kind, args.seed)
    config = {
        "d": args.d,
        "n": args.n,
        "graph": args.graph,
        "edges": args.edges,
        "attach": args.attach,
        "kind": args.kind,
    }
    _manifest(out, "simulate", config, args.seed, [], ["data.csv", "dag.json"], t0)
    return 0


# ------------------------------------------------------------------- train


def _resolve_train_config(args) -> training.TrainConfig:
    values = {f: getattr(training.TrainConfig, f) for f in TRAIN_FIELDS}
    values["sigma"] = None
    values["epsilon"] = None
    values["delta"] = dp.DEFAULT_DELTA
    values["clip"] = dp.DpConfig.clip_norm
    values["two_step"] = False
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise IngestionError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise IngestionError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(loaded) - set(values)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag

    if values["epsilon"] is not None and values["sigma"] is not None:
        raise UsageError("--epsilon and --sigma are mutually exclusive")
    sigma = values["sigma"] if values["sigma"] is not None else 0.0
    cfg = training.TrainConfig(
        **{f: values[f] for f in TRAIN_FIELDS},
        two_step=bool(values["two_step"]),
        dp=dp.DpConfig(
            clip_norm=values["clip"],
            noise_multiplier=sigma,
            delta=values["delta"],
        ),
    )
    return cfg, values["epsilon"]


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    cfg, target_epsilon = _resolve_train_config(args)
    data = tabular.read_csv(args.data)
    out = _out_dir(args)

    if target_epsilon is not None:
        q = cfg.batch / data.n
        sigma = dp.calibrate_sigma(
            dp.PrivacySpec(target_epsilon, cfg.dp.delta), q, cfg.steps
        )
        cfg = replace(cfg, dp=replace(cfg.dp, noise_multiplier=sigma))

    pre = tabular.fit_preprocessor(data)
    standardized = tabular.transform(pre, data)
    run = training.train_two_step if cfg.two_step else training.train
    g, f, report = run(standardized, cfg)

    models.save_checkpoint(out / "checkpoint.json", g, f)
    tabular.save_preprocessor(out / "preprocessor.json", pre)
    _write_json(out / "report.json", report.to_dict())
    config = {f: getattr(cfg, f) for f in TRAIN_FIELDS}
    config.update(
        {
            "two_step": cfg.two_step,
            "sigma": cfg.dp.noise_multiplier,
            "clip": cfg.dp.clip_norm,
            "delta": cfg.dp.delta,
        }
    )
    _manifest(
        out,
        "train",
        config,
        cfg.seed,
        [args.data],
        ["checkpoint.json", "preprocessor.json", "report.json"],
        t0,
    )
    if report.non_private:
        print("non-private run (sigma = 0): epsilon = inf")
    else:
        print(f"epsilon = {report.epsilon:.6g} at delta = {report.delta:g}")
    return 0


# ---------------------------------------------------------------- generate


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    g, _ = models.load_checkpoint(args.model)
    pre = None
    if args.preprocessor is not None:
        pre = tabular.load_preprocessor(args.preprocessor)
        if len(pre.names) != g.d:
            raise UsageError(
                f"preprocessor covers {len(pre.names)} columns but model has {g.d}"
            )
    out = _out_dir(args)

    rng = np.random.default_rng(args.seed)
    Z = rng.standard_normal((args.n, g.d))
    X = models.sample_batch(g, Z)
    names = pre.names if pre is not None else tuple(f"x{j + 1}" for j in range(g.d))
    table = tabular.Table(tuple(names), X)
    if pre is not None:
        table = tabular.inverse_transform(pre, table)
    tabular.write_csv(table, out / "synthetic.csv")
    inputs = [args.model] + ([args.preprocessor] if args.preprocessor else [])
    _manifest(out, "generate", {"n": args.n}, args.seed, inputs, ["synthetic.csv"], t0)
    return 0


# ---------------------------------------------------------------- evaluate


def cmd_evaluate(args) -> int:
    t0 = time.perf_counter()
    synthetic = tabular.read_csv(args.synthetic)
    test = tabular.read_csv(args.test)
    if synthetic.names != test.names:
        raise UsageError(
            f"column mismatch: synthetic has {synthetic.names}, test has {test.names}"
        )
    out = _out_dir(args)
    report = metrics.metric_report(
        synthetic, test, bins=args.bins, target=args.target, seed=args.seed
    )
    _write_json(out / "metrics.json", report.to_dict())
    config = {"bins": args.bins, "target": args.target}
    _manifest(
        out, "evaluate", config, args.seed, [args.synthetic, args.test], ["metrics.json"], t0
    )
    return 0


# ----------------------------------------------------------------- account


def cmd_account(args) -> int:
    t0 = time.perf_counter()
    if args.epsilon is not None and args.sigma is not None:
        raise UsageError("--epsilon and --sigma are mutually exclusive")
    if args.epsilon is None and args.sigma is None:
        raise UsageError("one of --sigma (forward) or --epsilon (calibration) is required")
    sigma = args.sigma
    if args.epsilon is not None:
        q = args.batch / args.n
        sigma = dp.calibrate_sigma(dp.PrivacySpec(args.epsilon, args.delta), q, args.steps)
    report = dp.account_report(args.n, args.batch, sigma, args.steps, args.delta)
    if args.epsilon is not None:
        report["target_epsilon"] = args.epsilon
        report["calibrated_sigma"] = sigma
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out is not None:
        out = _out_dir(args)
        _write_json(out / "account.json", report)
        _manifest(out, "account", report, None, [], ["account.json"], t0)
    return 0


# --------------------------------------------------------------- benchmark

SWEEP_FIELDS = {"d_lr": "eta_nu", "g_lr": "eta_theta", "lambda": "lam", "gamma": "gamma"}


def cmd_benchmark(args) -> int:
    t0 = time.perf_counter()
    field_name = SWEEP_FIELDS[args.sweep]
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
        sigmas = [float(v) for v in args.sigmas.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"grids must be comma-separated numbers: {exc}") from exc
    if not grid or not sigmas:
        raise UsageError("--grid and --sigmas must be non-empty")
    if args.repeats < 1:
        raise UsageError(f"--repeats must be >= 1, got {args.repeats}")
    out = _out_dir(args)

    base, _ = _resolve_train_config(args)
    rows = []
    for rep in range(args.repeats):
        dag = semdata.sample_er_dag(args.d, args.d, seed=rep)
        spec = semdata.SemSpec(kind=args.kind)
        weights = semdata.sample_weights(dag, spec, seed=rep)
        train_tab = semdata.simulate(dag, weights, spec, args.n, seed=rep)
        test_tab = semdata.simulate(dag, weights, spec, args.n, seed=rep + 100_000)
        pre = tabular.fit_preprocessor(train_tab)
        standardized = tabular.transform(pre, train_tab)
        for sigma in sigmas:
            for value in grid:
                cfg = replace(
                    base,
                    seed=rep,
                    dp=replace(base.dp, noise_multiplier=sigma),
                    **{field_name: value},
                )
                g, _, _ = training.train(standardized, cfg)
                rng = np.random.default_rng(rep + 200_000)
                Z = rng.standard_normal((args.n, g.d))
                synth = tabular.inverse_transform(
                    pre, tabular.Table(train_tab.names, models.sample_batch(g, Z))
                )
                rep_metrics = metrics.metric_report(synth, test_tab)
                rows.append(
                    {
                        "param": value,
                        "sigma": sigma,
                        "seed": rep,
                        "wd": rep_metrics.wd,
                        "tvd": rep_metrics.tvd_2way,
                        "mmd": rep_metrics.mmd,
                        "js": rep_metrics.js,
                    }
                )

    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["param", "sigma", "seed", "wd", "tvd", "mmd", "js"])
        writer.writeheader()
        writer.writerows(rows)
    config = {f: getattr(base, f) for f in TRAIN_FIELDS}
    config.update(
        {
            "sweep": args.sweep,
            "field": field_name,
            "grid": grid,
            "sigmas": sigmas,
            "repeats": args.repeats,
            "d": args.d,
            "n": args.n,
            "kind": args.kind,
            "clip": base.dp.clip_norm,
            "delta": base.dp.delta,
        }
    )
    _manifest(out, "benchmark", config, None, [], ["sweep.csv"], t0)
    return 0


# ------------------------------------------------------------------ parser


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of config values; flags override it")
    p.add_argument("--steps", "--T", dest="steps", type=int)
    p.add_argument("--batch", "--B", dest="batch", type=int)
    p.add_argument("--t-g", "--t_g", dest="t_g", type=int)
    p.add_argument("--eta-theta", "--eta_theta", dest="eta_theta", type=float)
    p.add_argument("--eta-nu", "--eta_nu", dest="eta_nu", type=float)
    p.add_argument("--lam", "--lambda", dest="lam", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--clamp", type=float)
    p.add_argument("--init-out-gain", "--init_out_gain", dest="init_out_gain", type=float)
    p.add_argument("--init-noise-gain", "--init_noise_gain", dest="init_noise_gain", type=float)
    p.add_argument("--clip", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpsynth",
        description="Differentially private tabular synthesis with sequential GANs.",
    )
    parser.add_argument("--version", action="version", version=f"dpsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a table from a random structural equation model")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graph", choices=("er", "sf"), default="er")
    p.add_argument("--edges", type=float, help="expected edge count (er graphs)")
    p.add_argument("--attach", type=int, help="attachments per new node (sf graphs)")
    p.add_argument("--kind", choices=("linear", "nonlinear"), default="linear")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit the generator on a CSV table")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, help="target budget; sigma is calibrated")
    p.add_argument("--two-step", "--two_step", dest="two_step", action="store_true", default=None)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample synthetic rows from a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preprocessor", help="undo standardization on the way out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score a synthetic table against held-out rows")
    p.add_argument("--synthetic", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--target", help="column for downstream-model efficacy")
    p.add_argument("--bins", type=int, default=metrics.DEFAULT_BINS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("account", help="privacy cost of a run, forward or calibrated")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float, default=dp.DEFAULT_DELTA)
    p.add_argument("--out")
    p.set_defaults(func=cmd_account)

    p = sub.add_parser("benchmark", help="sweep one knob over a grid of noise levels")
    p.add_argument("--sweep", choices=sorted(SWEEP_FIELDS), required=True)
    p.add_argument("--grid", required=True, help="comma-separated values for the swept knob")
    p.add_argument("--sigmas", default="0", help="comma-separated noise multipliers")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--kind", choices=("linear", "nonlinear"), default="linear")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IngestionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
