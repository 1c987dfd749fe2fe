"""Command-line entry point: generate / train / benchmark / plot.

Presets-first: ``--regime rabi`` expands to that regime's full parameter
set (sample count, physics, noise stack, epochs, batch size, loss
weights); individual values are overridable and every override lands in
the emitted manifests.  Nothing is read implicitly from the working
directory; the only environment input is PARAQNN_OUT_ROOT as a default
output root.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, bench, dataio, provenance, training

OUT_ROOT_ENV = "PARAQNN_OUT_ROOT"

CLI_MODELS = ("paraqnn", "pinn-incomplete", "pinn-known", "mlp")


class UsageError(Exception):
    pass


def version_stamp(config=None, seeds=()) -> dict:
    """Provenance record embedded in every manifest/checkpoint/report."""
    return provenance.make_stamp(config if config is not None else {}, seeds)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(category: str, message: str, code: int) -> int:
    print(f"error: {category}: {message}", file=sys.stderr)
    return code


def _resolve_out(value, subdir: str):
    if value:
        return Path(value)
    root = os.environ.get(OUT_ROOT_ENV)
    if root:
        return Path(root) / subdir
    raise UsageError(
        f"--out is required (or set {OUT_ROOT_ENV} for a default output root)")


def _parse_seeds(text: str) -> list[int]:
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError("seed range is reversed")
            return list(range(lo, hi + 1))
        return [int(s) for s in text.split(",") if s]
    except ValueError as exc:
        raise UsageError(f"cannot parse seeds {text!r}: {exc}") from exc


def build_parser() -> _Parser:
    p = _Parser(prog="paraqnn", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="command")

    g = sub.add_parser("generate", help="generate a regime dataset",
                       description="Generate one regime's dataset "
                                   "(presets: rabi N=10000/8us, lindblad "
                                   "N=25000/5us, mixed N=50000/10us).")
    g.add_argument("--regime", required=True, choices=dataio.dyngen.REGIMES)
    g.add_argument("--seed", type=int, default=42,
                   help="data seed (preset datasets use 42)")
    g.add_argument("--out", help=f"output directory (default: ${OUT_ROOT_ENV}/datasets/<regime>)")
    g.add_argument("--temporal-holdout", action="store_true",
                   help="hold out the last 15%% of the time axis as test "
                        "instead of a random 20%% split")
    g.add_argument("--clip", action="store_true",
                   help="clip noisy observations to [0,1]")
    g.add_argument("--scale", type=float, default=1.0,
                   help="divide the preset sample count (CI-speed runs)")

    t = sub.add_parser("train", help="train one model on a dataset",
                       description="Train a single model; epochs/batch "
                                   "follow the dataset regime's presets "
                                   "(1500/256 rabi, 2000/256 lindblad, "
                                   "4000/512 mixed; lr 0.001).")
    t.add_argument("--model", required=True, choices=CLI_MODELS)
    t.add_argument("--data", required=True, help="dataset directory from `generate`")
    t.add_argument("--seed", type=int, default=42,
                   help="model seed (presets sweep 42..46)")
    t.add_argument("--mode", choices=training.MODES, default="benchmark",
                   help="benchmark: clean-reference losses; experimental: "
                        "self-consistent losses (no clean reference)")
    t.add_argument("--out", help=f"output directory (default: ${OUT_ROOT_ENV}/train/<model>)")
    t.add_argument("--scale", type=float, default=1.0,
                   help="divide the preset epoch count")
    t.add_argument("--dtype", choices=("float32", "float64"), default="float64")

    b = sub.add_parser("benchmark", help="run the regimes x models x seeds matrix",
                       description="Full evaluation matrix with mean+-std "
                                   "aggregation; defaults reproduce the "
                                   "preset protocol (seeds 42..46, fixed "
                                   "dataset seed 42).")
    b.add_argument("--regimes", default="rabi,lindblad,mixed",
                   help="comma list (default: rabi,lindblad,mixed)")
    b.add_argument("--models", default=",".join(CLI_MODELS),
                   help=f"comma list (default: all of {','.join(CLI_MODELS)})")
    b.add_argument("--seeds", default="42..46",
                   help="range lo..hi or comma list (default: 42..46)")
    b.add_argument("--scale", type=float, default=1.0,
                   help="divide preset sample and epoch counts uniformly")
    b.add_argument("--out", help=f"output directory (default: ${OUT_ROOT_ENV}/bench)")
    b.add_argument("--workers", type=int, default=1,
                   help="parallel cell jobs (cells are independent)")
    b.add_argument("--temporal-holdout", action="store_true",
                   help="temporal test split instead of random")
    b.add_argument("--mode", choices=training.MODES, default="benchmark")
    b.add_argument("--dtype", choices=("float32", "float64"), default="float32",
                   help="training dtype (float32 default keeps full-scale "
                        "runs inside an overnight budget)")

    pl = sub.add_parser("plot", help="emit figure data + SVG panels from a report")
    pl.add_argument("--report", required=True, help="path to report.json")
    pl.add_argument("--out", help=f"output directory (default: ${OUT_ROOT_ENV}/figures)")
    return p


def _cmd_generate(args) -> int:
    problems = []
    if not 0.0 < args.scale <= 1.0:
        problems.append(f"--scale must be in (0, 1], got {args.scale}")
    if args.seed < 0:
        problems.append(f"--seed must be nonnegative, got {args.seed}")
    out = None
    try:
        out = _resolve_out(args.out, f"datasets/{args.regime}")
    except UsageError as exc:
        problems.append(str(exc))
    if problems:
        raise UsageError("; ".join(problems))
    cfg = dataio.regime_config(
        args.regime, data_seed=args.seed,
        split_mode="temporal" if args.temporal_holdout else "random",
        clip=args.clip, scale=args.scale)
    ds = dataio.build_dataset(cfg)
    dataio.save(ds, out)
    print(f"wrote {out / dataio.DATA_FILENAME} ({len(ds)} points, "
          f"regime={args.regime}, seed={args.seed})")
    return 0


def _cmd_train(args) -> int:
    problems = []
    if not 0.0 < args.scale <= 1.0:
        problems.append(f"--scale must be in (0, 1], got {args.scale}")
    out = None
    try:
        out = _resolve_out(args.out, f"train/{args.model}")
    except UsageError as exc:
        problems.append(str(exc))
    if problems:
        raise UsageError("; ".join(problems))

    ds = dataio.load(args.data)
    regime = ds.manifest["regime"]
    config = training.train_config(regime, model_seed=args.seed,
                                   scale=args.scale, dtype=args.dtype)
    weights = training.loss_weights_for(regime)
    model = bench.build_model(args.model, config)
    model, tel = training.train(model, ds, weights, config, mode=args.mode)

    out.mkdir(parents=True, exist_ok=True)
    training.save_telemetry(tel, out / "telemetry.csv")
    model.save_checkpoint(out / "checkpoint.npz")
    summary_cfg = {
        "model": bench.canonical_model(args.model), "regime": regime,
        "seed": args.seed, "mode": args.mode, "scale": args.scale,
        "dtype": args.dtype, "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "loss_weights": [weights.lambda_s, weights.lambda_n, weights.lambda_c],
    }
    summary = {
        **summary_cfg,
        "test_mse_clean": tel.test_mse_clean,
        "test_mse_noisy": tel.test_mse_noisy,
        "wall_clock_s": tel.wall_clock_s,
        **tel.extras,
        "stamp": version_stamp(summary_cfg, [args.seed, ds.manifest["data_seed"]]),
    }
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"trained {args.model} on {regime}: test MSE vs clean = "
          f"{tel.test_mse_clean:.6g} (artifacts in {out})")
    return 0


def _cmd_benchmark(args) -> int:
    problems = []
    if not 0.0 < args.scale <= 1.0:
        problems.append(f"--scale must be in (0, 1], got {args.scale}")
    if args.workers < 1:
        problems.append(f"--workers must be >= 1, got {args.workers}")
    regimes = [r.strip() for r in args.regimes.split(",") if r.strip()]
    for r in regimes:
        if r not in dataio.dyngen.REGIMES:
            problems.append(f"unknown regime {r!r} (valid: {', '.join(dataio.dyngen.REGIMES)})")
    models = []
    for m in (s.strip() for s in args.models.split(",") if s.strip()):
        try:
            models.append(bench.canonical_model(m))
        except ValueError as exc:
            problems.append(str(exc))
    seeds: list[int] = []
    try:
        seeds = _parse_seeds(args.seeds)
        if not seeds:
            problems.append("no seeds given")
    except UsageError as exc:
        problems.append(str(exc))
    out = None
    try:
        out = _resolve_out(args.out, "bench")
    except UsageError as exc:
        problems.append(str(exc))
    if problems:
        raise UsageError("; ".join(problems))

    def progress(cell):
        status = cell["status"]
        extra = (f"mse_clean={cell['test_mse_clean']:.3e}"
                 if status == "ok" else cell["error"])
        print(f"[cell] {cell['regime']}/{cell['model']}/seed{cell['seed']}: "
              f"{status} {extra}", flush=True)

    report = bench.run_matrix(
        regimes, models, seeds, scale=args.scale, dtype=args.dtype,
        split_mode="temporal" if args.temporal_holdout else "random",
        mode=args.mode, workers=args.workers, out_dir=out, progress=progress)
    n_fail = sum(1 for c in report["cells"] if c["status"] != "ok")
    print(f"report: {out / bench.REPORT_FILENAME} "
          f"({len(report['cells'])} cells, {n_fail} failed)")
    for agg in report["aggregates"]:
        if "mean_mse_clean" in agg:
            print(f"  {agg['regime']:9s} {agg['model']:16s} "
                  f"mean={agg['mean_mse_clean']:.3e} "
                  f"std={agg['std_mse_clean']:.3e} (n={agg['n_seeds']})")
    if n_fail:
        return _fail("training", f"{n_fail} cell(s) failed; see report", 3)
    return 0


def _cmd_plot(args) -> int:
    out = _resolve_out(args.out, "figures")
    report = bench.load_report(args.report)
    written, gaps = bench.emit_figures(report, out,
                                       base_dir=Path(args.report).parent)
    print(f"wrote {len(written)} figure files to {out}")
    for gap in gaps:
        print(f"gap: {gap}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required "
                             "(generate, train, benchmark, plot)")
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "benchmark":
            return _cmd_benchmark(args)
        if args.command == "plot":
            return _cmd_plot(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        return _fail("usage", str(exc), 1)
    except dataio.DataError as exc:
        return _fail("data", str(exc), 2)
    except training.TrainingError as exc:
        return _fail("training", str(exc), 3)
    except (ValueError, OSError) as exc:
        return _fail("data", str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
