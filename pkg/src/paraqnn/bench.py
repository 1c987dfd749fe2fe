"""Evaluation matrix: regimes x models x seeds -> versioned report.

Each cell trains one model on the regime's fixed dataset (data seed 42)
with its own model seed, measures test MSE against the clean latent
trajectory (plus an informational MSE against the noisy observations),
and the assembler aggregates mean/std per (regime, model) with explicit
ordering flags.  Cells are independent jobs executed by a process pool;
a failed cell is recorded as failed without aborting the matrix.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import baselines, dataio, provenance, training
from .dataio import Dataset
from .training import ParaQNNModel, Telemetry

REPORT_VERSION = 1
REPORT_FILENAME = "report.json"

MODELS = ("paraqnn", "pinn_incomplete", "pinn_known", "mlp")
DEFAULT_SEEDS = (42, 43, 44, 45, 46)
DATA_SEED = 42  # all presets share one fixed dataset seed

NOT_REPRODUCED = ("random_forest", "xgboost", "gan")


def canonical_model(name: str) -> str:
    model = name.replace("-", "_")
    if model not in MODELS:
        raise ValueError(f"unknown model {name!r}; expected one of {MODELS}")
    return model


def mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("mse of empty input")
    return float(np.mean((pred - target) ** 2))


def build_model(model_name: str, config: training.TrainConfig):
    model_name = canonical_model(model_name)
    if model_name == "paraqnn":
        return ParaQNNModel(config)
    spec = baselines.BaselineSpec(kind=model_name,
                                  hidden_layers=config.hidden_layers,
                                  hidden_width=config.hidden_width)
    return baselines.build_baseline(spec, seed=config.model_seed,
                                    dtype=config.np_dtype)


def _segment_mses(dataset: Dataset, pred: np.ndarray, test_mask) -> list[dict]:
    """Test MSE against the clean signal inside each drive segment."""
    segments = dataset.manifest["schedule"]["segments"]
    times = dataset.times[test_mask]
    clean = dataset.y_clean[test_mask]
    out = []
    for i, seg in enumerate(segments):
        a, b = float(seg["t_start"]), float(seg["t_end"])
        if i == len(segments) - 1:
            m = (times >= a) & (times <= b)
        else:
            m = (times >= a) & (times < b)
        out.append({
            "t_start": a,
            "t_end": b,
            "n_points": int(m.sum()),
            "mse_clean": mse(pred[m], clean[m]) if m.any() else None,
        })
    return out


def run_cell(regime: str, model_name: str, seed: int, *, scale: float = 1.0,
             dtype: str = "float64", split_mode: str = "random",
             mode: str = "benchmark", out_dir=None,
             dataset: Dataset | None = None) -> tuple[dict, Telemetry | None]:
    """Train one (regime, model, seed) cell and measure it."""
    model_name = canonical_model(model_name)
    cell = {"regime": regime, "model": model_name, "seed": int(seed),
            "status": "ok", "error": None}
    t0 = time.perf_counter()
    try:
        if dataset is None:
            cfg = dataio.regime_config(regime, data_seed=DATA_SEED,
                                       split_mode=split_mode, scale=scale)
            dataset = dataio.build_dataset(cfg)
        config = training.train_config(regime, model_seed=seed, scale=scale,
                                       dtype=dtype)
        weights = training.loss_weights_for(regime)
        model = build_model(model_name, config)
        model, tel = training.train(model, dataset, weights, config, mode=mode)

        te = dataset.mask("test")
        tau = dataio.normalize_time(dataset)
        pred_test = baselines.predict(model, tau[te].astype(config.np_dtype))
        if hasattr(model, "predict_dual"):
            t_hat, f_hat = model.predict_dual(tau[te].astype(config.np_dtype))
            cell["contradiction_rate"] = float(np.mean(
                np.asarray(t_hat, np.float64) + np.asarray(f_hat, np.float64)
                > 1.0))
        cell.update({
            "test_mse_clean": tel.test_mse_clean,
            "test_mse_noisy": tel.test_mse_noisy,
            "per_segment": _segment_mses(dataset, pred_test, te),
            "wall_clock_s": tel.wall_clock_s,
            "n_parameters": int(sum(a.size for a in model.arrays())),
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
            "loss_weights": [weights.lambda_s, weights.lambda_n, weights.lambda_c],
            **tel.extras,
        })
        if out_dir is not None:
            out_dir = Path(out_dir)
            stem = f"{regime}_{model_name}_seed{seed}"
            tdir = out_dir / "telemetry"
            tdir.mkdir(parents=True, exist_ok=True)
            training.save_telemetry(tel, tdir / f"{stem}.csv")
            cell["telemetry_path"] = f"telemetry/{stem}.csv"
            cdir = out_dir / "checkpoints"
            cdir.mkdir(parents=True, exist_ok=True)
            model.save_checkpoint(cdir / f"{stem}.npz")
            cell["checkpoint_path"] = f"checkpoints/{stem}.npz"
            if model_name == "paraqnn" and seed == DATA_SEED:
                rdir = out_dir / "recon"
                rdir.mkdir(parents=True, exist_ok=True)
                t_hat, f_hat = model.predict_dual(tau.astype(config.np_dtype))
                _write_recon(rdir / f"{regime}_paraqnn_seed{seed}.csv",
                             dataset, t_hat, f_hat)
                cell["recon_path"] = f"recon/{regime}_paraqnn_seed{seed}.csv"
        return cell, tel
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the matrix
        cell["status"] = "failed"
        cell["error"] = f"{type(exc).__name__}: {exc}"
        cell["wall_clock_s"] = time.perf_counter() - t0
        return cell, None


def _write_recon(path, dataset: Dataset, t_hat, f_hat) -> None:
    lines = ["time_us,y_clean,y_noisy,prediction,falsity"]
    for t, yc, yn, p, f in zip(dataset.times, dataset.y_clean, dataset.y_noisy,
                               np.asarray(t_hat, dtype=np.float64),
                               np.asarray(f_hat, dtype=np.float64)):
        lines.append(f"{float(t)!r},{float(yc)!r},{float(yn)!r},{float(p)!r},{float(f)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cell_worker(args):
    (regime, model_name, seed, scale, dtype, split_mode, mode, out_dir,
     blas_threads) = args
    if blas_threads:
        try:
            from threadpoolctl import threadpool_limits
        except ImportError:
            blas_threads = None
    if blas_threads:
        with threadpool_limits(limits=blas_threads):
            cell, _ = run_cell(regime, model_name, seed, scale=scale,
                               dtype=dtype, split_mode=split_mode, mode=mode,
                               out_dir=out_dir)
    else:
        cell, _ = run_cell(regime, model_name, seed, scale=scale, dtype=dtype,
                           split_mode=split_mode, mode=mode, out_dir=out_dir)
    return cell


def aggregate(cells: list[dict]) -> list[dict]:
    """Per (regime, model) mean/std over the ok seeds (population std)."""
    keys = []
    for c in cells:
        k = (c["regime"], c["model"])
        if k not in keys:
            keys.append(k)
    out = []
    for regime, model in keys:
        vals = [c["test_mse_clean"] for c in cells
                if c["regime"] == regime and c["model"] == model
                and c["status"] == "ok"]
        entry = {"regime": regime, "model": model, "n_seeds": len(vals)}
        if vals:
            arr = np.array(vals, dtype=np.float64)
            entry["mean_mse_clean"] = float(arr.mean())
            entry["std_mse_clean"] = float(arr.std())
            entry["per_seed_mse_clean"] = vals
        out.append(entry)
    return out


def ordering_flags(aggregates: list[dict]) -> dict:
    """Per regime: is the dual net's mean strictly below each baseline's."""
    flags: dict = {}
    regimes = sorted({a["regime"] for a in aggregates})
    for regime in regimes:
        sub = {a["model"]: a for a in aggregates if a["regime"] == regime}
        para = sub.get("paraqnn", {}).get("mean_mse_clean")
        regime_flags = {}
        for model, agg in sub.items():
            if model == "paraqnn":
                continue
            other = agg.get("mean_mse_clean")
            regime_flags[f"paraqnn_below_{model}"] = (
                None if para is None or other is None else bool(para < other))
        vals = [v for v in regime_flags.values() if v is not None]
        regime_flags["paraqnn_lowest"] = bool(vals) and all(vals)
        flags[regime] = regime_flags
    return flags


def run_matrix(regimes, models, seeds, *, scale: float = 1.0,
               dtype: str = "float64", split_mode: str = "random",
               mode: str = "benchmark", workers: int = 1,
               out_dir=None, progress=None) -> dict:
    """Run the full matrix and assemble the report dict.

    With out_dir set, datasets/telemetry/checkpoints/report are persisted
    there; the report is also returned.
    """
    regimes = list(regimes)
    models = [canonical_model(m) for m in models]
    seeds = [int(s) for s in seeds]
    run_config = {
        "regimes": regimes, "models": models, "seeds": seeds, "scale": scale,
        "dtype": dtype, "split_mode": split_mode, "mode": mode,
    }
    t0 = time.perf_counter()
    out_path = None
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        for regime in regimes:
            cfg = dataio.regime_config(regime, data_seed=DATA_SEED,
                                       split_mode=split_mode, scale=scale)
            dataio.save(dataio.build_dataset(cfg),
                        out_path / "datasets" / regime)

    # one BLAS thread per worker avoids oversubscription in parallel runs
    blas_threads = 1 if workers > 1 else None
    jobs = [(regime, model, seed, scale, dtype, split_mode, mode,
             str(out_path) if out_path else None, blas_threads)
            for regime in regimes for model in models for seed in seeds]
    cells: list[dict] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell in pool.map(_cell_worker, jobs):
                cells.append(cell)
                if progress:
                    progress(cell)
    else:
        for job in jobs:
            cell = _cell_worker(job)
            cells.append(cell)
            if progress:
                progress(cell)

    aggregates = aggregate(cells)
    report = {
        "schema_version": REPORT_VERSION,
        "kind": "bench_report",
        **run_config,
        "data_seed": DATA_SEED,
        "not_reproduced": list(NOT_REPRODUCED),
        "cells": cells,
        "aggregates": aggregates,
        "orderings": ordering_flags(aggregates),
        "dataset_paths": {r: f"datasets/{r}" for r in regimes} if out_path else {},
        "wall_clock_total_s": time.perf_counter() - t0,
        "stamp": provenance.make_stamp(run_config, seeds),
    }
    if out_path is not None:
        save_report(report, out_path / REPORT_FILENAME)
    return report


def save_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> dict:
    path = Path(path)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read report {path}: {exc}") from exc
    if report.get("schema_version") != REPORT_VERSION:
        raise ValueError(
            f"unsupported report schema_version {report.get('schema_version')!r}; "
            f"this build reads version {REPORT_VERSION}")
    provenance.require_stamp(report, "bench report")
    return report


# ---------------------------------------------------------------------------
# figure emission

def _read_columns(path) -> dict:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    names = lines[0].split(",")
    cols = {n: [] for n in names}
    for line in lines[1:]:
        for n, v in zip(names, line.split(",")):
            cols[n].append(float(v) if n != "split" else v)
    return {n: (np.array(v) if n != "split" else np.array(v)) for n, v in cols.items()}


def _write_columns(path, cols: dict) -> None:
    names = list(cols.keys())
    n = len(cols[names[0]])
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(repr(float(cols[k][i])) for k in names))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_figures(report: dict, out_dir, base_dir=None) -> tuple[list, list]:
    """Per-regime figure data (columnar text) + SVG panels.

    Panels per regime: (a) noisy measurements with the hidden clean
    trajectory, (b) loss convergence, (c) contradiction-coefficient
    trajectory, (d) reconstruction overlay.  Returns (written paths,
    gaps); artifacts missing from the report produce gaps, not failures.
    """
    from . import charts

    cells = [c for c in report.get("cells", []) if c.get("status") == "ok"]
    if not cells:
        raise ValueError("report has no successful cells; nothing to plot")
    base = Path(base_dir) if base_dir is not None else Path(".")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list = []
    gaps: list = []

    for regime in report.get("regimes", []):
        rep_cell = next(
            (c for c in cells if c["regime"] == regime
             and c["model"] == "paraqnn" and "recon_path" in c), None)
        ds_rel = report.get("dataset_paths", {}).get(regime)
        ds = None
        if ds_rel and (base / ds_rel).exists():
            ds = dataio.load(base / ds_rel)
        else:
            gaps.append(f"{regime}: dataset not found under {base}")

        if ds is not None:
            pa_csv = out / f"{regime}_panel_a.csv"
            _write_columns(pa_csv, {"time_us": ds.times, "y_noisy": ds.y_noisy,
                                    "y_clean": ds.y_clean})
            pa_svg = charts.line_chart(
                out / f"{regime}_panel_a.svg",
                [{"x": ds.times, "y": ds.y_noisy, "label": "noisy measurements",
                  "kind": "scatter", "color": "#999999"},
                 {"x": ds.times, "y": ds.y_clean, "label": "hidden clean signal",
                  "color": "#222222"}],
                title=f"{regime}: measurements", xlabel="time (us)",
                ylabel="P(|1>)")
            written += [pa_csv, pa_svg]

        if rep_cell is None:
            gaps.append(f"{regime}: no successful paraqnn cell with "
                        "reconstruction/telemetry artifacts")
            continue

        tel_path = base / rep_cell.get("telemetry_path", "missing")
        if rep_cell.get("telemetry_path") and tel_path.exists():
            tel = training.load_telemetry_table(tel_path)
            pb_csv = out / f"{regime}_panel_b.csv"
            _write_columns(pb_csv, {"epoch": tel["epoch"],
                                    "train_loss": tel["train_loss"],
                                    "val_loss": tel["val_loss"]})
            pb_svg = charts.line_chart(
                out / f"{regime}_panel_b.svg",
                [{"x": tel["epoch"], "y": tel["train_loss"], "label": "train"},
                 {"x": tel["epoch"], "y": tel["val_loss"], "label": "validation"}],
                title=f"{regime}: loss convergence", xlabel="epoch",
                ylabel="composite loss", log_y=True)
            written += [pb_csv, pb_svg]
            if "alpha" in tel:
                pc_csv = out / f"{regime}_panel_c.csv"
                _write_columns(pc_csv, {"epoch": tel["epoch"],
                                        "alpha": tel["alpha"]})
                pc_svg = charts.line_chart(
                    out / f"{regime}_panel_c.svg",
                    [{"x": tel["epoch"], "y": tel["alpha"],
                      "label": "contradiction coefficient"}],
                    title=f"{regime}: coefficient trajectory", xlabel="epoch",
                    ylabel="alpha")
                written += [pc_csv, pc_svg]
            else:
                gaps.append(f"{regime}: telemetry has no alpha column")
        else:
            gaps.append(f"{regime}: telemetry file missing")

        recon_path = base / rep_cell.get("recon_path", "missing")
        if rep_cell.get("recon_path") and recon_path.exists():
            rec = _read_columns(recon_path)
            pd_csv = out / f"{regime}_panel_d.csv"
            _write_columns(pd_csv, {"time_us": rec["time_us"],
                                    "y_noisy": rec["y_noisy"],
                                    "y_clean": rec["y_clean"],
                                    "prediction": rec["prediction"]})
            pd_svg = charts.line_chart(
                out / f"{regime}_panel_d.svg",
                [{"x": rec["time_us"], "y": rec["y_noisy"],
                  "label": "noisy measurements", "kind": "scatter",
                  "color": "#999999"},
                 {"x": rec["time_us"], "y": rec["y_clean"],
                  "label": "ideal trajectory", "color": "#222222"},
                 {"x": rec["time_us"], "y": rec["prediction"],
                  "label": "model output", "color": "#c23b22"}],
                title=f"{regime}: reconstruction", xlabel="time (us)",
                ylabel="P(|1>)")
            written += [pd_csv, pd_svg]
        else:
            gaps.append(f"{regime}: reconstruction file missing")
    return written, gaps


_VOLATILE_KEYS = ("wall_clock_s", "wall_clock_total_s", "created_utc")


def strip_volatile(obj):
    """Copy of a report-like structure without wall-clock/timestamp fields."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items()
                if k not in _VOLATILE_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


def reports_equivalent(a: dict, b: dict) -> bool:
    return strip_volatile(a) == strip_volatile(b)
