"""Dataset assembly, persistence, and reload.

A dataset is a uniform time grid with the clean latent signal, the noisy
observation, and a per-point split label, persisted as a columnar text
table (``data.csv``) plus a JSON manifest carrying every parameter needed
to regenerate the table bit-for-bit, a provenance stamp, and a content
checksum.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dyngen, noise, provenance
from .dyngen import DriveSchedule, QubitPhysics
from .noise import NoiseStack, SeededRng

SCHEMA_VERSION = 1

TEST_FRACTION = 0.20
VAL_FRACTION_OF_TRAIN = 0.10
TEMPORAL_HOLDOUT_FRACTION = 0.15

SPLIT_MODES = ("random", "temporal")

# Preset sizes from the benchmark definitions.
PRESET_N_POINTS = {"rabi": 10_000, "lindblad": 25_000, "mixed": 50_000}

PRESET_NOISE = {
    "rabi": NoiseStack(gaussian_sigma=0.08, telegraph_amplitude=0.1,
                       telegraph_switch_prob=0.02),
    "lindblad": NoiseStack(gaussian_sigma=0.08, telegraph_amplitude=0.1,
                           telegraph_switch_prob=0.02),
    "mixed": NoiseStack(pink_sigma=0.06, spam_epsilon=0.02),
}


class DataError(Exception):
    """Malformed, inconsistent, or unreadable dataset artifacts."""


@dataclass(frozen=True)
class RegimeConfig:
    """Full physical + noise specification of one dataset regime."""

    regime: str
    n_points: int
    time_span: float
    schedule: DriveSchedule
    noise: NoiseStack
    data_seed: int
    split_mode: str = "random"
    dt_internal: float = dyngen.DT_INTERNAL_DEFAULT

    def __post_init__(self):
        if self.n_points < 10:
            raise ValueError("n_points must be at least 10")
        if self.time_span != self.schedule.total_span:
            raise ValueError("time_span must equal the schedule's total_span")
        if self.split_mode not in SPLIT_MODES:
            raise ValueError(f"split_mode must be one of {SPLIT_MODES}")


def regime_config(regime: str, data_seed: int = 42, split_mode: str = "random",
                  clip: bool = False, scale: float = 1.0) -> RegimeConfig:
    """Benchmark-preset configuration for a named regime.

    ``scale`` uniformly divides the preset sample count (and, downstream,
    the epoch counts) for fast CI-class runs; 1.0 is the full preset.
    """
    if regime not in dyngen.REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {dyngen.REGIMES}")
    if not 0.0 < scale <= 1.0:
        raise ValueError("scale must be in (0, 1]")
    schedule = dyngen.make_regime_schedule(regime)
    stack = PRESET_NOISE[regime]
    if clip:
        stack = replace(stack, clip_output=True)
    n_points = max(50, round(PRESET_N_POINTS[regime] * scale))
    return RegimeConfig(
        regime=regime,
        n_points=n_points,
        time_span=schedule.total_span,
        schedule=schedule,
        noise=stack,
        data_seed=data_seed,
        split_mode=split_mode,
    )


class Dataset:
    """Immutable container: times, clean signal, noisy observation, splits."""

    def __init__(self, times, y_clean, y_noisy, split, manifest):
        self.times = np.asarray(times, dtype=np.float64)
        self.y_clean = np.asarray(y_clean, dtype=np.float64)
        self.y_noisy = np.asarray(y_noisy, dtype=np.float64)
        self.split = np.asarray(split)
        self.manifest = manifest
        n = self.times.shape[0]
        if not (self.y_clean.shape[0] == self.y_noisy.shape[0]
                == self.split.shape[0] == n):
            raise DataError("dataset columns must have equal length")
        if self.y_clean.min() < -1e-6 or self.y_clean.max() > 1.0 + 1e-6:
            raise DataError("y_clean outside [0, 1] tolerance")
        bad = set(np.unique(self.split)) - {"train", "val", "test"}
        if bad:
            raise DataError(f"unknown split labels {sorted(bad)}")

    def __len__(self):
        return self.times.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.y_clean, other.y_clean)
                and np.array_equal(self.y_noisy, other.y_noisy)
                and np.array_equal(self.split, other.split)
                and self.manifest == other.manifest)

    def mask(self, label: str) -> np.ndarray:
        return self.split == label

    @property
    def time_span(self) -> float:
        return float(self.manifest["time_span"])


def _assign_splits(times: np.ndarray, span: float, mode: str,
                   rng: SeededRng) -> np.ndarray:
    n = times.shape[0]
    labels = np.full(n, "train", dtype="<U5")
    gen = rng.generator()
    if mode == "random":
        n_test = round(TEST_FRACTION * n)
        perm = gen.permutation(n)
        test_idx = perm[:n_test]
        rest = perm[n_test:]
        n_val = round(VAL_FRACTION_OF_TRAIN * rest.shape[0])
        labels[test_idx] = "test"
        labels[rest[:n_val]] = "val"
    elif mode == "temporal":
        cutoff = (1.0 - TEMPORAL_HOLDOUT_FRACTION) * span
        test_idx = np.nonzero(times >= cutoff)[0]
        rest = np.nonzero(times < cutoff)[0]
        n_val = round(VAL_FRACTION_OF_TRAIN * rest.shape[0])
        perm = gen.permutation(rest)
        labels[test_idx] = "test"
        labels[perm[:n_val]] = "val"
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return labels


def build_dataset(cfg: RegimeConfig) -> Dataset:
    """Deterministically generate clean + noisy trajectories and splits."""
    times = np.linspace(0.0, cfg.time_span, cfg.n_points)
    y_clean = dyngen.integrate(cfg.schedule, dyngen.GROUND, times,
                               dt_internal=cfg.dt_internal)
    master = SeededRng(cfg.data_seed)
    y_noisy = noise.corrupt(y_clean, cfg.noise, master.derive("noise"))
    split = _assign_splits(times, cfg.time_span, cfg.split_mode,
                           master.derive("split"))
    manifest = _manifest_for(cfg)
    return Dataset(times, y_clean, y_noisy, split, manifest)


def normalize_time(ds: Dataset) -> np.ndarray:
    """Network input feature tau = t / time_span in [0, 1].

    The normalization constant is the manifest's ``time_span``, so model
    predictions can always be mapped back to physical time.
    """
    span = ds.time_span
    if span <= 0.0:
        raise ValueError("time_span must be positive")
    return ds.times / span


# ---------------------------------------------------------------------------
# manifest (de)serialization

def _physics_to_dict(p: QubitPhysics) -> dict:
    return {
        "omega_angular": p.omega_angular,
        "t1": None if math.isinf(p.t1) else p.t1,
        "t2": None if math.isinf(p.t2) else p.t2,
    }


def _physics_from_dict(d: dict) -> QubitPhysics:
    return QubitPhysics(
        omega_angular=float(d["omega_angular"]),
        t1=math.inf if d["t1"] is None else float(d["t1"]),
        t2=math.inf if d["t2"] is None else float(d["t2"]),
    )


def _manifest_for(cfg: RegimeConfig) -> dict:
    cfg_dict = {
        "regime": cfg.regime,
        "n_points": cfg.n_points,
        "time_span": cfg.time_span,
        "data_seed": cfg.data_seed,
        "split_mode": cfg.split_mode,
        "dt_internal": cfg.dt_internal,
        "initial_state": "ground",
        "time_normalization": cfg.time_span,
        "telegraph_rate_unit": "per_sample",
        "noise_composition": "spam_then_additive",
        "schedule": {
            "total_span": cfg.schedule.total_span,
            "segments": [
                {"t_start": a, "t_end": b, "physics": _physics_to_dict(p)}
                for (a, b, p) in cfg.schedule.segments
            ],
        },
        "noise": {
            "gaussian_sigma": cfg.noise.gaussian_sigma,
            "telegraph_amplitude": cfg.noise.telegraph_amplitude,
            "telegraph_switch_prob": cfg.noise.telegraph_switch_prob,
            "pink_sigma": cfg.noise.pink_sigma,
            "spam_epsilon": cfg.noise.spam_epsilon,
            "clip_output": cfg.noise.clip_output,
        },
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "dataset",
        **cfg_dict,
        "stamp": provenance.make_stamp(cfg_dict, [cfg.data_seed]),
    }


def config_from_manifest(manifest: dict) -> RegimeConfig:
    """Rebuild the generating configuration; validates all invariants."""
    try:
        sched = manifest["schedule"]
        segments = tuple(
            (float(s["t_start"]), float(s["t_end"]), _physics_from_dict(s["physics"]))
            for s in sched["segments"]
        )
        schedule = DriveSchedule(segments=segments,
                                 total_span=float(sched["total_span"]))
        nz = manifest["noise"]
        stack = NoiseStack(
            gaussian_sigma=float(nz["gaussian_sigma"]),
            telegraph_amplitude=float(nz["telegraph_amplitude"]),
            telegraph_switch_prob=float(nz["telegraph_switch_prob"]),
            pink_sigma=float(nz["pink_sigma"]),
            spam_epsilon=float(nz["spam_epsilon"]),
            clip_output=bool(nz["clip_output"]),
        )
        return RegimeConfig(
            regime=str(manifest["regime"]),
            n_points=int(manifest["n_points"]),
            time_span=float(manifest["time_span"]),
            schedule=schedule,
            noise=stack,
            data_seed=int(manifest["data_seed"]),
            split_mode=str(manifest["split_mode"]),
            dt_internal=float(manifest["dt_internal"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid dataset manifest: {exc}") from exc


def regenerate(manifest: dict) -> Dataset:
    """Re-run generation from a manifest; reproduces data.csv bit-for-bit."""
    return build_dataset(config_from_manifest(manifest))


# ---------------------------------------------------------------------------
# persistence

DATA_FILENAME = "data.csv"
MANIFEST_FILENAME = "manifest.json"
_HEADER = "time_us,y_clean,y_noisy,split"


def _render_csv(ds: Dataset) -> str:
    lines = [_HEADER]
    for t, yc, yn, s in zip(ds.times, ds.y_clean, ds.y_noisy, ds.split):
        lines.append(f"{float(t)!r},{float(yc)!r},{float(yn)!r},{s}")
    return "\n".join(lines) + "\n"


def save(ds: Dataset, path) -> Path:
    """Write data.csv + manifest.json into directory `path`."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    csv_text = _render_csv(ds)
    csv_bytes = csv_text.encode("utf-8")
    manifest = dict(ds.manifest)
    manifest["data_sha256"] = hashlib.sha256(csv_bytes).hexdigest()
    (path / DATA_FILENAME).write_bytes(csv_bytes)
    with open(path / MANIFEST_FILENAME, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load(path) -> Dataset:
    """Reload a saved dataset; checksum and schema are verified first."""
    path = Path(path)
    man_path = path / MANIFEST_FILENAME
    csv_path = path / DATA_FILENAME
    if not man_path.is_file() or not csv_path.is_file():
        raise DataError(f"no dataset at {path} (need {DATA_FILENAME} + {MANIFEST_FILENAME})")
    try:
        manifest = json.loads(man_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from exc
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DataError(
            f"unsupported dataset schema_version {manifest.get('schema_version')!r}; "
            f"this build reads version {SCHEMA_VERSION}"
        )
    try:
        provenance.require_stamp(manifest, "dataset manifest")
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    csv_bytes = csv_path.read_bytes()
    digest = hashlib.sha256(csv_bytes).hexdigest()
    expected = manifest.get("data_sha256")
    if digest != expected:
        raise DataError(
            f"data checksum mismatch (file {digest[:12]}..., manifest "
            f"{str(expected)[:12]}...); file is corrupt or truncated"
        )
    # validates physics/noise invariants as a side effect
    cfg = config_from_manifest(manifest)

    lines = csv_bytes.decode("utf-8").splitlines()
    if not lines or lines[0] != _HEADER:
        raise DataError(f"unexpected csv header {lines[0] if lines else '<empty>'!r}")
    rows = lines[1:]
    if len(rows) != cfg.n_points:
        raise DataError(f"expected {cfg.n_points} rows, found {len(rows)}")
    times = np.empty(len(rows))
    y_clean = np.empty(len(rows))
    y_noisy = np.empty(len(rows))
    split = np.empty(len(rows), dtype="<U5")
    try:
        for i, row in enumerate(rows):
            t, yc, yn, s = row.split(",")
            times[i] = float(t)
            y_clean[i] = float(yc)
            y_noisy[i] = float(yn)
            split[i] = s
    except ValueError as exc:
        raise DataError(f"malformed csv row {i + 1}: {exc}") from exc
    stored = {k: v for k, v in manifest.items() if k != "data_sha256"}
    return Dataset(times, y_clean, y_noisy, split, stored)
