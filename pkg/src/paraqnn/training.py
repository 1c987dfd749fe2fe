"""Losses, optimizer, physics residuals, and the training loop.

The composite dual-channel loss has three parts: signal reconstruction
(truth channel vs the latent clean signal), noise alignment (falsity
channel vs the absolute residual |y - t*|), and a hinge-squared
contradiction penalty active where t_hat + f_hat > 1.  An alternative
"experimental" mode needs no clean reference: the truth channel fits the
noisy trace directly and the falsity channel fits |y - t_hat| with the
target detached (no gradient flows from it into the truth channel).

Every loss returns its exact gradient; optimization is plain Adam with
bias correction.  Physics residuals for the PINN baselines use central
finite differences on a uniform collocation grid.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import paranet
from .dataio import Dataset, normalize_time
from .noise import SeededRng

MODES = ("benchmark", "experimental")

PRESET_EPOCHS = {"rabi": 1500, "lindblad": 2000, "mixed": 4000}
PRESET_BATCH = {"rabi": 256, "lindblad": 256, "mixed": 512}

COLLOCATION_POINTS = 1024


class TrainingError(RuntimeError):
    """Non-finite losses/gradients or other unrecoverable training faults."""


@dataclass(frozen=True)
class LossWeights:
    """Weights (lambda_s, lambda_n, lambda_c) of the composite loss."""

    lambda_s: float = 1.0
    lambda_n: float = 0.5
    lambda_c: float = 0.5

    def __post_init__(self):
        if min(self.lambda_s, self.lambda_n, self.lambda_c) < 0.0:
            raise ValueError("loss weights must be nonnegative")


def loss_weights_for(regime: str) -> LossWeights:
    # the mixed regime raises the noise-alignment weight to 0.8
    return LossWeights(lambda_n=0.8) if regime == "mixed" else LossWeights()


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters (presets follow the benchmark table)."""

    epochs: int
    batch_size: int
    model_seed: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden_layers: int = 3
    hidden_width: int = 128
    alpha0: float = 6.0
    k: float = 1.0
    dtype: str = "float64"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


def train_config(regime: str, model_seed: int, scale: float = 1.0,
                 dtype: str = "float64") -> TrainConfig:
    """Preset epochs/batch for a regime; `scale` divides the epoch count."""
    if regime not in PRESET_EPOCHS:
        raise ValueError(f"unknown regime {regime!r}")
    if not 0.0 < scale <= 1.0:
        raise ValueError("scale must be in (0, 1]")
    return TrainConfig(
        epochs=max(1, round(PRESET_EPOCHS[regime] * scale)),
        batch_size=PRESET_BATCH[regime],
        model_seed=model_seed,
        dtype=dtype,
    )


# ---------------------------------------------------------------------------
# loss terms (each returns value + exact gradients)

def _check_batch(*arrays):
    n = arrays[0].shape[0]
    if n == 0:
        raise ValueError("empty batch")
    for a in arrays[1:]:
        if a.shape[0] != n:
            raise ValueError("batch length mismatch")
    return n


def loss_signal(t_hat, t_star):
    """MSE of the truth channel against the latent signal."""
    t_hat = np.asarray(t_hat)
    t_star = np.asarray(t_star)
    n = _check_batch(t_hat, t_star)
    diff = t_hat - t_star
    value = float(np.mean(diff * diff, dtype=np.float64))
    return value, (2.0 / n) * diff


def loss_noise(f_hat, y, t_star):
    """MSE of the falsity channel against the absolute residual |y - t*|."""
    f_hat = np.asarray(f_hat)
    n = _check_batch(f_hat, np.asarray(y), np.asarray(t_star))
    target = np.abs(np.asarray(y) - np.asarray(t_star))
    diff = f_hat - target
    value = float(np.mean(diff * diff, dtype=np.float64))
    return value, (2.0 / n) * diff


def loss_contradiction(t_hat, f_hat):
    """Hinge-squared penalty on t_hat + f_hat > 1."""
    t_hat = np.asarray(t_hat)
    f_hat = np.asarray(f_hat)
    n = _check_batch(t_hat, f_hat)
    excess = np.maximum(t_hat + f_hat - 1.0, 0.0)
    value = float(np.mean(excess * excess, dtype=np.float64))
    g = (2.0 / n) * excess
    return value, g, g.copy()


def loss_experimental(t_hat, f_hat, y, weights: LossWeights):
    """Self-consistent mode: no clean reference needed.

    mean((t_hat - y)^2) + lambda_n * mean((f_hat - |y - t_hat|)^2)
                        + lambda_c * contradiction,
    where the residual target |y - t_hat| is detached: it contributes no
    gradient to the truth channel.
    """
    t_hat = np.asarray(t_hat)
    f_hat = np.asarray(f_hat)
    y = np.asarray(y)
    n = _check_batch(t_hat, f_hat, y)
    fit = t_hat - y
    fit_value = float(np.mean(fit * fit, dtype=np.float64))
    resid_target = np.abs(y - t_hat)  # detached
    nd = f_hat - resid_target
    noise_value = float(np.mean(nd * nd, dtype=np.float64))
    c_value, c_gt, c_gf = loss_contradiction(t_hat, f_hat)
    value = fit_value + weights.lambda_n * noise_value + weights.lambda_c * c_value
    d_t = (2.0 / n) * fit + weights.lambda_c * c_gt
    d_f = weights.lambda_n * (2.0 / n) * nd + weights.lambda_c * c_gf
    return value, d_t, d_f


def composite_loss(t_hat, f_hat, y, t_star, weights: LossWeights, mode: str):
    """Total loss + upstream gradients for the two output channels.

    Returns (total, d_t_hat, d_f_hat, parts) where parts holds the
    unweighted component values.
    """
    if mode == "benchmark":
        ls, gs = loss_signal(t_hat, t_star)
        ln, gn = loss_noise(f_hat, y, t_star)
        lc, gct, gcf = loss_contradiction(t_hat, f_hat)
        total = weights.lambda_s * ls + weights.lambda_n * ln + weights.lambda_c * lc
        d_t = weights.lambda_s * gs + weights.lambda_c * gct
        d_f = weights.lambda_n * gn + weights.lambda_c * gcf
        parts = {"signal": ls, "noise": ln, "contradiction": lc}
        return total, d_t, d_f, parts
    if mode == "experimental":
        value, d_t, d_f = loss_experimental(t_hat, f_hat, y, weights)
        return value, d_t, d_f, {"experimental": value}
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


# ---------------------------------------------------------------------------
# physics residuals (PINN baselines)

def physics_residual(p, times, prior: str, *, gamma=None, zeta=None,
                     omega=None, p_eq=None):
    """Mean squared ODE residual of predictions `p` on a uniform grid.

    prior="incomplete": r = dP/dt + gamma * P        (exponential surrogate)
    prior="known":      r = d2P/dt2 + 2*zeta*omega*dP/dt
                            + omega^2 * (P - p_eq)   (damped oscillator)

    Derivatives are central finite differences on interior points.
    Returns (loss, d_loss/d_p, d_loss/d_params dict).
    """
    p = np.asarray(p)
    times = np.asarray(times, dtype=np.float64)
    m = p.shape[0]
    if m < 3:
        raise ValueError("physics residual needs at least 3 grid points")
    h = float(times[1] - times[0])
    steps = np.diff(times)
    if h <= 0.0 or not np.allclose(steps, h, rtol=1e-9, atol=1e-12):
        raise ValueError("collocation grid must be uniform and increasing")

    p_int = p[1:-1]
    d1 = (p[2:] - p[:-2]) / (2.0 * h)
    n_int = m - 2
    dp = np.zeros_like(p)

    if prior == "incomplete":
        if gamma is None:
            raise ValueError("incomplete prior needs gamma")
        r = d1 + gamma * p_int
        loss = float(np.mean(r * r, dtype=np.float64))
        dr = (2.0 / n_int) * r
        dp[2:] += dr / (2.0 * h)
        dp[:-2] -= dr / (2.0 * h)
        dp[1:-1] += gamma * dr
        d_params = {"gamma": float(np.sum(dr * p_int, dtype=np.float64))}
        return loss, dp, d_params

    if prior == "known":
        if zeta is None or omega is None or p_eq is None:
            raise ValueError("known prior needs zeta, omega, p_eq")
        d2 = (p[2:] - 2.0 * p_int + p[:-2]) / (h * h)
        r = d2 + 2.0 * zeta * omega * d1 + omega * omega * (p_int - p_eq)
        loss = float(np.mean(r * r, dtype=np.float64))
        dr = (2.0 / n_int) * r
        dp[2:] += dr / (h * h) + dr * (zeta * omega / h)
        dp[1:-1] += -2.0 * dr / (h * h) + (omega * omega) * dr
        dp[:-2] += dr / (h * h) - dr * (zeta * omega / h)
        d_params = {
            "zeta": float(np.sum(dr * (2.0 * omega * d1), dtype=np.float64)),
            "omega": float(np.sum(
                dr * (2.0 * zeta * d1 + 2.0 * omega * (p_int - p_eq)),
                dtype=np.float64)),
            "p_eq": float(np.sum(dr, dtype=np.float64) * -(omega * omega)),
        }
        return loss, dp, d_params

    raise ValueError(f"unknown prior {prior!r}")


def pinn_residual(p, times, prior: str, **params):
    """Scalar physics loss only (see physics_residual)."""
    return physics_residual(p, times, prior, **params)[0]


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_arrays(cls, arrays) -> "AdamState":
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays])


def adam_step(arrays, grads, state: AdamState, config: TrainConfig) -> AdamState:
    """One in-place Adam update with bias correction."""
    if len(arrays) != len(state.m) or len(arrays) != len(grads):
        raise ValueError("parameter/gradient/state lengths differ")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    lr = config.learning_rate
    for theta, g, m, v in zip(arrays, grads, state.m, state.v):
        g = np.asarray(g)
        if not np.all(np.isfinite(g)):
            raise TrainingError(
                f"non-finite gradient for parameter of shape {theta.shape} "
                f"at step {state.t}"
            )
        m *= b1
        m += (1.0 - b1) * g
        tmp = np.asarray(g * g)  # asarray: 0-d results degrade to scalars
        v *= b2
        v += (1.0 - b2) * tmp
        np.divide(v, c2, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += config.eps
        np.divide(m, tmp, out=tmp)
        tmp *= lr / c1
        theta -= tmp
    return state


# ---------------------------------------------------------------------------
# dual-channel model wrapper

class ParaQNNModel:
    """Trainable dual-evidence network (the main model)."""

    kind = "paraqnn"

    def __init__(self, config: TrainConfig, input_width: int = 1):
        widths = [input_width] + [config.hidden_width] * config.hidden_layers + [1]
        self.config = config
        self.params = paranet.init_paranet(
            widths, seed=config.model_seed, alpha0=config.alpha0,
            k=config.k, dtype=config.np_dtype)

    def arrays(self):
        return self.params.trainable_arrays()

    def attach_dataset(self, tau_train, span):
        pass  # no collocation machinery needed

    def loss_and_grads(self, tau, y, t_star, weights, mode):
        t_hat, f_hat, cache = paranet.forward(self.params, tau)
        total, d_t, d_f, _ = composite_loss(t_hat, f_hat, y, t_star, weights, mode)
        grads = paranet.backward(self.params, cache, d_t, d_f)
        return total, grads.arrays()

    def eval_loss(self, tau, y, t_star, weights, mode):
        t_hat, f_hat, _ = paranet.forward(self.params, tau)
        total, _, _, _ = composite_loss(t_hat, f_hat, y, t_star, weights, mode)
        return total

    def predict_signal(self, tau):
        return paranet.forward(self.params, tau).t_hat

    def predict_dual(self, tau):
        res = paranet.forward(self.params, tau)
        return res.t_hat, res.f_hat

    @property
    def alpha(self) -> float:
        return self.params.alpha

    def telemetry_extras(self) -> dict:
        return {"alpha": self.params.alpha}

    def save_checkpoint(self, path):
        paranet.save_checkpoint(self.params, path)


# ---------------------------------------------------------------------------
# telemetry

@dataclass
class Telemetry:
    """Per-epoch training record plus final test metrics."""

    train_loss: np.ndarray
    val_loss: np.ndarray
    alpha: np.ndarray | None
    wall_clock_s: float
    test_mse_clean: float
    test_mse_noisy: float
    extras: dict = field(default_factory=dict)

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


def save_telemetry(tel: Telemetry, path) -> None:
    cols = ["epoch", "train_loss", "val_loss"]
    if tel.alpha is not None:
        cols.append("alpha")
    lines = [",".join(cols)]
    for i in range(tel.epochs):
        row = [str(i), repr(float(tel.train_loss[i])), repr(float(tel.val_loss[i]))]
        if tel.alpha is not None:
            row.append(repr(float(tel.alpha[i])))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_telemetry_table(path) -> dict:
    """Telemetry CSV -> dict of column arrays."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    out = {}
    for j, name in enumerate(header):
        out[name] = np.array([float(r[j]) for r in rows])
    return out


# ---------------------------------------------------------------------------
# training loop

def _batches(n, batch_size, perm):
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def train(model, dataset: Dataset, weights: LossWeights, config: TrainConfig,
          mode: str = "benchmark"):
    """Mini-batch training with per-epoch reshuffles from the model seed.

    Returns (model, Telemetry).  The test MSE is measured for the signal
    prediction against the clean latent trajectory on the test split.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    t0 = time.perf_counter()
    dtype = config.np_dtype
    tau_all = normalize_time(dataset).astype(dtype)
    y_all = dataset.y_noisy.astype(dtype)
    tstar_all = dataset.y_clean.astype(dtype)

    tr = dataset.mask("train")
    va = dataset.mask("val")
    te = dataset.mask("test")
    if not (tr.any() and va.any() and te.any()):
        raise ValueError("dataset must contain train, val, and test points")
    tau_tr, y_tr, ts_tr = tau_all[tr], y_all[tr], tstar_all[tr]
    tau_va, y_va, ts_va = tau_all[va], y_all[va], tstar_all[va]
    n_train = tau_tr.shape[0]

    model.attach_dataset(tau_tr, dataset.time_span)
    arrays = model.arrays()
    state = AdamState.for_arrays(arrays)
    shuffle = SeededRng(config.model_seed, "shuffle").generator()

    track_alpha = hasattr(model, "alpha")
    train_curve = np.empty(config.epochs)
    val_curve = np.empty(config.epochs)
    alpha_curve = np.empty(config.epochs) if track_alpha else None

    for epoch in range(config.epochs):
        if track_alpha:
            # value entering the epoch, so the series starts at alpha0
            alpha_curve[epoch] = model.alpha
        perm = shuffle.permutation(n_train)
        epoch_loss = 0.0
        for idx in _batches(n_train, config.batch_size, perm):
            loss, grads = model.loss_and_grads(
                tau_tr[idx], y_tr[idx], ts_tr[idx], weights, mode)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            adam_step(arrays, grads, state, config)
            epoch_loss += loss * idx.shape[0]
        train_curve[epoch] = epoch_loss / n_train
        val_curve[epoch] = model.eval_loss(tau_va, y_va, ts_va, weights, mode)
        if not math.isfinite(val_curve[epoch]):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")

    pred_test = np.asarray(model.predict_signal(tau_all[te]), dtype=np.float64)
    mse_clean = float(np.mean((pred_test - dataset.y_clean[te]) ** 2))
    mse_noisy = float(np.mean((pred_test - dataset.y_noisy[te]) ** 2))
    tel = Telemetry(
        train_loss=train_curve,
        val_loss=val_curve,
        alpha=alpha_curve,
        wall_clock_s=time.perf_counter() - t0,
        test_mse_clean=mse_clean,
        test_mse_noisy=mse_noisy,
        extras=model.telemetry_extras(),
    )
    return model, tel
