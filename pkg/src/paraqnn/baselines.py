"""Baseline regressors trained under the same protocol as the dual net.

Three kinds share one single-channel body (tanh hidden layers, sigmoid
output, widths matching the dual network's 3x128):

  pinn_incomplete : data MSE + 0.1 * exponential-decay residual, learnable
                    decay rate gamma > 0
  pinn_known      : data MSE + 0.1 * damped-oscillator residual, learnable
                    zeta > 0, omega > 0, p_eq in [0, 1]
  mlp             : data MSE only (the purely data-driven stand-in)

The data term fits the noisy observations; physics residuals live on an
independent uniform collocation grid inside the training time range.
Tree/boosting/adversarial baselines are deliberately not implemented;
reports carry explicit "not reproduced" placeholders for them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import paranet, training
from .noise import SeededRng
from .paranet import sigmoid

KINDS = ("pinn_incomplete", "pinn_known", "mlp")

LAMBDA_PHYSICS = 0.1

# spec'd starting points for the learnable physics parameters
GAMMA_INIT = 0.2
ZETA_INIT = 0.1
OMEGA_INIT = 2.0
P_EQ_INIT = 0.5


def canonical_kind(name: str) -> str:
    kind = name.replace("-", "_")
    if kind not in KINDS:
        raise ValueError(f"unknown baseline kind {name!r}; expected one of {KINDS}")
    return kind


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    hidden_layers: int = 3
    hidden_width: int = 128

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))

    @property
    def lambda_physics(self) -> float:
        return LAMBDA_PHYSICS if self.kind.startswith("pinn") else 0.0


@dataclass
class LinearParams:
    w: np.ndarray
    b: np.ndarray


def _init_body(widths, seed: int, dtype) -> list[LinearParams]:
    gen = SeededRng(seed, "init").generator()
    layers = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = gen.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype)
        layers.append(LinearParams(w=w, b=np.zeros(fan_out, dtype=dtype)))
    return layers


class BaselineModel:
    """Single-channel network + optional physics residual."""

    def __init__(self, spec: BaselineSpec, seed: int, dtype=np.float64):
        self.spec = spec
        self.kind = spec.kind
        widths = [1] + [spec.hidden_width] * spec.hidden_layers + [1]
        self.layers = _init_body(widths, seed, dtype)
        self.dtype = np.dtype(dtype)
        # positive / box reparameterizations, all float64 scalars
        self.phys_raw: dict[str, np.ndarray] = {}
        if spec.kind == "pinn_incomplete":
            self.phys_raw["gamma"] = np.asarray(
                paranet.softplus_inverse(GAMMA_INIT), dtype=np.float64)
        elif spec.kind == "pinn_known":
            self.phys_raw["zeta"] = np.asarray(
                paranet.softplus_inverse(ZETA_INIT), dtype=np.float64)
            self.phys_raw["omega"] = np.asarray(
                paranet.softplus_inverse(OMEGA_INIT), dtype=np.float64)
            self.phys_raw["p_eq"] = np.asarray(0.0, dtype=np.float64)  # sigmoid(0)=0.5
        self._grid_tau = None
        self._grid_times = None
        self._span = None

    # -- parameters -------------------------------------------------------

    def arrays(self):
        out = []
        for layer in self.layers:
            out.extend([layer.w, layer.b])
        out.extend(self.phys_raw.values())
        return out

    def physics_values(self) -> dict:
        vals = {}
        for name, raw in self.phys_raw.items():
            if name == "p_eq":
                vals[name] = float(sigmoid(float(raw)))
            else:
                vals[name] = paranet.softplus(float(raw))
        return vals

    # -- forward/backward (tanh body, sigmoid head) ------------------------

    def _forward(self, tau):
        tau = np.asarray(tau, dtype=self.dtype)
        if tau.ndim == 1:
            tau = tau[:, None]
        a = tau
        cache = []
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            z = a @ layer.w.T + layer.b
            out = sigmoid(z) if i == last else np.tanh(z)
            cache.append((a, out))
            a = out
        return a[:, 0], cache

    def _backward(self, cache, d_out):
        d_a = np.asarray(d_out, dtype=self.dtype)[:, None]
        grads = [None] * len(self.layers)
        last = len(self.layers) - 1
        for i in range(last, -1, -1):
            a_in, out = cache[i]
            if i == last:
                dz = d_a * (out * (1.0 - out))
            else:
                dz = d_a * (1.0 - out * out)
            grads[i] = (dz.T @ a_in, dz.sum(axis=0))
            if i > 0:
                d_a = dz @ self.layers[i].w
        flat = []
        for gw, gb in grads:
            flat.extend([gw, gb])
        return flat

    # -- training protocol hooks -------------------------------------------

    def attach_dataset(self, tau_train, span):
        """Collocation grid: uniform points inside the training time range."""
        lo = float(np.min(tau_train))
        hi = float(np.max(tau_train))
        self._grid_tau = np.linspace(lo, hi, training.COLLOCATION_POINTS) \
            .astype(self.dtype)
        self._span = float(span)
        self._grid_times = np.linspace(lo * span, hi * span,
                                       training.COLLOCATION_POINTS)

    def _physics_loss_and_grads(self):
        p, cache = self._forward(self._grid_tau)
        vals = self.physics_values()
        if self.kind == "pinn_incomplete":
            loss, d_p, d_par = training.physics_residual(
                p, self._grid_times, "incomplete", gamma=vals["gamma"])
        else:
            loss, d_p, d_par = training.physics_residual(
                p, self._grid_times, "known", zeta=vals["zeta"],
                omega=vals["omega"], p_eq=vals["p_eq"])
        net_grads = self._backward(cache, d_p)
        raw_grads = []
        for name, raw in self.phys_raw.items():
            if name == "p_eq":
                v = vals[name]
                raw_grads.append(np.asarray(d_par[name] * v * (1.0 - v)))
            else:
                raw_grads.append(np.asarray(
                    d_par[name] * float(sigmoid(float(raw)))))
        return loss, net_grads, raw_grads

    def _physics_loss_value(self):
        p, _ = self._forward(self._grid_tau)
        vals = self.physics_values()
        if self.kind == "pinn_incomplete":
            return training.pinn_residual(p, self._grid_times, "incomplete",
                                          gamma=vals["gamma"])
        return training.pinn_residual(p, self._grid_times, "known",
                                      zeta=vals["zeta"], omega=vals["omega"],
                                      p_eq=vals["p_eq"])

    def loss_and_grads(self, tau, y, t_star, weights, mode):
        y_hat, cache = self._forward(tau)
        n = y_hat.shape[0]
        diff = y_hat - np.asarray(y, dtype=self.dtype)
        data_loss = float(np.mean(diff * diff, dtype=np.float64))
        net_grads = self._backward(cache, (2.0 / n) * diff)
        lam = self.spec.lambda_physics
        if lam > 0.0:
            phys_loss, phys_net_grads, phys_raw_grads = self._physics_loss_and_grads()
            total = data_loss + lam * phys_loss
            grads = [g + lam * pg for g, pg in zip(net_grads, phys_net_grads)]
            grads.extend(lam * rg for rg in phys_raw_grads)
        else:
            total = data_loss
            grads = net_grads
            grads.extend(np.zeros_like(raw) for raw in self.phys_raw.values())
        return total, grads

    def eval_loss(self, tau, y, t_star, weights, mode):
        y_hat, _ = self._forward(tau)
        diff = y_hat - np.asarray(y, dtype=self.dtype)
        loss = float(np.mean(diff * diff, dtype=np.float64))
        lam = self.spec.lambda_physics
        if lam > 0.0:
            loss += lam * self._physics_loss_value()
        return loss

    def predict_signal(self, tau):
        return self._forward(tau)[0]

    def telemetry_extras(self) -> dict:
        return {"physics_params": self.physics_values(),
                "lambda_physics": self.spec.lambda_physics}

    def count_parameters(self) -> int:
        return sum(a.size for a in self.arrays())

    # -- checkpointing -------------------------------------------------------

    def save_checkpoint(self, path):
        meta = {
            "format_version": paranet.CHECKPOINT_VERSION,
            "kind": self.kind,
            "hidden_layers": self.spec.hidden_layers,
            "hidden_width": self.spec.hidden_width,
            "dtype": self.dtype.name,
            "phys_names": list(self.phys_raw.keys()),
        }
        arrays = {"meta_json": np.frombuffer(json.dumps(meta).encode("utf-8"),
                                             dtype=np.uint8)}
        for i, layer in enumerate(self.layers):
            arrays[f"w_{i}"] = layer.w
            arrays[f"b_{i}"] = layer.b
        for name, raw in self.phys_raw.items():
            arrays[f"phys_{name}"] = raw
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load_checkpoint(cls, path) -> "BaselineModel":
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta_json"]).decode("utf-8"))
            if meta.get("format_version") != paranet.CHECKPOINT_VERSION:
                raise ValueError(
                    f"unsupported checkpoint version {meta.get('format_version')!r}")
            spec = BaselineSpec(kind=meta["kind"],
                                hidden_layers=meta["hidden_layers"],
                                hidden_width=meta["hidden_width"])
            model = cls(spec, seed=0, dtype=np.dtype(meta["dtype"]))
            for i in range(len(model.layers)):
                model.layers[i] = LinearParams(w=data[f"w_{i}"], b=data[f"b_{i}"])
            for name in meta["phys_names"]:
                model.phys_raw[name] = data[f"phys_{name}"]
            return model


def build_baseline(spec: BaselineSpec, seed: int, dtype=np.float64) -> BaselineModel:
    """Trainable baseline exposing the same train interface as the dual net."""
    return BaselineModel(spec, seed, dtype)


def predict(model, times) -> np.ndarray:
    """Deterministic P(|1>) estimates for any trained model."""
    return np.asarray(model.predict_signal(times), dtype=np.float64)
