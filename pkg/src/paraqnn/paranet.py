"""Dual-channel evidence network with exact reverse-mode gradients.

Every neuron carries a (truth, falsity) pair.  Layer pre-activations are
cross-coupled linear maps,

    z_t = W_tt t + W_tf f + b_t
    z_f = W_ft t + W_ff f + b_f

followed by the interaction activation

    t_out = sigmoid(k * (z_t - alpha * z_f))
    f_out = sigmoid(k * z_f)

where alpha > 0 is a single learnable scalar shared by all layers and k
is a fixed sharpness.  Internally the four matrices of a layer are stored
as one stacked (2*out, 2*in) block so a layer is a single GEMM; the
quadrants are exposed as views.

alpha is kept positive by storing an unconstrained scalar `alpha_raw`
with alpha = softplus(alpha_raw); gradients are returned with respect to
alpha_raw.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .noise import SeededRng

CHECKPOINT_VERSION = 1


def sigmoid(x):
    """Numerically stable logistic function (saturates, never overflows)."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


def softplus_inverse(y: float) -> float:
    """Unconstrained value whose softplus reproduces y exactly in float64."""
    if y <= 0.0:
        raise ValueError("softplus is positive; target must be > 0")
    x = math.log(math.expm1(y)) if y < 30.0 else y
    # nudge by ulps until the round trip is exact (usually 0 iterations)
    for _ in range(4):
        s = softplus(x)
        if s == y:
            return x
        x = math.nextafter(x, math.inf if s < y else -math.inf)
    return x


class DualValue(NamedTuple):
    """Truth/falsity evidence pair (elementwise arrays or scalars)."""

    t: np.ndarray
    f: np.ndarray


def piaf(z_t, z_f, alpha: float, k: float) -> DualValue:
    """Interaction activation: falsity evidence gates the truth channel."""
    z_t = np.asarray(z_t)
    z_f = np.asarray(z_f)
    return DualValue(t=sigmoid(k * (z_t - alpha * z_f)), f=sigmoid(k * z_f))


@dataclass
class ParaLayerParams:
    """One cross-coupled layer: stacked weights (2*out, 2*in), bias (2*out,).

    Quadrant layout: rows [0:out] produce z_t, rows [out:] produce z_f;
    columns [0:in] consume t, columns [in:] consume f.
    """

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.w.ndim != 2 or self.w.shape[0] % 2 or self.w.shape[1] % 2:
            raise ValueError(f"stacked weight must be (2*out, 2*in), got {self.w.shape}")
        if self.b.shape != (self.w.shape[0],):
            raise ValueError("bias shape must match stacked output width")

    @classmethod
    def from_parts(cls, w_tt, w_tf, w_ft, w_ff, b_t, b_f) -> "ParaLayerParams":
        w_tt, w_tf, w_ft, w_ff = map(np.asarray, (w_tt, w_tf, w_ft, w_ff))
        if not (w_tt.shape == w_tf.shape == w_ft.shape == w_ff.shape):
            raise ValueError("the four coupling matrices must share one shape")
        w = np.block([[w_tt, w_tf], [w_ft, w_ff]])
        b = np.concatenate([np.asarray(b_t), np.asarray(b_f)])
        return cls(w=w, b=b)

    @property
    def out_dim(self) -> int:
        return self.w.shape[0] // 2

    @property
    def in_dim(self) -> int:
        return self.w.shape[1] // 2

    # quadrant views (writable; share memory with the stacked block)
    @property
    def w_tt(self):
        return self.w[: self.out_dim, : self.in_dim]

    @property
    def w_tf(self):
        return self.w[: self.out_dim, self.in_dim:]

    @property
    def w_ft(self):
        return self.w[self.out_dim:, : self.in_dim]

    @property
    def w_ff(self):
        return self.w[self.out_dim:, self.in_dim:]

    @property
    def b_t(self):
        return self.b[: self.out_dim]

    @property
    def b_f(self):
        return self.b[self.out_dim:]


@dataclass
class ParaNetParams:
    """All trainable state: layer blocks plus the contradiction scalar."""

    layers: list[ParaLayerParams]
    alpha_raw: np.ndarray  # 0-d float64, unconstrained
    k: float = 1.0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("need at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer widths do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        if self.k <= 0.0:
            raise ValueError("k must be positive")
        self.alpha_raw = np.asarray(self.alpha_raw, dtype=np.float64)

    @property
    def alpha(self) -> float:
        return softplus(float(self.alpha_raw))

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].in_dim] + [l.out_dim for l in self.layers]

    @property
    def dtype(self):
        return self.layers[0].w.dtype

    def trainable_arrays(self) -> list[np.ndarray]:
        """Flat list of parameter arrays (order matches gradient list)."""
        out = []
        for layer in self.layers:
            out.extend([layer.w, layer.b])
        out.append(self.alpha_raw)
        return out


def init_paranet(widths, seed: int, alpha0: float = 6.0, k: float = 1.0,
                 dtype=np.float64) -> ParaNetParams:
    """Fresh parameters: per-matrix uniform +-sqrt(6/(fan_in+fan_out)),
    zero biases, alpha exactly alpha0; draws come from the seed's "init"
    stream so different seeds give independent networks."""
    widths = list(widths)
    if len(widths) < 2:
        raise ValueError("need input and output widths")
    gen = SeededRng(seed, "init").generator()
    layers = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        parts = [gen.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype)
                 for _ in range(4)]  # draw order: w_tt, w_tf, w_ft, w_ff
        zeros = np.zeros(fan_out, dtype=dtype)
        layers.append(ParaLayerParams.from_parts(*parts, zeros, zeros.copy()))
    alpha_raw = np.asarray(softplus_inverse(alpha0), dtype=np.float64)
    return ParaNetParams(layers=layers, alpha_raw=alpha_raw, k=k)


class _LayerCache(NamedTuple):
    a_in: np.ndarray   # (B, 2*in): [t_prev | f_prev]
    z_f: np.ndarray    # (B, out)
    t: np.ndarray      # (B, out)
    f: np.ndarray      # (B, out)


class ForwardCache:
    """Activations retained for backward; valid for the exact params object
    and until those params are modified."""

    def __init__(self, params: ParaNetParams, layers: list[_LayerCache],
                 batch: int):
        self.params = params
        self.layers = layers
        self.batch = batch


class ForwardResult(NamedTuple):
    t_hat: np.ndarray
    f_hat: np.ndarray
    cache: ForwardCache


def forward(params: ParaNetParams, tau: np.ndarray) -> ForwardResult:
    """Propagate normalized times through the network.

    The scalar input feeds both channels: t(0) = f(0) = tau.  Returns the
    output evidences (flattened when the output width is 1) plus the cache
    for `backward`.
    """
    tau = np.asarray(tau, dtype=params.dtype)
    if tau.ndim == 1:
        tau = tau[:, None]
    if tau.shape[1] != params.layers[0].in_dim:
        raise ValueError(
            f"input width {tau.shape[1]} != network input width "
            f"{params.layers[0].in_dim}"
        )
    alpha = params.alpha
    k = params.k
    a = np.concatenate([tau, tau], axis=1)
    caches = []
    for layer in params.layers:
        z = a @ layer.w.T + layer.b
        out = layer.out_dim
        z_t = z[:, :out]
        z_f = z[:, out:]
        arg = z_t - alpha * z_f
        if k != 1.0:
            arg *= k
            t = sigmoid(arg)
            f = sigmoid(k * z_f)
        else:
            t = sigmoid(arg)
            f = sigmoid(z_f)
        caches.append(_LayerCache(a_in=a, z_f=z_f, t=t, f=f))
        a = np.concatenate([t, f], axis=1)
    cache = ForwardCache(params, caches, batch=tau.shape[0])
    t_hat, f_hat = caches[-1].t, caches[-1].f
    if params.layers[-1].out_dim == 1:
        t_hat, f_hat = t_hat[:, 0], f_hat[:, 0]
    return ForwardResult(t_hat=t_hat, f_hat=f_hat, cache=cache)


class LayerGrads(NamedTuple):
    w: np.ndarray
    b: np.ndarray


class ParaNetGrads(NamedTuple):
    layers: list[LayerGrads]
    alpha_raw: np.ndarray  # 0-d float64

    def arrays(self) -> list[np.ndarray]:
        out = []
        for g in self.layers:
            out.extend([g.w, g.b])
        out.append(self.alpha_raw)
        return out


def backward(params: ParaNetParams, cache: ForwardCache,
             d_t_hat: np.ndarray, d_f_hat: np.ndarray) -> ParaNetGrads:
    """Exact gradients of a scalar objective given upstream d/d(t_hat),
    d/d(f_hat); includes d/d(alpha_raw) through the softplus."""
    if cache.params is not params:
        raise ValueError("cache does not belong to these parameters")
    if len(cache.layers) != len(params.layers):
        raise ValueError("cache is stale: layer count mismatch")
    alpha = params.alpha
    k = params.k
    d_t = np.asarray(d_t_hat, dtype=params.dtype)
    d_f = np.asarray(d_f_hat, dtype=params.dtype)
    if d_t.ndim == 1:
        d_t = d_t[:, None]
    if d_f.ndim == 1:
        d_f = d_f[:, None]
    if d_t.shape[0] != cache.batch:
        raise ValueError("upstream gradient batch size does not match cache")

    grads: list[LayerGrads | None] = [None] * len(params.layers)
    d_alpha = 0.0
    for idx in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[idx]
        lc = cache.layers[idx]
        dz_t = d_t * (lc.t * (1.0 - lc.t))
        dz_f = d_f * (lc.f * (1.0 - lc.f))
        if k != 1.0:
            dz_t *= k
            dz_f *= k
        d_alpha -= float(np.sum(dz_t * lc.z_f, dtype=np.float64))
        dz_f -= alpha * dz_t
        dz = np.concatenate([dz_t, dz_f], axis=1)
        grads[idx] = LayerGrads(w=dz.T @ lc.a_in, b=dz.sum(axis=0))
        if idx > 0:
            da = dz @ layer.w
            in_dim = layer.in_dim
            d_t = da[:, :in_dim]
            d_f = da[:, in_dim:]
    d_alpha_raw = d_alpha * float(sigmoid(float(params.alpha_raw)))
    return ParaNetGrads(layers=grads,
                        alpha_raw=np.asarray(d_alpha_raw, dtype=np.float64))


def count_parameters(params: ParaNetParams) -> int:
    """Total trainable scalars (weights + biases + alpha)."""
    return sum(a.size for a in params.trainable_arrays())


def per_channel_weight_count(params: ParaNetParams) -> int:
    """Weights feeding ONE evidence channel (two coupling matrices per
    layer plus that channel's bias)."""
    return sum(2 * l.out_dim * l.in_dim + l.out_dim for l in params.layers)


# ---------------------------------------------------------------------------
# checkpointing

def save_checkpoint(params: ParaNetParams, path) -> None:
    """Versioned binary checkpoint; round-trips bit-exactly."""
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "kind": "paranet",
        "widths": params.widths,
        "k": params.k,
        "dtype": np.dtype(params.dtype).name,
    }
    arrays = {"alpha_raw": params.alpha_raw,
              "meta_json": np.frombuffer(json.dumps(meta).encode("utf-8"),
                                         dtype=np.uint8)}
    for i, layer in enumerate(params.layers):
        arrays[f"w_{i}"] = layer.w
        arrays[f"b_{i}"] = layer.b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> ParaNetParams:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode("utf-8"))
        if meta.get("format_version") != CHECKPOINT_VERSION or \
                meta.get("kind") != "paranet":
            raise ValueError(
                f"unsupported checkpoint (version {meta.get('format_version')!r}, "
                f"kind {meta.get('kind')!r})"
            )
        n_layers = len(meta["widths"]) - 1
        layers = [ParaLayerParams(w=data[f"w_{i}"], b=data[f"b_{i}"])
                  for i in range(n_layers)]
        return ParaNetParams(layers=layers, alpha_raw=data["alpha_raw"],
                             k=float(meta["k"]))
