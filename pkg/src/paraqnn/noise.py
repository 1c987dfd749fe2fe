"""Seeded stochastic corruption of clean trajectories.

Four processes: additive white Gaussian noise, random telegraph noise
(two-level fluctuators), 1/f pink noise via spectral shaping, and a
symmetric SPAM readout-confusion map.  Every sampler draws from its own
labeled RNG stream derived from (master seed, label), so adding or
re-parameterizing one component never perturbs another's samples.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def _label_digest(label: str) -> int:
    # Platform-stable 64-bit digest (python's hash() is salted per process).
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


@dataclass(frozen=True)
class SeededRng:
    """A reproducible labeled random stream: (seed, label) -> same draws."""

    seed: int
    stream_label: str = ""

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence([int(self.seed) & (2**64 - 1),
                                      _label_digest(self.stream_label)])
        return np.random.Generator(np.random.PCG64(seq))

    def derive(self, sub_label: str) -> "SeededRng":
        label = f"{self.stream_label}/{sub_label}" if self.stream_label else sub_label
        return SeededRng(seed=self.seed, stream_label=label)


@dataclass(frozen=True)
class NoiseStack:
    """Composite noise specification applied to one trajectory.

    Magnitudes are in population units.  telegraph_switch_prob is a
    per-sample flip probability (the sampling grid defines the clock).
    """

    gaussian_sigma: float = 0.0
    telegraph_amplitude: float = 0.0
    telegraph_switch_prob: float = 0.0
    pink_sigma: float = 0.0
    spam_epsilon: float = 0.0
    clip_output: bool = False

    def __post_init__(self):
        for name in ("gaussian_sigma", "telegraph_amplitude", "pink_sigma"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.telegraph_switch_prob <= 1.0:
            raise ValueError("telegraph_switch_prob must be in [0, 1]")
        if not 0.0 <= self.spam_epsilon < 0.5:
            raise ValueError("spam_epsilon must be in [0, 0.5)")


def gaussian_noise(rng: SeededRng, n: int, sigma: float) -> np.ndarray:
    """n i.i.d. N(0, sigma^2) samples from the given stream."""
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    return rng.generator().normal(0.0, sigma, size=n)


def telegraph_noise(rng: SeededRng, n: int, amplitude: float,
                    switch_prob: float) -> np.ndarray:
    """Two-state Markov chain over {+amplitude, -amplitude}.

    The initial sign is a fair coin; each subsequent sample flips the
    sign with probability switch_prob.
    """
    if amplitude < 0.0:
        raise ValueError("amplitude must be >= 0")
    if not 0.0 <= switch_prob <= 1.0:
        raise ValueError("switch_prob must be in [0, 1]")
    u = rng.generator().random(n)
    if n == 0:
        return np.zeros(0)
    signs = np.empty(n)
    signs[0] = 1.0 if u[0] < 0.5 else -1.0
    if n > 1:
        flips = np.where(u[1:] < switch_prob, -1.0, 1.0)
        signs[1:] = signs[0] * np.cumprod(flips)
    return amplitude * signs


def pink_noise(rng: SeededRng, n: int, sigma: float) -> np.ndarray:
    """1/f-shaped noise with sample std exactly sigma and zero mean.

    White Gaussian samples are shaped in the frequency domain (bin k
    amplitude scaled by 1/sqrt(f_k), DC removed) and rescaled so the
    population std equals sigma exactly.
    """
    if n < 2:
        raise ValueError(f"pink noise needs n >= 2 samples, got {n}")
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    white = rng.generator().standard_normal(n)
    if sigma == 0.0:
        return np.zeros(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    spec[0] = 0.0
    spec[1:] /= np.sqrt(freqs[1:])
    x = np.fft.irfft(spec, n)
    std = x.std()
    if std == 0.0:  # degenerate draw; cannot carry any spectral shape
        return np.zeros(n)
    return x * (sigma / std)


def apply_spam(p, epsilon: float):
    """Symmetric readout confusion: y = eps + (1 - 2*eps) * p."""
    if not 0.0 <= epsilon < 0.5:
        raise ValueError("epsilon must be in [0, 0.5)")
    return epsilon + (1.0 - 2.0 * epsilon) * p


def corrupt(clean: np.ndarray, stack: NoiseStack, rng: SeededRng) -> np.ndarray:
    """Noisy observation of a clean trajectory.

    Composition order: SPAM first (readout-channel distortion of the
    signal), then additive Gaussian + telegraph + pink components, each
    from its own labeled sub-stream of `rng`.  Optionally clips to [0,1].
    """
    clean = np.asarray(clean, dtype=np.float64)
    n = clean.shape[0]
    y = apply_spam(clean, stack.spam_epsilon)
    if stack.gaussian_sigma > 0.0:
        y = y + gaussian_noise(rng.derive("gaussian"), n, stack.gaussian_sigma)
    if stack.telegraph_amplitude > 0.0:
        y = y + telegraph_noise(rng.derive("telegraph"), n,
                                stack.telegraph_amplitude,
                                stack.telegraph_switch_prob)
    if stack.pink_sigma > 0.0:
        y = y + pink_noise(rng.derive("pink"), n, stack.pink_sigma)
    if stack.clip_output:
        y = np.clip(y, 0.0, 1.0)
    return y
