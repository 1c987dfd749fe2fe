"""Equation-free recovery of noisy qubit dynamics.

Dual-evidence (truth/falsity) network with a learnable contradiction
coefficient, trained against synthetic open-quantum-system trajectories
and benchmarked against physics-informed and plain-MLP baselines.
"""

__version__ = "0.1.0"
