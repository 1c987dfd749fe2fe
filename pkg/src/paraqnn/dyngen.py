"""Driven two-level open-system dynamics.

Integrates the Lindblad master equation for a single qubit under a
piecewise-constant drive schedule and returns excited-state populations
P(|1>)(t).  The generator is

    H = (omega/2) * sigma_x
    relaxation  D[sigma_-] at rate 1/T1
    dephasing   (Gamma_phi/2) * D[sigma_z],  Gamma_phi = 1/T2 - 1/(2*T1)

which gives the equations of motion (state = p0, p1, re01, im01):

    dp1/dt  =  omega * im01 - p1 / T1
    dp0/dt  = -dp1/dt
    dre/dt  = -re01 / T2
    dim/dt  =  (omega/2) * (p0 - p1) - im01 / T2

Integration is fixed-step RK4; the stepper restarts exactly at every
segment boundary and lands exactly on every requested time, so no step
ever straddles a drive switch and no interpolation is performed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DT_INTERNAL_DEFAULT = 1e-3  # microseconds

TRACE_TOL = 1e-9
POPULATION_TOL = 1e-9
PURITY_TOL = 1e-7


@dataclass(frozen=True)
class QubitPhysics:
    """Drive and coherence parameters for one schedule segment.

    omega_angular : drive angular frequency, rad/us (>= 0)
    t1            : relaxation time, us (> 0, math.inf allowed)
    t2            : total dephasing time, us (> 0, math.inf allowed)

    T2 <= 2*T1 is enforced so the pure-dephasing rate 1/T2 - 1/(2*T1)
    is never negative.
    """

    omega_angular: float
    t1: float
    t2: float

    def __post_init__(self):
        if not (self.omega_angular >= 0.0):
            raise ValueError(f"omega_angular must be >= 0, got {self.omega_angular}")
        if not (self.t1 > 0.0):
            raise ValueError(f"t1 must be > 0, got {self.t1}")
        if not (self.t2 > 0.0):
            raise ValueError(f"t2 must be > 0, got {self.t2}")
        if self.t2 > 2.0 * self.t1:
            raise ValueError(
                f"t2 must satisfy t2 <= 2*t1 (got t2={self.t2}, t1={self.t1}); "
                "the pure-dephasing rate would be negative"
            )

    @property
    def gamma1(self) -> float:
        """Relaxation rate 1/T1 (0 for infinite T1)."""
        return 0.0 if math.isinf(self.t1) else 1.0 / self.t1

    @property
    def gamma2(self) -> float:
        """Total coherence decay rate 1/T2 (0 for infinite T2)."""
        return 0.0 if math.isinf(self.t2) else 1.0 / self.t2

    @property
    def gamma_phi(self) -> float:
        """Pure-dephasing rate 1/T2 - 1/(2*T1), >= 0 by construction."""
        return self.gamma2 - 0.5 * self.gamma1


@dataclass(frozen=True)
class DriveSchedule:
    """Contiguous, non-overlapping drive segments covering [0, total_span]."""

    segments: tuple[tuple[float, float, QubitPhysics], ...]
    total_span: float

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if segs[0][0] != 0.0:
            raise ValueError("first segment must start at t=0")
        for (a, b, _) in segs:
            if not b > a:
                raise ValueError(f"segment boundaries must increase, got [{a}, {b})")
        for (_, b_prev, _), (a_next, _, _) in zip(segs, segs[1:]):
            if b_prev != a_next:
                raise ValueError(
                    f"segments must be contiguous, got gap/overlap at {b_prev} vs {a_next}"
                )
        if segs[-1][1] != self.total_span:
            raise ValueError("segments must cover [0, total_span] exactly")

    def physics_at(self, t: float) -> QubitPhysics:
        for (a, b, phys) in self.segments:
            if a <= t < b:
                return phys
        if t == self.total_span:
            return self.segments[-1][2]
        raise ValueError(f"time {t} outside schedule span [0, {self.total_span}]")


@dataclass(frozen=True)
class DensityMatrix2:
    """Two-level density matrix as (p0, p1, Re rho01, Im rho01)."""

    p0: float
    p1: float
    re01: float = 0.0
    im01: float = 0.0

    def validate(self) -> "DensityMatrix2":
        if abs(self.p0 + self.p1 - 1.0) > TRACE_TOL:
            raise ValueError(f"trace violated: p0+p1 = {self.p0 + self.p1!r}")
        for name, p in (("p0", self.p0), ("p1", self.p1)):
            if not (-POPULATION_TOL <= p <= 1.0 + POPULATION_TOL):
                raise ValueError(f"population {name}={p!r} outside [0,1] tolerance")
        purity = self.p0 * self.p0 + self.p1 * self.p1 + 2.0 * (
            self.re01 * self.re01 + self.im01 * self.im01
        )
        if purity > 1.0 + PURITY_TOL:
            raise ValueError(f"purity {purity!r} exceeds 1")
        return self


GROUND = DensityMatrix2(p0=1.0, p1=0.0)
EXCITED = DensityMatrix2(p0=0.0, p1=1.0)


def lindblad_rhs(rho: DensityMatrix2, phys: QubitPhysics) -> DensityMatrix2:
    """Time derivative d(rho)/dt under the driven-qubit Lindblad generator."""
    d = _rhs(rho.p0, rho.p1, rho.re01, rho.im01,
             phys.omega_angular, phys.gamma1, phys.gamma2)
    return DensityMatrix2(*d)


def _rhs(p0, p1, re, im, omega, g1, g2):
    dp1 = omega * im - g1 * p1
    return (-dp1, dp1, -g2 * re, omega * 0.5 * (p0 - p1) - g2 * im)


def _rk4_step(state, h, omega, g1, g2):
    p0, p1, re, im = state
    k1 = _rhs(p0, p1, re, im, omega, g1, g2)
    k2 = _rhs(p0 + 0.5 * h * k1[0], p1 + 0.5 * h * k1[1],
              re + 0.5 * h * k1[2], im + 0.5 * h * k1[3], omega, g1, g2)
    k3 = _rhs(p0 + 0.5 * h * k2[0], p1 + 0.5 * h * k2[1],
              re + 0.5 * h * k2[2], im + 0.5 * h * k2[3], omega, g1, g2)
    k4 = _rhs(p0 + h * k3[0], p1 + h * k3[1],
              re + h * k3[2], im + h * k3[3], omega, g1, g2)
    s = h / 6.0
    return (p0 + s * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
            p1 + s * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
            re + s * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2]),
            im + s * (k1[3] + 2.0 * (k2[3] + k3[3]) + k4[3]))


def _advance(state, t_from, t_to, phys, dt):
    """March `state` from t_from to t_to with full dt steps plus one exact
    partial step; every step is trace/positivity-checked."""
    omega, g1, g2 = phys.omega_angular, phys.gamma1, phys.gamma2
    span = t_to - t_from
    n_full = int(span / dt)
    # guard against span being an exact multiple up to fp rounding
    if (n_full + 1) * dt <= span * (1.0 + 1e-12):
        n_full += 1
    for _ in range(n_full):
        state = _rk4_step(state, dt, omega, g1, g2)
        _check_step(state)
    rem = span - n_full * dt
    if rem > 1e-12 * max(dt, 1.0):
        state = _rk4_step(state, rem, omega, g1, g2)
        _check_step(state)
    return state


def _check_step(state):
    p0, p1 = state[0], state[1]
    if abs(p0 + p1 - 1.0) > TRACE_TOL:
        raise RuntimeError(f"integrator lost trace: p0+p1 = {p0 + p1!r}")
    if not (-1e-6 <= p1 <= 1.0 + 1e-6) or not (-1e-6 <= p0 <= 1.0 + 1e-6):
        raise RuntimeError(f"integrator lost positivity: p0={p0!r} p1={p1!r}")


def integrate_states(
    schedule: DriveSchedule,
    rho0: DensityMatrix2,
    times,
    dt_internal: float = DT_INTERNAL_DEFAULT,
) -> list[DensityMatrix2]:
    """Density matrices at each requested time (sorted, within the span)."""
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("requested times must be sorted ascending")
    if times and (times[0] < 0.0 or times[-1] > schedule.total_span):
        raise ValueError(
            f"requested times must lie in [0, {schedule.total_span}], "
            f"got [{times[0]}, {times[-1]}]"
        )
    rho0.validate()
    if dt_internal <= 0.0:
        raise ValueError("dt_internal must be positive")

    out: list[DensityMatrix2] = []
    state = (rho0.p0, rho0.p1, rho0.re01, rho0.im01)
    t_cur = 0.0
    idx = 0
    n = len(times)
    while idx < n and times[idx] == t_cur:
        out.append(DensityMatrix2(*state))
        idx += 1
    for (seg_a, seg_b, phys) in schedule.segments:
        if idx >= n:
            break
        # requested times inside this segment (boundary times emit at the
        # end of the earlier segment, matching "integrate to that time")
        while idx < n and times[idx] <= seg_b:
            state = _advance(state, t_cur, times[idx], phys, dt_internal)
            t_cur = times[idx]
            out.append(DensityMatrix2(*state))
            idx += 1
        if t_cur < seg_b:
            state = _advance(state, t_cur, seg_b, phys, dt_internal)
            t_cur = seg_b
    return out


def integrate(
    schedule: DriveSchedule,
    rho0: DensityMatrix2,
    times,
    dt_internal: float = DT_INTERNAL_DEFAULT,
) -> np.ndarray:
    """Excited-state population P(|1>) at each requested time."""
    states = integrate_states(schedule, rho0, times, dt_internal)
    return np.array([s.p1 for s in states], dtype=np.float64)


# Benchmark regime presets.  The Rabi drive is specified cyclically
# (1.25 MHz -> omega = 2*pi*1.25 rad/us); the Lindblad drive is angular.
RABI_OMEGA = 2.0 * math.pi * 1.25
LINDBLAD_OMEGA = 2.0
MIXED_OMEGA_STRONG = 2.5
MIXED_OMEGA_WEAK = 0.6

REGIMES = ("rabi", "lindblad", "mixed")


def make_regime_schedule(
    regime: str,
    omega_strong: float = MIXED_OMEGA_STRONG,
    omega_weak: float = MIXED_OMEGA_WEAK,
) -> DriveSchedule:
    """Drive schedule for one of the named regimes (rabi, lindblad, mixed)."""
    if regime == "rabi":
        phys = QubitPhysics(omega_angular=RABI_OMEGA, t1=12.0, t2=15.0)
        return DriveSchedule(segments=((0.0, 8.0, phys),), total_span=8.0)
    if regime == "lindblad":
        phys = QubitPhysics(omega_angular=LINDBLAD_OMEGA, t1=10.0, t2=8.0)
        return DriveSchedule(segments=((0.0, 5.0, phys),), total_span=5.0)
    if regime == "mixed":
        t1, t2 = 6.0, 4.0
        return DriveSchedule(
            segments=(
                (0.0, 4.0, QubitPhysics(omega_angular=omega_strong, t1=t1, t2=t2)),
                (4.0, 7.0, QubitPhysics(omega_angular=0.0, t1=t1, t2=t2)),
                (7.0, 10.0, QubitPhysics(omega_angular=omega_weak, t1=t1, t2=t2)),
            ),
            total_span=10.0,
        )
    raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
