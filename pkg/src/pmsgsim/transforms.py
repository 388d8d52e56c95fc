"""Stationary abc <-> rotating dq0 transforms and grid-angle sources.

All rotating-frame quantities in the package use the amplitude-invariant
(peak-equals-d) Park convention: a balanced set of peak amplitude M whose
phase-a peak sits at angle theta maps to d = M, q = 0.  Powers therefore carry
an explicit 3/2 factor, e.g. p = 1.5 * (v_d*i_d + v_q*i_q).

The functions accept python floats or numpy arrays (broadcast elementwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi
_SHIFT = TWO_PI / 3.0


class ThreePhase(NamedTuple):
    a: float
    b: float
    c: float


class Dq0Frame(NamedTuple):
    d: float
    q: float
    zero: float = 0.0


def wrap_angle(theta):
    """Wrap an angle into [0, 2*pi)."""
    wrapped = np.mod(theta, TWO_PI)
    if np.ndim(wrapped) == 0:
        wrapped = float(wrapped)
        # mod can round up to exactly 2*pi for tiny negative inputs
        return 0.0 if wrapped >= TWO_PI else wrapped
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def abc_to_dq0(x: ThreePhase, theta) -> Dq0Frame:
    a, b, c = x
    ca, cb, cc = np.cos(theta), np.cos(theta - _SHIFT), np.cos(theta + _SHIFT)
    sa, sb, sc = np.sin(theta), np.sin(theta - _SHIFT), np.sin(theta + _SHIFT)
    d = (2.0 / 3.0) * (a * ca + b * cb + c * cc)
    q = -(2.0 / 3.0) * (a * sa + b * sb + c * sc)
    zero = (a + b + c) / 3.0
    return Dq0Frame(d, q, zero)


def dq0_to_abc(x: Dq0Frame, theta) -> ThreePhase:
    d, q, zero = x
    a = d * np.cos(theta) - q * np.sin(theta) + zero
    b = d * np.cos(theta - _SHIFT) - q * np.sin(theta - _SHIFT) + zero
    c = d * np.cos(theta + _SHIFT) - q * np.sin(theta + _SHIFT) + zero
    return ThreePhase(a, b, c)


@dataclass
class SrfPll:
    """Synchronous-reference-frame PLL.

    The q component of the measured voltage, normalised by its magnitude, is
    driven to zero by a PI loop filter whose output is the frequency
    correction.  ``theta`` then tracks the phase-a peak of the input set.
    ``update`` returns the estimate at the sampling instant and leaves
    ``theta`` advanced to the next one.
    """

    w_nom: float
    kp: float = 132.0
    ki: float = 8.9e3
    theta: float = 0.0
    w: float = 0.0
    integ: float = 0.0

    def __post_init__(self):
        if self.w == 0.0:
            self.w = self.w_nom

    def update(self, v_abc: ThreePhase, dt: float) -> float:
        theta = self.theta
        v = abc_to_dq0(v_abc, theta)
        mag = math.hypot(v.d, v.q)
        err = float(v.q) / mag if mag > 1e-9 else 0.0
        self.integ += self.ki * err * dt
        self.w = self.w_nom + self.kp * err + self.integ
        self.theta = wrap_angle(theta + self.w * dt)
        return theta


def grid_angle(t: float, mode: str = "ideal", pll: SrfPll | None = None, *,
               w_s: float = TWO_PI * 50.0, phase: float = 0.0,
               v_abc: ThreePhase | None = None, dt: float | None = None) -> float:
    """Angle of the grid-side rotating frame at time ``t``.

    ``"ideal"`` returns ``w_s*t + phase`` wrapped.  ``"pll"`` returns the
    estimate of ``pll`` at ``t`` from the measured ``v_abc`` and advances the
    PLL by ``dt``.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if mode == "ideal":
        return wrap_angle(w_s * t + phase)
    if mode == "pll":
        if pll is None or v_abc is None or dt is None:
            raise ValueError("pll mode needs pll, v_abc and dt")
        return pll.update(v_abc, dt)
    raise ValueError(f"unknown angle source {mode!r}")
