"""PCC network in the grid-synchronous dq frame.

Topology, converter side first::

    VSC --(r_f, l_f)--(r_tr, l_tr)-- PCC --(r_g, l_g)-- E (Thevenin source)
                                      |
                                   r_fault (three-phase shunt while active)

The converter path current (i_d, i_q) is a state.  The PCC voltage follows
algebraically from the node equation with the grid branch taken at its
steady-state impedance r_g + j*w_s*l_g.  Everything is referred to the
converter side of the transformer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


@dataclass(frozen=True)
class GridParams:
    v_nom: float          # line-to-neutral peak, V
    f_nom: float = 50.0
    r_g: float = 0.0
    l_g: float = 1e-4
    r_tr: float = 0.0
    l_tr: float = 1e-5
    r_f: float = 0.0
    l_f: float = 1e-5
    e_pu: float = 1.0     # Thevenin source magnitude

    def __post_init__(self):
        if self.v_nom <= 0:
            raise ValueError("v_nom must be > 0")
        if self.f_nom <= 0:
            raise ValueError("f_nom must be > 0")
        for name in ("r_g", "r_tr", "r_f"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("l_g", "l_tr", "l_f"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def w_s(self) -> float:
        return 2.0 * math.pi * self.f_nom

    @property
    def l_path(self) -> float:
        """Series inductance between converter terminals and PCC."""
        return self.l_f + self.l_tr

    @property
    def r_path(self) -> float:
        return self.r_f + self.r_tr

    @property
    def source(self) -> complex:
        return complex(self.e_pu * self.v_nom, 0.0)

    def z_grid(self, w_s: float | None = None) -> complex:
        w = self.w_s if w_s is None else w_s
        return complex(self.r_g, w * self.l_g)


@dataclass(frozen=True)
class FaultSpec:
    t_on: float = 0.5
    t_off: float = 1.2
    r_fault: float = 0.05
    location: str = "pcc"

    def __post_init__(self):
        if not 0.0 <= self.t_on < self.t_off:
            raise ValueError("fault window must satisfy 0 <= t_on < t_off")
        if self.r_fault < 0:
            raise ValueError("r_fault must be >= 0")
        if self.location != "pcc":
            raise ValueError(f"unsupported fault location {self.location!r}")


class NetworkState(NamedTuple):
    i_d: float = 0.0
    i_q: float = 0.0


class PccMeasurement(NamedTuple):
    v_d: float
    v_q: float
    p: float
    q: float
    v_pu: float


def fault_active(spec: FaultSpec | None, t: float) -> bool:
    if spec is None:
        return False
    return spec.t_on <= t < spec.t_off


def instantaneous_pq(v: tuple[float, float], i: tuple[float, float]) -> tuple[float, float]:
    v_d, v_q = v
    i_d, i_q = i
    return 1.5 * (v_d * i_d + v_q * i_q), 1.5 * (v_q * i_d - v_d * i_q)


def pcc_voltage(params: GridParams, i: complex, r_fault: float | None,
                w_s: float | None = None) -> complex:
    """Node voltage at the PCC for injected current ``i`` (converter -> PCC)."""
    z_g = params.z_grid(w_s)
    v_open = params.source + z_g * i
    if r_fault is None:
        return v_open
    return v_open * (r_fault / (z_g + r_fault))


def network_derivative(params: GridParams, state: NetworkState,
                       v_conv: tuple[float, float], r_fault: float | None,
                       w_s: float | None = None):
    """Converter-path RL dynamics and the PCC measurement at this state.

    ``r_fault`` is the shunt resistance of an active fault, ``None`` without.
    Returns ((di_d/dt, di_q/dt), PccMeasurement).
    """
    w = params.w_s if w_s is None else w_s
    i_d, i_q = state
    v = pcc_voltage(params, complex(i_d, i_q), r_fault, w)
    l_tot, r_tot = params.l_path, params.r_path
    di_d = (v_conv[0] - r_tot * i_d + w * l_tot * i_q - v.real) / l_tot
    di_q = (v_conv[1] - r_tot * i_q - w * l_tot * i_d - v.imag) / l_tot
    p, q = instantaneous_pq((v.real, v.imag), (i_d, i_q))
    return (di_d, di_q), PccMeasurement(v.real, v.imag, p, q, abs(v) / params.v_nom)

