"""PMSG electrical model in the rotor-flux-aligned dq frame.

Generator convention throughout: positive stator current leaves the machine,
so in normal generation i_sq > 0 and the terminal power
1.5*(v_sd*i_sd + v_sq*i_sq) is positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PmsgParams:
    r_s: float
    l_ls: float
    l_dm: float
    l_qm: float
    psi_f: float
    pole_pairs: int
    l_d: float | None = None
    l_q: float | None = None

    def __post_init__(self):
        l_d = self.l_ls + self.l_dm
        l_q = self.l_ls + self.l_qm
        if self.l_d is None:
            object.__setattr__(self, "l_d", l_d)
        elif not math.isclose(self.l_d, l_d, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError(f"l_d={self.l_d} != l_ls + l_dm = {l_d}")
        if self.l_q is None:
            object.__setattr__(self, "l_q", l_q)
        elif not math.isclose(self.l_q, l_q, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError(f"l_q={self.l_q} != l_ls + l_qm = {l_q}")
        if self.r_s < 0:
            raise ValueError("r_s must be >= 0")
        if self.l_d <= 0 or self.l_q <= 0:
            raise ValueError("l_d and l_q must be > 0")
        if self.psi_f <= 0:
            raise ValueError("psi_f must be > 0")
        if int(self.pole_pairs) != self.pole_pairs or self.pole_pairs < 1:
            raise ValueError("pole_pairs must be an integer >= 1")


@dataclass
class PmsgState:
    i_sd: float = 0.0
    i_sq: float = 0.0
    theta_e: float = 0.0
    w_e: float = 0.0


def flux_linkages(params: PmsgParams, i_sd: float, i_sq: float) -> tuple[float, float]:
    # stator current opposes the magnet flux on d under generator convention
    return params.psi_f - params.l_d * i_sd, -params.l_q * i_sq


def stator_derivatives(params: PmsgParams, i_sd: float, i_sq: float, w_e: float,
                       v_sd: float, v_sq: float) -> tuple[float, float]:
    """(di_sd/dt, di_sq/dt) for terminal voltages (v_sd, v_sq)."""
    di_sd = (-v_sd - params.r_s * i_sd + w_e * params.l_q * i_sq) / params.l_d
    di_sq = (-v_sq - params.r_s * i_sq - w_e * params.l_d * i_sd
             + w_e * params.psi_f) / params.l_q
    return di_sd, di_sq


def electromagnetic_torque(params: PmsgParams, i_sd: float, i_sq: float) -> float:
    """Braking torque 1.5*p*(psi_sd*i_sq - psi_sq*i_sd)."""
    return 1.5 * params.pole_pairs * (
        params.psi_f * i_sq + (params.l_q - params.l_d) * i_sd * i_sq)


def steady_state_voltages(params: PmsgParams, i_sd: float, i_sq: float,
                          w_e: float) -> tuple[float, float]:
    v_sd = -params.r_s * i_sd + w_e * params.l_q * i_sq
    v_sq = -params.r_s * i_sq - w_e * params.l_d * i_sd + w_e * params.psi_f
    return v_sd, v_sq


def magnetic_energy(params: PmsgParams, i_sd: float, i_sq: float) -> float:
    """Current-dependent stored energy 0.75*(L_d*i_sd^2 + L_q*i_sq^2)."""
    return 0.75 * (params.l_d * i_sd ** 2 + params.l_q * i_sq ** 2)
