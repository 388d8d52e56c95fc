"""Aerodynamic rotor and single-mass direct-drive train."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import minimize_scalar

BETZ_LIMIT = 16.0 / 27.0
DEFAULT_CP_COEFFS = (0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068)

# below this speed P/w is replaced by the torque-coefficient form
_W_EPS = 1e-6
_LAMBDA_EPS = 1e-3


def tip_speed_ratio(radius: float, w_m: float, v_wind: float) -> float:
    if v_wind <= 0:
        raise ValueError(f"tip speed ratio undefined for v_wind={v_wind}")
    return radius * w_m / v_wind


def power_coefficient(lam: float, beta: float = 0.0,
                      coeffs=DEFAULT_CP_COEFFS) -> float:
    """Analytic Cp(lambda, beta) surface, clamped at zero.

    Cp = c1*(c2/L - c3*beta - c4)*exp(-c5/L) + c6*lambda with
    1/L = 1/(lambda + 0.08*beta) - 0.035/(beta**3 + 1).
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    c1, c2, c3, c4, c5, c6 = coeffs
    denom = lam + 0.08 * beta
    if denom <= 0.0:
        return 0.0
    inv = 1.0 / denom - 0.035 / (beta ** 3 + 1.0)
    expo = -c5 * inv
    # exp underflows long before the polynomial factor matters
    aero = 0.0 if expo < -700.0 else c1 * (c2 * inv - c3 * beta - c4) * math.exp(expo)
    return max(aero + c6 * lam, 0.0)


@dataclass(frozen=True)
class TurbineParams:
    rho: float = 1.225
    radius: float = 35.0
    beta: float = 0.0
    cp_coeffs: tuple = DEFAULT_CP_COEFFS
    lambda_opt: float = field(init=False)
    cp_max: float = field(init=False)

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if len(self.cp_coeffs) != 6:
            raise ValueError("cp_coeffs needs six coefficients")
        object.__setattr__(self, "cp_coeffs", tuple(float(c) for c in self.cp_coeffs))
        res = minimize_scalar(lambda lam: -power_coefficient(lam, self.beta, self.cp_coeffs),
                              bounds=(0.1, 20.0), method="bounded",
                              options={"xatol": 1e-7})
        cp_max = -float(res.fun)
        if not 0.0 < cp_max < BETZ_LIMIT:
            raise ValueError(f"Cp surface peak {cp_max:.4f} outside (0, Betz limit)")
        object.__setattr__(self, "lambda_opt", float(res.x))
        object.__setattr__(self, "cp_max", cp_max)

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2


@dataclass(frozen=True)
class MechParams:
    J: float
    b_fric: float = 0.0

    def __post_init__(self):
        if self.J <= 0:
            raise ValueError("J must be > 0")
        if self.b_fric < 0:
            raise ValueError("b_fric must be >= 0")


@dataclass
class DriveTrainState:
    w_m: float
    theta_m: float = 0.0


def wind_power(params: TurbineParams, v_wind: float, w_m: float) -> float:
    if v_wind <= 0.0:
        return 0.0
    lam = tip_speed_ratio(params.radius, w_m, v_wind)
    cp = power_coefficient(max(lam, 0.0), params.beta, params.cp_coeffs)
    return 0.5 * params.rho * params.area * cp * v_wind ** 3


def aero_torque(params: TurbineParams, v_wind: float, w_m: float) -> float:
    """Rotor torque P_w / w_m, with a finite limit as the rotor stalls."""
    if v_wind <= 0.0:
        return 0.0
    if w_m > _W_EPS:
        return wind_power(params, v_wind, w_m) / w_m
    # P/w = 0.5*rho*pi*R^3*v^2 * Cp(lambda)/lambda
    lam = max(params.radius * w_m / v_wind, _LAMBDA_EPS)
    cp = power_coefficient(lam, params.beta, params.cp_coeffs)
    return 0.5 * params.rho * params.area * params.radius * v_wind ** 2 * cp / lam


def drive_train_derivative(state: DriveTrainState, t_aero: float, t_e: float,
                           mech: MechParams) -> tuple[float, float]:
    """(dw_m/dt, dtheta_m/dt) for J*dw/dt = T_aero - T_e - B*w."""
    dw = (t_aero - t_e - mech.b_fric * state.w_m) / mech.J
    return dw, state.w_m
