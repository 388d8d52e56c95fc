import math

import numpy as np
import pytest

from pmsgsim import turbine
from pmsgsim.turbine import (BETZ_LIMIT, DEFAULT_CP_COEFFS, DriveTrainState, MechParams,
                             TurbineParams, aero_torque, drive_train_derivative,
                             power_coefficient, tip_speed_ratio, wind_power)


def test_tip_speed_ratio_examples():
    assert tip_speed_ratio(1.0, 8.0, 1.0) == 8.0
    assert tip_speed_ratio(35.0, 2.2, 12.0) == pytest.approx(6.41667, abs=1e-5)
    assert tip_speed_ratio(35.0, 0.0, 12.0) == 0.0
    with pytest.raises(ValueError):
        tip_speed_ratio(35.0, 2.0, 0.0)


def test_cp_at_documented_optimum():
    assert power_coefficient(8.1, 0.0) == pytest.approx(0.48, abs=1e-3)


def test_cp_optimum_matches_sweep():
    lam = np.arange(0.001, 15.0 + 1e-12, 0.001)
    cp = np.array([power_coefficient(x, 0.0) for x in lam])
    params = TurbineParams()
    assert params.lambda_opt == pytest.approx(lam[np.argmax(cp)], abs=1e-3)
    assert params.cp_max == pytest.approx(cp.max(), abs=1e-6)
    assert cp.max() < BETZ_LIMIT


def test_cp_clamps_and_pitch():
    assert power_coefficient(0.0, 0.0) == 0.0
    assert power_coefficient(8.1, 10.0) < power_coefficient(8.1, 0.0)
    assert min(power_coefficient(x, 20.0) for x in np.linspace(0, 20, 201)) >= 0.0


def test_wind_power_examples(monkeypatch):
    params = TurbineParams(radius=1.0)
    assert wind_power(params, 0.0, 10.0) == 0.0
    monkeypatch.setattr(turbine, "power_coefficient", lambda lam, beta, coeffs: 0.4)
    assert wind_power(params, 10.0, 3.0) == pytest.approx(0.5 * 1.225 * math.pi * 0.4 * 1000)
    assert wind_power(params, 10.0, 3.0) == pytest.approx(769.69, abs=0.01)
    assert TurbineParams().rho == 1.225


def test_aero_torque_is_power_over_speed():
    params = TurbineParams()
    assert aero_torque(params, 0.0, 2.0) == 0.0
    p = wind_power(params, 11.0, 2.0)
    assert aero_torque(params, 11.0, 2.0) == pytest.approx(p / 2.0)


def test_aero_torque_example(monkeypatch):
    monkeypatch.setattr(turbine, "wind_power", lambda params, v, w: 1000.0)
    assert aero_torque(TurbineParams(), 9.0, 2.0) == pytest.approx(500.0)


def test_aero_torque_finite_at_standstill():
    params = TurbineParams()
    v = 10.0
    # Cp/lambda -> c6 as lambda -> 0 for this surface
    limit = 0.5 * params.rho * params.area * params.radius * v * v * DEFAULT_CP_COEFFS[5]
    for w in (0.0, 1e-9, 1e-7):
        t = aero_torque(params, v, w)
        assert math.isfinite(t)
        assert t == pytest.approx(limit, rel=1e-3)


def test_drive_train_examples():
    mech = MechParams(J=100.0, b_fric=0.0)
    assert drive_train_derivative(DriveTrainState(3.0), 400.0, 400.0, mech)[0] == 0.0
    dw, dth = drive_train_derivative(DriveTrainState(7.0), 500.0, 300.0, mech)
    assert dw == pytest.approx(2.0)
    assert dth == 7.0
    assert drive_train_derivative(DriveTrainState(1.0), 100.0, 300.0, mech)[0] < 0


def test_friction_brakes():
    mech = MechParams(J=10.0, b_fric=2.0)
    assert drive_train_derivative(DriveTrainState(5.0), 0.0, 0.0, mech)[0] == pytest.approx(-1.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        MechParams(J=0.0)
    with pytest.raises(ValueError):
        TurbineParams(radius=-1.0)
    with pytest.raises(ValueError):
        TurbineParams(cp_coeffs=(1.0, 2.0))
