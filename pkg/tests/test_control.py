import math

import pytest

from pmsgsim.control import (DroopParams, GscLoops, GscRefs, MscLoops, MscRefs, PiController,
                             current_loop_bandwidth_hz, current_loop_gains, dc_link_bandwidth_hz,
                             dc_link_gains, gsc_control_step, gsc_current_step,
                             msc_control_step, msc_current_step, pi_step, pll_gains,
                             q_ref_from_droop, reactive_feedforward, reactive_loop_bandwidth_hz,
                             reactive_loop_gains, speed_loop_bandwidth_hz, speed_loop_gains)
from pmsgsim.pmsg import PmsgParams, stator_derivatives, steady_state_voltages
from pmsgsim.sim import rk4_step

BIG = 1e9


def pi(kp=1.0, ki=0.0, lo=-BIG, hi=BIG, **kw):
    return PiController(kp, ki, lo, hi, **kw)


def machine(l_d=0.01, l_q=0.01, r_s=0.0, psi_f=0.2):
    return PmsgParams(r_s=r_s, l_ls=0.0, l_dm=l_d, l_qm=l_q, psi_f=psi_f, pole_pairs=4)


# -- PI ----------------------------------------------------------------------

def test_pi_basic_examples():
    assert pi_step(pi(1.0, 1.0), 0.0, 0.1) == 0.0
    assert pi_step(pi(1.0, 0.0), 2.0, 0.1) == 2.0


def test_pi_conditional_integration_holds_at_limit():
    c = PiController(0.0, 10.0, -0.5, 0.5)
    outs = [pi_step(c, 1.0, 0.1) for _ in range(4)]
    assert outs == [0.5] * 4
    assert c.integ == pytest.approx(0.5)
    # recovery starts on the first reversed sample
    assert pi_step(c, -1.0, 0.01) == pytest.approx(0.4)


def test_pi_without_anti_windup_winds_up():
    c = PiController(0.0, 10.0, -0.5, 0.5, aw_mode="none")
    for _ in range(4):
        assert pi_step(c, 1.0, 0.1) == 0.5
    assert c.integ == pytest.approx(4.0)
    assert pi_step(c, -1.0, 0.01) == 0.5


def test_pi_validation():
    with pytest.raises(ValueError):
        PiController(1.0, 1.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        pi_step(pi(), 1.0, 0.0)
    with pytest.raises(ValueError):
        PiController(1.0, 1.0, -1.0, 1.0, aw_mode="clamp-ish")


# -- machine side ------------------------------------------------------------

def msc_loops(feedforward=True):
    return MscLoops(speed=pi(2.0, 0.0), i_d=pi(3.0, 0.0), i_q=pi(5.0, 0.0),
                    feedforward=feedforward)


def test_msc_zero_speed_is_pure_pi():
    p = machine()
    v = msc_current_step(1.0, 2.0, 0.5, 1.0, 0.0, p, msc_loops(), 1e-4)
    assert v == (pytest.approx(3.0 * (0.5 - 1.0)), pytest.approx(5.0 * (1.0 - 2.0)))


def test_msc_d_feedforward_cancels_cross_coupling():
    p = machine(l_d=0.01, l_q=0.01)
    # zero error, w_e = 100, L_q = 0.01, i_sq = 5
    v_sd, _ = msc_current_step(0.0, 5.0, 0.0, 5.0, 100.0, p, msc_loops(), 1e-4)
    assert v_sd == pytest.approx(5.0)
    # the plant d row then sees no i_sq-dependent term
    di_d, _ = stator_derivatives(p, 0.0, 5.0, 100.0, v_sd, 0.0)
    assert di_d == pytest.approx(0.0)


def test_msc_zero_error_is_steady_state_voltage():
    p = machine(l_d=0.01, l_q=0.02, r_s=0.0)
    v = msc_current_step(-3.0, 7.0, -3.0, 7.0, 80.0, p, msc_loops(), 1e-4)
    assert v == pytest.approx(steady_state_voltages(p, -3.0, 7.0, 80.0))


def test_msc_speed_loop_sign():
    # rotor above its reference -> positive i_sq_ref (braking torque), so the
    # q current loop, starting from i_sq = 0, drives v_sq down
    v = msc_control_step(MscRefs(w_ref=2.0), 2.5, 0.0, 0.0, 0.0, machine(), msc_loops(), 1e-4)
    assert v[1] == pytest.approx(5.0 * (0.0 - 2.0 * 0.5))


def closed_loop_msc(feedforward, i_sd0, i_sd_ref, steps=2000):
    p = PmsgParams(r_s=2.5e-3, l_ls=1e-4, l_dm=4e-4, l_qm=4e-4, psi_f=3.3, pole_pairs=60)
    w_e = 60 * 2.2
    kp, ki = current_loop_gains(p.l_d, p.r_s, 500.0)
    loops = MscLoops(pi(), pi(kp, ki), pi(kp, ki), feedforward=feedforward)
    i_sq0 = 1500.0
    v0 = steady_state_voltages(p, i_sd0, i_sq0, w_e)
    loops.i_d.integ = v0[0] - (w_e * p.l_q * i_sq0 if feedforward else 0.0)
    loops.i_q.integ = v0[1] - ((-w_e * p.l_d * i_sd0 + w_e * p.psi_f) if feedforward else 0.0)
    x = (i_sd0, i_sq0)
    peak = 0.0
    for _ in range(steps):
        v = msc_current_step(i_sd_ref, i_sq0, x[0], x[1], w_e, p, loops, 1e-4)
        for _ in range(5):
            x = rk4_step(lambda t, s: stator_derivatives(p, s[0], s[1], w_e, *v), x, 0.0, 2e-5)
        peak = max(peak, abs(x[1] - i_sq0))
    return x, peak


def test_msc_i_sd_tracks_zero():
    (i_sd, _), _ = closed_loop_msc(True, i_sd0=-400.0, i_sd_ref=0.0)
    assert abs(i_sd) < 0.02 * 2900.0


def test_msc_decoupling_reduces_q_disturbance():
    _, peak_ff = closed_loop_msc(True, 0.0, -500.0)
    _, peak_raw = closed_loop_msc(False, 0.0, -500.0)
    assert peak_raw >= 5.0 * peak_ff


# -- grid side ---------------------------------------------------------------

def gsc_loops(**kw):
    return GscLoops(v_dc=pi(), q=pi(), i_d=pi(2.0, 0.0), i_q=pi(3.0, 0.0), **kw)


def test_gsc_without_couplings_is_pure_pi():
    v = gsc_current_step(1.0, 2.0, 0.0, 0.0, 0.0, 314.16, 0.0, gsc_loops(), 1e-4)
    # grid-side current loops act on i_ref - i
    assert v == (pytest.approx(2.0), pytest.approx(6.0))


def test_gsc_d_row_example():
    v_d, v_q = gsc_current_step(0.0, 10.0, 0.0, 10.0, 400.0, 314.16, 0.005, gsc_loops(), 1e-4)
    assert v_d == pytest.approx(400.0 - 15.708)
    assert v_d == pytest.approx(384.29, abs=5e-3)
    assert v_q == pytest.approx(0.0)


def test_gsc_zero_error_is_feedforward():
    w, l = 314.16, 0.005
    v_d, v_q = gsc_current_step(20.0, -8.0, 20.0, -8.0, 390.0, w, l, gsc_loops(), 1e-4)
    assert v_d == pytest.approx(390.0 - w * l * -8.0)
    assert v_q == pytest.approx(w * l * 20.0)


def test_gsc_outer_loop_signs():
    # link above reference -> export more (positive i_d); too little Q -> negative i_q
    loops = gsc_loops()
    gsc_control_step(GscRefs(1200.0, 1e5), 1210.0, 0.0, 0.0, 500.0, 0.0, 314.16, 0.0, loops, 1e-4)
    i_d_ref, i_q_ref = loops.refs
    assert i_d_ref > 0
    assert i_q_ref < 0


def test_gsc_current_limit_d_priority():
    loops = GscLoops(v_dc=pi(100.0, 0.0), q=pi(100.0, 0.0), i_d=pi(), i_q=pi(), i_max=1000.0)
    gsc_control_step(GscRefs(1200.0, 0.0), 1208.0, 0.0, 0.0, 500.0, 1e3, 314.16, 0.0, loops, 1e-4)
    i_d_ref, i_q_ref = loops.refs
    assert i_d_ref == pytest.approx(800.0)
    assert math.hypot(i_d_ref, i_q_ref) == pytest.approx(1000.0)


def test_reactive_feedforward_delivers_q():
    v_d, q_ref = 560.0, 3e5
    i_q = reactive_feedforward(q_ref, v_d)
    assert 1.5 * (0.0 * 0.0 - v_d * i_q) == pytest.approx(q_ref)
    assert reactive_feedforward(q_ref, 0.0) == 0.0
    loops = gsc_loops(q_feedforward=True)
    gsc_control_step(GscRefs(1200.0, q_ref), 1200.0, 0.0, 0.0, v_d, q_ref, 314.16, 0.0,
                     loops, 1e-4)
    assert loops.refs[1] == pytest.approx(i_q)


# -- droop -------------------------------------------------------------------

def test_droop_examples():
    d = DroopParams(v_pcc_ref=1.0, k_q=2e6, q_min=-5e5, q_max=5e5)
    assert q_ref_from_droop(d, 1.0) == 0.0
    assert q_ref_from_droop(d, 0.7) == 5e5
    assert q_ref_from_droop(d, 0.9) == pytest.approx(2e5)
    assert q_ref_from_droop(d, 1.1) < 0
    assert q_ref_from_droop(d, 0.95) <= q_ref_from_droop(d, 0.9)
    with pytest.raises(ValueError):
        q_ref_from_droop(d, -0.1)
    with pytest.raises(ValueError):
        DroopParams(q_min=1.0, q_max=2.0)


# -- gain design -------------------------------------------------------------

def test_gain_design_round_trips():
    kp, ki = current_loop_gains(5e-4, 2.5e-3, 500.0)
    assert current_loop_bandwidth_hz(kp, 5e-4) == pytest.approx(500.0)
    assert ki / kp == pytest.approx(2.5e-3 / 5e-4)
    kp, ki = speed_loop_gains(1.6e6, 1.5 * 60 * 3.3, 20.0)
    assert speed_loop_bandwidth_hz(ki, 1.6e6, 1.5 * 60 * 3.3) == pytest.approx(20.0)
    kp, ki = dc_link_gains(0.03, 1200.0, 563.38, 30.0)
    assert dc_link_bandwidth_hz(ki, 0.03, 1200.0, 563.38) == pytest.approx(30.0)
    kp, ki = reactive_loop_gains(563.38, 100.0)
    assert reactive_loop_bandwidth_hz(kp, ki, 563.38) == pytest.approx(100.0)
    kp, ki = pll_gains(60.0)
    assert ki == pytest.approx((2 * math.pi * 60) ** 2)
    assert kp == pytest.approx(2 * 0.7 * 2 * math.pi * 60)
