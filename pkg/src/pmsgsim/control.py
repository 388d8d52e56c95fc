"""Cascaded PI vector control of the machine-side and grid-side converters.

Error signs are chosen per loop so that every gain is positive:

* MSC current loops act on ``i - i_ref``: under generator convention a higher
  terminal voltage pushes less current out of the machine.
* the speed loop acts on ``w_m - w_ref``: more q current brakes the rotor.
* the DC-link loop acts on ``v_dc - v_dc_ref``: more exported d current
  discharges the link.
* the reactive loop acts on ``q - q_ref``: injected Q = -1.5*v_d*i_q in the
  PCC-aligned frame.
* GSC current loops act on ``i_ref - i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .pmsg import PmsgParams

AW_CONDITIONAL = "conditional"
AW_NONE = "none"


@dataclass
class PiController:
    kp: float
    ki: float
    out_min: float
    out_max: float
    integ: float = 0.0
    aw_mode: str = AW_CONDITIONAL

    def __post_init__(self):
        if not self.out_min < self.out_max:
            raise ValueError(f"out_min ({self.out_min}) must be < out_max ({self.out_max})")
        if self.aw_mode not in (AW_CONDITIONAL, AW_NONE):
            raise ValueError(f"unknown anti-windup mode {self.aw_mode!r}")

    def set_limits(self, out_min: float, out_max: float) -> None:
        if not out_min < out_max:
            raise ValueError(f"out_min ({out_min}) must be < out_max ({out_max})")
        self.out_min, self.out_max = out_min, out_max

    def step(self, error: float, dt: float) -> float:
        return pi_step(self, error, dt)


def pi_step(ctrl: PiController, error: float, dt: float) -> float:
    """Advance ``ctrl`` by one sample and return its clamped output.

    With conditional integration the integrator only moves into saturation
    as far as the limit itself; while the output is clamped and the error
    keeps pushing outward it stays where it is.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    p = ctrl.kp * error
    cand = ctrl.integ + ctrl.ki * error * dt
    if ctrl.aw_mode == AW_CONDITIONAL:
        if p + cand > ctrl.out_max and error > 0:
            cand = min(cand, max(ctrl.integ, ctrl.out_max - p))
        elif p + cand < ctrl.out_min and error < 0:
            cand = max(cand, min(ctrl.integ, ctrl.out_min - p))
    ctrl.integ = cand
    return min(max(p + cand, ctrl.out_min), ctrl.out_max)


@dataclass
class MscRefs:
    w_ref: float
    i_sd_ref: float = 0.0


@dataclass
class GscRefs:
    v_dc_ref: float
    q_ref: float = 0.0


@dataclass(frozen=True)
class DroopParams:
    v_pcc_ref: float = 1.0
    k_q: float = 0.0
    q_min: float = 0.0
    q_max: float = 0.0

    def __post_init__(self):
        if self.k_q < 0:
            raise ValueError("k_q must be >= 0")
        if not self.q_min <= 0.0 <= self.q_max:
            raise ValueError("droop limits must satisfy q_min <= 0 <= q_max")


@dataclass
class MscLoops:
    speed: PiController
    i_d: PiController
    i_q: PiController
    feedforward: bool = True


@dataclass
class GscLoops:
    v_dc: PiController
    q: PiController
    i_d: PiController
    i_q: PiController
    i_max: float = math.inf
    feedforward: bool = True
    # reactive-current feedforward -q_ref/(1.5*v_d) ahead of the Q loop
    q_feedforward: bool = False
    # last current references, kept for logging
    refs: tuple = field(default=(0.0, 0.0))


def msc_current_step(i_sd_ref: float, i_sq_ref: float, i_sd: float, i_sq: float,
                     w_e: float, params: PmsgParams, loops: MscLoops,
                     dt: float) -> tuple[float, float]:
    """Inner MSC current loops with the cross-coupling/back-EMF feedforward."""
    v_sd = pi_step(loops.i_d, i_sd - i_sd_ref, dt)
    v_sq = pi_step(loops.i_q, i_sq - i_sq_ref, dt)
    if loops.feedforward:
        v_sd += w_e * params.l_q * i_sq
        v_sq += -w_e * params.l_d * i_sd + w_e * params.psi_f
    return v_sd, v_sq


def msc_control_step(refs: MscRefs, w_m: float, i_sd: float, i_sq: float, w_e: float,
                     params: PmsgParams, loops: MscLoops,
                     dt: float) -> tuple[float, float]:
    i_sq_ref = pi_step(loops.speed, w_m - refs.w_ref, dt)
    return msc_current_step(refs.i_sd_ref, i_sq_ref, i_sd, i_sq, w_e, params, loops, dt)


def gsc_current_step(i_d_ref: float, i_q_ref: float, i_d: float, i_q: float,
                     v_d_pcc: float, w_s: float, l_f: float, loops: GscLoops,
                     dt: float) -> tuple[float, float]:
    v_d = pi_step(loops.i_d, i_d_ref - i_d, dt)
    v_q = pi_step(loops.i_q, i_q_ref - i_q, dt)
    if loops.feedforward:
        v_d += -w_s * l_f * i_q + v_d_pcc
        v_q += w_s * l_f * i_d
    return v_d, v_q


def gsc_control_step(refs: GscRefs, v_dc: float, i_d: float, i_q: float, v_d_pcc: float,
                     q_meas: float, w_s: float, l_f: float, loops: GscLoops,
                     dt: float) -> tuple[float, float]:
    """Outer DC-link and reactive loops feeding the GSC current loops.

    The current magnitude is limited to ``loops.i_max`` with d-axis priority:
    the reactive loop gets whatever headroom the DC-link loop leaves.
    """
    i_d_ref = pi_step(loops.v_dc, v_dc - refs.v_dc_ref, dt)
    room = math.sqrt(max(loops.i_max ** 2 - i_d_ref ** 2, 0.0))
    # keep a sliver of range so the limits stay ordered
    room = max(room, 1e-6 * loops.i_max)
    ff = reactive_feedforward(refs.q_ref, v_d_pcc) if loops.q_feedforward else 0.0
    loops.q.set_limits(-room - ff, room - ff)
    i_q_ref = pi_step(loops.q, q_meas - refs.q_ref, dt) + ff
    loops.refs = (i_d_ref, i_q_ref)
    return gsc_current_step(i_d_ref, i_q_ref, i_d, i_q, v_d_pcc, w_s, l_f, loops, dt)


def reactive_feedforward(q_ref: float, v_d: float) -> float:
    """q-axis current that delivers ``q_ref`` at PCC-aligned voltage ``v_d``."""
    if v_d <= 0.0:
        return 0.0
    return -q_ref / (1.5 * v_d)


def q_ref_from_droop(droop: DroopParams, v_pcc_pu: float) -> float:
    if v_pcc_pu < 0:
        raise ValueError(f"v_pcc_pu must be >= 0, got {v_pcc_pu}")
    q = droop.k_q * (droop.v_pcc_ref - v_pcc_pu)
    return min(max(q, droop.q_min), droop.q_max)


# -- gain design -------------------------------------------------------------
# Pole-placement formulas used to derive the gains stored in the reference
# scenario, and their inverses for checking loop separation.

def current_loop_gains(l: float, r: float, bw_hz: float) -> tuple[float, float]:
    """Zero cancels the RL pole, leaving a first-order loop at ``bw_hz``."""
    w = 2.0 * math.pi * bw_hz
    return l * w, r * w


def speed_loop_gains(J: float, k_t: float, bw_hz: float, zeta: float = 0.7):
    w = 2.0 * math.pi * bw_hz
    return 2.0 * zeta * w * J / k_t, w * w * J / k_t


def dc_link_gains(c_dc: float, v_dc: float, v_d: float, bw_hz: float, zeta: float = 0.7):
    k = 1.5 * v_d / (c_dc * v_dc)
    w = 2.0 * math.pi * bw_hz
    return 2.0 * zeta * w / k, w * w / k


def reactive_loop_gains(v_d: float, bw_hz: float) -> tuple[float, float]:
    """Integral-only outer loop around a (fast) current loop."""
    return 0.0, 2.0 * math.pi * bw_hz / (1.5 * v_d)


def pll_gains(bw_hz: float, zeta: float = 0.7) -> tuple[float, float]:
    w = 2.0 * math.pi * bw_hz
    return 2.0 * zeta * w, w * w


def current_loop_bandwidth_hz(kp: float, l: float) -> float:
    return kp / l / (2.0 * math.pi)


def speed_loop_bandwidth_hz(ki: float, J: float, k_t: float) -> float:
    return math.sqrt(k_t * ki / J) / (2.0 * math.pi)


def dc_link_bandwidth_hz(ki: float, c_dc: float, v_dc: float, v_d: float) -> float:
    return math.sqrt(1.5 * v_d / (c_dc * v_dc) * ki) / (2.0 * math.pi)


def reactive_loop_bandwidth_hz(kp: float, ki: float, v_d: float) -> float:
    k = 1.5 * v_d
    return k * ki / (1.0 + k * kp) / (2.0 * math.pi)
