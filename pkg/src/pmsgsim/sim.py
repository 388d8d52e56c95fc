"""Fixed-step simulation of the turbine / B2B converter / grid system.

The continuous plant (drive train, stator currents, DC link, converter path
current) is integrated with classical RK4 at ``dt_plant``.  Controllers run
every ``dt_ctrl`` from start-of-sample measurements (MSC first, then GSC) and
their converter voltages are held over the plant sub-steps.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import fsolve

from .config import ScenarioConfig
from .control import (GscLoops, GscRefs, MscLoops, MscRefs, PiController,
                      gsc_control_step, msc_control_step, q_ref_from_droop,
                      reactive_feedforward)
from .converter import DcLink, DcLinkCollapse, Vsc, dc_link_derivative, realize_voltage
from .grid import fault_active, network_derivative, NetworkState, pcc_voltage
from .pmsg import electromagnetic_torque, magnetic_energy, stator_derivatives
from .transforms import Dq0Frame, SrfPll, dq0_to_abc, grid_angle
from .turbine import aero_torque

STATE_NAMES = ("w_m", "theta_m", "i_sd", "i_sq", "v_dc", "i_d", "i_q")

COLUMNS = ("t", "v_pcc_pu", "v_dc", "p_inj_w", "q_inj_var", "i_rms_a",
           "w_m_rad_s", "t_e_nm", "msc_sat", "gsc_sat")
FLAG_COLUMNS = ("msc_sat", "gsc_sat")

# window lengths used by the report
_STEADY_WINDOW = 0.1


class SimulationError(RuntimeError):
    """A run aborted.  ``series`` holds the samples recorded so far."""

    def __init__(self, message: str, series: "TimeSeries | None" = None):
        super().__init__(message)
        self.series = series


class NonFiniteState(SimulationError):
    pass


class DcLinkFailure(SimulationError):
    pass


@dataclass
class TimeSeries:
    t: np.ndarray
    v_pcc_pu: np.ndarray
    v_dc: np.ndarray
    p_inj_w: np.ndarray
    q_inj_var: np.ndarray
    i_rms_a: np.ndarray
    w_m_rad_s: np.ndarray
    t_e_nm: np.ndarray
    msc_sat: np.ndarray
    gsc_sat: np.ndarray

    @classmethod
    def from_rows(cls, rows) -> "TimeSeries":
        cols = list(zip(*rows)) if rows else [()] * len(COLUMNS)
        data = {}
        for name, col in zip(COLUMNS, cols):
            dtype = bool if name in FLAG_COLUMNS else float
            data[name] = np.asarray(col, dtype=dtype)
        return cls(**data)

    def __len__(self) -> int:
        return len(self.t)

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask of samples with t0 <= t < t1."""
        return (self.t >= t0) & (self.t < t1)

    def to_csv(self, path) -> None:
        cols = [getattr(self, name) for name in COLUMNS]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(
                    ("1" if v else "0") if isinstance(v, (bool, np.bool_)) else repr(float(v))
                    for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != COLUMNS:
                raise ValueError(f"unexpected CSV header {header}")
            rows = []
            for line in fh:
                parts = line.strip().split(",")
                if len(parts) != len(COLUMNS):
                    raise ValueError(f"malformed CSV row: {line!r}")
                rows.append(tuple(
                    p == "1" if name in FLAG_COLUMNS else float(p)
                    for name, p in zip(COLUMNS, parts)))
        return cls.from_rows(rows)


@dataclass
class ScenarioReport:
    sag_depth_pu: float | None
    v_dc_max_dev_pu: float | None
    p_ss: float
    q_peak: float
    improvement_pct: float | None = None
    p_pre_fault: float | None = None
    q_pre_fault: float | None = None
    q_fault_mean: float | None = None
    fault_enabled: bool = False
    fault_t_on: float | None = None
    fault_t_off: float | None = None
    turbine_connected: bool = True
    t_end: float = 0.0
    config_hash: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class AuditTrace(NamedTuple):
    """Power and stored-energy samples for the energy balance, aligned with
    the series time column."""

    t: np.ndarray
    p_wind: np.ndarray
    p_pcc: np.ndarray
    p_stator_loss: np.ndarray
    p_path_loss: np.ndarray
    p_friction: np.ndarray
    e_kinetic: np.ndarray
    e_dc: np.ndarray
    e_magnetic: np.ndarray


class RunResult(NamedTuple):
    series: TimeSeries
    report: ScenarioReport
    audit: AuditTrace | None


def rk4_step(f, x: tuple, t: float, dt: float) -> tuple:
    """One classical Runge-Kutta step of dx/dt = f(t, x)."""
    h2 = 0.5 * dt
    k1 = f(t, x)
    k2 = f(t + h2, tuple(xi + h2 * ki for xi, ki in zip(x, k1)))
    k3 = f(t + h2, tuple(xi + h2 * ki for xi, ki in zip(x, k2)))
    k4 = f(t + dt, tuple(xi + dt * ki for xi, ki in zip(x, k3)))
    h6 = dt / 6.0
    return tuple(xi + h6 * (a + 2.0 * b + 2.0 * c + d)
                 for xi, a, b, c, d in zip(x, k1, k2, k3, k4))


def speed_reference(cfg: ScenarioConfig, v_wind: float) -> float:
    if cfg.msc.speed_mode == "rated":
        return cfg.msc.w_rated
    return cfg.turbine.lambda_opt * v_wind / cfg.turbine.radius


def _q_reference(cfg: ScenarioConfig, v_pu: float) -> float:
    if cfg.gsc.q_mode == "droop":
        return q_ref_from_droop(cfg.droop, v_pu)
    return cfg.gsc.q_ref


@dataclass
class Controllers:
    msc: MscLoops
    gsc: GscLoops
    msc_refs: MscRefs
    gsc_refs: GscRefs
    pll: SrfPll | None = None
    delta: float = 0.0           # controller frame angle relative to the network frame
    msc_v: tuple = (0.0, 0.0)
    gsc_v: complex = 0j
    msc_sat: bool = False
    gsc_sat: bool = False


def build_controllers(cfg: ScenarioConfig) -> Controllers:
    m, g = cfg.msc, cfg.gsc
    v_lim = cfg.converter.m_max * g.v_dc_ref / 2.0
    msc = MscLoops(
        # generating only: the rotor is never motored from the grid
        speed=PiController(m.kp_w, m.ki_w, 0.0, m.i_max),
        i_d=PiController(m.kp_i, m.ki_i, -v_lim, v_lim),
        i_q=PiController(m.kp_i, m.ki_i, -v_lim, v_lim),
        feedforward=m.feedforward,
    )
    gsc = GscLoops(
        v_dc=PiController(g.kp_v, g.ki_v, -g.i_max, g.i_max),
        q=PiController(g.kp_q, g.ki_q, -g.i_max, g.i_max),
        i_d=PiController(g.kp_i, g.ki_i, -v_lim, v_lim),
        i_q=PiController(g.kp_i, g.ki_i, -v_lim, v_lim),
        i_max=g.i_max,
        feedforward=g.feedforward,
        q_feedforward=g.q_feedforward,
    )
    pll = None
    if cfg.sim.angle_source == "pll":
        pll = SrfPll(w_nom=cfg.grid.w_s, kp=cfg.pll.kp, ki=cfg.pll.ki)
    w_ref = speed_reference(cfg, cfg.wind.at(0.0))
    return Controllers(msc, gsc, MscRefs(w_ref, m.i_sd_ref), GscRefs(g.v_dc_ref, g.q_ref), pll)


def initial_state(cfg: ScenarioConfig, ctrl: Controllers) -> tuple:
    """Operating point at t=0, with controller integrators preloaded.

    With ``sim.flat_start`` the plant starts at the steady state the
    controllers are designed to hold; otherwise currents start at zero with
    the rotor at its speed reference and the link at its setpoint.
    """
    pm, grid = cfg.pmsg, cfg.grid
    v_wind = cfg.wind.at(0.0)
    w_m = ctrl.msc_refs.w_ref
    v_dc = cfg.gsc.v_dc_ref
    if not cfg.sim.flat_start:
        v0 = pcc_voltage(grid, 0j, None)
        ctrl.delta = cmath.phase(v0)
        if ctrl.pll is not None:
            ctrl.pll.theta = ctrl.delta
        return (w_m, 0.0, 0.0, 0.0, v_dc, 0.0, 0.0)

    i_sd = ctrl.msc_refs.i_sd_ref
    t_aero = aero_torque(cfg.turbine, v_wind, w_m)
    k_t = 1.5 * pm.pole_pairs * (pm.psi_f + (pm.l_q - pm.l_d) * i_sd)
    i_sq = (t_aero - cfg.mech.b_fric * w_m) / k_t
    w_e = pm.pole_pairs * w_m
    v_sd = -pm.r_s * i_sd + w_e * pm.l_q * i_sq
    v_sq = -pm.r_s * i_sq - w_e * pm.l_d * i_sd + w_e * pm.psi_f
    p_machine = 1.5 * (v_sd * i_sd + v_sq * i_sq)
    ctrl.msc.speed.integ = i_sq
    ctrl.msc.i_d.integ = -pm.r_s * i_sd
    ctrl.msc.i_q.integ = -pm.r_s * i_sq
    ctrl.msc_v = (v_sd, v_sq)

    fault = cfg.fault_spec
    r_fault = fault.r_fault if fault_active(fault, 0.0) else None
    def mismatch(z):
        i = complex(*z)
        v = pcc_voltage(grid, i, r_fault)
        s = 1.5 * v * i.conjugate()
        p = p_machine - 1.5 * grid.r_path * abs(i) ** 2
        q = _q_reference(cfg, abs(v) / grid.v_nom)
        return [(s.real - p) / cfg.sim.p_rated, (s.imag - q) / cfg.sim.p_rated]

    i_guess = p_machine / (1.5 * grid.v_nom)
    i = complex(*fsolve(mismatch, [i_guess, 0.0], xtol=1e-13))
    v = pcc_voltage(grid, i, r_fault)
    v_conv = v + complex(grid.r_path, grid.w_s * grid.l_path) * i
    delta = cmath.phase(v)
    rot = cmath.exp(-1j * delta)
    i_c, v_c, vc_c = i * rot, v * rot, v_conv * rot
    w_l = grid.w_s * grid.l_path
    gsc = ctrl.gsc
    gsc.v_dc.integ = i_c.real
    q_ref = _q_reference(cfg, abs(v) / grid.v_nom)
    ff = reactive_feedforward(q_ref, v_c.real) if gsc.q_feedforward else 0.0
    gsc.q.integ = i_c.imag - ff
    gsc.i_d.integ = vc_c.real + w_l * i_c.imag - v_c.real
    gsc.i_q.integ = vc_c.imag - w_l * i_c.real
    gsc.refs = (i_c.real, i_c.imag)
    ctrl.gsc_refs.q_ref = q_ref
    ctrl.gsc_v = v_conv
    ctrl.delta = delta
    if ctrl.pll is not None:
        ctrl.pll.theta = delta
    return (w_m, 0.0, i_sd, i_sq, v_dc, i.real, i.imag)


def simulate(cfg: ScenarioConfig) -> RunResult:
    """Run a scenario and return its series, report and energy-audit trace."""
    if not cfg.sim.turbine_connected:
        return _simulate_disconnected(cfg)

    turb, mech, pm, grid = cfg.turbine, cfg.mech, cfg.pmsg, cfg.grid
    sim = cfg.sim
    fault = cfg.fault_spec
    w_s = grid.w_s
    l_path, r_path = grid.l_path, grid.r_path
    J, b_fric, pole_pairs = mech.J, mech.b_fric, pm.pole_pairs
    c_dc = cfg.converter.c_dc
    v_floor = cfg.converter.v_floor_pu * cfg.gsc.v_dc_ref
    msc_vsc = Vsc("machine", cfg.converter.m_max)
    gsc_vsc = Vsc("grid", cfg.converter.m_max)
    link = DcLink(c_dc, cfg.gsc.v_dc_ref)

    ctrl = build_controllers(cfg)
    x = initial_state(cfg, ctrl)

    # held inputs of the current plant step
    held = {"v_s": ctrl.msc_v, "v_c": (ctrl.gsc_v.real, ctrl.gsc_v.imag),
            "r_fault": None, "v_wind": cfg.wind.at(0.0)}

    def deriv(t, x):
        w_m, _, i_sd, i_sq, v_dc, i_d, i_q = x
        v_sd, v_sq = held["v_s"]
        v_cd, v_cq = held["v_c"]
        t_a = aero_torque(turb, held["v_wind"], w_m)
        t_e = electromagnetic_torque(pm, i_sd, i_sq)
        dw = (t_a - t_e - b_fric * w_m) / J
        di_sd, di_sq = stator_derivatives(pm, i_sd, i_sq, pole_pairs * w_m, v_sd, v_sq)
        link.v_dc = v_dc
        dv = dc_link_derivative(link, 1.5 * (v_sd * i_sd + v_sq * i_sq),
                                1.5 * (v_cd * i_d + v_cq * i_q), v_floor)
        (di_d, di_q), _ = network_derivative(grid, NetworkState(i_d, i_q), (v_cd, v_cq),
                                             held["r_fault"], w_s)
        return (dw, w_m, di_sd, di_sq, dv, di_d, di_q)

    n_sub = round(sim.dt_ctrl / sim.dt_plant)
    n_ctrl = round(sim.t_end / sim.dt_ctrl)
    every = round(sim.sample_dt / sim.dt_ctrl)
    dt_plant, dt_ctrl = sim.dt_plant, sim.dt_ctrl
    rows: list = []
    audit_rows: list = []

    def record(t, x, r_fault):
        w_m, _, i_sd, i_sq, v_dc, i_d, i_q = x
        i = complex(i_d, i_q)
        v = pcc_voltage(grid, i, r_fault, w_s)
        s = 1.5 * v * i.conjugate()
        t_e = electromagnetic_torque(pm, i_sd, i_sq)
        rows.append((t, abs(v) / grid.v_nom, v_dc, s.real, s.imag, abs(i) / math.sqrt(2.0),
                     w_m, t_e, ctrl.msc_sat, ctrl.gsc_sat))
        t_a = aero_torque(turb, cfg.wind.at(t), w_m)
        audit_rows.append((
            t, t_a * w_m, s.real,
            1.5 * pm.r_s * (i_sd ** 2 + i_sq ** 2),
            1.5 * r_path * abs(i) ** 2,
            b_fric * w_m ** 2,
            0.5 * J * w_m ** 2,
            0.5 * c_dc * v_dc ** 2,
            magnetic_energy(pm, i_sd, i_sq) + 0.75 * l_path * abs(i) ** 2,
        ))

    def partial() -> TimeSeries:
        return TimeSeries.from_rows(rows)

    for k in range(n_ctrl):
        t = round(k * dt_ctrl, 12)
        r_fault = fault.r_fault if fault_active(fault, t) else None
        v_wind = cfg.wind.at(t)
        _control(cfg, ctrl, x, t, r_fault, v_wind, msc_vsc, gsc_vsc)
        if k % every == 0:
            record(t, x, r_fault)
        held["v_s"] = ctrl.msc_v
        held["v_c"] = (ctrl.gsc_v.real, ctrl.gsc_v.imag)
        held["v_wind"] = v_wind
        for j in range(n_sub):
            t_j = round((k * n_sub + j) * dt_plant, 12)
            held["r_fault"] = fault.r_fault if fault_active(fault, t_j) else None
            try:
                x = rk4_step(deriv, x, t_j, dt_plant)
            except DcLinkCollapse as exc:
                raise DcLinkFailure(f"t={t_j:.6f} s: {exc}", partial()) from None
            if not all(map(math.isfinite, x)):
                bad = [n for n, v in zip(STATE_NAMES, x) if not math.isfinite(v)]
                raise NonFiniteState(f"t={t_j:.6f} s: non-finite state {', '.join(bad)}",
                                     partial())
    t = round(n_ctrl * dt_ctrl, 12)
    record(t, x, fault.r_fault if fault_active(fault, t) else None)

    series = partial()
    audit = AuditTrace(*(np.asarray(c, dtype=float) for c in zip(*audit_rows)))
    report = make_report(cfg, series)
    return RunResult(series, report, audit)


def _control(cfg: ScenarioConfig, ctrl: Controllers, x: tuple, t: float,
             r_fault, v_wind: float, msc_vsc: Vsc, gsc_vsc: Vsc) -> None:
    """One controller sample: MSC then GSC, both from the same measurements."""
    pm, grid = cfg.pmsg, cfg.grid
    dt = cfg.sim.dt_ctrl
    w_m, _, i_sd, i_sq, v_dc, i_d, i_q = x
    w_e = pm.pole_pairs * w_m

    ctrl.msc_refs.w_ref = speed_reference(cfg, v_wind)
    cmd = msc_control_step(ctrl.msc_refs, w_m, i_sd, i_sq, w_e, pm, ctrl.msc, dt)
    v_sd, v_sq, ctrl.msc_sat = realize_voltage(msc_vsc, v_dc, cmd)
    ctrl.msc_v = (v_sd, v_sq)

    i = complex(i_d, i_q)
    v = pcc_voltage(grid, i, r_fault, grid.w_s)
    if ctrl.pll is not None:
        theta_s = grid_angle(t, "ideal", w_s=grid.w_s)
        v_abc = dq0_to_abc(Dq0Frame(v.real, v.imag, 0.0), theta_s)
        theta = grid_angle(t, "pll", ctrl.pll, v_abc=v_abc, dt=dt)
        ctrl.delta = theta - theta_s
    elif abs(v) > 1e-6 * grid.v_nom:
        ctrl.delta = cmath.phase(v)
    rot = cmath.exp(-1j * ctrl.delta)
    v_c, i_c = v * rot, i * rot
    q_meas = 1.5 * (v.imag * i.real - v.real * i.imag)
    ctrl.gsc_refs.q_ref = _q_reference(cfg, abs(v) / grid.v_nom)
    cmd = gsc_control_step(ctrl.gsc_refs, v_dc, i_c.real, i_c.imag, v_c.real, q_meas,
                           grid.w_s, grid.l_path, ctrl.gsc, dt)
    v_d, v_q, ctrl.gsc_sat = realize_voltage(gsc_vsc, v_dc, cmd)
    ctrl.gsc_v = complex(v_d, v_q) / rot


def _simulate_disconnected(cfg: ScenarioConfig) -> RunResult:
    """Grid-only run: converter open, PCC voltage set by source and fault."""
    sim, grid, fault = cfg.sim, cfg.grid, cfg.fault_spec
    n = round(sim.t_end / sim.sample_dt)
    nan = math.nan
    rows = []
    for k in range(n + 1):
        t = round(k * sim.sample_dt, 12)
        r_fault = fault.r_fault if fault_active(fault, t) else None
        v = pcc_voltage(grid, 0j, r_fault)
        rows.append((t, abs(v) / grid.v_nom, nan, 0.0, 0.0, 0.0, nan, nan, False, False))
    series = TimeSeries.from_rows(rows)
    return RunResult(series, make_report(cfg, series), None)


def run_scenario(cfg: ScenarioConfig) -> tuple[TimeSeries, ScenarioReport]:
    result = simulate(cfg)
    return result.series, result.report


def _mean(values: np.ndarray) -> float | None:
    return float(np.mean(values)) if len(values) else None


def cycle_rms(v: np.ndarray, n: int) -> np.ndarray:
    """Sliding RMS over the last ``n`` samples (fewer at the start).

    Sags are judged on a one-cycle RMS, as voltage-quality meters do, so a
    single sample at the switching instant does not define the depth.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    sq = np.concatenate(([0.0], np.cumsum(np.asarray(v, dtype=float) ** 2)))
    k = np.arange(1, len(v) + 1)
    lo = np.maximum(k - n, 0)
    return np.sqrt((sq[k] - sq[lo]) / (k - lo))


def make_report(cfg: ScenarioConfig, series: TimeSeries) -> ScenarioReport:
    fault = cfg.fault_spec
    t = series.t
    t_end = float(t[-1])
    steady = series.p_inj_w[t >= t_end - _STEADY_WINDOW]
    report = ScenarioReport(
        sag_depth_pu=None,
        v_dc_max_dev_pu=None,
        p_ss=float(np.mean(steady)),
        q_peak=float(np.max(series.q_inj_var)),
        turbine_connected=cfg.sim.turbine_connected,
        t_end=t_end,
        config_hash=cfg.digest(),
    )
    if cfg.sim.turbine_connected:
        dev = np.abs(series.v_dc - cfg.gsc.v_dc_ref) / cfg.gsc.v_dc_ref
        report.v_dc_max_dev_pu = float(np.max(dev))
    if fault is not None:
        during = series.window(fault.t_on, fault.t_off)
        pre = series.window(fault.t_on - _STEADY_WINDOW, fault.t_on)
        report.fault_enabled = True
        report.fault_t_on, report.fault_t_off = fault.t_on, fault.t_off
        n = max(1, round(1.0 / (cfg.grid.f_nom * cfg.sim.sample_dt)))
        report.sag_depth_pu = float(np.min(cycle_rms(series.v_pcc_pu, n)[during]))
        report.p_pre_fault = _mean(series.p_inj_w[pre])
        report.q_pre_fault = _mean(series.q_inj_var[pre])
        report.q_fault_mean = _mean(series.q_inj_var[during])
    return report


class ComparisonError(ValueError):
    pass


def compare_runs(baseline: ScenarioReport, supported: ScenarioReport) -> float | None:
    """Percentage of the baseline voltage sag removed by turbine support.

    Returns None when the baseline shows no sag.
    """
    if not (baseline.fault_enabled and supported.fault_enabled):
        raise ComparisonError("both runs need a fault window")
    if (baseline.fault_t_on, baseline.fault_t_off) != (supported.fault_t_on, supported.fault_t_off):
        raise ComparisonError(
            f"fault windows differ: [{baseline.fault_t_on}, {baseline.fault_t_off}) vs "
            f"[{supported.fault_t_on}, {supported.fault_t_off})")
    sag_base = max(1.0 - baseline.sag_depth_pu, 0.0)
    sag_supp = max(1.0 - supported.sag_depth_pu, 0.0)
    if sag_base == 0.0:
        return None
    return 100.0 * (sag_base - sag_supp) / sag_base
