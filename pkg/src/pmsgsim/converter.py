"""Average-value back-to-back converter: modulation limit and DC-link balance.

Each VSC realises its commanded dq voltage instantly, up to the linear
modulation range m_max*v_dc/2 (line-to-neutral peak).  Both bridges are
lossless, so the DC link sees exactly the AC-side powers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DcLinkCollapse(RuntimeError):
    """DC-link voltage fell below its floor."""


@dataclass
class DcLink:
    c_dc: float
    v_dc: float

    def __post_init__(self):
        if self.c_dc <= 0:
            raise ValueError("c_dc must be > 0")


@dataclass(frozen=True)
class Vsc:
    side: str = "grid"
    m_max: float = 1.15

    def __post_init__(self):
        if self.side not in ("machine", "grid"):
            raise ValueError(f"side must be 'machine' or 'grid', got {self.side!r}")
        if not 0.0 < self.m_max <= 1.15:
            raise ValueError("m_max must lie in (0, 1.15]")

    def v_limit(self, v_dc: float) -> float:
        return self.m_max * v_dc / 2.0


def realize_voltage(vsc: Vsc, v_dc: float,
                    cmd: tuple[float, float]) -> tuple[float, float, bool]:
    """Clip ``cmd`` radially onto the modulation circle.

    Returns (v_d_out, v_q_out, saturated).
    """
    if v_dc <= 0:
        raise ValueError(f"v_dc must be > 0, got {v_dc}")
    v_d, v_q = cmd
    limit = vsc.v_limit(v_dc)
    mag = math.hypot(v_d, v_q)
    if mag <= limit:
        return v_d, v_q, False
    scale = limit / mag
    return v_d * scale, v_q * scale, True


def duty_ratios(v_dq: tuple[float, float], v_dc: float) -> tuple[float, float]:
    """Modulation indices (relative to v_dc/2) for inspection."""
    return 2.0 * v_dq[0] / v_dc, 2.0 * v_dq[1] / v_dc


def dc_link_derivative(link: DcLink, p_in: float, p_out: float,
                       v_floor: float = 0.0) -> float:
    """dv_dc/dt = (p_in - p_out) / (C * v_dc)."""
    if link.v_dc <= v_floor or link.v_dc <= 0.0:
        raise DcLinkCollapse(f"DC-link voltage {link.v_dc:.3f} V at or below floor {v_floor:.3f} V")
    return (p_in - p_out) / (link.c_dc * link.v_dc)
