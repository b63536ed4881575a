"""
Per-period simulation output.
"""

from dataclasses import astuple, dataclass, fields
from typing import Dict, List, Sequence

import numpy as np

FLAG_QUIT = 'quit'
FLAG_TORQUE_CLAMP = 'torque_clamp'
FLAG_DUTY_SAT = 'duty_sat'
FLAG_LOAD_CLAMP = 'load_clamp'
FLAG_LOAD_GUARD = 'load_guard'
FLAG_OBSERVER_FROZEN = 'observer_frozen'
FLAG_HARD_STOP = 'hard_stop'


@dataclass(frozen=True)
class TraceRecord:
    """
    One control period.

    Actuator columns are the mean of the two rear actuators.
    """

    t: float
    v_x: float
    x: float
    omega_rl: float
    omega_rr: float
    lam_r: float
    lam_rd: float
    mu_true: float
    mu_hat: float
    t_cmd: float
    t_act: float
    t_hat: float
    f_q: float
    i_a: float
    omega_m: float
    duty: float
    s_r: float
    s_t: float
    flags: str = ''

    def has(self, flag: str) -> bool:
        return flag in self.flags.split('|') if self.flags else False


TRACE_COLUMNS = tuple(f.name for f in fields(TraceRecord))


def trace_arrays(trace: Sequence[TraceRecord]) -> Dict[str, np.ndarray]:
    """Numeric trace columns as arrays keyed by column name."""
    numeric = TRACE_COLUMNS[:-1]
    if not trace:
        return {name: np.zeros(0) for name in numeric}
    table = np.array([astuple(r)[:-1] for r in trace], dtype=float)
    return {name: table[:, i] for i, name in enumerate(numeric)}


def flag_mask(trace: Sequence[TraceRecord], flag: str) -> np.ndarray:
    return np.array([r.has(flag) for r in trace], dtype=bool)


def join_flags(flags: List[str]) -> str:
    return '|'.join(sorted(set(flags)))
