"""
Road friction estimation from the utilized-friction / slip trajectory.

The slope of utilized friction against slip tells where on the tyre curve the
wheel is working: steep (linear region), flattening (transitional) or flat
(frictional, at or past the peak). Each region has its own peak-friction
update. The estimate then sets the target slip through a linear map.
"""

import logging
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from epbabs.exceptions import ConfigurationError
from epbabs.tyre import TyreModel, tyre_force
from epbabs.utils import DerivativeFilter, clamp, param
from epbabs.vehicle import MAX_ACCEL, VehicleParams, axle_loads

logger = logging.getLogger(__name__)

LINEAR = 'linear'
TRANSITIONAL = 'transitional'
FRICTIONAL = 'frictional'
OUT_OF_BAND = 'out_of_band'
UNEXCITED = 'unexcited'

FORCE_SOURCES = ('deceleration', 'tyre_model')


@dataclass(frozen=True)
class EstimatorConfig:
    """
    Estimator tuning.

    k_1 and the band half-widths default to fractions of the tyre's initial
    slope at the nominal rear load when left as None.
    """

    k_1: Optional[float] = param(None, 'k1_per_slip')
    k_0: float = param(0.0, 'k0_per_slip')
    delta_1: Optional[float] = param(None, 'delta1_per_slip')
    delta_2: Optional[float] = param(None, 'delta2_per_slip')
    delta_3: Optional[float] = param(None, 'delta3_per_slip')
    delta_4: Optional[float] = param(None, 'delta4_per_slip')
    t_ctrl: float = param(1e-3, 'period_s')
    mu_min: float = param(0.05, 'mu_min')
    mu_max: float = param(1.2, 'mu_max')
    mu_init: float = param(0.5, 'mu_init')
    slew: float = param(5.0, 'slew_per_s')
    window: int = param(5, 'window_samples')
    excitation_slip: float = param(0.02, 'excitation_slip')
    fz_min: float = param(100.0, 'fz_min_n')
    force_source: str = param('deceleration', 'force_source')
    decel_tau: float = param(0.01, 'decel_filter_s')
    a1: float = param(0.05, 'slip_map_gain')
    a2: float = param(0.13, 'slip_map_offset')
    slip_min: float = param(0.1, 'slip_min')
    slip_max: float = param(0.3, 'slip_max')

    def resolved(self, k1_default: float) -> 'EstimatorConfig':
        """Fill the unset slope and band values from a default linear slope."""
        k1 = self.k_1 if self.k_1 is not None else k1_default
        return replace(
            self, k_1=k1,
            delta_1=self.delta_1 if self.delta_1 is not None else 0.25 * k1,
            delta_2=self.delta_2 if self.delta_2 is not None else 0.25 * k1,
            delta_3=self.delta_3 if self.delta_3 is not None else 0.1 * k1,
            delta_4=self.delta_4 if self.delta_4 is not None else 0.1 * k1,
        )

    def validate(self) -> None:
        if None in (self.k_1, self.delta_1, self.delta_2, self.delta_3, self.delta_4):
            raise ConfigurationError("estimator bands are unresolved; call resolved() first")
        if not self.k_1 > self.k_0 >= 0.0:
            raise ConfigurationError(f"need k_1 > k_0 >= 0, got k_1={self.k_1}, k_0={self.k_0}")
        for name in ('delta_1', 'delta_2', 'delta_3', 'delta_4'):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"estimator band {name} must be positive")
        if not self.k_0 + self.delta_3 <= self.k_1 - self.delta_1:
            raise ConfigurationError("transitional band is empty: k_0 + delta_3 exceeds k_1 - delta_1")
        if not 0 < self.mu_min < self.mu_max:
            raise ConfigurationError(f"invalid friction bounds [{self.mu_min}, {self.mu_max}]")
        if not self.mu_min <= self.mu_init <= self.mu_max:
            raise ConfigurationError(f"initial estimate {self.mu_init} outside friction bounds")
        if self.window < 2:
            raise ConfigurationError(f"slope window must hold at least 2 samples, got {self.window}")
        if self.slew <= 0 or self.t_ctrl <= 0:
            raise ConfigurationError("slew limit and period must be positive")
        if self.force_source not in FORCE_SOURCES:
            raise ConfigurationError(f"force_source must be one of {FORCE_SOURCES}, got {self.force_source!r}")


@dataclass(frozen=True)
class EstimatorState:
    """Previous-sample values and the current peak-friction estimate."""

    mu_x_prev: float = 0.0
    lam_prev: float = 0.0
    k_prev: float = 0.0
    mu_hat: float = 0.5
    region: str = UNEXCITED


def utilized_mu(f_x: float, f_z: float, prev: float = 0.0, fz_min: float = 100.0) -> Tuple[float, bool]:
    """
    Utilized friction coefficient F_x / F_z.

    Args:
        f_x: Longitudinal force, N
        f_z: Vertical load, N
        prev: Value returned when the load is below the guard
        fz_min: Load guard, N

    Returns:
        Tuple (utilized friction clamped to [0, 1.5], True if the guard held it)
    """
    if f_z <= fz_min:
        return prev, True
    return clamp(f_x / f_z, 0.0, 1.5), False


def slope(mu_t: float, mu_prev: float, lam_t: float, lam_prev: float, k_prev: float,
          eps: float = 1e-6) -> float:
    """Two-point slope of utilized friction against slip, or k_prev when slip did not move."""
    d_lam = lam_t - lam_prev
    if abs(d_lam) <= eps:
        return k_prev
    return (mu_t - mu_prev) / d_lam


def windowed_slope(mus: Sequence[float], lams: Sequence[float], k_prev: float, eps: float = 1e-6) -> float:
    """
    Least-squares slope over a short window of samples.

    With two samples this is the two-point slope.
    """
    if len(mus) < 2:
        return k_prev
    lam = np.asarray(lams, dtype=float)
    mu = np.asarray(mus, dtype=float)
    if lam.max() - lam.min() <= eps:
        return k_prev
    dl = lam - lam.mean()
    var = float(np.dot(dl, dl))
    if var <= eps * eps:
        return k_prev
    return float(np.dot(dl, mu - mu.mean()) / var)


def classify(k: float, cfg: EstimatorConfig) -> str:
    """Tyre working region for a utilized-friction slope."""
    if cfg.k_1 - cfg.delta_1 <= k <= cfg.k_1 + cfg.delta_2:
        return LINEAR
    if cfg.k_0 + cfg.delta_3 <= k < cfg.k_1 - cfg.delta_1:
        return TRANSITIONAL
    if -cfg.delta_4 <= k < cfg.k_0 + cfg.delta_3:
        return FRICTIONAL
    return OUT_OF_BAND


def classify_and_update(state: EstimatorState, k: float, mu_x: float, lam: float, lam_prev: float,
                        cfg: EstimatorConfig) -> EstimatorState:
    """
    Update the peak-friction estimate for one sample.

    Linear region: mu_x + k_1·dlam. Transitional: mu_x + k·dlam. Frictional:
    the previous utilized friction. Out of band: hold. The result is
    slew-limited and clamped to the friction bounds.

    Args:
        state: Current state (mu_x_prev must hold the previous utilized friction)
        k: Current slope
        mu_x: Current utilized friction
        lam: Current slip
        lam_prev: Previous slip
        cfg: Resolved estimator configuration

    Returns:
        New state with the updated estimate and region; the previous-sample
        fields are left for the caller to advance
    """
    region = classify(k, cfg)
    d_lam = lam - lam_prev
    if region == LINEAR:
        candidate = mu_x + cfg.k_1 * d_lam
    elif region == TRANSITIONAL:
        candidate = mu_x + k * d_lam
    elif region == FRICTIONAL:
        candidate = state.mu_x_prev
    else:
        candidate = state.mu_hat

    step = cfg.slew * cfg.t_ctrl
    mu_hat = clamp(candidate, state.mu_hat - step, state.mu_hat + step)
    mu_hat = clamp(mu_hat, cfg.mu_min, cfg.mu_max)
    return replace(state, mu_hat=mu_hat, region=region)


def optimal_slip(mu_hat: float, a1: float = 0.05, a2: float = 0.13, lo: float = 0.1, hi: float = 0.3) -> float:
    """Target slip for an estimated peak friction, clamped to [lo, hi]."""
    return clamp(a1 * mu_hat + a2, lo, hi)


class FrictionEstimator:
    """
    Per-period friction estimation for the rear axle.

    The rear tyre force comes from the measured deceleration (front wheels are
    unbraked, so the rear axle carries the whole retarding force) and the rear
    load from the same deceleration through the load-transfer law.
    """

    def __init__(self, cfg: EstimatorConfig, vehicle: VehicleParams, tyre: Optional[TyreModel] = None):
        """
        Args:
            cfg: Resolved estimator configuration
            vehicle: VehicleParams
            tyre: Tyre model, required for the tyre_model force source
        """
        cfg.validate()
        if cfg.force_source == 'tyre_model' and tyre is None:
            raise ConfigurationError("tyre_model force source needs a tyre model")
        self.cfg = cfg
        self.vehicle = vehicle
        self.tyre = tyre
        self.state = EstimatorState(mu_hat=cfg.mu_init)
        self._mus = deque(maxlen=cfg.window)
        self._lams = deque(maxlen=cfg.window)
        self._speed_rate = DerivativeFilter(cfg.t_ctrl, cfg.decel_tau)
        self.guard_hits = 0

    @property
    def mu_hat(self) -> float:
        return self.state.mu_hat

    @property
    def target_slip(self) -> float:
        cfg = self.cfg
        return optimal_slip(self.state.mu_hat, cfg.a1, cfg.a2, cfg.slip_min, cfg.slip_max)

    def _forces(self, v_x: float, lam: float) -> Tuple[float, float]:
        p = self.vehicle
        decel = max(-self._speed_rate.update(v_x), 0.0)
        f_z = axle_loads(p, -min(decel, MAX_ACCEL)).rear
        if self.cfg.force_source == 'tyre_model':
            f_x = tyre_force(self.tyre, lam, f_z, self.state.mu_hat)
        else:
            f_x = p.m * decel / 2.0
        return f_x, f_z

    def update(self, v_x: float, lam: float) -> Tuple[float, bool]:
        """
        Feed one control-period sample.

        Args:
            v_x: Vehicle speed, m/s
            lam: Rear slip ratio

        Returns:
            Tuple (peak friction estimate, True if the load guard fired)
        """
        f_x, f_z = self._forces(v_x, lam)
        state = self.state
        mu_x, guarded = utilized_mu(f_x, f_z, state.mu_x_prev, self.cfg.fz_min)
        if guarded:
            self.guard_hits += 1
            logger.debug("Estimator load guard held utilized friction (F_z=%.1f N)", f_z)

        self._mus.append(mu_x)
        self._lams.append(lam)
        k = windowed_slope(self._mus, self._lams, state.k_prev)

        if lam < self.cfg.excitation_slip:
            state = replace(state, region=UNEXCITED)
        else:
            state = classify_and_update(state, k, mu_x, lam, state.lam_prev, self.cfg)

        self.state = replace(state, mu_x_prev=mu_x, lam_prev=lam, k_prev=k)
        return self.state.mu_hat, guarded
