"""
Magic Formula longitudinal tyre model and its lookup-table variant.

The coefficient set works in kN (vertical load) and percent (slip); the public
functions take SI values (N, slip fraction) and convert internally. Road
friction enters as a pure scale on the base curve, whose peak friction
coefficient is 1 for the default coefficients.
"""

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from epbabs.exceptions import ConfigurationError, DomainError
from epbabs.utils import param

logger = logging.getLogger(__name__)

FZ_MIN_KN = 0.5
FZ_MAX_KN = 10.0
MU_MIN = 0.05
MU_MAX = 1.2


@dataclass(frozen=True)
class TyreParams:
    """Magic Formula coefficients a0..a8 (defaults: 205/55R16 bench fit)."""

    a0: float = param(0.0, 'a0')
    a1: float = param(1000.0, 'a1')
    a2: float = param(1.55, 'a2')
    a3: float = param(60.0, 'a3')
    a4: float = param(300.0, 'a4')
    a5: float = param(0.17, 'a5')
    a6: float = param(0.0, 'a6')
    a7: float = param(0.0, 'a7')
    a8: float = param(0.2, 'a8')

    def validate(self) -> None:
        """Check the shape factor gives a single peak in (0, 100]% slip."""
        if not 1.0 < self.a2 < 2.0:
            raise ConfigurationError(f"tyre shape factor a2 must lie in (1, 2), got {self.a2}")
        for fz in (1.0, 10.0):
            b, _, _, _ = mf_factors(self, fz)
            if b <= 0:
                raise ConfigurationError(f"tyre stiffness factor B is {b} at Fz={fz} kN")


def mf_factors(params: TyreParams, fz_kn: float) -> Tuple[float, float, float, float]:
    """
    Compute the Magic Formula factors for a vertical load.

    Args:
        params: Tyre coefficients
        fz_kn: Vertical load, kN

    Returns:
        Tuple (B, C, D, E); D in N, B per percent slip

    Raises:
        DomainError: If fz_kn is outside [0.5, 10] kN
    """
    if not FZ_MIN_KN <= fz_kn <= FZ_MAX_KN:
        raise DomainError(f"vertical load {fz_kn} kN outside [{FZ_MIN_KN}, {FZ_MAX_KN}] kN")

    c = params.a2
    d = params.a0 * fz_kn ** 2 + params.a1 * fz_kn
    b = (params.a3 * fz_kn ** 2 + params.a4 * fz_kn) / (c * d * math.exp(params.a5 * fz_kn))
    e = params.a6 * fz_kn ** 2 + params.a7 * fz_kn + params.a8
    return b, c, d, e


def _mf_curve(b, c, d, e, slip_pct):
    # works on floats and numpy arrays alike
    bx = b * slip_pct
    return d * np.sin(c * np.arctan(bx - e * (bx - np.arctan(bx))))


def mf_base_force(params: TyreParams, slip_pct: float, fz_kn: float) -> float:
    """
    Evaluate the base Magic Formula longitudinal force.

    Args:
        params: Tyre coefficients
        slip_pct: Slip ratio in percent, [0, 100]
        fz_kn: Vertical load, kN

    Returns:
        Longitudinal force magnitude, N
    """
    if not 0.0 <= slip_pct <= 100.0:
        raise DomainError(f"slip {slip_pct}% outside [0, 100]%")
    b, c, d, e = mf_factors(params, fz_kn)
    bx = b * slip_pct
    return d * math.sin(c * math.atan(bx - e * (bx - math.atan(bx))))


@dataclass
class TyreCurve:
    """
    Precomputed G(Fz, mu, slip) table with trilinear interpolation.

    Attributes:
        params: Coefficients the table was built from
        load_grid: Vertical loads, kN
        mu_grid: Road friction coefficients
        slip_grid: Slip ratios, percent
        forces: Force table, N, indexed [load, mu, slip]
        peak_slip_pct: Slip of the base-curve maximum per load node, percent
        initial_slope_per_unit: d(F/Fz)/dslip at zero slip per load node, per unit slip fraction
    """

    params: TyreParams
    load_grid: np.ndarray
    mu_grid: np.ndarray
    slip_grid: np.ndarray
    forces: np.ndarray
    peak_slip_pct: np.ndarray
    initial_slope_per_unit: np.ndarray

    def __post_init__(self):
        self._interp = RegularGridInterpolator(
            (self.load_grid, self.mu_grid, self.slip_grid), self.forces,
            method='linear', bounds_error=False, fill_value=None)

    def force(self, slip: Union[float, np.ndarray], fz: Union[float, np.ndarray],
              mu: Union[float, np.ndarray]) -> np.ndarray:
        """
        Interpolate the force table.

        Args:
            slip: Slip fraction(s), [0, 1]
            fz: Vertical load(s), N
            mu: Road friction coefficient(s)

        Returns:
            Force magnitude(s), N
        """
        slip_pct = np.clip(np.asarray(slip, dtype=float) * 100.0, 0.0, 100.0)
        fz_kn = np.asarray(fz, dtype=float) / 1000.0
        mu = np.asarray(mu, dtype=float)
        pts = np.stack(np.broadcast_arrays(fz_kn, mu, slip_pct), axis=-1)
        return self._interp(pts)

    def slip_curve(self, fz: float, mu: float) -> Callable[[float], float]:
        """
        Table slice at one load and friction as a scalar function of slip.

        Interpolating the (load, friction) cell first and the slip axis last
        gives the same value as the trilinear lookup in force().
        """
        i, w_load = _cell(self.load_grid, fz / 1000.0)
        j, w_mu = _cell(self.mu_grid, mu)
        f = self.forces
        row = ((1.0 - w_load) * ((1.0 - w_mu) * f[i, j] + w_mu * f[i, j + 1])
               + w_load * ((1.0 - w_mu) * f[i + 1, j] + w_mu * f[i + 1, j + 1]))
        nodes = self.slip_grid.tolist()
        values = row.tolist()
        last = len(nodes) - 2

        def curve(slip: float) -> float:
            _check_slip(slip)
            if slip == 0.0:
                return 0.0
            x = min(100.0 * slip, 100.0)
            k = min(bisect_right(nodes, x) - 1, last)
            w = (x - nodes[k]) / (nodes[k + 1] - nodes[k])
            return values[k] + w * (values[k + 1] - values[k])

        return curve

    def peak_slip(self, fz: float) -> float:
        """Peak-force slip for a load, percent (interpolated between load nodes)."""
        return float(np.interp(fz / 1000.0, self.load_grid, self.peak_slip_pct))

    def initial_slope(self, fz: float) -> float:
        """Initial utilized-friction slope for a load, per unit slip fraction."""
        return float(np.interp(fz / 1000.0, self.load_grid, self.initial_slope_per_unit))


def _cell(grid: np.ndarray, x: float) -> Tuple[int, float]:
    # edge cells extrapolate linearly, like RegularGridInterpolator with fill_value=None
    k = int(np.searchsorted(grid, x, side='right')) - 1
    k = min(max(k, 0), grid.size - 2)
    return k, float((x - grid[k]) / (grid[k + 1] - grid[k]))


def _check_grid(name: str, grid: np.ndarray, lo: float, hi: float) -> None:
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError(f"{name} grid must be strictly increasing")
    if grid[0] > lo or grid[-1] < hi:
        raise ConfigurationError(f"{name} grid [{grid[0]}, {grid[-1]}] does not cover [{lo}, {hi}]")


def build_lookup(params: TyreParams, load_grid: Optional[Sequence[float]] = None,
                 mu_grid: Optional[Sequence[float]] = None,
                 slip_grid: Optional[Sequence[float]] = None) -> TyreCurve:
    """
    Build the G(Fz, mu, slip) lookup table.

    Args:
        params: Tyre coefficients
        load_grid: Loads in kN (default 1..8 step 0.5)
        mu_grid: Friction coefficients (default 0.05..1.2 step 0.05)
        slip_grid: Slips in percent (default 0..100 step 0.5)

    Returns:
        TyreCurve
    """
    loads = np.asarray(load_grid if load_grid is not None else np.arange(1.0, 8.0 + 1e-9, 0.5), dtype=float)
    mus = np.asarray(mu_grid if mu_grid is not None else np.linspace(MU_MIN, MU_MAX, 24), dtype=float)
    slips = np.asarray(slip_grid if slip_grid is not None else np.linspace(0.0, 100.0, 201), dtype=float)

    _check_grid('load', loads, 1.0, 8.0)
    _check_grid('mu', mus, MU_MIN, MU_MAX)
    _check_grid('slip', slips, 0.0, 100.0)

    base = np.empty((loads.size, slips.size))
    for i, fz_kn in enumerate(loads):
        b, c, d, e = mf_factors(params, float(fz_kn))
        base[i] = _mf_curve(b, c, d, e, slips)
    base[:, slips == 0.0] = 0.0

    forces = mus[None, :, None] * base[:, None, :]
    peak = slips[np.argmax(base, axis=1)]
    slope = (base[:, 1] / (loads * 1000.0)) / (slips[1] / 100.0)

    logger.debug("Built tyre table %d x %d x %d", loads.size, mus.size, slips.size)
    return TyreCurve(params, loads, mus, slips, forces, peak, slope)


TyreModel = Union[TyreParams, TyreCurve]


def _check_slip(slip: float) -> None:
    if not 0.0 <= slip <= 1.0:
        raise DomainError(f"slip {slip} outside [0, 1]")


def _unloaded(slip: float) -> float:
    _check_slip(slip)
    return 0.0


def force_curve(model: TyreModel, fz: float, mu: float) -> Callable[[float], float]:
    """
    Force magnitude as a function of slip at a fixed load and road friction.

    The Magic Formula factors (or the table slice) are resolved once, which
    is what the plant needs: every wheel stage of a step sees the same load
    and friction.

    Args:
        model: TyreParams for direct evaluation or a TyreCurve for table lookup
        fz: Vertical load, N
        mu: Road friction coefficient, [0.05, 1.2]

    Returns:
        Function of the slip fraction returning the force magnitude, N

    Raises:
        DomainError: If mu is outside [0.05, 1.2]
    """
    if not MU_MIN <= mu <= MU_MAX:
        raise DomainError(f"road friction {mu} outside [{MU_MIN}, {MU_MAX}]")
    if fz <= 0.0:
        return _unloaded
    if isinstance(model, TyreCurve):
        return model.slip_curve(fz, mu)

    # below the table's lowest load the curve is scaled linearly from 0.5 kN
    fz_kn = fz / 1000.0
    scale = mu
    if fz_kn < FZ_MIN_KN:
        scale = mu * fz_kn / FZ_MIN_KN
        fz_kn = FZ_MIN_KN
    b, c, d, e = mf_factors(model, min(fz_kn, FZ_MAX_KN))
    peak = scale * d
    atan, sin = math.atan, math.sin

    def curve(slip: float) -> float:
        _check_slip(slip)
        if slip == 0.0:
            return 0.0
        bx = b * (100.0 * slip)
        return peak * sin(c * atan(bx - e * (bx - atan(bx))))

    return curve


def tyre_force(model: TyreModel, slip: float, fz: float, mu: float) -> float:
    """
    Longitudinal force magnitude for a slip fraction, load and road friction.

    The returned force opposes the wheel's slip direction; the caller applies
    the sign.

    Args:
        model: TyreParams for direct evaluation or a TyreCurve for table lookup
        slip: Slip fraction, [0, 1]
        fz: Vertical load, N
        mu: Road friction coefficient, [0.05, 1.2]

    Returns:
        Force magnitude, N
    """
    return force_curve(model, fz, mu)(slip)


def initial_slope(model: TyreModel, fz: float) -> float:
    """
    Slope of the unit-friction utilized-friction curve at zero slip.

    For TyreParams this is the analytic small-slip limit 100·B·C; a TyreCurve
    returns its tabulated forward difference.

    Args:
        model: Tyre model
        fz: Vertical load, N

    Returns:
        d(F/Fz)/d(slip) per unit slip fraction
    """
    if isinstance(model, TyreCurve):
        return model.initial_slope(fz)
    b, c, _, _ = mf_factors(model, min(max(fz / 1000.0, FZ_MIN_KN), FZ_MAX_KN))
    return 100.0 * b * c


def base_peak_mu(params: TyreParams, fz: float, resolution: int = 2001) -> float:
    """Peak of the unit-friction utilized-friction curve, by dense scan over slip."""
    b, c, d, e = mf_factors(params, fz / 1000.0)
    curve = _mf_curve(b, c, d, e, np.linspace(0.0, 100.0, resolution))
    return float(np.max(curve)) / fz


def lookup_error(curve: TyreCurve, samples: int = 10000, seed: int = 0) -> float:
    """
    Largest table-vs-formula force error over random queries, relative to the
    peak force mu·D at the query point.

    Queries are drawn uniformly over the table's load, friction and slip ranges.
    """
    rng = np.random.default_rng(seed)
    fz = rng.uniform(curve.load_grid[0], curve.load_grid[-1], samples) * 1000.0
    mu = rng.uniform(curve.mu_grid[0], curve.mu_grid[-1], samples)
    slip = rng.uniform(0.0, 1.0, samples)
    table = curve.force(slip, fz, mu)

    worst = 0.0
    for k in range(samples):
        b, c, d, e = mf_factors(curve.params, fz[k] / 1000.0)
        direct = mu[k] * _mf_curve(b, c, d, e, 100.0 * slip[k])
        worst = max(worst, abs(table[k] - direct) / (mu[k] * d))
    return float(worst)
