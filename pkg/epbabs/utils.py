"""
Utility functions for epbabs.
"""

import math
from dataclasses import field
from typing import Any, Callable, List, Sequence, Tuple

import yaml

from epbabs.exceptions import NumericalAbort, ScenarioError


def rk4_step(fn: Callable[[float, Sequence[float]], Sequence[float]], t: float, y: Sequence[float],
             h: float) -> Tuple[List[float], Sequence[float]]:
    """
    Advance y' = fn(t, y) by one classical 4th-order Runge-Kutta step.

    Stages are plain lists of floats, so any sequence works as a state.

    Args:
        fn: Right-hand side returning dy/dt as a sequence
        t: Current time
        y: Current state
        h: Step size

    Returns:
        Tuple of (next state as a list, derivative evaluated at the start of the step)
    """
    half = 0.5 * h
    k1 = fn(t, y)
    k2 = fn(t + half, [a + half * b for a, b in zip(y, k1)])
    k3 = fn(t + half, [a + half * b for a, b in zip(y, k2)])
    k4 = fn(t + h, [a + h * b for a, b in zip(y, k3)])
    sixth = h / 6.0
    return [a + sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)], k1


def sign(x: float) -> float:
    """Signum with sign(0) = 0."""
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


def clamp(x: float, lo: float, hi: float) -> float:
    """Clamp x into [lo, hi]."""
    return lo if x < lo else hi if x > hi else x


def ensure_finite(values: Sequence[float], what: str, step: int = -1) -> None:
    """
    Raise NumericalAbort if any value is NaN or infinite.

    Args:
        values: Values to check
        what: Name used in the diagnostic
        step: Step index for the diagnostic
    """
    for v in values:
        if not math.isfinite(v):
            raise NumericalAbort(f"non-finite {what} at step {step}: {list(values)}", step=step)


class DerivativeFilter:
    """
    Finite-difference derivative passed through a first-order low-pass filter.

    The filter is discretised exactly for a zero-order-held input, so the gain
    is exact at steady state for any sample period.
    """

    def __init__(self, dt: float, tau: float):
        """
        Args:
            dt: Sample period, s
            tau: Filter time constant, s (0 disables filtering)
        """
        if dt <= 0:
            raise ValueError(f"Sample period must be positive, got {dt}")
        self.dt = dt
        self.alpha = 1.0 - math.exp(-dt / tau) if tau > 0 else 1.0
        self.prev = None
        self.value = 0.0

    def update(self, x: float) -> float:
        """Feed a new sample and return the filtered derivative."""
        if self.prev is None:
            self.prev = x
            return self.value
        raw = (x - self.prev) / self.dt
        self.prev = x
        self.value += self.alpha * (raw - self.value)
        return self.value

    def reset(self) -> None:
        """Forget the sample history."""
        self.prev = None
        self.value = 0.0


def parse_override(text: str) -> Tuple[List[str], Any]:
    """
    Parse a "key.path=value" override string.

    The value is parsed as YAML, so numbers, booleans and lists keep their type:
    - "v0_mps=13.9" -> (["v0_mps"], 13.9)
    - "params.upper.eps1_per_s=40" -> (["params", "upper", "eps1_per_s"], 40)
    - "road=[{start_s: 0, mu: 0.5}]" -> (["road"], [{"start_s": 0, "mu": 0.5}])

    Args:
        text: Override string

    Returns:
        Tuple of (key path, parsed value)
    """
    if '=' not in text:
        raise ScenarioError(text, "override must have the form key=value")

    key, raw = text.split('=', 1)
    key = key.strip()
    if not key:
        raise ScenarioError(text, "override key cannot be empty")

    path = [p.strip() for p in key.split('.')]
    if any(not p for p in path):
        raise ScenarioError(key, "empty component in key path")

    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ScenarioError(key, f"cannot parse value {raw!r}: {e}")

    return path, value


def parse_value_list(text: str) -> List[float]:
    """
    Parse a sweep value list.

    Supports formats:
    - Comma separated: "0.2, 0.5, 0.8"
    - Ranges: "0.2:0.8:0.2" (start:stop:step, stop inclusive)

    Args:
        text: Value list string

    Returns:
        List of finite floats
    """
    if not text.strip():
        raise ValueError("Value list cannot be empty")

    if ':' in text and ',' not in text:
        parts = text.split(':')
        if len(parts) != 3:
            raise ValueError(f"Range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"Invalid range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(count)]
    else:
        values = [float(p) for p in text.split(',') if p.strip()]

    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"Sweep values must be finite, got {v}")
    return values


def param(default: float, key: str) -> Any:
    """
    Dataclass field carrying its scenario-file key.

    Args:
        default: Default value
        key: Key used in scenario files (with unit suffix)
    """
    return field(default=default, metadata={'key': key})
