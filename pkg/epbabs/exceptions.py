"""
Exception types raised by epbabs.

All of them carry a message naming the offending value or key.
"""

from typing import Any, List, Optional


class DomainError(ValueError):
    """A physical input is outside the range a model supports."""


class ConfigurationError(ValueError):
    """A parameter set violates one of its invariants."""


class ScenarioError(ValueError):
    """A scenario file or override is malformed."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class NumericalAbort(RuntimeError):
    """
    The simulation produced a non-finite value.

    Attributes:
        step: Plant substep index at which the problem was detected
        trace: Trace records written before the abort
        last_state: Last finite plant state, if any
    """

    def __init__(self, message: str, step: int = -1, trace: Optional[List[Any]] = None,
                 last_state: Any = None):
        super().__init__(message)
        self.step = step
        self.trace = trace if trace is not None else []
        self.last_state = last_state
