"""
Scenario files: schema, strict parsing, overrides and the canonical road cases.

Every parameter group is a dataclass whose fields carry their file key in
field metadata. Parsing walks the dataclasses, so the schema and the defaults
are defined in one place and unknown keys are rejected at any depth.
"""

import copy
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import yaml

from epbabs.actuator import CaliperParams, DrivetrainParams, MotorParams, ScrewParams
from epbabs.controllers import LowerGains, PidGains, UpperGains
from epbabs.estimator import EstimatorConfig
from epbabs.exceptions import ConfigurationError, ScenarioError
from epbabs.observer import ObserverGains
from epbabs.tyre import MU_MAX, MU_MIN, TyreParams, initial_slope
from epbabs.utils import param, parse_override
from epbabs.vehicle import VehicleParams, axle_loads

logger = logging.getLogger(__name__)

CONTROLLERS = ('smc', 'pid')
TYRE_SOURCES = ('formula', 'table')


@dataclass(frozen=True)
class RoadSegment:
    start: float = param(0.0, 'start_s')
    mu: float = param(0.8, 'mu')


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviations of additive measurement noise (0 disables)."""

    speed: float = param(0.0, 'speed_mps')
    wheel_speed: float = param(0.0, 'wheel_speed_radps')
    motor_speed: float = param(0.0, 'motor_speed_radps')
    current: float = param(0.0, 'current_a')


@dataclass(frozen=True)
class PlantOptions:
    tyre_source: str = param('formula', 'tyre_source')
    stiction_speed: float = param(0.5, 'stiction_speed_radps')
    quit_speed: float = param(1.0, 'abs_quit_speed_mps')


@dataclass(frozen=True)
class ModelParams:
    vehicle: VehicleParams = field(default_factory=VehicleParams, metadata={'key': 'vehicle'})
    tyre: TyreParams = field(default_factory=TyreParams, metadata={'key': 'tyre'})
    motor: MotorParams = field(default_factory=MotorParams, metadata={'key': 'motor'})
    drivetrain: DrivetrainParams = field(default_factory=DrivetrainParams, metadata={'key': 'drivetrain'})
    screw: ScrewParams = field(default_factory=ScrewParams, metadata={'key': 'screw'})
    caliper: CaliperParams = field(default_factory=CaliperParams, metadata={'key': 'caliper'})
    observer: ObserverGains = field(default_factory=ObserverGains, metadata={'key': 'observer'})
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig, metadata={'key': 'estimator'})
    upper: UpperGains = field(default_factory=UpperGains, metadata={'key': 'upper'})
    lower: LowerGains = field(default_factory=LowerGains, metadata={'key': 'lower'})
    pid: PidGains = field(default_factory=PidGains, metadata={'key': 'pid'})
    plant: PlantOptions = field(default_factory=PlantOptions, metadata={'key': 'plant'})


@dataclass(frozen=True)
class ScenarioSpec:
    """One braking run: initial speed, road schedule, controller and parameters."""

    name: str = param('scenario', 'name')
    v0: float = param(17.0, 'v0_mps')
    duration: float = param(10.0, 'duration_s')
    controller: str = param('smc', 'controller')
    dt_plant: float = param(5e-5, 'dt_plant_s')
    t_ctrl: float = param(1e-3, 't_ctrl_s')
    seed: int = param(0, 'seed')
    per_wheel_control: bool = param(False, 'per_wheel_control')
    road: Tuple[RoadSegment, ...] = field(default=(RoadSegment(),), metadata={'key': 'road'})
    noise: NoiseSpec = field(default_factory=NoiseSpec, metadata={'key': 'noise'})
    params: ModelParams = field(default_factory=ModelParams, metadata={'key': 'params'})

    @property
    def substeps(self) -> int:
        return int(round(self.t_ctrl / self.dt_plant))

    @property
    def periods(self) -> int:
        return int(math.floor(self.duration / self.t_ctrl + 1e-9))

    def validate(self) -> None:
        """
        Check cross-field invariants.

        Raises:
            ScenarioError: Naming the offending key
        """
        if self.controller not in CONTROLLERS:
            raise ScenarioError('controller', f"must be one of {CONTROLLERS}, got {self.controller!r}")
        if self.v0 < 0:
            raise ScenarioError('v0_mps', f"must be non-negative, got {self.v0}")
        if self.duration <= 0:
            raise ScenarioError('duration_s', f"must be positive, got {self.duration}")
        if self.dt_plant <= 0 or self.t_ctrl <= 0:
            raise ScenarioError('dt_plant_s', "plant step and control period must be positive")
        if self.dt_plant > 1e-4:
            raise ScenarioError('dt_plant_s', f"must not exceed 1e-4 s to resolve the motor, got {self.dt_plant}")
        if self.substeps < 1 or abs(self.substeps * self.dt_plant - self.t_ctrl) > 1e-9 * self.t_ctrl:
            raise ScenarioError('dt_plant_s', f"{self.dt_plant} does not divide t_ctrl_s={self.t_ctrl}")
        if self.params.plant.tyre_source not in TYRE_SOURCES:
            raise ScenarioError('params.plant.tyre_source', f"must be one of {TYRE_SOURCES}")

        if not self.road:
            raise ScenarioError('road', "needs at least one segment")
        if self.road[0].start != 0.0:
            raise ScenarioError('road.0.start_s', f"first segment must start at 0, got {self.road[0].start}")
        for i, seg in enumerate(self.road):
            if not MU_MIN <= seg.mu <= MU_MAX:
                raise ScenarioError(f'road.{i}.mu', f"{seg.mu} outside [{MU_MIN}, {MU_MAX}]")
            if i and seg.start <= self.road[i - 1].start:
                raise ScenarioError(f'road.{i}.start_s', "segments must be strictly time-ordered")
        for f in dataclasses.fields(self.noise):
            if getattr(self.noise, f.name) < 0:
                raise ScenarioError(f"noise.{f.metadata['key']}", "must be non-negative")


def _coerce(value: Any, default: Any, ftype: Any, keypath: str) -> Any:
    optional = default is None
    if value is None:
        if optional:
            return None
        raise ScenarioError(keypath, "must not be null")
    if ftype is bool or isinstance(default, bool):
        if not isinstance(value, bool):
            raise ScenarioError(keypath, f"expected true/false, got {value!r}")
        return value
    if ftype is int or isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(keypath, f"expected an integer, got {value!r}")
        return value
    if ftype is str or isinstance(default, str):
        if not isinstance(value, str):
            raise ScenarioError(keypath, f"expected a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(keypath, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(keypath, f"must be finite, got {value}")
    return value


def _build(cls, data: Any, prefix: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(prefix.rstrip('.') or '<root>', f"expected a mapping, got {type(data).__name__}")

    by_key = {f.metadata.get('key', f.name): f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in by_key:
            raise ScenarioError(f"{prefix}{key}", "unknown key")

    defaults = cls()
    kwargs = {}
    for key, f in by_key.items():
        if key not in data:
            continue
        keypath = f"{prefix}{key}"
        default = getattr(defaults, f.name)
        value = data[key]
        if dataclasses.is_dataclass(default):
            kwargs[f.name] = _build(type(default), value, keypath + '.')
        elif f.name == 'road':
            if not isinstance(value, list):
                raise ScenarioError(keypath, "expected a list of {start_s, mu} segments")
            kwargs[f.name] = tuple(_build(RoadSegment, seg, f"{keypath}.{i}.") for i, seg in enumerate(value))
        else:
            kwargs[f.name] = _coerce(value, default, f.type, keypath)
    return cls(**kwargs)


def validate_params(params: ModelParams) -> None:
    """
    Run every parameter group's own invariant checks.

    The estimator bands are checked after resolving them against the tyre
    slope at the static rear load, as a run would.

    Raises:
        ScenarioError: Keyed by the failing group, e.g. params.caliper
    """
    group = 'params'
    try:
        for f in dataclasses.fields(params):
            group = f"params.{f.metadata['key']}"
            part = getattr(params, f.name)
            if f.name != 'estimator' and hasattr(part, 'validate'):
                part.validate()
        group = 'params.estimator'
        slope = initial_slope(params.tyre, axle_loads(params.vehicle, 0.0).rear)
        params.estimator.resolved(slope).validate()
    except ConfigurationError as e:
        raise ScenarioError(group, str(e)) from e


def scenario_from_dict(data: Dict[str, Any]) -> ScenarioSpec:
    """
    Build and validate a scenario from a parsed file.

    Raises:
        ScenarioError: Unknown key, wrong type or violated invariant
    """
    spec = _build(ScenarioSpec, data, '')
    spec.validate()
    validate_params(spec.params)
    return spec


def _to_plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.metadata.get('key', f.name): _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def scenario_to_dict(spec: ScenarioSpec) -> Dict[str, Any]:
    """Fully resolved scenario as a plain mapping using file keys."""
    return _to_plain(spec)


def _set_path(data: Dict[str, Any], path: List[str], value: Any, text: str) -> None:
    node: Union[Dict[str, Any], List[Any]] = data
    for i, part in enumerate(path):
        last = i == len(path) - 1
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                raise ScenarioError('.'.join(path[:i + 1]), f"no list element for override {text!r}")
            idx = int(part)
            if last:
                node[idx] = value
            else:
                node = node[idx]
            continue
        if not isinstance(node, dict):
            raise ScenarioError('.'.join(path[:i]), f"cannot descend into a value for override {text!r}")
        if last:
            node[part] = value
        else:
            if node.get(part) is None:
                node[part] = {}
            node = node[part]


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Apply "key.path=value" overrides to a raw scenario mapping.

    Unknown keys are not checked here; strict parsing rejects them afterwards.
    """
    data = copy.deepcopy(data) if data else {}
    for text in overrides:
        path, value = parse_override(text)
        _set_path(data, path, value, text)
    return data


def load_scenario(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> ScenarioSpec:
    """
    Load a scenario file (or the defaults when path is None) and apply overrides.

    Args:
        path: YAML scenario file
        overrides: "key.path=value" strings

    Returns:
        Validated ScenarioSpec

    Raises:
        ScenarioError: File unreadable, malformed or invalid
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ScenarioError(str(path), f"cannot read scenario file: {e}")
        except yaml.YAMLError as e:
            raise ScenarioError(str(path), f"invalid YAML: {e}")
        if not isinstance(data, dict):
            raise ScenarioError(str(path), "scenario file must contain a mapping")
        logger.debug("Loaded scenario file %s", path)

    return scenario_from_dict(apply_overrides(data, overrides))


def _with(spec: ScenarioSpec, **changes) -> ScenarioSpec:
    spec = dataclasses.replace(spec, **changes)
    spec.validate()
    return spec


def canonical_scenarios(base: Optional[ScenarioSpec] = None) -> List[ScenarioSpec]:
    """
    The canonical road cases: constant high friction, high-to-low and
    low-to-high jumps at 2 s, and the estimator schedule 0.2 -> 0.8 -> 0.5.
    """
    base = base or ScenarioSpec()
    return [
        _with(base, name='single_mu', road=(RoadSegment(0.0, 0.8),), duration=10.0),
        _with(base, name='high_to_low', road=(RoadSegment(0.0, 0.8), RoadSegment(2.0, 0.2)), duration=30.0),
        _with(base, name='low_to_high', road=(RoadSegment(0.0, 0.2), RoadSegment(2.0, 0.8)), duration=12.0),
        _with(base, name='estimator_schedule',
              road=(RoadSegment(0.0, 0.2), RoadSegment(1.3, 0.8), RoadSegment(2.7, 0.5)), duration=15.0),
    ]
