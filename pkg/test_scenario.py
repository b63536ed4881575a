from pathlib import Path

import pytest

from epbabs.exceptions import ScenarioError
from epbabs.scenario import (RoadSegment, ScenarioSpec, apply_overrides, canonical_scenarios, load_scenario,
                             scenario_from_dict, scenario_to_dict)

SCENARIO_DIR = Path(__file__).parent / 'scenarios'


def test_empty_file_gives_defaults():
    spec = scenario_from_dict({})
    assert spec == ScenarioSpec()
    assert spec.v0 == 17.0
    assert spec.substeps == 20
    assert spec.periods == 10000


@pytest.mark.parametrize('data, key', [
    ({'params': {'upper': {'bogus': 1}}}, 'params.upper.bogus'),
    ({'speed': 17.0}, 'speed'),
    ({'v0_mps': 'fast'}, 'v0_mps'),
    ({'v0_mps': -1.0}, 'v0_mps'),
    ({'per_wheel_control': 'yes'}, 'per_wheel_control'),
    ({'seed': 1.5}, 'seed'),
    ({'controller': 'lqr'}, 'controller'),
    ({'road': [{'start_s': 0.5, 'mu': 0.8}]}, 'road.0.start_s'),
    ({'road': [{'start_s': 0.0, 'mu': 1.5}]}, 'road.0.mu'),
    ({'road': [{'start_s': 0.0, 'mu': 0.8}, {'start_s': 0.0, 'mu': 0.2}]}, 'road.1.start_s'),
    ({'road': [{'start_s': 0.0, 'friction': 0.8}]}, 'road.0.friction'),
    ({'road': {'start_s': 0.0}}, 'road'),
    ({'dt_plant_s': 3e-5}, 'dt_plant_s'),
    ({'dt_plant_s': 2e-4, 't_ctrl_s': 2e-3}, 'dt_plant_s'),
    ({'noise': {'speed_mps': -0.1}}, 'noise.speed_mps'),
    ({'params': {'plant': {'tyre_source': 'csv'}}}, 'params.plant.tyre_source'),
    ({'params': {'motor': 3}}, 'params.motor'),
    ({'params': {'observer': {'sliding_gain_radps2': float('nan')}}}, 'params.observer.sliding_gain_radps2'),
    ({'params': {'caliper': {'stiffness_n_per_m': -1.0}}}, 'params.caliper'),
    ({'params': {'upper': {'eps1_per_s': -40.0}}}, 'params.upper'),
])
def test_invalid_scenarios_name_the_key(data, key):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(data)
    assert info.value.key == key


def test_overrides_reach_nested_keys():
    data = apply_overrides({}, ['params.upper.eps1_per_s=40', 'v0_mps=13.89', 'per_wheel_control=true'])
    spec = scenario_from_dict(data)
    assert spec.params.upper.eps1 == 40.0
    assert spec.v0 == 13.89
    assert spec.per_wheel_control


def test_override_into_road_list():
    data = {'road': [{'start_s': 0.0, 'mu': 0.8}, {'start_s': 2.0, 'mu': 0.2}]}
    spec = scenario_from_dict(apply_overrides(data, ['road.1.mu=0.3']))
    assert spec.road[1] == RoadSegment(2.0, 0.3)
    assert data['road'][1]['mu'] == 0.2


@pytest.mark.parametrize('text', ['road.5.mu=0.3', 'novalue', '=3', 'a..b=1'])
def test_malformed_overrides(text):
    data = {'road': [{'start_s': 0.0, 'mu': 0.8}]}
    with pytest.raises(ScenarioError):
        apply_overrides(data, [text])


def test_load_file_with_overrides():
    spec = load_scenario(SCENARIO_DIR / 'high_to_low.yaml', ['duration_s=4'])
    assert spec.name == 'high_to_low'
    assert spec.road == (RoadSegment(0.0, 0.8), RoadSegment(2.0, 0.2))
    assert spec.duration == 4.0
    assert spec.periods == 4000


@pytest.mark.parametrize('path', sorted(SCENARIO_DIR.glob('*.yaml')), ids=lambda p: p.stem)
def test_shipped_scenarios_are_valid(path):
    spec = load_scenario(path)
    assert spec.name == path.stem
    assert scenario_from_dict(scenario_to_dict(spec)) == spec


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / 'missing.yaml')

    broken = tmp_path / 'broken.yaml'
    broken.write_text("v0_mps: [1, 2\n")
    with pytest.raises(ScenarioError, match='invalid YAML'):
        load_scenario(broken)

    listing = tmp_path / 'list.yaml'
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ScenarioError, match='mapping'):
        load_scenario(listing)


def test_canonical_scenarios():
    specs = {s.name: s for s in canonical_scenarios()}
    assert list(specs) == ['single_mu', 'high_to_low', 'low_to_high', 'estimator_schedule']
    assert specs['high_to_low'].road == (RoadSegment(0.0, 0.8), RoadSegment(2.0, 0.2))
    assert [seg.mu for seg in specs['estimator_schedule'].road] == [0.2, 0.8, 0.5]
    assert specs['high_to_low'].duration == 30.0
    assert [s.duration for s in specs.values()] == [10.0, 30.0, 12.0, 15.0]


def test_canonical_scenarios_keep_base_settings():
    base = ScenarioSpec(controller='pid', seed=4)
    assert all(s.controller == 'pid' and s.seed == 4 for s in canonical_scenarios(base))
