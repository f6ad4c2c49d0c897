import math

import numpy as np
import pytest

from mmwave_map_localization.common import EPS_HIT, EPS_LEN, SPEED_OF_LIGHT
from mmwave_map_localization.config_def import ObservationMode, TraceConfig, TraceMethod
from mmwave_map_localization.errors import LocalizationError
from mmwave_map_localization.geometry import vec3
from mmwave_map_localization.localization import PathObservation, generate_candidates, observations_from_components
from mmwave_map_localization.raytracer import trace


def observation(bs, azimuth, elevation, length, mode=ObservationMode.AOD) -> PathObservation:
    return PathObservation(bs_id='bs', bs_position=vec3(*bs), angle=(azimuth, elevation),
                           tof=length / SPEED_OF_LIGHT, mode=mode)


def test_free_space_single_candidate(free_space):
    obs = observation((1, 1, 1.5), math.atan2(4, 3), 0.0, 3.0)

    candidates = generate_candidates(free_space, obs)

    assert len(candidates) == 1
    np.testing.assert_allclose(candidates[0].position, [1 + 1.8, 1 + 2.4, 1.5], atol=1e-9)
    assert candidates[0].signature == 'LOS'
    assert candidates[0].residual_length == pytest.approx(0.0, abs=1e-9)


def test_wall_splits_into_reflection_and_transmission(crossing_wall):
    obs = observation((0, 0, 1.5), 0.0, 0.0, 5.0)

    candidates = generate_candidates(crossing_wall, obs)

    assert [c.signature for c in candidates] == ['wall:R', 'wall:T']
    reflected, transmitted = candidates
    np.testing.assert_allclose(reflected.position, [-1, 0, 1.5], atol=1e-9)
    np.testing.assert_allclose(transmitted.position, [5, 0, 1.5], atol=1e-9)
    np.testing.assert_allclose(reflected.vertices[1], [2, 0, 1.5], atol=1e-9)
    for c in candidates:
        assert c.residual_length == pytest.approx(0.0, abs=1e-6)
        assert c.source == ('bs', 0)


def test_budget_short_of_wall(crossing_wall):
    candidates = generate_candidates(crossing_wall, observation((0, 0, 1.5), 0.0, 0.0, 1.5))
    assert [c.signature for c in candidates] == ['LOS']


def test_interaction_cap_bounds_candidates(corridor):
    # a steep ray bounces between the corridor walls many times within 30 m
    obs = observation((0, 2, 1.5), math.radians(80), 0.0, 30.0)

    for k in range(4):
        candidates = generate_candidates(corridor, obs, max_interactions=k)
        assert len(candidates) <= 2 ** k


def test_candidate_count_bound_over_observations(corridor):
    components = trace(corridor, vec3(0, 1, 1.5), vec3(8, 3, 1.5), TraceConfig(method=TraceMethod.IMAGE))
    observations = observations_from_components(components[:3], 'bs', vec3(0, 1, 1.5))

    total = sum(len(generate_candidates(corridor, obs, 3, i)) for i, obs in enumerate(observations))

    assert total <= 3 * 2 ** 3


def test_every_traced_component_retraces_to_the_user(corridor):
    bs, user = vec3(0, 1, 1.5), vec3(8, 3, 1.2)
    components = trace(corridor, bs, user, TraceConfig(method=TraceMethod.IMAGE))

    for index, obs in enumerate(observations_from_components(components, 'bs', bs)):
        candidates = generate_candidates(corridor, obs, 3, index)
        matching = [c for c in candidates if c.branch_signature == components[index].interactions]
        assert len(matching) == 1
        np.testing.assert_allclose(matching[0].position, user, atol=1e-6)


def test_aoa_observations_use_arrival_angle(single_wall):
    user, bs = vec3(0, 2, 1.5), vec3(6, 2, 1.5)
    components = trace(single_wall, user, bs, TraceConfig(method=TraceMethod.IMAGE))

    observations = observations_from_components(components, 'bs', bs, ObservationMode.AOA)

    assert all(o.mode is ObservationMode.AOA for o in observations)
    assert observations[0].angle == pytest.approx((math.pi, 0.0))
    for obs in observations:
        positions = [c.position for c in generate_candidates(single_wall, obs)]
        assert any(np.linalg.norm(p - user) < 1e-6 for p in positions)


def test_non_positive_budget(free_space):
    obs = PathObservation(bs_id='bs', bs_position=vec3(1, 1, 1), angle=(0.0, 0.0), tof=0.0)
    with pytest.raises(LocalizationError, match='no path budget'):
        generate_candidates(free_space, obs)


def test_non_finite_observation():
    with pytest.raises(ValueError):
        PathObservation(bs_id='bs', bs_position=vec3(1, 1, 1), angle=(math.nan, 0.0), tof=1e-9)


@pytest.mark.parametrize('length', [2.0 - 5e-10, 2.0, 2.0 + 5e-10])
def test_end_point_on_a_wall_is_pulled_back(crossing_wall, length):
    candidates = generate_candidates(crossing_wall, observation((0, 0, 1.5), 0.0, 0.0, length))

    assert [c.signature for c in candidates] == ['LOS']
    end = candidates[0].position
    assert end[0] < 2.0
    assert end[0] == pytest.approx(2.0 - EPS_HIT, abs=1e-12)
    assert abs(candidates[0].residual_length) <= EPS_LEN
