import math

import numpy as np
import pytest

from mmwave_map_localization.common import SPEED_OF_LIGHT
from mmwave_map_localization.config_def import ObservationMode, TraceConfig, TraceMethod
from mmwave_map_localization.errors import LocalizationError
from mmwave_map_localization.geometry import vec3
from mmwave_map_localization.localization import (
    CandidateLocation,
    ClusterEstimate,
    PathObservation,
    locate,
    observations_from_components,
)
from mmwave_map_localization.localization.map_at import _rank
from mmwave_map_localization.raytracer import trace

ONE_BOUNCE = TraceConfig(method=TraceMethod.IMAGE, max_reflections=1)


def test_single_wall_round_trip(single_wall, exact_trace):
    bs, user = vec3(0, 2, 1.5), vec3(6, 2, 1.5)
    observations = observations_from_components(trace(single_wall, bs, user, exact_trace), 'bs', bs)

    estimate, diagnostics = locate(single_wall, observations)

    assert np.linalg.norm(estimate - user) < 1e-6
    assert diagnostics.best.member_count == 2
    assert not diagnostics.ambiguous


def test_los_and_two_reflections(corridor):
    bs, user = vec3(0, 2, 1.5), vec3(6, 1, 1.5)
    components = trace(corridor, bs, user, ONE_BOUNCE)
    assert [c.signature for c in components] == ['LOS', 'south:R', 'north:R']

    estimate, diagnostics = locate(corridor, observations_from_components(components, 'bs', bs))

    # one candidate from the LOS path, a reflected and a transmitted one from each bounce
    assert len(diagnostics.candidates) == 5
    assert diagnostics.best.member_count == 3
    assert diagnostics.best.distinct_observations == 3
    assert np.linalg.norm(estimate - user) < 1e-6


def test_single_observation_is_ambiguous(free_space):
    obs = PathObservation(bs_id='bs', bs_position=vec3(1, 1, 1.5), angle=(0.0, 0.0), tof=3.0 / SPEED_OF_LIGHT)

    estimate, diagnostics = locate(free_space, [obs])

    assert len(diagnostics.candidates) == 1
    assert diagnostics.ambiguous
    np.testing.assert_allclose(estimate, [4, 1, 1.5], atol=1e-9)


def test_multi_bs_fusion(corridor, exact_trace):
    user = vec3(6, 1, 1.2)
    observations = []
    for bs_id, bs in (('a', vec3(0, 2, 2.5)), ('b', vec3(12, 3, 2.5))):
        observations += observations_from_components(trace(corridor, bs, user, exact_trace), bs_id, bs)

    estimate, diagnostics = locate(corridor, observations)

    assert np.linalg.norm(estimate - user) < 1e-6
    assert {m.source[0] for m in diagnostics.best.members} == {'a', 'b'}


def test_configuration_duality(corridor, exact_trace):
    bs, user = vec3(0, 2, 2.5), vec3(7, 3, 1.5)

    aod = observations_from_components(trace(corridor, bs, user, exact_trace), 'bs', bs, ObservationMode.AOD)
    aoa = observations_from_components(trace(corridor, user, bs, exact_trace), 'bs', bs, ObservationMode.AOA)

    estimate_aod, _ = locate(corridor, aod)
    estimate_aoa, _ = locate(corridor, aoa)

    np.testing.assert_allclose(estimate_aod, estimate_aoa, atol=1e-9)
    assert np.linalg.norm(estimate_aod - user) < 1e-6


def test_noisy_estimate_stays_close(corridor, exact_trace):
    rng = np.random.default_rng(7)
    bs, user = vec3(0, 2, 2.5), vec3(6, 1, 1.5)
    clean = observations_from_components(trace(corridor, bs, user, exact_trace), 'bs', bs)

    noisy = [
        PathObservation(
            bs_id=o.bs_id,
            bs_position=o.bs_position,
            angle=(o.angle[0] + rng.normal(0, math.radians(0.1)), o.angle[1] + rng.normal(0, math.radians(0.1))),
            tof=o.tof + rng.normal(0, 0.05e-9),
        )
        for o in clean
    ]

    estimate, _ = locate(corridor, noisy)
    assert np.linalg.norm(estimate - user) < 0.4


def test_office_round_trip(office):
    bs, user = vec3(15, 12.5, 2.5), vec3(12, 8, 1.5)
    components = trace(office, bs, user, TraceConfig(tessellation_factor=20, capture_alpha=1.5))
    retraceable = [c for c in components if len(c.interactions) <= 3]
    assert len(retraceable) >= 2

    estimate, _ = locate(office, observations_from_components(retraceable, 'bs', bs))

    assert np.linalg.norm(estimate - user) < 1e-6


def test_no_observations(free_space):
    with pytest.raises(LocalizationError):
        locate(free_space, [])


SCENARIO_TRACE = TraceConfig(tessellation_factor=20, capture_alpha=1.5)


def strongest(components, count: int = 3, k: int = 3):
    usable = [c for c in components if len(c.interactions) <= k]
    return sorted(usable, key=lambda c: (-c.received_power_dbm, c.tof, c.signature))[:count]


def test_rank_ignores_rounding_noise():
    def cluster(spread: float) -> ClusterEstimate:
        members = tuple(
            CandidateLocation(position=vec3(x, 0, 1.5), source=('bs', i), branch_signature=(), residual_length=0.0)
            for i, x in enumerate((0.0, spread))
        )
        return ClusterEstimate(centroid=vec3(spread / 2, 0, 1.5), member_count=2, members=members)

    tight, loose = cluster(0.2000005), cluster(0.2000005 + 2e-9)
    assert loose.rms_radius > tight.rms_radius
    assert _rank(loose) == _rank(tight)
    assert _rank(cluster(0.21)) > _rank(tight)


@pytest.mark.slow
def test_mirror_tie_settled_by_tracing(office):
    bs, user = vec3(35, 5, 2.5), vec3(18.712, 2.271, 1.5)
    observations = observations_from_components(strongest(trace(office, bs, user, SCENARIO_TRACE)), 'BS7', bs)

    estimate, diagnostics = locate(office, observations, trace_cfg=SCENARIO_TRACE)

    assert np.linalg.norm(estimate - user) < 1e-6
    if diagnostics.consistency:
        assert diagnostics.consistency[0] == (0, 0)
        assert not diagnostics.ambiguous


@pytest.mark.slow
def test_office_round_trips(office):
    rng = np.random.default_rng(41)
    lo, hi = office.bounding_box
    checked = 0
    for _ in range(20):
        while True:
            bs = vec3(rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), 2.5)
            user = vec3(rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), 1.5)
            if min(office.clearance(bs), office.clearance(user)) >= 0.3 and np.linalg.norm(bs - user) > 1.0:
                break

        observations = observations_from_components(strongest(trace(office, bs, user, SCENARIO_TRACE)), 'bs', bs)
        if len(observations) < 2:
            continue
        checked += 1

        estimate, diagnostics = locate(office, observations, trace_cfg=SCENARIO_TRACE)
        assert np.linalg.norm(estimate - user) < 1e-6, f'bs {bs.tolist()} user {user.tolist()}'

    assert checked >= 10
