import numpy as np
import pytest

from mmwave_map_localization.geometry import vec3
from mmwave_map_localization.localization import CandidateLocation, UnionFind, cluster_candidates


def candidate(x: float, y: float = 0.0, z: float = 0.0, source: int = 0, residual: float = 0.0) -> CandidateLocation:
    return CandidateLocation(position=vec3(x, y, z), source=('bs', source), branch_signature=(),
                             residual_length=residual)


def test_coincident_points():
    clusters = cluster_candidates([candidate(1, 2, 3, source=i) for i in range(3)])

    assert len(clusters) == 1
    assert clusters[0].member_count == 3
    np.testing.assert_allclose(clusters[0].centroid, [1, 2, 3])
    assert clusters[0].rms_radius == pytest.approx(0.0)
    assert clusters[0].distinct_observations == 3


def test_chained_points_share_a_cluster():
    clusters = cluster_candidates([candidate(0.0), candidate(0.3), candidate(0.6)])

    assert len(clusters) == 1
    assert clusters[0].member_count == 3
    np.testing.assert_allclose(clusters[0].centroid, [0.3, 0, 0])


def test_distant_points_are_separate():
    clusters = cluster_candidates([candidate(0.0), candidate(1.0)])
    assert [c.member_count for c in clusters] == [1, 1]


def test_threshold_is_inclusive():
    assert len(cluster_candidates([candidate(0.0), candidate(0.25)], d_threshold=0.25)) == 1
    assert len(cluster_candidates([candidate(0.0), candidate(0.25)], d_threshold=0.2)) == 2


def test_clusters_ordered_by_first_member():
    clusters = cluster_candidates([candidate(5.0), candidate(0.0), candidate(5.1)])
    assert [c.member_count for c in clusters] == [2, 1]
    assert clusters[0].members[0].position[0] == pytest.approx(5.0)


def test_empty_input():
    assert cluster_candidates([]) == []


def test_cluster_summaries():
    clusters = cluster_candidates([candidate(0.0, source=0, residual=0.1), candidate(0.2, source=0, residual=-0.3)])
    assert clusters[0].distinct_observations == 1
    assert clusters[0].mean_residual == pytest.approx(0.2)
    assert clusters[0].rms_radius == pytest.approx(0.1)


def test_union_find():
    sets = UnionFind(5)
    sets.union(0, 3)
    sets.union(3, 4)
    sets.union(1, 1)

    assert sets.find(4) == sets.find(0)
    assert sets.find(1) != sets.find(0)
    assert sets.groups() == [[0, 3, 4], [1], [2]]


def test_translation_moves_centroids_only():
    rng = np.random.default_rng(9)
    points = rng.uniform(0.0, 3.0, (40, 3))
    shift = np.array([12.5, -7.25, 0.75])

    base = cluster_candidates([candidate(*p, source=i) for i, p in enumerate(points)])
    moved = cluster_candidates([candidate(*(p + shift), source=i) for i, p in enumerate(points)])

    assert [[m.source for m in c.members] for c in moved] == [[m.source for m in c.members] for c in base]
    for a, b in zip(base, moved):
        np.testing.assert_allclose(b.centroid, a.centroid + shift, atol=1e-12)
        assert b.rms_radius == pytest.approx(a.rms_radius, abs=1e-12)
