from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import Sequence

import numpy as np

from mmwave_map_localization.geometry.primitives import Vec3, as_vec3
from mmwave_map_localization.localization.candidates import CandidateLocation

logger = logging.getLogger(__name__)

DEFAULT_LINKAGE = 0.40
""" Candidate linkage distance (m) """


class UnionFind:
    """ Disjoint sets over 0..n-1 with path compression and union by rank """

    def __init__(self, size: int) -> None:
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        # path compression
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        root_x = self.find(x)
        root_y = self.find(y)

        if root_x == root_y:
            return

        if self.rank[root_x] < self.rank[root_y]:
            root_x, root_y = root_y, root_x
        self.parent[root_y] = root_x
        if self.rank[root_x] == self.rank[root_y]:
            self.rank[root_x] += 1

    def groups(self) -> list[list[int]]:
        """ Members of every set, each sorted, ordered by smallest member """
        by_root: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            by_root.setdefault(self.find(x), []).append(x)
        return sorted(by_root.values(), key=lambda g: g[0])


@dataclass(frozen=True, eq=False)
class ClusterEstimate:
    """ A group of mutually close candidate locations """

    centroid: Vec3
    member_count: int
    members: tuple[CandidateLocation, ...]

    @property
    def distinct_observations(self) -> int:
        """ Number of different observations that contributed a member """
        return len({m.source for m in self.members})

    @property
    def rms_radius(self) -> float:
        positions = np.array([m.position for m in self.members])
        return float(np.sqrt(np.mean(np.sum((positions - self.centroid) ** 2, axis=1))))

    @property
    def mean_residual(self) -> float:
        return float(np.mean([abs(m.residual_length) for m in self.members]))


def cluster_candidates(cands: Sequence[CandidateLocation], d_threshold: float = DEFAULT_LINKAGE) -> list[ClusterEstimate]:
    """ Single-linkage grouping of candidate locations

    Two candidates share a cluster when a chain of candidates links them with
    every hop no longer than d_threshold. At most n(n-1)/2 distances are computed.

    Args:
        cands (Sequence[CandidateLocation]): candidates to group
        d_threshold (float, optional): linkage distance (m). Defaults to 0.40.

    Returns:
        list[ClusterEstimate]: clusters ordered by their first member in the input
    """
    n = len(cands)
    if n == 0:
        return []

    positions = np.array([c.position for c in cands], dtype=np.float64)
    sets = UnionFind(n)

    rows, cols = np.triu_indices(n, k=1)
    distances = np.linalg.norm(positions[rows] - positions[cols], axis=1)
    for i, j in zip(rows[distances <= d_threshold], cols[distances <= d_threshold]):
        sets.union(int(i), int(j))

    clusters = []
    for group in sets.groups():
        clusters.append(ClusterEstimate(
            centroid=as_vec3(positions[group].mean(axis=0)),
            member_count=len(group),
            members=tuple(cands[i] for i in group),
        ))

    logger.debug(f'Clustered {n} candidates into {len(clusters)} clusters (d={d_threshold} m)')

    return clusters
