"""Map-assisted localization from per-path angle and time of flight.

Every observation is retraced through the map into candidate locations; the
candidates of all observations, from every BS, are pooled and grouped, and the
user is placed at the centroid of the group backed by the most candidates.
"""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from typing import Optional, Sequence

import numpy as np

from mmwave_map_localization.common import EPS_LEN
from mmwave_map_localization.config_def import ObservationMode, TraceConfig
from mmwave_map_localization.errors import LocalizationError, TraceError
from mmwave_map_localization.geometry.indoor_map import IndoorMap
from mmwave_map_localization.geometry.primitives import Vec3, angles_to_direction
from mmwave_map_localization.localization.candidates import CandidateLocation, PathObservation, generate_candidates
from mmwave_map_localization.localization.clustering import DEFAULT_LINKAGE, ClusterEstimate, cluster_candidates
from mmwave_map_localization.raytracer.tracer import trace

logger = logging.getLogger(__name__)


ANGLE_MATCH = math.radians(3.0)
""" Largest angle between an observed and a predicted path for them to be the same component """

POWER_MARGIN_DB = 1.0
""" A predicted path this much stronger than the weakest matched one should have been observed """


@dataclass(frozen=True, eq=False)
class LocateDiagnostics:
    candidates: tuple[CandidateLocation, ...]
    # best first
    clusters: tuple[ClusterEstimate, ...]
    best: ClusterEstimate
    ambiguous: bool
    # (unmatched observations, unexplained paths) of the tied clusters that were traced
    consistency: tuple[tuple[int, int], ...] = ()


def _rank(cluster: ClusterEstimate) -> tuple[int, int, int, int]:
    # radius and residual differences below EPS_LEN are rounding noise
    return (-cluster.member_count, -cluster.distinct_observations,
            math.floor(cluster.rms_radius / EPS_LEN), math.floor(cluster.mean_residual / EPS_LEN))


def _inconsistency(indoor_map: IndoorMap, position: Vec3, observations: Sequence[PathObservation], k: int,
                   d_threshold: float, trace_cfg: TraceConfig) -> tuple[int, int]:
    """ Compares the observations with the paths a user at position would produce

    Every observation is paired with an unused predicted path of at most k
    interactions whose length is within d_threshold of the observed budget and
    whose angle is within ANGLE_MATCH of the observed one, closest length first.

    Returns:
        tuple[int, int]: observations left unpaired, and unpaired predicted paths
            stronger than the weakest paired one by POWER_MARGIN_DB
    """
    by_bs: dict[str, list[PathObservation]] = {}
    for obs in observations:
        by_bs.setdefault(obs.bs_id, []).append(obs)

    unmatched = unexplained = 0
    for bs_id, group in by_bs.items():
        bs, mode = group[0].bs_position, group[0].mode
        try:
            if mode is ObservationMode.AOD:
                predicted = trace(indoor_map, bs, position, trace_cfg)
            else:
                predicted = trace(indoor_map, position, bs, trace_cfg)
        except TraceError as e:
            logger.debug(f'Hypothesis {np.round(position, 3).tolist()} cannot be traced from {bs_id}: {e}')
            return len(observations), len(observations)

        predicted = [c for c in predicted if len(c.interactions) <= k]
        directions = [angles_to_direction(*(c.aod if mode is ObservationMode.AOD else c.aoa)) for c in predicted]
        used: set[int] = set()
        for obs in group:
            seen = angles_to_direction(*obs.angle)
            options = [
                (abs(c.path_length - obs.path_budget), i) for i, c in enumerate(predicted)
                if i not in used
                and abs(c.path_length - obs.path_budget) <= d_threshold
                and math.acos(max(-1.0, min(1.0, float(seen @ directions[i])))) <= ANGLE_MATCH
            ]
            if options:
                used.add(min(options)[1])
            else:
                unmatched += 1

        weakest = min((predicted[i].received_power_dbm for i in used), default=-math.inf)
        unexplained += sum(1 for i, c in enumerate(predicted)
                           if i not in used and c.received_power_dbm > weakest + POWER_MARGIN_DB)

    return unmatched, unexplained


def locate(indoor_map: IndoorMap, observations: Sequence[PathObservation], k: int = 3,
           d_threshold: float = DEFAULT_LINKAGE,
           trace_cfg: Optional[TraceConfig] = None) -> tuple[Vec3, LocateDiagnostics]:
    """ Estimates the user position from the observations of one or more BSs

    The winning cluster has the most members, then the most distinct observations.
    Clusters still level on both are typically mirror images of the user across a
    wall. With trace_cfg the paths from each BS to every such centroid are traced and
    the centroid that reproduces the observations best wins: fewest unpaired
    observations, then fewest strong predicted paths nobody observed. Remaining ties
    go to the tighter cluster, then to the one with the smaller mean length residual.

    Args:
        indoor_map (IndoorMap): environment
        observations (Sequence[PathObservation]): observations from every BS
        k (int, optional): interaction cap for candidate generation. Defaults to 3.
        d_threshold (float, optional): cluster linkage distance (m). Defaults to 0.40.
        trace_cfg (Optional[TraceConfig], optional): tracer settings for checking tied
            clusters; None skips the check. Defaults to None.

    Returns:
        tuple[Vec3, LocateDiagnostics]: position estimate and the clusters behind it. The
            diagnostics are flagged ambiguous with a single observation or a tie on
            (member count, distinct observations) that the trace check did not settle.

    Raises:
        LocalizationError: no observations, or no candidate could be generated
    """
    if len(observations) == 0:
        raise LocalizationError('no observations to localize from')

    candidates: list[CandidateLocation] = []
    for index, obs in enumerate(observations):
        candidates.extend(generate_candidates(indoor_map, obs, k, obs_index=index))

    if len(candidates) == 0:
        raise LocalizationError(f'none of the {len(observations)} observations produced a candidate location')

    candidates.sort(key=lambda c: (c.source, c.signature))

    clusters = cluster_candidates(candidates, d_threshold)
    ranked = sorted(clusters, key=_rank)
    level = [c for c in ranked if _rank(c)[:2] == _rank(ranked[0])[:2]]
    tied = len(level) > 1

    scores: tuple[tuple[int, int], ...] = ()
    if tied and trace_cfg is not None:
        score = {id(c): _inconsistency(indoor_map, c.centroid, observations, k, d_threshold, trace_cfg)
                 for c in level}
        level.sort(key=lambda c: (score[id(c)], _rank(c)))
        ranked = level + ranked[len(level):]
        scores = tuple(score[id(c)] for c in level)
        tied = scores[0] == scores[1]
        logger.debug(f'{len(level)} tied clusters checked against the map: {list(scores)}')

    best = ranked[0]
    ambiguous = len(observations) < 2 or tied

    logger.debug(f'{len(observations)} observations -> {len(candidates)} candidates, {len(clusters)} clusters; '
                 f'best has {best.member_count} members from {best.distinct_observations} observations'
                 f'{" (ambiguous)" if ambiguous else ""}')

    return best.centroid, LocateDiagnostics(
        candidates=tuple(candidates),
        clusters=tuple(ranked),
        best=best,
        ambiguous=ambiguous,
        consistency=scores,
    )
