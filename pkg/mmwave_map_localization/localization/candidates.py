from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Iterable, Sequence

from mmwave_map_localization.common import EPS_HIT, SPEED_OF_LIGHT
from mmwave_map_localization.config_def import ObservationMode
from mmwave_map_localization.errors import LocalizationError
from mmwave_map_localization.geometry.indoor_map import IndoorMap
from mmwave_map_localization.geometry.primitives import Ray, Vec3, angles_to_direction, as_vec3, path_length
from mmwave_map_localization.raytracer.tracer import MultipathComponent, Signature, signature_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PathObservation:
    """ Angle and time of flight of one multipath component, as seen by a BS

    In AoD mode the user receives and the angle is the departure angle at the BS;
    in AoA mode the user transmits and the angle is the arrival angle at the BS.
    Either way the path is retraced from the BS along the angle.
    """

    bs_id: str
    bs_position: Vec3
    angle: tuple[float, float]
    tof: float
    mode: ObservationMode = ObservationMode.AOD

    def __post_init__(self):
        object.__setattr__(self, 'bs_position', as_vec3(self.bs_position))
        if not all(math.isfinite(a) for a in self.angle) or not math.isfinite(self.tof):
            raise ValueError(f'observation from BS {self.bs_id} has non-finite angle or time of flight')

    @property
    def path_budget(self) -> float:
        """ Propagated length implied by the time of flight (m) """
        return SPEED_OF_LIGHT * self.tof


@dataclass(frozen=True, eq=False)
class CandidateLocation:
    """ A user position hypothesised by retracing one observation through the map """

    position: Vec3
    source: tuple[str, int]
    branch_signature: Signature
    residual_length: float
    vertices: tuple[Vec3, ...] = field(default=(), repr=False)

    @property
    def signature(self) -> str:
        return signature_text(self.branch_signature)


def observations_from_components(components: Iterable[MultipathComponent], bs_id: str,
                                 bs_position: Sequence[float] | Vec3,
                                 mode: ObservationMode = ObservationMode.AOD) -> list[PathObservation]:
    """ Builds the observations a BS would report for traced components

    Args:
        components (Iterable[MultipathComponent]): BS->user components for AoD mode, user->BS components for AoA mode
        bs_id (str): BS identifier
        bs_position (Vec3): BS position
        mode (ObservationMode, optional): observation mode. Defaults to ObservationMode.AOD.

    Returns:
        list[PathObservation]: one observation per component
    """
    return [
        PathObservation(
            bs_id=bs_id,
            bs_position=as_vec3(bs_position),
            angle=c.aod if mode is ObservationMode.AOD else c.aoa,
            tof=c.tof,
            mode=mode,
        )
        for c in components
    ]


def generate_candidates(indoor_map: IndoorMap, obs: PathObservation, max_interactions: int = 3,
                        obs_index: int = 0) -> list[CandidateLocation]:
    """ Retraces an observation through the map into candidate user locations

    A ray leaves the BS along the observed angle with a length budget of c * tof.
    At every surface hit inside the budget it splits into a reflected and a
    transmitted continuation; a branch ends where its budget runs out and that
    end point is a candidate. Branches that would need more than
    max_interactions interactions are dropped, so at most 2^k candidates result.

    Args:
        indoor_map (IndoorMap): environment
        obs (PathObservation): observation to retrace
        max_interactions (int, optional): k, the interaction cap. Defaults to 3.
        obs_index (int, optional): index of the observation, recorded in each candidate's source. Defaults to 0.

    Returns:
        list[CandidateLocation]: candidates sorted by signature

    Raises:
        LocalizationError: the time of flight leaves no path budget
    """
    budget = obs.path_budget
    if budget <= 0.0:
        raise LocalizationError(f'observation {obs_index} from BS {obs.bs_id} has no path budget (tof={obs.tof})')

    candidates: list[CandidateLocation] = []
    dropped = 0

    stack = [Ray(origin=obs.bs_position, direction=angles_to_direction(*obs.angle))]
    while stack:
        ray = stack.pop()
        remaining = budget - ray.accumulated_length
        hit = indoor_map.first_hit(ray.origin, ray.direction)

        if hit is None or hit[2] >= remaining - EPS_HIT:
            # an end point on a surface is pulled EPS_HIT back to the side the ray arrives from
            end = ray.point_at(remaining if hit is None else min(remaining, hit[2] - EPS_HIT))
            vertices = (obs.bs_position,) + tuple(i.point for i in ray.interactions) + (end,)
            candidates.append(CandidateLocation(
                position=as_vec3(end),
                source=(obs.bs_id, obs_index),
                branch_signature=ray.signature,
                residual_length=budget - path_length(vertices),
                vertices=vertices,
            ))
            continue

        if len(ray.interactions) >= max_interactions:
            dropped += 1
            continue

        surface, point, distance = hit
        stack.append(ray.transmitted(surface, point, distance))
        stack.append(ray.reflected(surface, point, distance))

    candidates.sort(key=lambda c: c.signature)

    logger.debug(f'Observation {obs_index} from BS {obs.bs_id}: {len(candidates)} candidates, '
                 f'{dropped} branches over the {max_interactions}-interaction cap dropped')

    return candidates
