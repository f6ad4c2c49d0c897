"""Hybrid indoor ray tracer.

Shooting-bouncing rays (SBR) discover which sequences of reflecting surfaces
connect the TX to the RX; each sequence is then solved exactly with the method
of images. Transmissions never bend a ray, so the exact geometry of a path is
fixed by its reflections alone and the transmissions are read off the solved
segments.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
import logging
from typing import Optional, Sequence

import numpy as np

from mmwave_map_localization.common import EPS_HIT, SPEED_OF_LIGHT
from mmwave_map_localization.config_def import InteractionKind, TraceConfig, TraceMethod
from mmwave_map_localization.errors import TraceError
from mmwave_map_localization.geometry.indoor_map import IndoorMap
from mmwave_map_localization.geometry.primitives import (
    Vec3,
    as_vec3,
    direction_to_angles,
    incidence_angle,
    mirror_point,
    path_length,
)
from mmwave_map_localization.raytracer.launch import launch_directions
from mmwave_map_localization.raytracer.propagation import (
    GAMMA_INTERCEPT,
    GAMMA_SLOPE,
    fspl_db,
    path_power_dbm,
)

logger = logging.getLogger(__name__)

Signature = tuple[tuple[str, InteractionKind], ...]


def signature_text(signature: Signature) -> str:
    """ Compact text form of a signature, e.g. "w3:R;w7:T" ("LOS" when empty) """
    if len(signature) == 0:
        return 'LOS'
    return ';'.join(f'{sid}:{kind.code}' for sid, kind in signature)


def parse_signature(text: str) -> Signature:
    """ Inverse of signature_text """
    if text in ('', 'LOS'):
        return ()
    codes = {'R': InteractionKind.REFLECTION, 'T': InteractionKind.TRANSMISSION}
    result = []
    for item in text.split(';'):
        sid, _, code = item.rpartition(':')
        if sid == '' or code not in codes:
            raise ValueError(f'malformed signature entry "{item}"')
        result.append((sid, codes[code]))
    return tuple(result)


@dataclass(frozen=True, eq=False)
class MultipathComponent:
    """ One propagation path between a TX and an RX """

    aod: tuple[float, float]
    aoa: tuple[float, float]
    tof: float
    path_length: float
    received_power_dbm: float
    interactions: Signature
    vertices: tuple[Vec3, ...]

    @property
    def reflection_count(self) -> int:
        return sum(1 for _, kind in self.interactions if kind is InteractionKind.REFLECTION)

    @property
    def is_los(self) -> bool:
        return len(self.interactions) == 0

    @property
    def signature(self) -> str:
        return signature_text(self.interactions)


@dataclass(frozen=True, eq=False)
class ResolvedPath:
    """ Exact geometry of a reflection sequence together with the transmissions it crosses """

    vertices: tuple[Vec3, ...]
    signature: Signature
    losses: tuple[tuple[InteractionKind, float], ...]

    @property
    def transmission_count(self) -> int:
        return sum(1 for _, kind in self.signature if kind is InteractionKind.TRANSMISSION)


def resolve_path(indoor_map: IndoorMap, tx: Vec3, rx: Vec3, reflections: Sequence[str]) -> Optional[ResolvedPath]:
    """ Solves a reflection sequence with the method of images

    The RX is mirrored successively through the reflecting surfaces in reverse
    order; the path is then unfolded from the TX towards each image in turn.

    Args:
        indoor_map (IndoorMap): environment
        tx (Vec3): transmitter position
        rx (Vec3): receiver position
        reflections (Sequence[str]): reflecting surface ids in TX->RX order

    Returns:
        Optional[ResolvedPath]: exact path, or None when a reflection point falls outside its polygon
    """
    try:
        surfaces = [indoor_map.surface(sid) for sid in reflections]
    except KeyError:
        return None

    tx = np.asarray(tx, dtype=np.float64)
    rx = np.asarray(rx, dtype=np.float64)

    # images[i]: RX mirrored through surfaces[i:], innermost last
    images = [rx]
    for surface in reversed(surfaces):
        images.append(mirror_point(images[-1], surface))
    images.reverse()

    turning_points = [tx]
    current = tx
    for surface, target in zip(surfaces, images):
        da = surface.signed_distance(current)
        db = surface.signed_distance(target)
        if abs(da) <= EPS_HIT or abs(db) <= EPS_HIT or (da > 0) == (db > 0):
            return None
        point = current + (da / (da - db)) * (target - current)
        if not surface.contains(point):
            return None
        turning_points.append(point)
        current = point
    turning_points.append(rx)

    vertices: list[Vec3] = [tx]
    signature: list[tuple[str, InteractionKind]] = []
    losses: list[tuple[InteractionKind, float]] = []
    for i, (start, end) in enumerate(zip(turning_points, turning_points[1:])):
        if np.linalg.norm(end - start) <= EPS_HIT:
            return None
        for crossing in indoor_map.segment_crossings(start, end):
            vertices.append(crossing.point)
            signature.append((crossing.surface.surface_id, InteractionKind.TRANSMISSION))
            losses.append((InteractionKind.TRANSMISSION, crossing.surface.transmission_loss_db))
        if i < len(surfaces):
            direction = (end - start) / np.linalg.norm(end - start)
            vertices.append(end)
            signature.append((surfaces[i].surface_id, InteractionKind.REFLECTION))
            losses.append((InteractionKind.REFLECTION, incidence_angle(direction, surfaces[i].normal)))
    vertices.append(rx)

    return ResolvedPath(vertices=tuple(vertices), signature=tuple(signature), losses=tuple(losses))


def refine_path(indoor_map: IndoorMap, tx: Vec3, rx: Vec3, signature: Signature) -> Optional[list[Vec3]]:
    """ Exact vertices of an interaction sequence, or None when it is geometrically infeasible

    The sequence is accepted only if its transmissions are exactly the surfaces
    the image-solved path crosses, in order.

    Args:
        indoor_map (IndoorMap): environment
        tx (Vec3): transmitter position
        rx (Vec3): receiver position
        signature (Signature): (surface id, kind) pairs in TX->RX order

    Returns:
        Optional[list[Vec3]]: TX, interaction points and RX
    """
    signature = tuple((sid, InteractionKind(kind)) for sid, kind in signature)
    reflections = [sid for sid, kind in signature if kind is InteractionKind.REFLECTION]

    resolved = resolve_path(indoor_map, tx, rx, reflections)
    if resolved is None or resolved.signature != signature:
        return None

    return list(resolved.vertices)


def _component(cfg: TraceConfig, resolved: ResolvedPath) -> MultipathComponent:
    vertices = resolved.vertices
    length = path_length(vertices)
    return MultipathComponent(
        aod=direction_to_angles(vertices[1] - vertices[0]),
        aoa=direction_to_angles(vertices[-2] - vertices[-1]),
        tof=length / SPEED_OF_LIGHT,
        path_length=length,
        received_power_dbm=path_power_dbm(cfg, length, resolved.losses),
        interactions=resolved.signature,
        vertices=tuple(as_vec3(v) for v in vertices),
    )


def shoot_and_bounce(indoor_map: IndoorMap, tx: Vec3, rx: Vec3, cfg: TraceConfig) -> set[tuple[str, ...]]:
    """ Finds the reflection sequences of the rays that reach the RX

    Rays leave the TX along the launch grid and split at every surface they hit
    into a reflected and a transmitted ray, within the interaction caps and
    above the power floor. A ray segment captures the RX when the RX lies in
    front of the ray and within capture_alpha * L * r of the segment up to the next
    obstruction, L being the unfolded length there and r the covering radius of the
    coarsest grid the launch direction belongs to. A direction keeps its radius on
    every finer grid that contains it, so doubling N never loses a sequence.

    Args:
        indoor_map (IndoorMap): environment
        tx (Vec3): transmitter position
        rx (Vec3): receiver position
        cfg (TraceConfig): launch and pruning parameters

    Returns:
        set[tuple[str, ...]]: distinct reflection sequences (surface ids) of capturing rays
    """
    grid = launch_directions(cfg.tessellation_factor)

    normals = np.array([s.normal for s in indoor_map.surfaces]).reshape(-1, 3)
    transmission_loss = np.array([s.transmission_loss_db for s in indoor_map.surfaces])

    found: set[tuple[int, ...]] = set()
    segments = 0

    for start in range(0, len(grid), cfg.batch_size):
        directions = np.array(grid.directions[start:start + cfg.batch_size])
        slopes = cfg.capture_alpha * grid.capture_angles[start:start + cfg.batch_size]
        count = len(directions)
        origins = np.tile(np.asarray(tx, dtype=np.float64), (count, 1))
        lengths = np.zeros(count)
        losses = np.zeros(count)
        n_refl = np.zeros(count, dtype=np.int64)
        n_trans = np.zeros(count, dtype=np.int64)
        history: list[tuple[int, ...]] = [()] * count

        while len(origins) > 0:
            segments += len(origins)
            t_hit, s_hit = indoor_map.nearest_hits(origins, directions)

            rel = rx - origins
            along = np.einsum('ij,ij->i', rel, directions)
            # distance to the nearest point of the segment up to the next obstruction
            nearest = np.minimum(along, t_hit)
            miss = np.linalg.norm(rel - nearest[:, None] * directions, axis=1)
            captured = (along > 0.0) & (miss <= slopes * (lengths + nearest))
            for i in np.flatnonzero(captured):
                found.add(history[i])

            hit = np.flatnonzero(s_hit >= 0)
            if len(hit) == 0:
                break

            surf = s_hit[hit]
            d = directions[hit]
            points = origins[hit] + t_hit[hit, None] * d
            new_len = lengths[hit] + t_hit[hit]
            power = cfg.tx_power_dbm - fspl_db(new_len, cfg.frequency_hz) - losses[hit]

            n = normals[surf]
            cos_i = np.einsum('ij,ij->i', d, n)
            theta = np.arccos(np.clip(np.abs(cos_i), 0.0, 1.0))
            gamma = np.clip(GAMMA_SLOPE * theta + GAMMA_INTERCEPT, 1e-300, 1.0)
            refl_loss = -20.0 * np.log10(gamma)

            keep_r = (n_refl[hit] < cfg.max_reflections) & (power - refl_loss >= cfg.min_power_dbm)
            keep_t = (n_trans[hit] < cfg.max_transmissions) & (power - transmission_loss[surf] >= cfg.min_power_dbm)

            r_idx = np.flatnonzero(keep_r)
            t_idx = np.flatnonzero(keep_t)

            reflected = d[r_idx] - 2.0 * cos_i[r_idx, None] * n[r_idx]
            reflected /= np.linalg.norm(reflected, axis=1)[:, None]

            origins = np.concatenate([points[r_idx], points[t_idx]])
            directions = np.concatenate([reflected, d[t_idx]])
            lengths = np.concatenate([new_len[r_idx], new_len[t_idx]])
            slopes = np.concatenate([slopes[hit][r_idx], slopes[hit][t_idx]])
            losses = np.concatenate([losses[hit][r_idx] + refl_loss[r_idx],
                                     losses[hit][t_idx] + transmission_loss[surf[t_idx]]])
            n_refl = np.concatenate([n_refl[hit][r_idx] + 1, n_refl[hit][t_idx]])
            n_trans = np.concatenate([n_trans[hit][r_idx], n_trans[hit][t_idx] + 1])
            history = ([history[hit[i]] + (int(surf[i]),) for i in r_idx]
                       + [history[hit[i]] for i in t_idx])

    logger.debug(f'SBR: {len(grid)} rays launched, {segments} segments traced, {len(found)} reflection sequences captured')

    ids = [s.surface_id for s in indoor_map.surfaces]
    return {tuple(ids[i] for i in seq) for seq in found}


def image_sequences(indoor_map: IndoorMap, max_reflections: int) -> list[tuple[str, ...]]:
    """ Every reflection sequence up to max_reflections without immediate repeats """
    ids = [s.surface_id for s in indoor_map.surfaces]
    sequences: list[tuple[str, ...]] = [()]
    for depth in range(1, max_reflections + 1):
        sequences.extend(
            seq for seq in product(ids, repeat=depth)
            if all(a != b for a, b in zip(seq, seq[1:]))
        )
    return sequences


def trace(indoor_map: IndoorMap, tx: Sequence[float] | Vec3, rx: Sequence[float] | Vec3,
          cfg: Optional[TraceConfig] = None) -> list[MultipathComponent]:
    """ Traces every multipath component between a TX and an RX

    Args:
        indoor_map (IndoorMap): environment
        tx (Vec3): transmitter position (m)
        rx (Vec3): receiver position (m)
        cfg (Optional[TraceConfig], optional): tracer parameters. Defaults to TraceConfig().

    Returns:
        list[MultipathComponent]: components sorted by time of flight then signature

    Raises:
        TraceError: TX or RX outside the map bounds, or TX == RX
    """
    cfg = cfg or TraceConfig()
    tx = as_vec3(tx)
    rx = as_vec3(rx)

    for label, point in (('TX', tx), ('RX', rx)):
        if not indoor_map.contains_point(point):
            raise TraceError(f'{label} {point.tolist()} lies outside the bounds of map "{indoor_map.name}"')
    if np.linalg.norm(tx - rx) <= EPS_HIT:
        raise TraceError(f'TX and RX coincide at {tx.tolist()}')

    if cfg.method is TraceMethod.IMAGE:
        sequences = image_sequences(indoor_map, cfg.max_reflections)
    else:
        sequences = sorted(shoot_and_bounce(indoor_map, tx, rx, cfg) | {()})

    components: dict[Signature, MultipathComponent] = {}
    rejected = 0
    for reflections in sequences:
        resolved = resolve_path(indoor_map, tx, rx, reflections)
        if resolved is None or resolved.transmission_count > cfg.max_transmissions:
            rejected += 1
            continue
        component = _component(cfg, resolved)
        if component.received_power_dbm < cfg.min_power_dbm:
            rejected += 1
            continue
        components[component.interactions] = component

    result = sorted(components.values(), key=lambda c: (c.tof, c.signature))

    logger.debug(f'Trace {tx.tolist()} -> {rx.tolist()}: {len(sequences)} sequences, '
                 f'{rejected} rejected, {len(result)} components')

    return result
