"""Exact 3-D primitives: vectors, convex planar surfaces, rays and mirror images.

Vectors are plain ``float64`` numpy arrays of shape (3,). Surfaces and rays are
frozen dataclasses holding read-only arrays, so a map can be shared between
worker processes and threads without copying.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from mmwave_map_localization.common import EPS_HIT
from mmwave_map_localization.config_def import InteractionKind
from mmwave_map_localization.errors import MapValidationError

Vec3 = NDArray[np.float64]

COPLANAR_TOL = 1e-9
""" Maximum vertex distance from the surface plane (m) """

POLYGON_TOL = 1e-9
""" Boundary tolerance of the point-in-polygon test (m) """

PARALLEL_TOL = 1e-15
""" |direction . normal| below which a ray is treated as parallel to a plane """


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=np.float64)


def as_vec3(value: Sequence[float] | Vec3) -> Vec3:
    """ Converts a 3-sequence to a read-only Vec3 """
    arr = np.array(value, dtype=np.float64).reshape(3)
    arr.setflags(write=False)
    return arr


def normalize(v: Vec3) -> Vec3:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError('cannot normalize a zero vector')
    return v / norm


def direction_to_angles(direction: Vec3) -> tuple[float, float]:
    """ Converts a unit direction to (azimuth, elevation) in radians

    Azimuth is measured in the x-y plane from +x towards +y, elevation from the
    horizontal plane towards +z.
    """
    d = normalize(np.asarray(direction, dtype=np.float64))
    azimuth = math.atan2(d[1], d[0])
    elevation = math.asin(max(-1.0, min(1.0, float(d[2]))))
    return azimuth, elevation


def angles_to_direction(azimuth: float, elevation: float) -> Vec3:
    """ Inverse of direction_to_angles """
    cos_el = math.cos(elevation)
    return vec3(cos_el * math.cos(azimuth), cos_el * math.sin(azimuth), math.sin(elevation))


def path_length(points: Iterable[Vec3]) -> float:
    pts = [np.asarray(p, dtype=np.float64) for p in points]
    return float(sum(np.linalg.norm(b - a) for a, b in zip(pts, pts[1:])))


@dataclass(frozen=True, eq=False)
class Surface:
    """ Convex planar polygon that both reflects and transmits

    The normal follows the vertex winding (counter-clockwise seen from the
    normal side) but both faces interact with rays.
    """

    surface_id: str
    vertices: Vec3
    material: str = 'drywall'
    transmission_loss_db: float = 7.2
    normal: Vec3 = field(init=False, repr=False)
    offset: float = field(init=False, repr=False)
    edge_normals: Vec3 = field(init=False, repr=False)
    edge_offsets: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=np.float64)

        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] < 3:
            raise MapValidationError(self.surface_id, f'expected at least 3 xyz vertices, got shape {verts.shape}')
        if not np.all(np.isfinite(verts)):
            raise MapValidationError(self.surface_id, 'vertices must be finite')

        # Newell's method: robust for any simple polygon, zero for degenerate ones
        nxt = np.roll(verts, -1, axis=0)
        newell = np.sum(np.cross(verts, nxt), axis=0)
        area2 = float(np.linalg.norm(newell))
        if area2 < 1e-12:
            raise MapValidationError(self.surface_id, 'polygon is degenerate (zero area)')
        normal = newell / area2

        centroid = verts.mean(axis=0)
        deviation = np.abs((verts - centroid) @ normal)
        if float(deviation.max()) > COPLANAR_TOL:
            raise MapValidationError(
                self.surface_id, f'vertices are not coplanar (max deviation {deviation.max():.3e} m)')

        edges = nxt - verts
        edge_len = np.linalg.norm(edges, axis=1)
        if float(edge_len.min()) <= COPLANAR_TOL:
            raise MapValidationError(self.surface_id, 'polygon has a repeated vertex')

        # Convex and simple: every turn goes the same way and the turns add up to one revolution
        following = np.roll(edges, -1, axis=0)
        turn_sin = np.cross(edges, following) @ normal
        turn_cos = np.einsum('ij,ij->i', edges, following)
        if np.any(turn_sin < -COPLANAR_TOL * edge_len * np.roll(edge_len, -1)):
            raise MapValidationError(self.surface_id, 'polygon is not convex')
        total_turn = float(np.sum(np.arctan2(turn_sin, turn_cos)))
        if not math.isclose(total_turn, 2.0 * math.pi, abs_tol=1e-6):
            raise MapValidationError(self.surface_id, 'polygon is self-intersecting')

        edge_normals = np.cross(normal, edges) / edge_len[:, None]
        edge_offsets = np.einsum('ij,ij->i', edge_normals, verts)

        for arr in (verts, normal, edge_normals, edge_offsets):
            arr.setflags(write=False)

        object.__setattr__(self, 'vertices', verts)
        object.__setattr__(self, 'normal', normal)
        object.__setattr__(self, 'offset', float(normal @ verts[0]))
        object.__setattr__(self, 'edge_normals', edge_normals)
        object.__setattr__(self, 'edge_offsets', edge_offsets)

    def signed_distance(self, point: Vec3) -> float:
        return float(self.normal @ point) - self.offset

    def contains(self, point: Vec3, tol: float = POLYGON_TOL) -> bool:
        """ Point-in-polygon test for a point already on the supporting plane, boundary inclusive """
        return bool(np.all(self.edge_normals @ point - self.edge_offsets >= -tol))

    def distance_to(self, point: Vec3) -> float:
        """ Euclidean distance from a point to the polygon """
        point = np.asarray(point, dtype=np.float64)
        height = self.signed_distance(point)
        foot = point - height * self.normal
        if self.contains(foot, tol=0.0):
            return abs(height)

        starts = self.vertices
        edges = np.roll(starts, -1, axis=0) - starts
        t = np.clip(np.einsum('ij,ij->i', point - starts, edges) / np.einsum('ij,ij->i', edges, edges), 0.0, 1.0)
        closest = starts + t[:, None] * edges
        return float(np.min(np.linalg.norm(point - closest, axis=1)))


@dataclass(frozen=True)
class Interaction:
    surface_id: str
    kind: InteractionKind
    point: Vec3 = field(compare=False)


@dataclass(frozen=True, eq=False)
class Ray:
    """ A half-line being propagated through a map, with its history """

    origin: Vec3
    direction: Vec3
    accumulated_length: float = 0.0
    accumulated_loss_db: float = 0.0
    interactions: tuple[Interaction, ...] = ()

    @property
    def reflection_count(self) -> int:
        return sum(1 for i in self.interactions if i.kind is InteractionKind.REFLECTION)

    @property
    def transmission_count(self) -> int:
        return sum(1 for i in self.interactions if i.kind is InteractionKind.TRANSMISSION)

    @property
    def signature(self) -> tuple[tuple[str, InteractionKind], ...]:
        return tuple((i.surface_id, i.kind) for i in self.interactions)

    def point_at(self, distance: float) -> Vec3:
        return self.origin + distance * self.direction

    def reflected(self, surface: Surface, point: Vec3, distance: float, loss_db: float = 0.0) -> Ray:
        """ Continues the ray specularly from a hit on a surface """
        return Ray(
            origin=point,
            direction=reflect_direction(self.direction, surface.normal),
            accumulated_length=self.accumulated_length + distance,
            accumulated_loss_db=self.accumulated_loss_db + loss_db,
            interactions=self.interactions + (Interaction(surface.surface_id, InteractionKind.REFLECTION, point),),
        )

    def transmitted(self, surface: Surface, point: Vec3, distance: float) -> Ray:
        """ Continues the ray through a surface along the same direction """
        return Ray(
            origin=point,
            direction=self.direction,
            accumulated_length=self.accumulated_length + distance,
            accumulated_loss_db=self.accumulated_loss_db + surface.transmission_loss_db,
            interactions=self.interactions + (Interaction(surface.surface_id, InteractionKind.TRANSMISSION, point),),
        )


def plane_hit_distance(origin: Vec3, direction: Vec3, surface: Surface) -> Optional[float]:
    """ Distance along a half-line to the surface's supporting plane, or None if parallel or behind """
    denom = float(direction @ surface.normal)
    if abs(denom) < PARALLEL_TOL:
        return None
    t = (surface.offset - float(surface.normal @ origin)) / denom
    if t <= EPS_HIT:
        return None
    return t


def intersect(ray: Ray, surface: Surface) -> Optional[tuple[Vec3, float]]:
    """ Nearest hit of the ray's half-line with the polygon

    Args:
        ray (Ray): ray with a unit direction
        surface (Surface): surface to test

    Returns:
        Optional[tuple[Vec3, float]]: (point, distance) with distance > EPS_HIT, or None
    """
    t = plane_hit_distance(ray.origin, ray.direction, surface)
    if t is None:
        return None

    point = ray.origin + t * ray.direction
    if not surface.contains(point):
        return None

    return point, t


def mirror_point(point: Vec3, surface: Surface) -> Vec3:
    """ Reflects a point across the surface's supporting plane """
    point = np.asarray(point, dtype=np.float64)
    return point - 2.0 * surface.signed_distance(point) * surface.normal


def reflect_direction(direction: Vec3, normal: Vec3) -> Vec3:
    """ Specular reflection of a unit direction about a unit normal """
    d = np.asarray(direction, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    return normalize(d - 2.0 * float(d @ n) * n)


def incidence_angle(direction: Vec3, normal: Vec3) -> float:
    """ Angle between an incoming direction and the surface normal, in [0, pi/2]; neither needs unit length """
    d = normalize(np.asarray(direction, dtype=np.float64))
    n = normalize(np.asarray(normal, dtype=np.float64))
    cos_theta = abs(float(d @ n))
    return math.acos(min(1.0, cos_theta))
