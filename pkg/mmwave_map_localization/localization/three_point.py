"""Three-point resection from two relative angles of arrival.

The points where BS_a and BS_b subtend a fixed angle lie on two circular arcs
through BS_a and BS_b, mirror images of each other about the chord. The user sits
where an arc of the (BS1, BS2) pair meets an arc of the (BS2, BS3) pair. All work
is planar, in the x-y plane.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from mmwave_map_localization.errors import DegenerateGeometryError
from mmwave_map_localization.geometry.primitives import Vec3, vec3

logger = logging.getLogger(__name__)

Vec2 = NDArray[np.float64]

ANGLE_TOL = 1e-6
""" Tolerance when checking a solution against the measured angles (rad) """


def _cross2(a: Vec2, b: Vec2) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def subtended_angle(point: Sequence[float] | Vec2, a: Sequence[float] | Vec2, b: Sequence[float] | Vec2) -> float:
    """ Angle at point between the directions to a and to b, in [0, pi] (planar) """
    p = np.asarray(point, dtype=np.float64)[:2]
    u = np.asarray(a, dtype=np.float64)[:2] - p
    v = np.asarray(b, dtype=np.float64)[:2] - p
    return math.atan2(abs(_cross2(u, v)), float(u @ v))


def _arc_circles(a: Vec2, b: Vec2, theta: float) -> list[tuple[Vec2, float, int]]:
    """ The two circles on which chord ab subtends theta, each with the chord side its arc lies on """
    chord = b - a
    length = float(np.linalg.norm(chord))
    mid = (a + b) / 2.0
    perp = np.array([-chord[1], chord[0]]) / length
    offset = (length / 2.0) / math.tan(theta)
    radius = length / (2.0 * math.sin(theta))
    return [(mid + side * offset * perp, radius, side) for side in (1, -1)]


def _circle_intersections(c1: Vec2, r1: float, c2: Vec2, r2: float, tol: float) -> list[Vec2]:
    delta = c2 - c1
    d = float(np.linalg.norm(delta))
    if d > r1 + r2 + tol or d < abs(r1 - r2) - tol or d == 0.0:
        return []
    along = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    half_chord = math.sqrt(max(r1 * r1 - along * along, 0.0))
    foot = c1 + along * delta / d
    normal = np.array([-delta[1], delta[0]]) / d
    return [foot + half_chord * normal, foot - half_chord * normal]


def three_point_fix(bs: Sequence[Sequence[float]], theta1: float, theta2: float) -> list[Vec3]:
    """ Positions from which BS1,BS2 subtend theta1 and BS2,BS3 subtend theta2

    Args:
        bs (Sequence[Sequence[float]]): three BS positions, 2-D or 3-D (only x, y are used)
        theta1 (float): angle subtended by BS1 and BS2 at the user, in (0, pi)
        theta2 (float): angle subtended by BS2 and BS3 at the user, in (0, pi)

    Returns:
        list[Vec3]: zero, one or two solutions at the mean BS height, BS positions excluded

    Raises:
        ValueError: not three distinct BSs, or an angle outside (0, pi)
        DegenerateGeometryError: the user is on the circle through all three BSs
    """
    if len(bs) != 3:
        raise ValueError(f'three BS positions are required, got {len(bs)}')
    for theta in (theta1, theta2):
        if not (0.0 < theta < math.pi):
            raise ValueError(f'relative angles must lie in (0, pi), got {theta}')

    points = [np.asarray(p, dtype=np.float64) for p in bs]
    height = float(np.mean([p[2] if len(p) > 2 else 0.0 for p in points]))
    b1, b2, b3 = (p[:2] for p in points)

    scale = max(float(np.linalg.norm(b1 - b2)), float(np.linalg.norm(b2 - b3)), float(np.linalg.norm(b1 - b3)))
    for i, j in ((0, 1), (1, 2), (0, 2)):
        if np.linalg.norm(points[i][:2] - points[j][:2]) <= 1e-12 * max(scale, 1.0):
            raise ValueError(f'BS{i + 1} and BS{j + 1} coincide')
    tol = 1e-9 * scale

    solutions: list[Vec2] = []
    for c1, r1, side1 in _arc_circles(b1, b2, theta1):
        for c2, r2, side2 in _arc_circles(b2, b3, theta2):
            if np.linalg.norm(c1 - c2) <= tol and abs(r1 - r2) <= tol:
                raise DegenerateGeometryError(
                    'user lies on the circle through the three BSs; the relative angles do not fix a position')

            for p in _circle_intersections(c1, r1, c2, r2, tol):
                if min(np.linalg.norm(p - b) for b in (b1, b2, b3)) <= 1e-6 * scale:
                    continue
                if _cross2(b2 - b1, p - b1) * side1 <= 0.0 or _cross2(b3 - b2, p - b2) * side2 <= 0.0:
                    continue
                if (abs(subtended_angle(p, b1, b2) - theta1) > ANGLE_TOL
                        or abs(subtended_angle(p, b2, b3) - theta2) > ANGLE_TOL):
                    continue
                if all(np.linalg.norm(p - q) > 1e-7 * scale for q in solutions):
                    solutions.append(p)

    logger.debug(f'Three-point fix: {len(solutions)} solutions')

    return [vec3(float(p[0]), float(p[1]), height) for p in solutions]
