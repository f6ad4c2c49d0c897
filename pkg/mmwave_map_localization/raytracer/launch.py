from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
import logging
import math

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True, eq=False)
class LaunchGrid:
    """ Quasi-uniform launch directions taken from a tessellated icosahedron """

    tessellation_factor: int
    directions: NDArray[np.float64]
    # covering radius (rad) of the coarsest grid each direction belongs to
    capture_angles: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.directions)

    @property
    def nominal_spacing_deg(self) -> float:
        """ Average angle between neighbouring rays quoted for this grid (deg) """
        return 69.0 / self.tessellation_factor

    def mean_neighbour_angle_deg(self, chunk_size: int = 1024) -> float:
        """ Mean angle from every direction to its nearest neighbour (deg) """
        dirs = self.directions
        nearest = np.empty(len(dirs))
        for start in range(0, len(dirs), chunk_size):
            cosines = dirs[start:start + chunk_size] @ dirs.T
            rows = np.arange(cosines.shape[0])
            cosines[rows, rows + start] = -np.inf
            nearest[start:start + chunk_size] = np.max(cosines, axis=1)
        return float(np.degrees(np.mean(np.arccos(np.clip(nearest, -1.0, 1.0)))))


def _icosahedron() -> tuple[NDArray[np.float64], list[tuple[int, int, int]]]:
    """ Unit icosahedron vertices and its 20 faces """
    phi = GOLDEN_RATIO
    raw = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            raw.extend([(0.0, a, b), (a, b, 0.0), (b, 0.0, a)])
    vertices = np.array(raw)

    # edges join vertices at the minimal distance (2 before normalization)
    def adjacent(i: int, j: int) -> bool:
        return math.isclose(float(np.linalg.norm(vertices[i] - vertices[j])), 2.0, rel_tol=1e-9)

    faces = [
        (i, j, k) for i, j, k in combinations(range(len(vertices)), 3)
        if adjacent(i, j) and adjacent(j, k) and adjacent(i, k)
    ]
    return vertices / np.linalg.norm(vertices, axis=1)[:, None], faces


@lru_cache(maxsize=64)
def covering_radius(tessellation_factor: int) -> float:
    """ Largest angle from any direction on the sphere to the nearest direction of the grid (rad)

    Every point of a grid triangle lies within the triangle's spherical circumradius
    of one of its corners, so the largest circumradius over the tessellation bounds the gap.
    """
    n = tessellation_factor
    vertices, faces = _icosahedron()
    up = [((i, j), (i + 1, j), (i, j + 1)) for i in range(n) for j in range(n - i)]
    down = [((i + 1, j), (i, j + 1), (i + 1, j + 1)) for i in range(n - 1) for j in range(n - 1 - i)]
    weights = np.array(up + down, dtype=np.float64)

    widest = 0.0
    for a, b, c in faces:
        corners = (weights[..., :1] * vertices[a] + weights[..., 1:] * vertices[b]
                   + (n - weights.sum(axis=-1, keepdims=True)) * vertices[c])
        corners /= np.linalg.norm(corners, axis=-1, keepdims=True)
        p, q, r = corners[:, 0], corners[:, 1], corners[:, 2]
        centre = np.cross(q - p, r - p)
        centre /= np.linalg.norm(centre, axis=-1, keepdims=True)
        cos_radius = np.abs(np.einsum('ij,ij->i', centre, p))
        widest = max(widest, float(np.arccos(np.clip(cos_radius.min(), 0.0, 1.0))))
    return widest


@lru_cache(maxsize=16, typed=True)
def launch_directions(tessellation_factor: int) -> LaunchGrid:
    """ Builds the launch grid of a tessellation factor

    Each icosahedron face is split into N^2 triangles; every grid vertex is pushed
    out onto the unit sphere. Grid vertices are identified by their integer
    barycentric weights over the global icosahedron vertices, so the ones shared
    by neighbouring faces are merged exactly.

    Args:
        tessellation_factor (int): N >= 1

    Returns:
        LaunchGrid: 10 N^2 + 2 unit directions with their capture angles

    Raises:
        ValueError: N < 1
    """
    n = tessellation_factor
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f'tessellation factor must be a positive integer, got {tessellation_factor!r}')
    n = int(n)

    vertices, faces = _icosahedron()

    keys = set()
    for face in faces:
        for i in range(n + 1):
            for j in range(n + 1 - i):
                weights = ((face[0], i), (face[1], j), (face[2], n - i - j))
                keys.add(tuple(sorted((v, w) for v, w in weights if w > 0)))

    directions = np.empty((len(keys), 3))
    capture_angles = np.empty(len(keys))
    for row, key in enumerate(sorted(keys)):
        point = sum(w * vertices[v] for v, w in key)
        directions[row] = point / np.linalg.norm(point)
        # the same direction sits in every grid whose factor is a multiple of its level
        level = n // math.gcd(n, *(w for _, w in key))
        capture_angles[row] = covering_radius(level)
    directions.setflags(write=False)
    capture_angles.setflags(write=False)

    expected = 10 * n * n + 2
    if len(directions) != expected:
        raise RuntimeError(f'tessellation produced {len(directions)} directions, expected {expected}')

    logger.debug(f'Built launch grid N={n} with {len(directions)} directions')

    return LaunchGrid(tessellation_factor=n, directions=directions, capture_angles=capture_angles)
