from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
from json import JSONDecodeError
from pathlib import Path
from typing import BinaryIO, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from pydantic import ValidationError

from mmwave_map_localization.common import EPS_HIT
from mmwave_map_localization.config_def import BoundsModel, MapFileModel, SurfaceModel
from mmwave_map_localization.errors import MapParseError, MapValidationError
from mmwave_map_localization.geometry.primitives import (
    PARALLEL_TOL,
    POLYGON_TOL,
    Surface,
    Vec3,
    as_vec3,
)

logger = logging.getLogger(__name__)

BOUNDS_TOL = 1e-9


@dataclass(frozen=True)
class Crossing:
    """ Where a straight segment passes through a surface """
    surface: Surface
    point: Vec3
    fraction: float


@dataclass(frozen=True, eq=False)
class IndoorMap:
    """ Surfaces of an indoor environment plus its axis-aligned extents

    Besides the surface list the map keeps every surface packed into padded
    numpy arrays so that thousands of rays can be tested against all surfaces
    at once.
    """

    surfaces: tuple[Surface, ...]
    name: str = 'unnamed'
    bounds: Optional[tuple[Vec3, Vec3]] = None
    _index: dict[str, int] = field(init=False, repr=False)
    _normals: NDArray[np.float64] = field(init=False, repr=False)
    _offsets: NDArray[np.float64] = field(init=False, repr=False)
    _edge_normals: NDArray[np.float64] = field(init=False, repr=False)
    _edge_offsets: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        surfaces = tuple(self.surfaces)
        object.__setattr__(self, 'surfaces', surfaces)

        index: dict[str, int] = {}
        for i, surface in enumerate(surfaces):
            if surface.surface_id in index:
                raise MapValidationError(surface.surface_id, 'duplicate surface id')
            index[surface.surface_id] = i
        object.__setattr__(self, '_index', index)

        if self.bounds is None:
            if len(surfaces) == 0:
                raise MapValidationError(None, 'a map without surfaces needs explicit bounds')
            points = np.vstack([s.vertices for s in surfaces])
            lo, hi = points.min(axis=0), points.max(axis=0)
        else:
            lo, hi = (np.array(b, dtype=np.float64).reshape(3) for b in self.bounds)
            if np.any(lo > hi):
                raise MapValidationError(None, f'bounds min {lo} exceeds max {hi}')
            for surface in surfaces:
                if np.any(surface.vertices < lo - BOUNDS_TOL) or np.any(surface.vertices > hi + BOUNDS_TOL):
                    raise MapValidationError(surface.surface_id, 'surface extends outside the map bounds')
        object.__setattr__(self, 'bounds', (as_vec3(lo), as_vec3(hi)))

        n_edges = max((len(s.vertices) for s in surfaces), default=0)
        normals = np.zeros((len(surfaces), 3))
        offsets = np.zeros(len(surfaces))
        # padded edges always pass the inside test
        edge_normals = np.zeros((len(surfaces), n_edges, 3))
        edge_offsets = np.full((len(surfaces), n_edges), -1.0)
        for i, surface in enumerate(surfaces):
            k = len(surface.vertices)
            normals[i] = surface.normal
            offsets[i] = surface.offset
            edge_normals[i, :k] = surface.edge_normals
            edge_offsets[i, :k] = surface.edge_offsets

        object.__setattr__(self, '_normals', normals)
        object.__setattr__(self, '_offsets', offsets)
        object.__setattr__(self, '_edge_normals', edge_normals)
        object.__setattr__(self, '_edge_offsets', edge_offsets)

    def __len__(self) -> int:
        return len(self.surfaces)

    @property
    def bounding_box(self) -> tuple[Vec3, Vec3]:
        assert self.bounds is not None
        return self.bounds

    def surface(self, surface_id: str) -> Surface:
        return self.surfaces[self._index[surface_id]]

    def surface_index(self, surface_id: str) -> int:
        return self._index[surface_id]

    def contains_point(self, point: Sequence[float] | Vec3) -> bool:
        """ Checks a point against the bounding box, boundary inclusive """
        lo, hi = self.bounding_box
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= lo - BOUNDS_TOL) and np.all(p <= hi + BOUNDS_TOL))

    def nearest_hits(self, origins: NDArray[np.float64], directions: NDArray[np.float64],
                     chunk_size: int = 2048) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
        """ Finds the first surface hit by each of a batch of rays

        Args:
            origins (NDArray): (M, 3) ray origins
            directions (NDArray): (M, 3) unit directions
            chunk_size (int, optional): rays tested per vectorized block. Defaults to 2048.

        Returns:
            tuple[NDArray, NDArray]: hit distances (inf when nothing is hit) and surface indices (-1 when nothing is hit)
        """
        m = len(origins)
        distances = np.full(m, np.inf)
        indices = np.full(m, -1, dtype=np.int64)
        if m == 0 or len(self.surfaces) == 0:
            return distances, indices

        for start in range(0, m, chunk_size):
            o = origins[start:start + chunk_size]
            d = directions[start:start + chunk_size]

            denom = d @ self._normals.T
            num = self._offsets[None, :] - o @ self._normals.T
            t = np.full(denom.shape, np.inf)
            np.divide(num, denom, out=t, where=np.abs(denom) >= PARALLEL_TOL)
            t[~(t > EPS_HIT)] = np.inf

            finite = np.isfinite(t)
            points = o[:, None, :] + np.where(finite, t, 0.0)[..., None] * d[:, None, :]
            margins = np.einsum('msk,sek->mse', points, self._edge_normals) - self._edge_offsets[None]
            inside = np.all(margins >= -POLYGON_TOL, axis=2)
            t[~(finite & inside)] = np.inf

            best = np.argmin(t, axis=1)
            best_t = t[np.arange(len(t)), best]
            hit = np.isfinite(best_t)
            distances[start:start + chunk_size] = best_t
            indices[start:start + chunk_size] = np.where(hit, best, -1)

        return distances, indices

    def first_hit(self, origin: Vec3, direction: Vec3) -> Optional[tuple[Surface, Vec3, float]]:
        """ First surface hit by a single ray, as (surface, point, distance) """
        distances, indices = self.nearest_hits(np.asarray(origin, dtype=np.float64)[None],
                                               np.asarray(direction, dtype=np.float64)[None])
        if indices[0] < 0:
            return None
        t = float(distances[0])
        return self.surfaces[indices[0]], origin + t * direction, t

    def segment_crossings(self, start: Vec3, end: Vec3) -> list[Crossing]:
        """ Surfaces strictly crossed by the segment start->end, ordered from start

        Surfaces touching an endpoint (within EPS_HIT) are not reported, so a
        segment leaving a reflection point does not cross its own surface.
        """
        if len(self.surfaces) == 0:
            return []

        a = np.asarray(start, dtype=np.float64)
        b = np.asarray(end, dtype=np.float64)
        da = self._normals @ a - self._offsets
        db = self._normals @ b - self._offsets
        crossing = ((da > EPS_HIT) & (db < -EPS_HIT)) | ((da < -EPS_HIT) & (db > EPS_HIT))
        if not np.any(crossing):
            return []

        result = []
        for i in np.flatnonzero(crossing):
            fraction = float(da[i] / (da[i] - db[i]))
            point = a + fraction * (b - a)
            if self.surfaces[i].contains(point):
                result.append(Crossing(self.surfaces[i], point, fraction))

        result.sort(key=lambda c: (c.fraction, self._index[c.surface.surface_id]))
        return result

    def is_line_of_sight(self, start: Vec3, end: Vec3) -> bool:
        return len(self.segment_crossings(start, end)) == 0

    def clearance(self, point: Vec3) -> float:
        """ Distance from a point to the closest surface (inf for an empty map) """
        return min((s.distance_to(point) for s in self.surfaces), default=float('inf'))

    def to_model(self) -> MapFileModel:
        lo, hi = self.bounding_box
        return MapFileModel(
            name=self.name,
            units='meters',
            surfaces=[
                SurfaceModel(
                    id=s.surface_id,
                    vertices=[tuple(float(c) for c in v) for v in s.vertices],
                    material=s.material,
                    transmission_loss_db=s.transmission_loss_db,
                )
                for s in self.surfaces
            ],
            bounds=BoundsModel(min=tuple(float(c) for c in lo), max=tuple(float(c) for c in hi)),
        )


def _surface_label(raw: object, loc: tuple) -> str:
    """ Names the surface a pydantic error location points into, if any """
    if len(loc) >= 2 and loc[0] == 'surfaces' and isinstance(loc[1], int) and isinstance(raw, dict):
        try:
            surface = raw['surfaces'][loc[1]]
            return f"surface '{surface.get('id', loc[1])}'"
        except (KeyError, IndexError, TypeError, AttributeError):
            return f'surface #{loc[1]}'
    return '.'.join(str(p) for p in loc) or 'map'


def load_map(source: bytes | str | BinaryIO) -> IndoorMap:
    """ Parses and validates a map file

    Args:
        source (bytes | str | BinaryIO): UTF-8 map document or a binary stream holding one

    Returns:
        IndoorMap: validated map

    Raises:
        MapParseError: the document is not JSON or does not follow the map schema
        MapValidationError: a surface is degenerate, non-coplanar, non-convex or outside the bounds
    """
    if hasattr(source, 'read'):
        source = source.read()  # type: ignore[union-attr]

    try:
        text = source.decode('utf-8') if isinstance(source, bytes) else source
        raw = json.loads(text)
    except UnicodeDecodeError as e:
        raise MapParseError(f'map file is not UTF-8: {e}') from e
    except JSONDecodeError as e:
        raise MapParseError(f'map file is not valid JSON: {e}') from e

    try:
        model = MapFileModel.model_validate(raw)
    except ValidationError as e:
        details = '; '.join(f"{_surface_label(raw, tuple(err['loc']))}: {err['msg']}" for err in e.errors())
        raise MapParseError(f'map file does not follow the schema: {details}') from e

    surfaces = [
        Surface(
            surface_id=s.id,
            vertices=np.array(s.vertices, dtype=np.float64),
            material=s.material,
            transmission_loss_db=s.transmission_loss_db,
        )
        for s in model.surfaces
    ]

    bounds = None
    if model.bounds is not None:
        bounds = (as_vec3(model.bounds.min), as_vec3(model.bounds.max))

    indoor_map = IndoorMap(surfaces=tuple(surfaces), name=model.name, bounds=bounds)

    lo, hi = indoor_map.bounding_box
    logger.info(f'Loaded map "{indoor_map.name}" with {len(indoor_map)} surfaces, bounds {lo.tolist()} - {hi.tolist()}')

    return indoor_map


def load_map_file(path: Path | str) -> IndoorMap:
    """ Reads and validates a map file from disk """
    with open(path, 'rb') as f:
        return load_map(f)


def dump_map(indoor_map: IndoorMap) -> str:
    """ Serializes a map to the map file format """
    return json.dumps(indoor_map.to_model().model_dump(mode='json'), indent=2)
