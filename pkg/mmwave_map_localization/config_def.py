from enum import Enum
import math
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class InteractionKind(str, Enum):
    """ Represents how a ray interacts with a surface """
    REFLECTION = 'reflection'
    TRANSMISSION = 'transmission'

    @property
    def code(self) -> str:
        return 'R' if self is InteractionKind.REFLECTION else 'T'


class ObservationMode(str, Enum):
    """ Represents which side of the link the user is on """
    AOD = 'aod'     # user receives, the BS reports the angle of departure
    AOA = 'aoa'     # user transmits, the BS measures the angle of arrival


class TraceMethod(str, Enum):
    """ Represents the path search used by the tracer """
    HYBRID = 'hybrid'
    IMAGE = 'image'


class BoundsModel(BaseModel):
    min: tuple[float, float, float]
    max: tuple[float, float, float]

    @model_validator(mode='after')
    def check_ordered(self):
        for lo, hi in zip(self.min, self.max):
            if lo > hi:
                raise ValueError(f'bounds min {self.min} exceeds max {self.max}')
        return self


class SurfaceModel(BaseModel):
    model_config = ConfigDict(extra='forbid')

    id: str
    vertices: list[tuple[float, float, float]]
    material: str
    transmission_loss_db: float = Field(default=7.2, ge=0)

    @field_validator('vertices')
    @classmethod
    def check_vertex_count(cls, raw: list[tuple[float, float, float]]) -> list[tuple[float, float, float]]:
        if len(raw) < 3:
            raise ValueError(f'a surface needs at least 3 vertices, got {len(raw)}')
        return raw


class MapFileModel(BaseModel):
    """ Schema of a map file """
    model_config = ConfigDict(extra='forbid')

    name: str
    units: str
    surfaces: list[SurfaceModel]
    bounds: Optional[BoundsModel] = None

    @field_validator('units')
    @classmethod
    def check_units(cls, raw: str) -> str:
        if raw != 'meters':
            raise ValueError(f'unsupported units "{raw}", expected "meters"')
        return raw

    @model_validator(mode='after')
    def check_surfaces(self):
        if len(self.surfaces) == 0:
            raise ValueError('a map needs at least one surface')

        seen = set()
        for surface in self.surfaces:
            if surface.id in seen:
                raise ValueError(f"duplicate surface id '{surface.id}'")
            seen.add(surface.id)

        return self


class TraceConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    frequency_hz: float = Field(default=73e9, gt=0)
    tx_power_dbm: float = 0.0
    max_reflections: int = Field(default=3, ge=0)
    max_transmissions: int = Field(default=3, ge=0)
    tessellation_factor: int = Field(default=50, ge=1)
    capture_alpha: float = Field(default=1.0, gt=0)
    min_power_dbm: float = -120.0
    method: TraceMethod = TraceMethod.HYBRID
    batch_size: int = Field(default=4096, ge=1)
    allow_deep_reflections: bool = False

    @field_validator('method', mode='before')
    @classmethod
    def transform(cls, raw: Any) -> TraceMethod:
        if isinstance(raw, str):
            return TraceMethod(raw.lower())
        return raw

    @model_validator(mode='after')
    def check_reflection_cap(self):
        if self.max_reflections > 3 and not self.allow_deep_reflections:
            raise ValueError(
                f'max_reflections={self.max_reflections} exceeds 3; set allow_deep_reflections to override')
        return self


DEFAULT_BS_POSITIONS: list[tuple[float, float, float]] = [
    (2.0, 11.2, 2.5),
    (48.0, 13.8, 2.5),
    (9.2, 0.8, 2.5),
    (39.2, 0.8, 2.5),
    (0.8, 24.2, 2.5),
    (29.2, 24.2, 2.5),
    (49.2, 24.2, 2.5),
]
""" BS sites of the bundled office scenario """


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    map_path: str = 'bundled'
    bs_positions: list[tuple[float, float, float]] = Field(
        default_factory=lambda: list(DEFAULT_BS_POSITIONS))
    n_users: int = Field(default=100, ge=1)
    n_trials: int = Field(default=100, ge=1)
    sigma_aod_deg: float = Field(default=0.5, ge=0)
    sigma_tof_ns: float = Field(default=0.25, ge=0)
    rng_seed: int = 0
    bs_counts: list[int] = Field(default_factory=lambda: [1, 2, 3])
    user_height: float = 1.5
    wall_clearance: float = Field(default=0.3, ge=0)
    max_link_distance: float = Field(default=25.0, gt=0)
    min_components: int = Field(default=2, ge=1)
    max_paths_per_link: int = Field(default=3, ge=1)
    mode: ObservationMode = ObservationMode.AOD
    max_interactions: int = Field(default=3, ge=0)
    cluster_threshold: float = Field(default=0.40, gt=0)
    max_resamples: int = Field(default=50, ge=0)
    workers: int = Field(default=1, ge=1)
    trace: TraceConfig = Field(default_factory=lambda: TraceConfig(tessellation_factor=20, capture_alpha=1.5))

    @field_validator('mode', mode='before')
    @classmethod
    def transform(cls, raw: Any) -> ObservationMode:
        if isinstance(raw, str):
            return ObservationMode(raw.lower())
        return raw

    @field_validator('bs_counts')
    @classmethod
    def check_bs_counts(cls, raw: list[int]) -> list[int]:
        if len(raw) == 0:
            raise ValueError('bs_counts must name at least one BS count')
        for count in raw:
            if count not in (1, 2, 3):
                raise ValueError(f'bs_counts entries must be 1, 2 or 3, got {count}')
        return sorted(set(raw))

    @model_validator(mode='after')
    def check_bs_positions(self):
        if len(self.bs_positions) < max(self.bs_counts):
            raise ValueError(
                f'{len(self.bs_positions)} BS positions cannot serve a {max(self.bs_counts)}-BS series')
        return self

    @property
    def sigma_aod(self) -> float:
        """ Standard deviation of the angle noise (rad) """
        return math.radians(self.sigma_aod_deg)

    @property
    def sigma_tof(self) -> float:
        """ Standard deviation of the time of flight noise (s) """
        return self.sigma_tof_ns * 1e-9

    def resolve_map_path(self, scenario_dir: Optional[Path] = None) -> Path:
        """ Returns the map file referenced by this scenario

        Args:
            scenario_dir (Optional[Path], optional): directory relative paths are resolved against. Defaults to None.

        Returns:
            Path: path to the map file
        """
        if self.map_path == 'bundled':
            return Path(__file__).parent / 'data' / 'office_synthetic.map.json'

        path = Path(self.map_path)
        if not path.is_absolute() and scenario_dir is not None:
            path = scenario_dir / path

        return path

