import json
from pathlib import Path

import numpy as np
import pytest

from mmwave_map_localization.config_def import ScenarioConfig, TraceConfig, TraceMethod
from mmwave_map_localization.geometry import IndoorMap, Surface, load_map_file, vec3


def x_wall(surface_id: str, xa: float, xb: float, y: float, height: float = 3.0) -> Surface:
    """ Vertical wall in the plane y = const, spanning x in [xa, xb] """
    return Surface(surface_id, np.array([[xa, y, 0.0], [xb, y, 0.0], [xb, y, height], [xa, y, height]]))


def y_wall(surface_id: str, ya: float, yb: float, x: float, height: float = 3.0) -> Surface:
    """ Vertical wall in the plane x = const, spanning y in [ya, yb] """
    return Surface(surface_id, np.array([[x, ya, 0.0], [x, yb, 0.0], [x, yb, height], [x, ya, height]]))


@pytest.fixture
def exact_trace() -> TraceConfig:
    """ Image-only tracing, exact and cheap on the small fixture maps """
    return TraceConfig(method=TraceMethod.IMAGE)


@pytest.fixture
def free_space() -> IndoorMap:
    return IndoorMap(surfaces=(), name='free', bounds=(vec3(0.0, 0.0, 0.0), vec3(20.0, 20.0, 3.0)))


@pytest.fixture
def single_wall() -> IndoorMap:
    """ One long wall in the plane y = 0 """
    return IndoorMap(
        surfaces=(x_wall('wall', -10.0, 20.0, 0.0),),
        name='single_wall',
        bounds=(vec3(-10.0, -10.0, 0.0), vec3(20.0, 10.0, 3.0)),
    )


@pytest.fixture
def crossing_wall() -> IndoorMap:
    """ One wall in the plane x = 2, across any x-directed segment near the origin """
    return IndoorMap(
        surfaces=(y_wall('wall', -5.0, 5.0, 2.0),),
        name='crossing_wall',
        bounds=(vec3(-10.0, -10.0, 0.0), vec3(10.0, 10.0, 3.0)),
    )


@pytest.fixture
def corridor() -> IndoorMap:
    """ Two parallel walls at y = 0 and y = 4 """
    return IndoorMap(
        surfaces=(x_wall('south', -10.0, 20.0, 0.0), x_wall('north', -10.0, 20.0, 4.0)),
        name='corridor',
        bounds=(vec3(-10.0, -10.0, 0.0), vec3(20.0, 10.0, 3.0)),
    )


@pytest.fixture
def l_corridor() -> IndoorMap:
    """ L-shaped corridor: an east-west leg joined to a north-south leg at its east end """
    return IndoorMap(
        surfaces=(
            x_wall('s', 0.0, 12.0, 0.0),
            x_wall('n', 0.0, 8.0, 4.0),
            y_wall('e', 0.0, 14.0, 12.0),
            y_wall('w', 4.0, 14.0, 8.0),
            y_wall('end', 0.0, 4.0, 0.0),
        ),
        name='l_corridor',
        bounds=(vec3(0.0, 0.0, 0.0), vec3(12.0, 14.0, 3.0)),
    )


@pytest.fixture(scope='session')
def office() -> IndoorMap:
    return load_map_file(ScenarioConfig().resolve_map_path())


@pytest.fixture
def map_file(tmp_path: Path):
    """ Writes a map document to a temporary file and returns its path """

    def write(document: dict, name: str = 'test.map.json') -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding='utf-8')
        return path

    return write


@pytest.fixture
def wall_document() -> dict:
    return {
        'name': 'one_wall',
        'units': 'meters',
        'bounds': {'min': [-10, -10, 0], 'max': [20, 10, 3]},
        'surfaces': [
            {'id': 'wall', 'material': 'drywall', 'vertices': [[-10, 0, 0], [20, 0, 0], [20, 0, 3], [-10, 0, 3]]},
        ],
    }
