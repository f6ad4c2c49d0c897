import json

import numpy as np
import pytest

from conftest import x_wall
from mmwave_map_localization.errors import MapParseError, MapValidationError
from mmwave_map_localization.geometry import IndoorMap, dump_map, load_map, load_map_file, vec3


def test_load_minimal_map(wall_document):
    indoor_map = load_map(json.dumps(wall_document))

    assert len(indoor_map) == 1
    assert indoor_map.name == 'one_wall'
    assert indoor_map.surface('wall').transmission_loss_db == pytest.approx(7.2)
    lo, hi = indoor_map.bounding_box
    np.testing.assert_allclose(lo, [-10, -10, 0])
    np.testing.assert_allclose(hi, [20, 10, 3])


def test_load_from_binary_file(map_file, wall_document):
    indoor_map = load_map_file(map_file(wall_document))
    assert indoor_map.surface_index('wall') == 0


def test_bounds_derived_from_surfaces(wall_document):
    del wall_document['bounds']
    lo, hi = load_map(json.dumps(wall_document)).bounding_box
    np.testing.assert_allclose(lo, [-10, 0, 0])
    np.testing.assert_allclose(hi, [20, 0, 3])


def test_non_coplanar_surface_named(wall_document):
    wall_document['surfaces'].append(
        {'id': 'bent', 'material': 'glass', 'vertices': [[0, 1, 0], [1, 1, 0], [1, 1.2, 1], [0, 1, 1]]})

    with pytest.raises(MapValidationError, match="surface 'bent'") as e:
        load_map(json.dumps(wall_document))
    assert e.value.surface_id == 'bent'


def test_schema_error_names_surface(wall_document):
    del wall_document['surfaces'][0]['material']

    with pytest.raises(MapParseError, match="surface 'wall'"):
        load_map(json.dumps(wall_document))


@pytest.mark.parametrize('mutate, message', [
    (lambda d: d.update(units='feet'), 'unsupported units'),
    (lambda d: d.update(surfaces=[]), 'at least one surface'),
    (lambda d: d['surfaces'].append(dict(d['surfaces'][0])), 'duplicate'),
    (lambda d: d.update(extra=1), 'extra'),
])
def test_schema_violations(wall_document, mutate, message):
    mutate(wall_document)
    with pytest.raises(MapParseError, match=message):
        load_map(json.dumps(wall_document))


def test_not_json():
    with pytest.raises(MapParseError, match='not valid JSON'):
        load_map(b'{"name": ')


def test_not_utf8():
    with pytest.raises(MapParseError, match='UTF-8'):
        load_map(b'\xff\xfe\x00')


def test_surface_outside_bounds(wall_document):
    wall_document['bounds'] = {'min': [0, -1, 0], 'max': [5, 1, 3]}
    with pytest.raises(MapValidationError, match='outside the map bounds'):
        load_map(json.dumps(wall_document))


def test_empty_map_needs_bounds():
    with pytest.raises(MapValidationError):
        IndoorMap(surfaces=())
    assert len(IndoorMap(surfaces=(), bounds=(vec3(0, 0, 0), vec3(1, 1, 1)))) == 0


def test_dump_is_a_fixed_point(wall_document):
    once = dump_map(load_map(json.dumps(wall_document)))
    twice = dump_map(load_map(once))
    assert once == twice


def test_bundled_office(office):
    assert len(office) == 60
    lo, hi = office.bounding_box
    np.testing.assert_allclose(lo, [0, 0, 0])
    np.testing.assert_allclose(hi, [50, 25, 3])
    assert office.clearance(vec3(5, 12.5, 1.5)) == pytest.approx(1.5)


def test_segment_crossings(crossing_wall):
    crossings = crossing_wall.segment_crossings(vec3(0, 0, 1.5), vec3(4, 0, 1.5))

    assert len(crossings) == 1
    assert crossings[0].surface.surface_id == 'wall'
    assert crossings[0].fraction == pytest.approx(0.5)
    np.testing.assert_allclose(crossings[0].point, [2, 0, 1.5])


def test_segment_touching_surface_does_not_cross(crossing_wall):
    assert crossing_wall.segment_crossings(vec3(2, 0, 1.5), vec3(4, 0, 1.5)) == []
    assert crossing_wall.is_line_of_sight(vec3(2, 0, 1.5), vec3(4, 0, 1.5))


def test_segment_crossings_ordered():
    indoor_map = IndoorMap(surfaces=(x_wall('far', -5, 5, 3.0), x_wall('near', -5, 5, 1.0)))
    crossings = indoor_map.segment_crossings(vec3(0, 0, 1), vec3(0, 4, 1))
    assert [c.surface.surface_id for c in crossings] == ['near', 'far']


def test_line_of_sight(crossing_wall):
    assert not crossing_wall.is_line_of_sight(vec3(0, 0, 1.5), vec3(4, 0, 1.5))
    assert crossing_wall.is_line_of_sight(vec3(0, 0, 1.5), vec3(0, 4, 1.5))
    # passes beside the wall's edge
    assert crossing_wall.is_line_of_sight(vec3(0, 6, 1.5), vec3(4, 6, 1.5))


def test_nearest_hits_batch(corridor):
    origins = np.array([[0, 2, 1.5], [0, 2, 1.5], [0, 2, 1.5]], dtype=np.float64)
    directions = np.array([[0, -1, 0], [0, 1, 0], [1, 0, 0]], dtype=np.float64)

    distances, indices = corridor.nearest_hits(origins, directions, chunk_size=2)

    np.testing.assert_allclose(distances[:2], [2.0, 2.0])
    assert indices.tolist() == [corridor.surface_index('south'), corridor.surface_index('north'), -1]
    assert np.isinf(distances[2])


def test_first_hit(corridor):
    surface, point, t = corridor.first_hit(vec3(0, 1, 1.5), vec3(0, 1, 0))
    assert surface.surface_id == 'north'
    assert t == pytest.approx(3.0)
    np.testing.assert_allclose(point, [0, 4, 1.5])
