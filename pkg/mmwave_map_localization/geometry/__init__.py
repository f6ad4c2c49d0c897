from mmwave_map_localization.geometry.primitives import (
    Interaction,
    Ray,
    Surface,
    Vec3,
    angles_to_direction,
    as_vec3,
    direction_to_angles,
    incidence_angle,
    intersect,
    mirror_point,
    normalize,
    path_length,
    reflect_direction,
    vec3,
)
from mmwave_map_localization.geometry.indoor_map import (
    Crossing,
    IndoorMap,
    dump_map,
    load_map,
    load_map_file,
)
