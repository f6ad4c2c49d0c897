from mmwave_map_localization.raytracer.launch import LaunchGrid, launch_directions
from mmwave_map_localization.raytracer.propagation import fspl_db, path_power_dbm, reflection_coefficient
from mmwave_map_localization.raytracer.tracer import (
    MultipathComponent,
    ResolvedPath,
    Signature,
    parse_signature,
    refine_path,
    resolve_path,
    shoot_and_bounce,
    signature_text,
    trace,
)
