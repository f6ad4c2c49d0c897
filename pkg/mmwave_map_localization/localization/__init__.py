from mmwave_map_localization.localization.candidates import (
    CandidateLocation,
    PathObservation,
    generate_candidates,
    observations_from_components,
)
from mmwave_map_localization.localization.clustering import ClusterEstimate, UnionFind, cluster_candidates
from mmwave_map_localization.localization.map_at import LocateDiagnostics, locate
from mmwave_map_localization.localization.three_point import subtended_angle, three_point_fix
