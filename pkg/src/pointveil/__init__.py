"""pointveil: geometric point-cloud obfuscation schemes and a recovery attack.

Obfuscate 2D/3D point clouds into lines, planes, rays or coordinate-permuted
points; reconstruct the original points from neighborhood information; and
measure how well each scheme resists that reconstruction.
"""

from pointveil.evaluate import (
    AccuracyReport,
    default_thresholds,
    geometric_accuracy,
    run_cell,
    sweep,
    sweep_csv,
    sweep_json,
)
from pointveil.fileio import (
    ParseError,
    VersionError,
    read_neighborhoods,
    read_obfuscation,
    read_points,
    read_points3d_text,
    read_recovered,
    read_report,
    read_sidecar,
    write_neighborhoods,
    write_obfuscation,
    write_points,
    write_recovered,
    write_report,
    write_sidecar,
)
from pointveil.geometry import (
    AxisPlaneGeom,
    GeometryError,
    LineGeom,
    Point,
    PointCloud,
    knn,
    point_to_line_distance,
    point_to_plane_distance,
    scene_diameter,
)
from pointveil.neighborhoods import (
    NeighborhoodSet,
    corrupt_neighborhoods,
    measure_inlier_ratio,
    oracle_neighborhoods,
)
from pointveil.obfuscate import (
    SCHEMES,
    GroundTruthSidecar,
    ObfuscatedCloud,
    obfuscate,
)
from pointveil.recover import (
    RecoveredCloud,
    RecoveryConfig,
    recover_cloud,
)
from pointveil.synthetic import SCENE_KINDS, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "AxisPlaneGeom",
    "GeometryError",
    "GroundTruthSidecar",
    "LineGeom",
    "NeighborhoodSet",
    "ObfuscatedCloud",
    "ParseError",
    "Point",
    "PointCloud",
    "RecoveredCloud",
    "RecoveryConfig",
    "SCENE_KINDS",
    "SCHEMES",
    "VersionError",
    "corrupt_neighborhoods",
    "default_thresholds",
    "generate_synthetic",
    "geometric_accuracy",
    "knn",
    "measure_inlier_ratio",
    "obfuscate",
    "oracle_neighborhoods",
    "point_to_line_distance",
    "point_to_plane_distance",
    "read_neighborhoods",
    "read_obfuscation",
    "read_points",
    "read_points3d_text",
    "read_recovered",
    "read_report",
    "read_sidecar",
    "recover_cloud",
    "run_cell",
    "scene_diameter",
    "sweep",
    "sweep_csv",
    "sweep_json",
    "write_neighborhoods",
    "write_obfuscation",
    "write_points",
    "write_recovered",
    "write_report",
    "write_sidecar",
    "__version__",
]
