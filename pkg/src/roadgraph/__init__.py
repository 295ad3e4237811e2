"""Road-network graph detection engine and benchmark harness."""

from .config import RunConfig, SynthConfig, load_config
from .engine import (DetectionResult, EngineConfig, ExpertOraclePolicy,
                     PolicyError, PolicyRequest, PolicyResponse,
                     VertexPrediction, run_detection, wrap_expert_as_policy)
from .expert import (ExpertConfig, ExpertLabel, ExplorationState, LabelMode,
                     OffTrackError, expert_next, force_correct)
from .graph import (Edge, GraphError, Point, RoadGraph, VertexClass,
                    add_step_edge, classify_vertex, simplify_graph,
                    snap_vertex, structurally_equal)
from .graphio import DataError, load_graph, save_graph
from .matching import (Assignment, LossWeights, coord_loss, focal_loss,
                       match_vertices, total_loss, valid_loss)
from .metrics import (MetricConfig, MetricReport, apls, full_report,
                      intersection_metrics, pixel_metrics)
from .raster import (RoiSpec, Tile, crop_roi, extract_peaks, rasterize_graph)
from .sampling import (SamplingResult, TrainingSample, run_expert_sampling,
                       sample_training_set)
from .synth import SyntheticWorld, render_synthetic_world

__version__ = "0.1.0"

__all__ = [
    "Assignment", "DataError", "DetectionResult", "Edge", "EngineConfig",
    "ExpertConfig", "ExpertLabel", "ExpertOraclePolicy", "ExplorationState",
    "GraphError", "LabelMode", "LossWeights", "MetricConfig", "MetricReport",
    "OffTrackError", "Point", "PolicyError", "PolicyRequest",
    "PolicyResponse", "RoadGraph", "RoiSpec", "RunConfig", "SamplingResult",
    "SynthConfig", "SyntheticWorld", "Tile", "TrainingSample", "VertexClass",
    "VertexPrediction", "add_step_edge", "apls", "classify_vertex",
    "coord_loss", "crop_roi", "expert_next", "extract_peaks", "focal_loss",
    "force_correct", "full_report", "intersection_metrics", "load_config",
    "load_graph", "match_vertices", "pixel_metrics", "rasterize_graph",
    "render_synthetic_world", "run_detection", "run_expert_sampling",
    "sample_training_set", "save_graph", "simplify_graph", "snap_vertex",
    "structurally_equal", "total_loss", "valid_loss",
    "wrap_expert_as_policy",
]
