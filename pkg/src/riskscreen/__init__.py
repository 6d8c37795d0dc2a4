"""Driver-risk-field labeling and risk-prioritized scenario screening."""

__version__ = "0.1.0"

from .cost import CostParams, Obb, cost_map, obb_distance, pair_cost
from .drf import DrfParams, drf_at, drf_grid, lookahead
from .evaluation import JointPredictionSet, auc, average_precision, min_joint_ade_fde, precision_at_k, select_mode
from .grid import GridSpec, ScalarField
from .pathframe import PathFrame, curvature, path_to_world, world_to_path
from .risk import RiskModel, agent_risk_series, fuse, scenario_score, scene_risk
from .scenario import AgentState, Frame, Scene, build_scenes, parse_tracks, synth_scene
from .ssm import drac, pet, ssm_scene_score, thw, ttc

__all__ = [
    "AgentState", "CostParams", "DrfParams", "Frame", "GridSpec", "JointPredictionSet", "Obb", "PathFrame",
    "RiskModel", "ScalarField", "Scene", "agent_risk_series", "auc", "average_precision", "build_scenes",
    "cost_map", "curvature", "drac", "drf_at", "drf_grid", "fuse", "lookahead", "min_joint_ade_fde",
    "obb_distance", "pair_cost", "parse_tracks", "path_to_world", "pet", "precision_at_k", "scenario_score",
    "scene_risk", "select_mode", "ssm_scene_score", "synth_scene", "thw", "ttc", "world_to_path",
]
