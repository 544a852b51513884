"""Part-based re-identification by matching a compositional template with cluster sampling."""

from .evaluation import cmc, match_in_shot, pascal_match, person_box, rank_gallery
from .features import (
    Descriptor,
    bhattacharyya,
    hsv_histogram,
    part_distance,
    rgb_to_hsv,
)
from .geometry import OrientedRect, iou
from .graph import CandidacyGraph, EdgeKind, GraphParams, build_graph
from .kinematics import KinematicsModel, fit_kinematics, kinematic_prob
from .model import PartProposal, Scene, Template, joint_transform, rect_of
from .parts import PARTS, PartType
from .posterior import MatchState, PriorParams, derive_state, log_posterior
from .sampler import (
    ChainConfig,
    ChainResult,
    enumerate_posterior,
    oracle_map,
    run_chain,
)
from .template import BuildConfig, build_scene, build_template

__version__ = "0.1.0"

__all__ = [
    "BuildConfig",
    "CandidacyGraph",
    "ChainConfig",
    "ChainResult",
    "Descriptor",
    "EdgeKind",
    "GraphParams",
    "KinematicsModel",
    "MatchState",
    "OrientedRect",
    "PARTS",
    "PartProposal",
    "PartType",
    "PriorParams",
    "Scene",
    "Template",
    "bhattacharyya",
    "build_graph",
    "build_scene",
    "build_template",
    "cmc",
    "derive_state",
    "enumerate_posterior",
    "fit_kinematics",
    "hsv_histogram",
    "iou",
    "joint_transform",
    "kinematic_prob",
    "log_posterior",
    "match_in_shot",
    "oracle_map",
    "part_distance",
    "pascal_match",
    "person_box",
    "rank_gallery",
    "rect_of",
    "rgb_to_hsv",
    "run_chain",
]
