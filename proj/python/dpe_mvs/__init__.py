"""Python access to the dpe_mvs reconstruction library."""

from ._core import (
    Camera,
    GeometryError,
    adaptive_radius,
    allocate_search,
    corpus_names,
    default_config,
    deformable_cost,
    edge_cues,
    evaluate,
    exclusion_radius,
    extended_params,
    homography,
    ncc_cost,
    project,
    read_pfm,
    read_ply,
    render_scene,
    run_scene,
    stochastic_probability,
    unproject,
    view_weight,
)

__all__ = [
    "Camera",
    "GeometryError",
    "adaptive_radius",
    "allocate_search",
    "corpus_names",
    "default_config",
    "deformable_cost",
    "edge_cues",
    "evaluate",
    "exclusion_radius",
    "extended_params",
    "homography",
    "ncc_cost",
    "project",
    "read_pfm",
    "read_ply",
    "render_scene",
    "run_scene",
    "stochastic_probability",
    "unproject",
    "view_weight",
]
