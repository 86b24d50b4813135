"""Articulated body + rigid object fitting to 2D keypoints.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from ._anchorfit import (
    AnchorfitError,
    BodyModel,
    Camera,
    HumanState,
    capsule_proxies,
    default_rig,
    extract_contacts,
    farthest_point_sampling,
    forward_kinematics,
    geman_mcclure,
    load_rig,
    project,
    project_clamped,
    run_cli,
    skin_vertices,
    vertex_normals,
)

__all__ = [
    "AnchorfitError",
    "BodyModel",
    "Camera",
    "HumanState",
    "capsule_proxies",
    "default_rig",
    "extract_contacts",
    "farthest_point_sampling",
    "forward_kinematics",
    "geman_mcclure",
    "load_rig",
    "project",
    "project_clamped",
    "run_cli",
    "skin_vertices",
    "vertex_normals",
]
