"""Synthetic depth-camera stand-in: seeded surface sampling of the scene.

Each object contributes a Poisson(surface_area * density) number of points,
sampled uniformly over its surface and colored with the object's color.
Union shapes (cross prisms) and the hole plate reject samples that land on
hidden or cut-away surface, which by Poisson thinning leaves an exact
uniform sampling of the visible surface. The gripper is not rendered; a
carried object is, which is what lets a policy tell the transport phase
from the approach phase.
"""

from __future__ import annotations

import math
from typing import List

import numpy as np

from ..pointcloud import ColoredPointCloud
from .world import SceneObject, SceneState, surface_area

# Default sampling density; chosen so a full task scene lands in the low
# thousands of points before cropping and budgeting.
DEFAULT_DENSITY = 8000.0  # points per square meter


def _sample_box_surface(dims, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on the surface of an origin-centered box (local frame)."""
    dx, dy, dz = dims
    areas = np.array([dy * dz, dy * dz, dx * dz, dx * dz, dx * dy, dx * dy])
    faces = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=n)
    v = rng.uniform(-0.5, 0.5, size=n)
    pts = np.empty((n, 3))
    for face in range(6):
        mask = faces == face
        axis = face // 2
        side = 1.0 if face % 2 == 0 else -1.0
        other = [a for a in range(3) if a != axis]
        full = (dx, dy, dz)
        pts[mask, axis] = side * 0.5 * full[axis]
        pts[mask, other[0]] = u[mask] * full[other[0]]
        pts[mask, other[1]] = v[mask] * full[other[1]]
    return pts


def _sample_cylinder_surface(dims, n: int, rng: np.random.Generator) -> np.ndarray:
    radius, height = dims
    lateral = 2.0 * math.pi * radius * height
    cap = math.pi * radius * radius
    total = lateral + 2.0 * cap
    which = rng.uniform(0.0, total, size=n)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    pts = np.empty((n, 3))
    on_side = which < lateral
    pts[on_side, 0] = radius * np.cos(theta[on_side])
    pts[on_side, 1] = radius * np.sin(theta[on_side])
    pts[on_side, 2] = rng.uniform(-0.5, 0.5, size=int(on_side.sum())) * height
    on_cap = ~on_side
    ncap = int(on_cap.sum())
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, size=ncap))
    pts[on_cap, 0] = r * np.cos(theta[on_cap])
    pts[on_cap, 1] = r * np.sin(theta[on_cap])
    pts[on_cap, 2] = np.where(which[on_cap] < lateral + cap, 0.5, -0.5) * height
    return pts


def _inside_box(pts: np.ndarray, dims, margin: float = 1e-9) -> np.ndarray:
    half = 0.5 * np.asarray(dims)
    return np.all(np.abs(pts) < half - margin, axis=1)


def _in_cross_footprint(xy: np.ndarray, arm: float, width: float) -> np.ndarray:
    in_a = (np.abs(xy[:, 0]) <= 0.5 * arm) & (np.abs(xy[:, 1]) <= 0.5 * width)
    in_b = (np.abs(xy[:, 0]) <= 0.5 * width) & (np.abs(xy[:, 1]) <= 0.5 * arm)
    return in_a | in_b


def _sample_object_surface(obj: SceneObject, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform local-frame surface points, after visibility rejection."""
    if n == 0:
        return np.zeros((0, 3))
    if obj.shape == "cylinder":
        return _sample_cylinder_surface(obj.dims, n, rng)
    if obj.shape == "box":
        return _sample_box_surface(obj.dims, n, rng)
    if obj.shape == "cross_prism":
        arm, width, height = obj.dims
        dims_a = (arm, width, height)
        dims_b = (width, arm, height)
        area_a = 2.0 * (arm * width + arm * height + width * height)
        total = 2.0 * area_a  # both arms have identical area
        na = int(np.sum(rng.uniform(0.0, total, size=n) < area_a))
        pts_a = _sample_box_surface(dims_a, na, rng)
        pts_b = _sample_box_surface(dims_b, n - na, rng)
        # Points on one arm's surface strictly inside the other are not on
        # the union surface; dropping them thins the Poisson draw exactly.
        pts_a = pts_a[~_inside_box(pts_a, dims_b)]
        pts_b = pts_b[~_inside_box(pts_b, dims_a)]
        return np.concatenate([pts_a, pts_b], axis=0)
    if obj.shape == "plate_with_cross_hole":
        lx, ly, lz, hole_arm, hole_width = obj.dims
        pts = _sample_box_surface((lx, ly, lz), n, rng)
        keep = ~_in_cross_footprint(pts[:, :2], hole_arm, hole_width)
        return pts[keep]
    raise ValueError(f"cannot sample shape {obj.shape!r}")


def render_cloud(scene: SceneState, points_per_m2: float = DEFAULT_DENSITY,
                 seed: int = 0) -> ColoredPointCloud:
    """Render the scene's objects to a colored cloud; deterministic per seed."""
    if not (points_per_m2 > 0.0):
        raise ValueError(f"density must be positive, got {points_per_m2}")
    rng = np.random.default_rng(seed)
    positions: List[np.ndarray] = []
    colors: List[np.ndarray] = []
    for obj in scene.objects.values():
        n = int(rng.poisson(surface_area(obj) * points_per_m2))
        local = _sample_object_surface(obj, n, rng)
        if local.shape[0] == 0:
            continue
        rot = obj.orientation.rotation_matrix()
        world = local @ rot.T + obj.position
        positions.append(world)
        colors.append(np.tile(obj.color, (world.shape[0], 1)))
    if not positions:
        return ColoredPointCloud.empty()
    return ColoredPointCloud(np.concatenate(positions), np.concatenate(colors))
