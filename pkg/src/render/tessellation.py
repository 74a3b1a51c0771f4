"""
Fixed triangle meshes for the supported primitives.

Spheres are 24 x 12 UV grids, cylinders 24-gon prisms with fan caps,
boxes 12 triangles. Meshes are in the primitive's local frame and cached.
"""

from functools import lru_cache
from typing import Tuple

import numpy as np

from ..robot.urdf import Box, Cylinder, Primitive, Sphere

SPHERE_SEGMENTS = 24
SPHERE_RINGS = 12
CYLINDER_SEGMENTS = 24

Mesh = Tuple[np.ndarray, np.ndarray]  # vertices (V, 3), faces (F, 3)


@lru_cache(maxsize=None)
def box_mesh(hx: float, hy: float, hz: float) -> Mesh:
    signs = np.array(
        [[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float
    )
    vertices = signs * np.array([hx, hy, hz])
    # vertex index = 4*ix + 2*iy + iz
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return _freeze(vertices, np.array(faces, dtype=np.int64))


@lru_cache(maxsize=None)
def sphere_mesh(radius: float) -> Mesh:
    n_lon, n_lat = SPHERE_SEGMENTS, SPHERE_RINGS
    lon = 2.0 * np.pi * np.arange(n_lon) / n_lon
    lat = np.pi * np.arange(1, n_lat) / n_lat  # polar angle of interior rings
    rings = np.stack(
        [
            np.outer(np.sin(lat), np.cos(lon)),
            np.outer(np.sin(lat), np.sin(lon)),
            np.outer(np.cos(lat), np.ones(n_lon)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    vertices = np.vstack([[0.0, 0.0, 1.0], rings, [0.0, 0.0, -1.0]]) * radius
    top, bottom = 0, len(vertices) - 1

    def ring(i, j):
        return 1 + i * n_lon + (j % n_lon)

    faces = []
    for j in range(n_lon):
        faces.append((top, ring(0, j), ring(0, j + 1)))
    for i in range(n_lat - 2):
        for j in range(n_lon):
            faces.append((ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)))
            faces.append((ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)))
    for j in range(n_lon):
        faces.append((bottom, ring(n_lat - 2, j + 1), ring(n_lat - 2, j)))
    return _freeze(vertices, np.array(faces, dtype=np.int64))


@lru_cache(maxsize=None)
def cylinder_mesh(radius: float, length: float) -> Mesh:
    n = CYLINDER_SEGMENTS
    angles = 2.0 * np.pi * np.arange(n) / n
    circle = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=-1)
    half = length / 2.0
    bottom = np.column_stack([circle, np.full(n, -half)])
    top = np.column_stack([circle, np.full(n, half)])
    vertices = np.vstack([bottom, top, [[0.0, 0.0, -half], [0.0, 0.0, half]]])
    c_bottom, c_top = 2 * n, 2 * n + 1
    faces = []
    for j in range(n):
        k = (j + 1) % n
        faces.append((j, k, n + k))
        faces.append((j, n + k, n + j))
        faces.append((c_bottom, k, j))
        faces.append((c_top, n + j, n + k))
    return _freeze(vertices, np.array(faces, dtype=np.int64))


def primitive_mesh(primitive: Primitive) -> Mesh:
    if isinstance(primitive, Box):
        return box_mesh(*(float(h) for h in primitive.half_extents))
    if isinstance(primitive, Cylinder):
        return cylinder_mesh(float(primitive.radius), float(primitive.length))
    if isinstance(primitive, Sphere):
        return sphere_mesh(float(primitive.radius))
    raise TypeError(f"unsupported primitive {primitive!r}")


def primitive_triangles(primitive: Primitive) -> np.ndarray:
    """Triangles (F, 3, 3) of a primitive in its local frame."""
    vertices, faces = primitive_mesh(primitive)
    return vertices[faces]


def _freeze(vertices: np.ndarray, faces: np.ndarray) -> Mesh:
    vertices.setflags(write=False)
    faces.setflags(write=False)
    return vertices, faces
