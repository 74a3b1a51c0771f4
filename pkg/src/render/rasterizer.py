"""
Z-buffered triangle rasterizer.

Coverage is decided at pixel centres ``(j + 0.5, i + 0.5)`` with inclusive
edge tests, so masks are strictly binary. Triangles with any vertex at or
behind the near plane are dropped, not clipped. Depth is interpolated
perspective-correctly and the nearest fragment wins; equal depths resolve
to the lower triangle index, which keeps the output independent of how the
work is chunked.
"""

from typing import Tuple

import numpy as np

from .camera import Z_NEAR, CameraModel

# Upper bound on (triangles x bbox pixels) evaluated at once.
CHUNK_BUDGET = 1 << 21
MIN_AREA = 1e-12


def rasterize(tri_cam: np.ndarray, cam: CameraModel) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rasterize camera-frame triangles.

    Args:
        tri_cam: Triangles of shape (F, 3, 3) in the camera frame
        cam: Camera providing intrinsics and image size

    Returns:
        ``(depth, owner)``: (H, W) float depth (``inf`` where empty) and
        (H, W) int index of the winning triangle (``-1`` where empty)
    """
    width, height = cam.width, cam.height
    depth = np.full((height, width), np.inf)
    owner = np.full((height, width), -1, dtype=np.int64)

    tri_cam = np.asarray(tri_cam, dtype=float).reshape(-1, 3, 3)
    if tri_cam.shape[0] == 0:
        return depth, owner

    z = tri_cam[..., 2]
    index = np.nonzero(np.all(z > Z_NEAR, axis=1))[0]
    if index.size == 0:
        return depth, owner
    z = z[index]
    uv = cam.project(tri_cam[index])
    u, v = uv[..., 0], uv[..., 1]

    area = (u[:, 1] - u[:, 0]) * (v[:, 2] - v[:, 0]) - (u[:, 2] - u[:, 0]) * (v[:, 1] - v[:, 0])
    x0 = np.maximum(np.ceil(u.min(axis=1) - 0.5), 0).astype(np.int64)
    x1 = np.minimum(np.floor(u.max(axis=1) - 0.5), width - 1).astype(np.int64)
    y0 = np.maximum(np.ceil(v.min(axis=1) - 0.5), 0).astype(np.int64)
    y1 = np.minimum(np.floor(v.max(axis=1) - 0.5), height - 1).astype(np.int64)
    keep = (np.abs(area) >= MIN_AREA) & (x1 >= x0) & (y1 >= y0)
    if not np.any(keep):
        return depth, owner

    index, u, v, z, area = index[keep], u[keep], v[keep], z[keep], area[keep]
    x0, x1, y0, y1 = x0[keep], x1[keep], y0[keep], y1[keep]
    bw = x1 - x0 + 1
    bh = y1 - y0 + 1
    order = np.argsort(bw * bh, kind="stable")

    pix_parts, depth_parts, tri_parts = [], [], []
    start = 0
    while start < order.size:
        # Grow the chunk while the padded grid stays within budget.
        stop = start + 1
        max_w, max_h = bw[order[start]], bh[order[start]]
        while stop < order.size:
            nw = max(max_w, bw[order[stop]])
            nh = max(max_h, bh[order[stop]])
            if (stop - start + 1) * nw * nh > CHUNK_BUDGET:
                break
            max_w, max_h = nw, nh
            stop += 1
        chunk = order[start:stop]
        start = stop

        pix, frag_depth, tri = _fragments(
            u[chunk], v[chunk], z[chunk], area[chunk],
            x0[chunk], x1[chunk], y0[chunk], y1[chunk],
            int(max_w), int(max_h), width,
        )
        pix_parts.append(pix)
        depth_parts.append(frag_depth)
        tri_parts.append(index[chunk][tri])

    pix = np.concatenate(pix_parts)
    if pix.size == 0:
        return depth, owner
    frag_depth = np.concatenate(depth_parts)
    tri = np.concatenate(tri_parts)

    ranked = np.lexsort((tri, frag_depth, pix))
    pix, frag_depth, tri = pix[ranked], frag_depth[ranked], tri[ranked]
    first = np.ones(pix.size, dtype=bool)
    first[1:] = pix[1:] != pix[:-1]
    depth.reshape(-1)[pix[first]] = frag_depth[first]
    owner.reshape(-1)[pix[first]] = tri[first]
    return depth, owner


def _fragments(u, v, z, area, x0, x1, y0, y1, grid_w, grid_h, width):
    """Covered pixels of a chunk as flat indices, depths and chunk-local triangle ids."""
    px = x0[:, None] + np.arange(grid_w)[None, :]  # (C, W)
    py = y0[:, None] + np.arange(grid_h)[None, :]  # (C, H)
    cx = (px + 0.5)[:, None, :]
    cy = (py + 0.5)[:, :, None]

    def edge(a, b):
        # edge function of (vertex a -> vertex b) evaluated at the pixel centres
        return (u[:, b, None, None] - u[:, a, None, None]) * (cy - v[:, a, None, None]) - (
            v[:, b, None, None] - v[:, a, None, None]
        ) * (cx - u[:, a, None, None])

    inv_area = (1.0 / area)[:, None, None]
    l0 = edge(1, 2) * inv_area
    l1 = edge(2, 0) * inv_area
    l2 = edge(0, 1) * inv_area
    inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
    inside &= (px <= x1[:, None])[:, None, :]
    inside &= (py <= y1[:, None])[:, :, None]

    c, iy, ix = np.nonzero(inside)
    inv_z = (
        l0[c, iy, ix] / z[c, 0] + l1[c, iy, ix] / z[c, 1] + l2[c, iy, ix] / z[c, 2]
    )
    pix = py[c, iy] * width + px[c, ix]
    return pix, 1.0 / inv_z, c
