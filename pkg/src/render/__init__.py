"""
Camera projection and rasterization.

Pinhole cameras, primitive tessellation, a z-buffered rasterizer,
embodiment masks, oracle scene renders and the PPM/PBM frame formats.
"""

from .camera import BEHIND, Z_NEAR, CameraModel
from .rasterizer import rasterize
from .frames import (
    RgbVideo, MaskVideo, to_uint8,
    write_ppm, read_ppm, write_pbm, read_pbm,
    write_rgb_video, read_rgb_video, write_mask_video, read_mask_video,
)
from .scene import (
    ARM_COLOR, BACKGROUND_COLOR, SceneObject, SceneSpec, Attachment,
    embodiment_triangles, render_embodiment_mask, render_scene, color_key_mask,
    scene_to_dict, scene_from_dict,
)

__all__ = [
    'BEHIND', 'Z_NEAR', 'CameraModel', 'rasterize',
    'RgbVideo', 'MaskVideo', 'to_uint8',
    'write_ppm', 'read_ppm', 'write_pbm', 'read_pbm',
    'write_rgb_video', 'read_rgb_video', 'write_mask_video', 'read_mask_video',
    'ARM_COLOR', 'BACKGROUND_COLOR', 'SceneObject', 'SceneSpec', 'Attachment',
    'embodiment_triangles', 'render_embodiment_mask', 'render_scene', 'color_key_mask',
    'scene_to_dict', 'scene_from_dict',
]
