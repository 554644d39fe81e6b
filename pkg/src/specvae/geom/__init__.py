from . import quat
from .mesh import (
    TriMesh,
    load_mesh,
    load_ply,
    sample_surface,
    save_obj,
    save_off,
    save_ply,
    triangle_areas,
)
from .quat import random_height_rotation, rotate_cloud

__all__ = [
    "TriMesh", "load_mesh", "load_ply", "quat", "random_height_rotation", "rotate_cloud",
    "sample_surface", "save_obj", "save_off", "save_ply", "triangle_areas",
]
