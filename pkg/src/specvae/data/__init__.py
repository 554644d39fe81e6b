from .capsule import CapsuleParams, capsule_area, capsule_mesh
from .dataset import (
    Dataset,
    beta_classes,
    build_dataset,
    load_dataset,
    read_cloud,
    read_manifest,
    write_cloud,
)
from .heightfield import heightfield_mesh, read_pgm, write_pgm

__all__ = [
    "CapsuleParams", "Dataset", "beta_classes", "build_dataset", "capsule_area", "capsule_mesh",
    "heightfield_mesh", "load_dataset", "read_cloud", "read_manifest", "read_pgm", "write_cloud", "write_pgm",
]
