from .eigen import (
    Spectrum,
    generalized_eigenvalues,
    mesh_spectrum,
    nonzero_modes,
    solve_spectrum,
    symmetric_eigenvalues,
)
from .laplacian import cotangent_laplacian
from .loss import spectral_loss, spectral_weights
from .noise import spectrum_noise
from .pointcloud import pointcloud_laplacian, pointcloud_spectrum

__all__ = [
    "Spectrum", "cotangent_laplacian", "generalized_eigenvalues", "mesh_spectrum", "nonzero_modes",
    "pointcloud_laplacian", "pointcloud_spectrum", "solve_spectrum", "spectral_loss", "spectral_weights",
    "spectrum_noise", "symmetric_eigenvalues",
]
