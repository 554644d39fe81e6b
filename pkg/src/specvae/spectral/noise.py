"""Spectrum corruption used to study robustness of the spectral supervision."""
import numpy as np

from ..errors import ValidationError
from ..rng import make_rng
from .eigen import Spectrum

REPLACEMENT_SIGMA = 50.0


def spectrum_noise(spectrum, mode="multiplicative", sigma=0.1, seed=0):
    """Corrupt a spectrum, then clip at zero and re-sort ascending (in that order).

    ``multiplicative``: each value times an independent ``N(1, sigma^2)`` draw.
    ``random-replacement``: values replaced by ``N(0, 50^2)`` draws.
    """
    vals = np.asarray(spectrum, dtype=np.float64)
    rng = make_rng(seed)
    if mode == "multiplicative":
        if sigma < 0:
            raise ValidationError(f"noise sigma must be >= 0, got {sigma}")
        if sigma == 0:
            return spectrum if isinstance(spectrum, Spectrum) else Spectrum(vals, "noisy")
        out = vals * rng.normal(1.0, sigma, size=vals.shape)
        source = "noisy"
    elif mode == "random-replacement":
        out = rng.normal(0.0, REPLACEMENT_SIGMA, size=vals.shape)
        source = "random-replacement"
    else:
        raise ValidationError(f"unknown noise mode {mode!r}")
    return Spectrum(np.sort(np.clip(out, 0.0, None)), source)
