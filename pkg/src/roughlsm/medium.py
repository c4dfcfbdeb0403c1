"""Two-layer background medium: wavenumber kappa1 above the plane x2 = 0,
kappa2 below."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["Medium"]


@dataclass(frozen=True)
class Medium:
    """Homogeneous acoustic half-spaces separated by the plane x2 = 0."""

    kappa1: float
    kappa2: float

    def __post_init__(self):
        for k in (self.kappa1, self.kappa2):
            if not (np.isfinite(k) and k > 0.0):
                raise ConfigError("wavenumbers must be positive and finite")

    @property
    def eta(self) -> float:
        """Contrast kappa1^2 - kappa2^2."""
        return self.kappa1**2 - self.kappa2**2

    @property
    def wavelength1(self) -> float:
        return 2.0 * np.pi / self.kappa1

    @property
    def wavelength2(self) -> float:
        return 2.0 * np.pi / self.kappa2

    def kappa_at(self, x2: float) -> float:
        """Wavenumber on the side of the plane containing height x2 (the plane
        itself counts as the upper side)."""
        return self.kappa1 if x2 >= 0.0 else self.kappa2
