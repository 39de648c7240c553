"""In vivo blood viscosity law and per-segment velocity diagnostics.

The law works on a dimensionless diameter ``D``: the physical diameter in
metres divided by one micrometre. Use :func:`dimensionless_diameter` for the
conversion; nothing in this module converts units implicitly.
"""
from dataclasses import dataclass

import numpy as np

MICROMETRE = 1.0e-6


@dataclass(frozen=True)
class RheologyParams:
    """Discharge hematocrit ``H`` and plasma viscosity ``mu_p`` [Pa s]."""

    H: float = 0.45
    mu_p: float = 1.0e-3

    def __post_init__(self):
        if not 0.0 < self.H < 1.0:
            raise ValueError(f"hematocrit must lie in (0, 1), got {self.H}")
        if not self.mu_p > 0.0:
            raise ValueError(f"plasma viscosity must be positive, got {self.mu_p}")


def dimensionless_diameter(radius):
    """Diameter ``2 R`` in metres divided by 1 um."""
    return 2.0 * np.asarray(radius, dtype=float) / MICROMETRE


def mu_045(D):
    """Relative apparent viscosity at discharge hematocrit 0.45."""
    D = np.asarray(D, dtype=float)
    if np.any(D <= 0):
        raise ValueError("dimensionless diameter must be positive")
    out = 6.0 * np.exp(-0.085 * D) + 3.2 - 2.44 * np.exp(-0.06 * D**0.645)
    return out[()] if out.ndim == 0 else out


def hematocrit_shape(D):
    """Coefficient ``C(D)`` controlling the hematocrit dependence."""
    D = np.asarray(D, dtype=float)
    with np.errstate(over="ignore"):
        damp = 1.0 / (1.0 + 1.0e-11 * D**12)
    out = (0.8 + np.exp(-0.075 * D)) * (-1.0 + damp) + damp
    return out[()] if out.ndim == 0 else out


def in_vivo_viscosity(D, params=RheologyParams()):
    """Blood viscosity [Pa s] for dimensionless diameter ``D``.

    Parameters
    ----------
    D : float or ndarray
        Vessel diameter divided by 1 um. Must exceed 1.1.
    params : RheologyParams
        Hematocrit and plasma viscosity.

    Raises
    ------
    ValueError
        If any ``D <= 1.1``; the ``D / (D - 1.1)`` factor is singular there.
    """
    D = np.asarray(D, dtype=float)
    if np.any(D <= 1.1):
        raise ValueError("in vivo viscosity is undefined for D <= 1.1")
    C = hematocrit_shape(D)
    phi2 = (D / (D - 1.1)) ** 2
    hct = ((1.0 - params.H) ** C - 1.0) / ((1.0 - 0.45) ** C - 1.0)
    out = params.mu_p * (1.0 + (mu_045(D) - 1.0) * hct * phi2) * phi2
    return out[()] if out.ndim == 0 else out


def segment_viscosity(radius, params=RheologyParams()):
    """Viscosity of vessels with the given radii [m]."""
    return in_vivo_viscosity(dimensionless_diameter(radius), params)


def segment_velocity(R, mu, dp, L):
    """Mean Poiseuille velocity ``R^2 dp / (8 mu L)`` [m/s]."""
    R, mu, dp, L = (np.asarray(v, dtype=float) for v in (R, mu, dp, L))
    if np.any(R <= 0) or np.any(mu <= 0) or np.any(L <= 0) or np.any(dp < 0):
        raise ValueError("radius, viscosity and length must be positive, dp non-negative")
    out = R**2 * dp / (8.0 * mu * L)
    return out[()] if out.ndim == 0 else out
