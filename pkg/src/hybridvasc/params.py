from dataclasses import asdict, dataclass, fields

from .rheology import RheologyParams


@dataclass(frozen=True)
class PhysicalParams:
    """Model parameters in SI units.

    The defaults are the values used for the rat-cortex comparison:
    hematocrit, tissue permeability [m^2], interstitial and plasma
    viscosities [Pa s], blood and interstitial densities [kg/m^3], plasma and
    interstitial oncotic pressures [Pa], capillary wall hydraulic
    conductivity [m/(Pa s)] and the large-vessel radius threshold [m].
    """

    H: float = 0.45
    K_t: float = 1.0e-18
    mu_int: float = 1.3e-3
    mu_p: float = 1.0e-3
    rho_bl: float = 1030.0
    rho_int: float = 1000.0
    pi_p: float = 3300.0
    pi_int: float = 666.0
    L_cap: float = 1.0e-12
    R_T: float = 7.0e-6

    def __post_init__(self):
        for name in ("K_t", "mu_int", "mu_p", "rho_bl", "rho_int"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.L_cap < 0:
            raise ValueError("L_cap must be non-negative")
        if self.R_T < 0:
            raise ValueError("R_T must be non-negative")
        RheologyParams(self.H, self.mu_p)

    @property
    def rheology(self):
        return RheologyParams(H=self.H, mu_p=self.mu_p)

    @property
    def oncotic_gap(self):
        return self.pi_p - self.pi_int

    @property
    def tissue_mobility(self):
        """``rho_int K_t / mu_int`` [kg/(Pa s m)]."""
        return self.rho_int * self.K_t / self.mu_int

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown physical parameters: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes):
        return type(self)(**{**self.to_dict(), **changes})


@dataclass(frozen=True)
class Numerics:
    """Discretisation and solver knobs shared by the models.

    ``tol`` is the relative residual demanded of every solve, ``method``
    selects BiCGSTAB or a sparse direct factorisation, ``n_theta`` the
    number of circle-average samples, ``circle_sampling`` how each sample
    reads the tissue field (``"trilinear"`` interpolation of the cell values
    or the ``"nearest"`` cell), ``dp_upscale`` the pressure drop of
    the permeability experiments, ``k_floor`` the permeability assigned to
    axes without a facet-to-facet path and ``eps_d`` the facet matching
    distance.
    """

    tol: float = 1.0e-10
    max_iter: int | None = None
    preconditioner: str = "jacobi"
    method: str = "bicgstab"
    n_theta: int = 8
    circle_sampling: str = "trilinear"
    dp_upscale: float = 100.0
    k_floor: float = 1.0e-22
    eps_d: float = 1.0e-8

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if self.n_theta < 1:
            raise ValueError("n_theta must be >= 1")
        if self.circle_sampling not in ("trilinear", "nearest"):
            raise ValueError(f"unknown circle sampling {self.circle_sampling!r}")
        if self.method not in ("bicgstab", "direct"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.preconditioner not in ("jacobi", "ilu", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if not self.dp_upscale > 0:
            raise ValueError("dp_upscale must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown numerics options: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes):
        return type(self)(**{**self.to_dict(), **changes})
