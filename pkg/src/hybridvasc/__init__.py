"""Blood flow in microvascular networks coupled to porous tissue.

Two models are provided: a fully-discrete one, in which every vessel is a
1D graph coupled to a 3D tissue continuum, and a hybrid one, in which
capillaries are homogenised into a second continuum per representative
elementary volume (REV) while large vessels stay discrete.
"""
from .calibration import (boundary_delta, boundary_sensitivity, calibrate_alpha,
                          default_alpha_grid, shift_boundary)
from .config import AlphaGrid, RunConfig, load_config, save_config
from .darcy import DarcyProblem, assemble_darcy, boundary_fluxes, face_flux, solve_darcy
from .estimators import AlphaCalibrator, FullyDiscreteModel, HybridModel, RevUpscaler
from .exceptions import (ConvergenceError, ExperimentInfeasibleError, HybridVascError,
                         ModelDefinitionError, NetworkFormatError, NetworkValidationError,
                         SingularSystemError)
from .fully_discrete import FdProblem, assemble_fd, circle_average, solve_fd
from .grid import UniformGrid, decompose_revs
from .hybrid import HybridSetup, assemble_hybrid, coupling_coefficient, solve_hybrid
from .linalg import solve
from .metrics import (FluxReport, RevPressureReport, fd_flux_report, hybrid_flux_report,
                      objective_f1, objective_f2, rev_pressures)
from .network import (VascularNetwork, load_network, network_from_dict, prune_dead_ends,
                      save_network, split_by_threshold)
from .params import Numerics, PhysicalParams
from .rheology import RheologyParams, in_vivo_viscosity, mu_045
from .synthetic import PenetratingVessel, SyntheticSpec, generate_synthetic, reference_spec
from .upscaling import (blood_volume_fraction, capillary_boundary_field,
                        compute_rev_coefficients, rev_growth_study, upscale_permeability,
                        upscale_viscosity)
from .vgm import assemble_vgm, permeability_experiment, solve_vgm

__version__ = "0.1.0"
