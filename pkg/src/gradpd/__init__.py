"""Nonlocal pair-interaction continua, their gradient expansion, and the
kinematic identities behind it."""

from . import cli, fields, identities, interaction, lattice, moments, simulate
from .errors import *  # noqa: F401,F403
from .fields import (
    Box,
    DeformationState,
    PlacementField,
    affine,
    deformation_state,
    eval_derivatives,
    identity,
    quadratic_shear,
    rho2_partial_fd,
    rho_squared,
    trigonometric,
)
from .identities import (
    IdentityReport,
    TrinomialFamily,
    d_tensor,
    enumerate_trinomials,
    grad_f_from_c,
    l_recursion,
    m_recursion,
    third_rho2_at_coincidence,
    trinomial_identity_suite,
)
from .interaction import Kernel, VirtualField, internal_force_density, internal_virtual_work, lambda_value
from .lattice import ParticleSystem, build_lattice
from .moments import MomentSet, expansion_residual, gradient_expansion_work, moment_tensors
from .multiindex import MultiIndex, SymTensor, multi_indices
from .simulate import (
    BodyForce,
    SimulationTrace,
    diagnostics,
    horizon_convergence_study,
    stable_dt,
    step,
)

__version__ = "0.1.0"
