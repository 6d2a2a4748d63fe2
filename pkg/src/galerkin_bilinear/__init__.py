"""Spectral-Galerkin simulation of bilinear control systems ``x' = (A + u(t) B) x``.

Submodules
----------
spectral_model
    Eigenbasis models of ``(A, B)`` on the Dirichlet interval and flat torus.
controls
    Piecewise-constant controls with atoms and their functionals.
propagator
    Exponential-product propagators and an RK4 oracle.
estimates
    Log-norm growth constants, Kato and scale-space bound checks.
galerkin_harness
    Truncation-order selection against a reference truncation.
cli
    Batch runs from a JSON configuration.
"""

__version__ = "0.1.0"

from .exceptions import AccuracyError, ModelDiagnosticsError
from .spectral_model import (Potential, SpectralModel, build_box_model, build_torus_model,
                             compress, eigenstate, lift, project, rebuild, sobolev_norm,
                             weighted_similarity)
from .controls import (Control, constant, mollify_atom, random_control_family, sample_bv,
                       signed_integral, total_mass, total_variation)
from .propagator import Trajectory, jump, ode_oracle, propagate, propagator_matrix, step
from .estimates import (BoundReport, coupling_constant, growth_check, kato_constants,
                        numerical_abscissa)
from .galerkin_harness import (ConvergenceReport, FamilySpec, find_truncation, galerkin_error,
                               heldout_validation)
