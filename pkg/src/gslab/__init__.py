"""gslab: a numerical laboratory for scalar field ground states.

Computes radial ground states of -Delta u + eps*u - u^(p-1) + u^(q-1) = 0
on R^N by adaptive shooting, verifies the Nehari and Pokhozhaev integral
identities, and measures the eps -> 0 asymptotic scaling laws in the
subcritical, critical, and supercritical regimes against their predicted
exponents.
"""

__version__ = "0.1.0"

from .emden import EmdenFowlerProfile, q_star, sobolev_constant
from .errors import (
    BracketNotFound,
    DivergentNormError,
    IllConditionedFit,
    InconsistentSolution,
    InternalConsistencyError,
    NotInAsymptoticRegime,
)
from .functionals import (
    GroundStateSolution,
    analyze,
    dirichlet_norm,
    energy,
    extract_level,
    identity_residuals,
    kappa_identities,
    limit_identities,
    radial_norm,
    solve_ground_state,
    to_minimizer_frame,
)
from .asymptotics import (
    FitResult,
    ScalingReport,
    SweepSpec,
    concentration_lambda,
    fit_exponent,
    predict_exponents,
    rescale_to_v,
    sweep,
)
from .ode import (
    IntegrationFailure,
    StepControls,
    TerminalEvent,
    Trajectory,
    integrate,
    rhs_eval,
    series_start,
)
from .params import Family, InvalidParams, ProblemParams, Regime, sphere_area
from .shooting import (
    Classification,
    RadialProfile,
    ShootControls,
    TailModel,
    classify,
    epsilon_star,
    find_ground_state,
)

__all__ = [name for name in dir() if not name.startswith("_")]
