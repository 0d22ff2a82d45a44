"""Euler-Maruyama simulation and strong-error studies for scalar SDEs
whose drift has finitely many jump discontinuities."""

from .analysis import (
    ErrorTable,
    OccupationTable,
    RateFit,
    StudyConfig,
    final_time_error,
    fit_rate,
    occupation_study,
    path_lq_error,
    reference_crosscheck,
    reference_path,
    run_study,
    supnorm_error,
)
from .randomness import BrownianPath, SeedSpec, coarsen, generate_path, value_at
from .schemes import (
    em_continuous_on_fine,
    em_discrete,
    linear_interpolant_eval,
    sign_change_occupation,
    transformed_em,
)
from .sde_model import (
    FunctionSpec,
    PiecewiseDrift,
    SdeProblem,
    drift_limits,
    eval_diffusion,
    eval_drift,
    problem_from_dict,
    step_drift,
    validate,
)
from .transform import (
    GTransform,
    build_transform,
    g,
    g_inverse,
    g_prime,
    g_second,
    transformed_problem,
)

__version__ = "0.1.0"
