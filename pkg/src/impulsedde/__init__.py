"""Linear delay differential equations with impulses: simulation, propagator
bounds and explicit stability certificates, checked at desk scale."""

from .schedule import (
    ImpulseSchedule,
    HorizonError,
    UndefinedGapsError,
    count_impulses,
    ratio_constant_K,
    bound_constants,
    gap_stats,
)
from .timefn import (
    ConstantLag,
    DelayViolation,
    EvalDomainError,
    ExprDelay,
    MatrixFunction,
    Pantograph,
    ParseError,
    parse,
    parse_delay,
    evaluate,
    to_text,
    validate_delay,
)
from .system import (
    DelaySystem,
    DelayTerm,
    HypothesisReport,
    LagBound,
    validate_hypotheses,
    weighted_coefficient,
    lag_bound,
    history_term_g,
)
from .solver import Trajectory, NonCausalDelayError, integrate, trajectory_eval
from .fundamental import (
    BoundReport,
    FundamentalSample,
    HypothesisNotMet,
    cauchy_apply,
    cauchy_apply_aux,
    check_x0_bound,
    check_x1_bound,
    fundamental_numeric,
    make_pair_grid,
    reconstruct,
    x0_closed,
    x1_closed,
)
from .norms import (
    SampledFunction,
    ProbeResult,
    vector_norm,
    matrix_norm,
    lp_norm,
    mp_norm,
    mp_norm_detail,
    dp_norm,
    dp_tilde_norm,
    membership_probe,
)
from .stability import (
    Certificate,
    Condition,
    DecayFit,
    DegenerateFitError,
    admissibility_probe,
    certify_example24,
    certify_theorem5,
    certify_theorem6,
    decay_fit,
    stability_experiment,
)
from .config import ConfigError, RunConfig, load_config

__version__ = "0.1.0"
