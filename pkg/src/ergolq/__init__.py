"""Ergodic control of linear SDEs with quadratic, possibly indefinite, costs.

Core pieces: problem data and mean-square stability (model), stationary
moments and the average cost (stationary), Riccati algebra with
certificates and the Newton-Kleinman solver (riccati), solvers and the
classification driver (ergodic), scalar closed forms (analytic1d), and a
seeded Monte-Carlo oracle (simulate).  The HTTP service lives in
ergolq.service; the command line front end in ergolq.cli.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimensionError,
    Diverging,
    ErgolqError,
    LostPositivity,
    LostStability,
    MaxIterations,
    NotPositiveDefinite,
    NotStabilizing,
    NumericalBlowup,
    ProblemFormatError,
    RangeViolation,
    RiccatiError,
    SingularLinearSystem,
    StabilizerNotFound,
)
from .model import (
    ClosedLoop,
    CostWeights,
    LinearSystem,
    Strategy,
    check_compatible,
    closed_loop,
    find_stabilizer,
    is_stabilizer,
    stability_margin,
    stability_matrix,
)
from .stationary import (
    StationaryMoments,
    adjoint_offset,
    cost_representation,
    cost_term_matrices,
    ergodic_cost,
    stationary_moments,
)
from .riccati import (
    AreSolution,
    CertificateFailure,
    ConvexityCertificate,
    FinitenessCertificate,
    PinvPolicy,
    SolvabilityCertificate,
    control_curvature,
    finiteness_certificate,
    gain_numerator,
    lyapunov_quadratic,
    newton_kleinman,
    optimal_gain,
    riccati_residual_matrix,
    solvability_certificate,
    solve_generalized_lyapunov,
    uniform_convexity_certificate,
)
from .ergodic import (
    ClassifyOptions,
    RegularizationTrace,
    RegularizedSolution,
    Report,
    classify,
    default_schedule,
    shifted_weights,
    solve_positive_definite,
    solve_regularized,
    value_by_regularization,
)
from .analytic1d import (
    DriftControlFamily,
    NoiseControlFamily,
    RegularizedClosedForm,
    Verdict1D,
)
from .simulate import (
    PathStats,
    PiecewiseControl,
    ProbeResult,
    SimConfig,
    abel_cost,
    cesaro_cost,
    homogeneous_cost_check,
    path_stats,
    random_piecewise_controls,
    simulate_closed_loop,
    trace_rows,
)
from .problemfile import (
    Problem,
    dump_problem,
    load_problem,
    normalize_problem,
    parse_problem,
    with_seed,
)
