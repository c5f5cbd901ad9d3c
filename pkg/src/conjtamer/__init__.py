"""conjtamer: constructive conjugation of group actions on the interval and
the circle.

Given finitely many commuting (or nilpotently related, or free) C1
diffeomorphisms, the package builds explicit conjugacies that shrink their
Lipschitz constants toward 1 or their log-derivatives toward 0, follows the
whole path of conjugates, flattens hyperbolic periodic points, and detects
the crossed-interval patterns that obstruct any such taming.
"""

from .action import Action, validate_relations, word_realize
from .cohomology import (
    CohomSolution,
    PathSample,
    birkhoff_field,
    birkhoff_solution,
    cocycle_defect,
    conjugacy_from_log_density,
    empirical_measure_integral,
    invariant_mean_log_derivative,
    log_density_normalizer,
    nilpotent_average_solution,
    path_of_conjugates,
)
from .diffeo import (
    DERIVATIVE_FLOOR,
    Diffeo,
    build_diffeo,
    c1_distance,
    compose,
    conjugate_action,
    conjugated_rotation,
    identity,
    invert,
    pwl_diffeo,
    rotation,
)
from .errors import (
    CertificationFailure,
    ConjTamerError,
    DegenerateDerivative,
    InfiniteHyperbolicSet,
    LambdaOutOfRange,
    NoAdmissibleRadius,
    NonFinite,
    NonMonotone,
    NotCircle,
    NotPeriodic,
    RelationViolation,
    SizeOverflow,
    SpaceMismatch,
    SpecError,
    UnknownGenerator,
)
from .expressions import compile_expression
from .gridfn import GridFunction
from .periodic import (
    FlatteningMap,
    FlatteningReport,
    PeriodicOrbit,
    ResilientWitness,
    c1_refinement_ratio,
    detect_resilient,
    find_periodic_points,
    flatten_conjugate,
    flatten_hyperbolic,
    orbit_multiplier,
    rotation_number,
)
from .pipeline import run_pipeline
from .space import CIRCLE, INTERVAL, Space
from .specfile import (
    ActionSpec,
    PipelineParams,
    build_action,
    load_action_spec,
    parse_action_spec,
)
from .taming import (
    DeroinMeasure,
    GeneratorTaming,
    TamingReport,
    deroin_cdf,
    pushforward_check,
    tame_lipschitz,
)
from .words import (
    ABELIAN,
    FREE,
    NILPOTENT,
    Ball,
    Presentation,
    Word,
    enumerate_ball,
    enumerate_positive_ball,
    word_from_exponents,
)

__version__ = "0.1.0"

__all__ = [
    "ABELIAN",
    "Action",
    "ActionSpec",
    "Ball",
    "CIRCLE",
    "CertificationFailure",
    "CohomSolution",
    "ConjTamerError",
    "DERIVATIVE_FLOOR",
    "DegenerateDerivative",
    "DeroinMeasure",
    "Diffeo",
    "FREE",
    "FlatteningMap",
    "FlatteningReport",
    "GeneratorTaming",
    "GridFunction",
    "INTERVAL",
    "InfiniteHyperbolicSet",
    "LambdaOutOfRange",
    "NILPOTENT",
    "NoAdmissibleRadius",
    "NonFinite",
    "NonMonotone",
    "NotCircle",
    "NotPeriodic",
    "PathSample",
    "PeriodicOrbit",
    "PipelineParams",
    "Presentation",
    "RelationViolation",
    "ResilientWitness",
    "SizeOverflow",
    "SpaceMismatch",
    "Space",
    "SpecError",
    "TamingReport",
    "UnknownGenerator",
    "Word",
    "birkhoff_field",
    "birkhoff_solution",
    "build_action",
    "build_diffeo",
    "c1_distance",
    "c1_refinement_ratio",
    "cocycle_defect",
    "compile_expression",
    "compose",
    "conjugacy_from_log_density",
    "conjugate_action",
    "conjugated_rotation",
    "deroin_cdf",
    "detect_resilient",
    "empirical_measure_integral",
    "enumerate_ball",
    "enumerate_positive_ball",
    "find_periodic_points",
    "flatten_conjugate",
    "flatten_hyperbolic",
    "identity",
    "invariant_mean_log_derivative",
    "invert",
    "load_action_spec",
    "log_density_normalizer",
    "nilpotent_average_solution",
    "orbit_multiplier",
    "parse_action_spec",
    "path_of_conjugates",
    "pushforward_check",
    "pwl_diffeo",
    "rotation",
    "rotation_number",
    "run_pipeline",
    "tame_lipschitz",
    "validate_relations",
    "word_from_exponents",
    "word_realize",
    "__version__",
]
