"""Trees, coloured involution groups, wreath products and walk numerics.

The pipeline starts from a growth function, synthesizes the branching
profile of a spherically symmetric tree, and builds everything downstream
of it: the edge 3-colouring and the involution group it generates, the
flattened weighted network of the tree-times-line graph with exact
effective resistances and rigorous two-sided bounds, the explicit harmonic
function on the lamplighter-style wreath product, seeded Monte Carlo
engines for hitting times / killed walks / couplings, and the bubble-graph
quotient structure.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DepthError,
    EvaluationError,
    SolverError,
    ValidationError,
)
from .growth import (
    BranchingProfile,
    GrowthSpec,
    analytic_resistance_sum,
    eval_w2,
    synthesize_branching,
    validate_profile,
)
from .tree import (
    AZURE,
    BORDEAUX,
    Color,
    ProductVertex,
    TreeVertex,
    apply_letter,
    ball,
    chartreuse,
    count_ball_types,
    neighbors,
    root,
)

__all__ = [
    "AZURE",
    "BORDEAUX",
    "BranchingProfile",
    "Color",
    "ConfigError",
    "DepthError",
    "EvaluationError",
    "GrowthSpec",
    "ProductVertex",
    "SolverError",
    "TreeVertex",
    "ValidationError",
    "analytic_resistance_sum",
    "apply_letter",
    "ball",
    "chartreuse",
    "count_ball_types",
    "eval_w2",
    "neighbors",
    "root",
    "synthesize_branching",
    "validate_profile",
]
