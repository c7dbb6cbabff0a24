"""Direct computation of the perturbed invariant manifolds and their splitting."""

from .dd import DOUBLE, EXTENDED, Precision, from_dd, get_precision, to_dd
from .grid import (ComparisonRow, MelnikovComparison, NewtonError, NumericSplittingGrid, ShotNode,
                   compare_melnikov, dominant_mode, grid_sup, seed_arrivals, shoot_node, splitting_grid)
from .integrator import (DEFAULT_ORDER, DEFAULT_R2, DEFAULT_TOL, IntegrationError, SectionError,
                         SectionHit, State4, StiffnessError, integrate, seed_stable, seed_unstable,
                         taylor_step, to_section, vector_field)

__all__ = [
    "DOUBLE", "EXTENDED", "Precision", "from_dd", "get_precision", "to_dd",
    "ComparisonRow", "MelnikovComparison", "NewtonError", "NumericSplittingGrid", "ShotNode",
    "compare_melnikov", "dominant_mode", "grid_sup", "seed_arrivals", "shoot_node", "splitting_grid",
    "DEFAULT_ORDER", "DEFAULT_R2", "DEFAULT_TOL", "IntegrationError", "SectionError", "SectionHit",
    "State4", "StiffnessError", "integrate", "seed_stable", "seed_unstable", "taylor_step",
    "to_section", "vector_field",
]
