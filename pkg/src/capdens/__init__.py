"""Variational p-capacity, capacity densities and geometric predicates on grid graphs."""

from .capacity import (
    CapacityResult,
    PotentialField,
    SolverConfig,
    capacitary_potential,
    dirichlet_energy,
    sobolev_capacity,
    superlevel_set,
    variational_capacity,
)
from .density import DensityParams, DensityScan, collection_density, density_ratio, density_scan, sobolev_density_scan
from .errors import CapacityLabError, ConvergenceError, InputError, NumericalError
from .predicates import (
    CorkscrewProfile,
    JohnEstimate,
    StabilityProbe,
    clearance_field,
    corkscrew_profile,
    inner_approx_curve,
    john_lower_bound,
    neighborhood_set,
    stability_probe,
)
from .space import (
    CosineStrip,
    EuclideanBox,
    MetricGraph,
    NodeSet,
    SlitSpace,
    ball_nodes,
    build_graph,
    eps_interior,
    eps_neighborhood,
    inner_distance_field,
    quasiconvexity_estimate,
    rasterize_set,
)

__version__ = "0.1.0"
