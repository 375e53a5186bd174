"""Numerical laboratory for nonlocal convolution energies on thin cylinders."""

from .densities import (
    Density,
    GrowthReport,
    growth_check,
    homogeneous_convex,
    pure_convolution,
    rotation_example,
)
from .energy import (
    EnergyBreakdown,
    ScaleParams,
    conv_energy_forms_check,
    energy_and_gradient_rescaled,
    energy_physical,
    energy_rescaled,
    energy_truncated,
    gradient_rescaled,
)
from .homogenization import (
    HomogenizationEstimate,
    RotationReport,
    ScalingTable,
    asymptotic_formula,
    cell_formula_delta,
    cell_formula_infinity,
    cell_formula_zero,
    oracle_pure_conv,
    rotation_invariance_experiment,
    scaling_probe,
    theta,
)
from .kernels import (
    DivergenceError,
    HypothesisReport,
    Kernel,
    audit_hypotheses,
    cylinder_indicator,
    gaussian_separable,
    moment_p,
    mollifier_over_norm_p,
    separable,
    tail_moment,
    vertical_singular,
    vertical_slice_sup,
)
from .lattice import (
    CylinderSpec,
    Field,
    InteractionStencil,
    Lattice,
    admissible_nodes,
    build_lattice,
    build_stencil,
)
from .solvers import (
    DirichletClassSpec,
    MinimizeReport,
    PeriodicClassSpec,
    SolverOptions,
    minimize_dirichlet,
    minimize_periodic_cell,
    relax_vertical_slope,
)

__version__ = "0.1.0"
