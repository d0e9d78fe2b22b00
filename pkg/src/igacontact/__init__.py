"""NURBS-based mixed finite element solver for frictionless rigid-plane contact."""

from .assembly import (
    GlobalSystem,
    QuadratureRule,
    apply_constraints,
    assemble_load,
    assemble_stiffness,
    gauss_rule,
    neo_hookean_forces,
)
from .contact import (
    ContactState,
    GapField,
    MultiplierBasis,
    active_set_update,
    contact_residual,
    contact_tangent,
    coupling_matrix,
    gap_value,
    multiplier_basis,
    weighted_gap,
)
from .geometry import (
    BoundaryTrace,
    MeshView,
    NurbsPatch,
    extract_trace,
    graded_breakpoints,
    jacobian,
    mesh_view,
    quarter_disc_patch,
    sphere_octant_patch,
)
from .materials import LinearMaterial, NeoHookeanMaterial
from .solver import (
    SolutionBundle,
    SolveSettings,
    inf_sup_estimate,
    saddle_solve,
    solve_large_deformation,
    solve_small_deformation,
)
from .splines import (
    BasisEvaluation,
    KnotVector,
    TensorSpace,
    WeightedSpace,
    eval_basis,
    eval_nurbs_basis,
    find_span,
    interior_knot_vector,
    knot_insertion,
    make_open_knot_vector,
    multiplier_space,
)
from .verification import (
    HertzAnalytic,
    displacement_errors,
    fit_rate,
    hertz_2d,
    hertz_3d,
    multiplier_error_analytic,
    multiplier_error_reference,
)

__all__ = [name for name in dir() if not name.startswith("_")]
