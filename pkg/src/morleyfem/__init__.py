"""Nonconforming finite elements for the clamped plate problem on anisotropic meshes."""
from .errors import (
    DegenerateSimplex,
    InsufficientLevels,
    InvalidSpec,
    MorleyError,
    NoConvergence,
    NonConformalMesh,
    NotPositiveDefinite,
    QuadratureInsufficient,
)
from .geometry import (
    Mesh,
    SimplexGeometry,
    build_faces,
    generate_mesh,
    load_mesh,
    mesh_metrics,
    order_vertices_2d,
    order_vertices_3d,
    save_mesh,
)
from .manufactured import (
    ManufacturedSolution,
    Poly2D,
    get_solution,
    layer_solution,
    poly_solution,
    sin2_solution,
)
from .solver import SolveReport, solve_biharmonic
from .spaces import DofMap, GlobalField, broken_curl, build_space, global_interpolate, morley_to_lagrange
from .verification import (
    ConvergenceRecord,
    anisotropic_bound,
    broken_error,
    compute_eoc,
    convergence_study,
    identity_suite,
    interpolation_study,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceRecord",
    "DegenerateSimplex",
    "DofMap",
    "GlobalField",
    "InsufficientLevels",
    "InvalidSpec",
    "ManufacturedSolution",
    "Mesh",
    "MorleyError",
    "NoConvergence",
    "NonConformalMesh",
    "NotPositiveDefinite",
    "Poly2D",
    "QuadratureInsufficient",
    "SimplexGeometry",
    "SolveReport",
    "anisotropic_bound",
    "broken_curl",
    "broken_error",
    "build_faces",
    "build_space",
    "compute_eoc",
    "convergence_study",
    "generate_mesh",
    "get_solution",
    "global_interpolate",
    "identity_suite",
    "interpolation_study",
    "layer_solution",
    "load_mesh",
    "mesh_metrics",
    "morley_to_lagrange",
    "order_vertices_2d",
    "order_vertices_3d",
    "poly_solution",
    "save_mesh",
    "sin2_solution",
    "solve_biharmonic",
]
