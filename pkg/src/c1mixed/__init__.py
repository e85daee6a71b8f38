"""Super-smooth C1 Argyris-like splines on mixed triangle/quad meshes."""

from .mesh import MixedMesh, MeshError, load_mesh, save_mesh, load_desk_mesh
from .space import (SplineFunction, build_basis, check_membership, dimension,
                    load_spline, save_spline)
from .interpolation import interpolation_points, local_project, project
from .assembly import (assemble_bilaplacian, assemble_mass, l2_fit,
                       solve_biharmonic)
from .analysis import (StudyConfig, convergence_study, error_linf,
                       error_sobolev)
from .functions import get_function

__version__ = "0.1.0"

__all__ = [
    "MixedMesh", "MeshError", "load_mesh", "save_mesh", "load_desk_mesh",
    "SplineFunction", "build_basis", "check_membership", "dimension",
    "load_spline", "save_spline",
    "interpolation_points", "local_project", "project",
    "assemble_bilaplacian", "assemble_mass", "l2_fit", "solve_biharmonic",
    "StudyConfig", "convergence_study", "error_linf", "error_sobolev",
    "get_function",
]
