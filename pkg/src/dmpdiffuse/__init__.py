"""Bound-preserving finite elements for transient anisotropic diffusion.

The solver discretises time first and treats every implicit step as a
box-constrained convex QP, so nodal values provably stay inside the
bounds implied by the initial/boundary data (or above zero).  Classical
single-field trapezoidal schemes are included as the violating
comparison, together with analytic benchmarks, error/convergence
diagnostics and a small CLI.
"""
from .assembly import (ReducedSystem, apply_dirichlet, assemble_capacity,
                       assemble_load, assemble_stiffness)
from .boxqp import (BoxQP, BoxQPSolver, NotSPDError, QPNoConvergenceError,
                    QPResult, brute_force_box_qp, kkt_residual, solve_box_qp)
from .config import ConfigError, RunConfig, build_mesh, parse_config
from .diagnostics import (ErrorNorms, ViolationReport, convergence_rates,
                          error_norms, is_monotone_matrix, violation_report)
from .elements import (DegenerateElementError, MappedPoint, QuadratureRule,
                       map_to_physical, quadrature_rule, shape_gradients,
                       shape_values)
from .gmsh_io import MshParseError, UnsupportedElementError, read_gmsh, write_gmsh
from .mesh import (ElementType, Mesh, TriPattern, boundary_nodes,
                   generate_interval_mesh, generate_plate_with_hole_mesh,
                   generate_structured_quad_mesh, generate_structured_tri_mesh)
from .problems import (ConstantTensor, ConstraintMode, Isotropic, LePotier,
                       NotEllipticError, ProblemSpec, RotatedAnisotropic,
                       SlabIC1D, SlabIC2D, UniformIC1D, built_in_problem,
                       eval_diffusivity, validate_ellipticity)
from .stepping import (ProposedRothe, SchemeConfig, SingleField, StepRecord,
                       TimeHistory, TimeState, WeightedRothe, compute_bounds,
                       initial_state, recover_rates_direct,
                       recover_rates_weighted, run_transient, step_proposed,
                       step_single_field, step_weighted_rothe)

__version__ = "0.1.0"
