"""Semi-analytic solver for the electric field between two close insulating
unit spheres, with the gradient blow-up verification suite."""

from .config import FieldKind, GapConfig, SweepSpec
from .geometry import (KelvinGeometry, fixed_points, image_chains,
                       kelvin_map_r1, kelvin_map_r2, x_sequence)
from .odeanalysis import (ExponentFit, HomogeneousSolution, OdeDecomposition,
                          build_particular, compute_g, eval_homogeneous,
                          fit_decomposition, fit_exponent, local_slope)
from .solver import (SeriesSolution, SolverError, chain_identity_check,
                     dx_axis_series, dx_bounded_check, f_trace,
                     fundamental_equation_residual, gradient_on_segment,
                     gy_profile, moment_inequality_check, p_trace, solve,
                     solution_report)
from .trace import (AxisTrace, TraceBuildError, TraceDomainError, build_trace,
                    reflect_about_sphere, reflect_unit_dx, reflect_unit_dy)

__version__ = "0.1.0"

__all__ = [
    "AxisTrace", "ExponentFit", "FieldKind", "GapConfig", "HomogeneousSolution",
    "KelvinGeometry", "OdeDecomposition", "SeriesSolution", "SolverError",
    "SweepSpec", "TraceBuildError", "TraceDomainError", "build_particular",
    "build_trace", "chain_identity_check", "compute_g", "dx_axis_series",
    "dx_bounded_check", "eval_homogeneous", "f_trace", "fit_decomposition",
    "fit_exponent", "fixed_points", "fundamental_equation_residual",
    "gradient_on_segment", "gy_profile", "image_chains", "kelvin_map_r1",
    "kelvin_map_r2", "local_slope", "moment_inequality_check", "p_trace",
    "reflect_about_sphere", "reflect_unit_dx", "reflect_unit_dy", "solve",
    "solution_report", "x_sequence",
]
