"""External rays, puzzles and hyperbolicity diagnostics for f_c(z) = exp(z) + c."""

__version__ = "0.1.0"

from .address import Address, metric_distance, lex_compare, shift, parse_addresses
from .errors import ExpRaysError, NumericFailure
from .rays import trace_ray, trace_ray_at, land_ray, find_periodic_orbits
from .puzzle import build_graph, build_puzzle, Puzzle, nonrecurrence_certificate
from .params import trace_param_ray, land_param_ray, wake_test_dynamical, wake_test_parametric
from .hyperbolicity import orbit_sample, growth_report
from .polynomial import angle_to_address, address_to_angle, trace_poly_ray, land_poly_ray
from .render import RenderSpec, render

__all__ = [
    "Address", "metric_distance", "lex_compare", "shift", "parse_addresses",
    "ExpRaysError", "NumericFailure",
    "trace_ray", "trace_ray_at", "land_ray", "find_periodic_orbits",
    "build_graph", "build_puzzle", "Puzzle", "nonrecurrence_certificate",
    "trace_param_ray", "land_param_ray", "wake_test_dynamical", "wake_test_parametric",
    "orbit_sample", "growth_report",
    "angle_to_address", "address_to_angle", "trace_poly_ray", "land_poly_ray",
    "RenderSpec", "render",
]
