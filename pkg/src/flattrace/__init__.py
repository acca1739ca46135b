"""flattrace: periodic-orbit calculus on negatively curved surfaces.

The package builds the flat trace of the geodesic Koopman operator as an
atomic measure over the length spectrum of a closed hyperbolic surface,
computes its first variation under metric deformations, and verifies the
variational, cohomological, and circle-mode identities that tie the two
together.
"""

from .fields import (
    ExprField, Field, FuncField, ParseError, bump_field, parse_expr,
    poly_bump_field,
)
from .metric import (
    ConformalChart, ConformalExp, DiskDomain, DomainError, HalfPlaneDomain,
    LinearTensor, MetricFamily, RectDomain, SymmetricTensorField, dot_p,
    dot_p_mode_coeffs, family_dot_metric, gauss_curvature, half_plane_chart,
    metric_at, poincare_disk_chart,
)
from .fuchsian import (
    SYSTOLE, ConjClass, GeodesicRecord, GroupPresentation, MobiusElement,
    NotHyperbolicError, ResourceError, axis_seed, bolza_generators,
    catalog_from_json, catalog_to_json, det_weight_constant_curvature,
    enumerate_classes, length_of,
)
from .cover import (
    EquivariantExtension, SupportDisk, as_tensor_field, make_invariant_scalar,
    make_invariant_tensor, make_invariant_vector, vector_component_fields,
)
from .dynamics import (
    ConvergenceError, EscapeError, ModelError, MonodromyMatrix, OrbitPolyline,
    PhasePoint, axis_orbit, fd_length_derivative, find_closed_geodesic,
    integrate_geodesic, integrate_scalar_along, jacobi_monodromy,
    line_integral_hTT, orbit_from_csv, orbit_length, orbit_to_csv,
)
from .variation import (
    VectorFieldOnBase, dotL_from_dotp, first_variation_length,
    gk_strip_residual, isometric_family, lie_derivative_metric,
    xu_lie_identity_residual,
)
from .trace import (
    Atom, AtomicMeasure, ClusterError, TestFunction, TransportReport,
    assemble_flat_trace, delta_prime_constraint_residual,
    first_variation_pairing, measure_from_json, measure_to_json, pair,
    transport_coefficient,
)
from .so2 import (
    CutoffError, FrameOperatorSet, SphereBundleFunction, apply_V, apply_X,
    apply_Xperp, coercivity_check, commutator_residuals,
    energy_identity_residual, eta, fiber_linear_from_vector, flip_decompose,
    mode_equation_check,
)

__version__ = "0.1.0"
