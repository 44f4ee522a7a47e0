"""Numerical lab for D'Atri diagnostics of 3-dimensional Riemannian metrics.

Core objects: metric models on a chart box, machine-precision curvature jets,
geodesic/Jacobi integration, total scalar curvatures of geodesic spheres,
hemispheres, tubes and capsules, and an orchestrated diagnostics battery.
"""

import jax

# Everything downstream is double precision; the curvature cancellations the
# diagnostics hinge on are hopeless in float32.  Must run before any
# jax.numpy array is created, hence first line of the package.
jax.config.update("jax_enable_x64", True)

from . import errors  # noqa: E402,F401
from .models import (  # noqa: E402
    MetricModel,
    available_models,
    build_model,
    model_schema,
)
from .curvature import (  # noqa: E402
    CurvatureBundle,
    CurvatureEngine,
    RicciJet,
    complete_frame,
    curvature_at,
    get_engine,
    l3_residual,
    lemma_lin_residual,
    nabla_ricci_uuu,
    ricci_jet,
    second_radial_derivatives,
    sectional,
    tangent_basis,
    unit_tangent,
)
from .geodesics import (  # noqa: E402
    GeodesicPath,
    JacobiTransport,
    TangentVector,
    exp_map,
    geodesic,
    jacobi_along,
    parallel_frame,
    sphere_shape_operator,
    volume_density,
)
from .quadrature import (  # noqa: E402
    QuadratureRule,
    fibonacci_directions,
    hemisphere_rule,
    sphere_rule,
    tube_rule,
)
from .spheres import (  # noqa: E402
    SeriesFit,
    recursion_residual,
    steiner_residual,
    tauS_theta_series,
    tau_sphere,
    theta_series,
    total_scalar_hemisphere,
    total_scalar_sphere,
)
from .tubes import (  # noqa: E402
    RegularCurve,
    capsule_total,
    chart_circle_axis,
    cylinder_coefficient,
    geodesic_axis,
    knu_profile,
    total_scalar_tube,
    tube_geometry_at,
)
from .battery import (  # noqa: E402
    BatteryConfig,
    CheckRecord,
    DiagnosticsReport,
    ModelRegistryEntry,
    evenness_defect,
    register_builtin_models,
    run_battery,
)

__version__ = "0.1.0"

__all__ = [
    "BatteryConfig",
    "CheckRecord",
    "CurvatureBundle",
    "CurvatureEngine",
    "DiagnosticsReport",
    "GeodesicPath",
    "JacobiTransport",
    "MetricModel",
    "ModelRegistryEntry",
    "QuadratureRule",
    "RegularCurve",
    "RicciJet",
    "SeriesFit",
    "TangentVector",
    "available_models",
    "build_model",
    "capsule_total",
    "chart_circle_axis",
    "complete_frame",
    "curvature_at",
    "cylinder_coefficient",
    "errors",
    "evenness_defect",
    "exp_map",
    "fibonacci_directions",
    "geodesic",
    "geodesic_axis",
    "get_engine",
    "hemisphere_rule",
    "jacobi_along",
    "knu_profile",
    "l3_residual",
    "lemma_lin_residual",
    "model_schema",
    "nabla_ricci_uuu",
    "parallel_frame",
    "recursion_residual",
    "register_builtin_models",
    "ricci_jet",
    "run_battery",
    "second_radial_derivatives",
    "sectional",
    "sphere_rule",
    "sphere_shape_operator",
    "steiner_residual",
    "tangent_basis",
    "tauS_theta_series",
    "tau_sphere",
    "theta_series",
    "total_scalar_hemisphere",
    "total_scalar_sphere",
    "total_scalar_tube",
    "tube_geometry_at",
    "tube_rule",
    "unit_tangent",
    "volume_density",
]
