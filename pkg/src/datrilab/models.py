"""Built-in 3D metric models.

Each model is a single chart: an open box ``|x_i| < chart_halfwidth`` in R^3
together with a smooth metric ``x -> g(x)`` returned as a (3, 3) matrix by a
JAX-traceable function.  Everything downstream (curvature jets, geodesic
flow, integrators) differentiates through ``metric``, so the builders below
avoid anything JAX cannot trace.

Models
------
euclidean
    Flat R^3, identity metric.
round_sphere
    S^3 of constant curvature ``kappa > 0`` in a stereographic chart,
    ``g = 4 / (1 + kappa |x|^2)^2 * delta``.
hyperbolic
    H^3 of constant curvature ``kappa < 0``, same conformal formula on the
    ball ``kappa |x|^2 > -1``.
product_s2xr
    Unit S^2 (stereographic in x, y) times a flat z-line.
berger_sphere
    Left-invariant metric on S^3 squashing the Hopf fiber by ``lam``;
    built from the quaternionic frame in a stereographic chart.
heisenberg
    Left-invariant metric on the Heisenberg group, orthonormal frame
    (d/dx, d/dy + x d/dz, d/dz).
perturbed_conformal
    ``exp(2 * amp * x * y) * delta``; generically has no special symmetry
    and serves as the negative control.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Mapping

import jax.numpy as jnp
import numpy as np

from .errors import UnknownModelError

MetricFn = Callable[[jnp.ndarray], jnp.ndarray]


# ---------------------------------------------------------------------------
# model container
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class MetricModel:
    """A metric in one chart box, plus the lab's bookkeeping for it.

    Attributes
    ----------
    name : str
        Registry name.
    params : mapping
        The parameter values this instance was built with.
    metric : callable
        ``x (3,) -> g (3, 3)``, JAX-traceable, float64.
    chart_halfwidth : float
        The chart is ``max_i |x_i| < chart_halfwidth``.  Leaving it aborts
        the computation rather than silently extrapolating.
    working_radius : float
        Largest geodesic radius the standard diagnostics use at this model's
        base point.  Chosen so every probe stays inside the chart.
    base_point : tuple of float
        Default center for spheres and tube axes.  Off origin where the
        origin is accidentally too symmetric to expose anything.
    expected_datri : bool
        Whether the standard battery is expected to return a pass verdict.
        Stored with the model so acceptance runs need no side table.
    """

    name: str
    params: Mapping[str, float]
    metric: MetricFn
    chart_halfwidth: float
    working_radius: float
    base_point: tuple[float, float, float]
    expected_datri: bool

    def metric_at(self, x) -> np.ndarray:
        """Evaluate the metric at a chart point, as a plain numpy array."""
        return np.asarray(self.metric(jnp.asarray(x, dtype=jnp.float64)))

    def contains(self, x, margin: float = 0.0) -> bool:
        """True if ``x`` lies inside the chart box, shrunk by ``margin``."""
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.abs(x) <= self.chart_halfwidth - margin))

    @property
    def key(self) -> tuple:
        """Hashable identity used to memoize per-model caches."""
        return (self.name, tuple(sorted((k, float(v)) for k, v in self.params.items())))


# ---------------------------------------------------------------------------
# metric functions
# ---------------------------------------------------------------------------

def _euclidean_fn() -> MetricFn:
    def metric(x):
        return jnp.eye(3, dtype=x.dtype)

    return metric


def _space_form_fn(kappa: float) -> MetricFn:
    # g = (2 / (1 + kappa |x|^2))^2 delta; constant curvature kappa.
    def metric(x):
        c = 2.0 / (1.0 + kappa * jnp.dot(x, x))
        return (c * c) * jnp.eye(3, dtype=x.dtype)

    return metric


def _product_fn() -> MetricFn:
    # unit S^2 stereographic in (x, y), flat z factor
    def metric(x):
        c = 2.0 / (1.0 + x[0] * x[0] + x[1] * x[1])
        return jnp.diag(jnp.array([c * c, c * c, 1.0], dtype=x.dtype))

    return metric


def _berger_fn(lam: float) -> MetricFn:
    """Berger metric via the pushed-forward quaternion frame.

    Under stereographic projection from -1 in S^3 (unit quaternions), the
    left-invariant frame X_1, X_2, X_3 (X_1 along the Hopf fiber) pushes
    forward to the polynomial vector fields V_1, V_2, V_3 below.  The metric
    makes them orthogonal with |V_1| = lam and |V_2| = |V_3| = 1, i.e.
    g = W^{-T} diag(lam^2, 1, 1) W^{-1} with W = [V_1 V_2 V_3].
    """
    d = np.array([lam * lam, 1.0, 1.0])

    def metric(x):
        s = jnp.dot(x, x)
        x1, x2, x3 = x[0], x[1], x[2]
        v1 = jnp.array([
            1.0 - s + 2.0 * x1 * x1,
            2.0 * x3 + 2.0 * x1 * x2,
            -2.0 * x2 + 2.0 * x1 * x3,
        ])
        v2 = jnp.array([
            -2.0 * x3 + 2.0 * x1 * x2,
            1.0 - s + 2.0 * x2 * x2,
            2.0 * x1 + 2.0 * x2 * x3,
        ])
        v3 = jnp.array([
            2.0 * x2 + 2.0 * x1 * x3,
            -2.0 * x1 + 2.0 * x2 * x3,
            1.0 - s + 2.0 * x3 * x3,
        ])
        w = 0.5 * jnp.stack([v1, v2, v3], axis=1)
        winv = jnp.linalg.inv(w)
        return winv.T @ (jnp.asarray(d, dtype=x.dtype)[:, None] * winv)

    return metric


def _heisenberg_fn() -> MetricFn:
    # dx^2 + dy^2 + (dz - x dy)^2; det g = 1 identically
    def metric(p):
        x = p[0]
        z = jnp.zeros((), dtype=p.dtype)
        o = jnp.ones((), dtype=p.dtype)
        return jnp.stack([
            jnp.stack([o, z, z]),
            jnp.stack([z, o + x * x, -x]),
            jnp.stack([z, -x, o]),
        ])

    return metric


def _conformal_fn(amp: float) -> MetricFn:
    def metric(x):
        f = amp * x[0] * x[1]
        return jnp.exp(2.0 * f) * jnp.eye(3, dtype=x.dtype)

    return metric


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ModelInfo:
    summary: str
    defaults: Mapping[str, float]
    factory: Callable[..., MetricModel]


def _make_euclidean() -> MetricModel:
    return MetricModel(
        name="euclidean",
        params={},
        metric=_euclidean_fn(),
        chart_halfwidth=4.0,
        working_radius=1.2,
        base_point=(0.0, 0.0, 0.0),
        expected_datri=True,
    )


def _make_round_sphere(kappa: float = 1.0) -> MetricModel:
    if kappa <= 0.0:
        raise ValueError(f"round_sphere needs kappa > 0, got {kappa}")
    return MetricModel(
        name="round_sphere",
        params={"kappa": float(kappa)},
        metric=_space_form_fn(float(kappa)),
        chart_halfwidth=1.4,
        working_radius=0.8 / np.sqrt(kappa),
        base_point=(0.0, 0.0, 0.0),
        expected_datri=True,
    )


def _make_hyperbolic(kappa: float = -1.0) -> MetricModel:
    if kappa >= 0.0:
        raise ValueError(f"hyperbolic needs kappa < 0, got {kappa}")
    # chart must stay inside the ball |x|^2 < -1/kappa; the box corner sits
    # at sqrt(3) * halfwidth, so halfwidth 0.55 keeps kappa = -1 safe
    return MetricModel(
        name="hyperbolic",
        params={"kappa": float(kappa)},
        metric=_space_form_fn(float(kappa)),
        chart_halfwidth=0.55 / np.sqrt(-kappa),
        working_radius=0.8 / np.sqrt(-kappa),
        base_point=(0.0, 0.0, 0.0),
        expected_datri=True,
    )


def _make_product() -> MetricModel:
    return MetricModel(
        name="product_s2xr",
        params={},
        metric=_product_fn(),
        chart_halfwidth=1.3,
        working_radius=1.0,
        base_point=(0.0, 0.0, 0.0),
        expected_datri=True,
    )


def _make_berger(lam: float = 0.8) -> MetricModel:
    if lam <= 0.0:
        raise ValueError(f"berger_sphere needs lam > 0, got {lam}")
    return MetricModel(
        name="berger_sphere",
        params={"lam": float(lam)},
        metric=_berger_fn(float(lam)),
        chart_halfwidth=1.4,
        working_radius=0.8,
        base_point=(0.0, 0.0, 0.0),
        expected_datri=True,
    )


def _make_heisenberg() -> MetricModel:
    return MetricModel(
        name="heisenberg",
        params={},
        metric=_heisenberg_fn(),
        chart_halfwidth=2.5,
        working_radius=1.0,
        base_point=(0.0, 0.0, 0.0),
        expected_datri=True,
    )


def _make_conformal(amp: float = 0.4) -> MetricModel:
    # base point off the coordinate planes: on them x*y = 0 kills the odd
    # curvature derivatives and the asymmetry this model exists to show
    return MetricModel(
        name="perturbed_conformal",
        params={"amp": float(amp)},
        metric=_conformal_fn(float(amp)),
        chart_halfwidth=1.5,
        working_radius=0.7,
        base_point=(0.3, 0.2, 0.0),
        expected_datri=False,
    )


_REGISTRY: dict[str, ModelInfo] = {
    "euclidean": ModelInfo("flat R^3", {}, _make_euclidean),
    "round_sphere": ModelInfo(
        "constant curvature kappa > 0", {"kappa": 1.0}, _make_round_sphere
    ),
    "hyperbolic": ModelInfo(
        "constant curvature kappa < 0", {"kappa": -1.0}, _make_hyperbolic
    ),
    "product_s2xr": ModelInfo("unit S^2 times a flat line", {}, _make_product),
    "berger_sphere": ModelInfo(
        "S^3 with Hopf fiber scaled by lam", {"lam": 0.8}, _make_berger
    ),
    "heisenberg": ModelInfo("Heisenberg group, left-invariant metric", {}, _make_heisenberg),
    "perturbed_conformal": ModelInfo(
        "exp(2 * amp * x * y) * delta, negative control", {"amp": 0.4}, _make_conformal
    ),
}

_CACHE: dict[tuple, MetricModel] = {}


def available_models() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def model_schema() -> dict[str, dict]:
    """Name -> {summary, defaults} for every registered model.

    The CLI prints this when asked for an unknown model, so keep it cheap.
    """
    return {
        name: {"summary": info.summary, "defaults": dict(info.defaults)}
        for name, info in sorted(_REGISTRY.items())
    }


def build_model(name: str, **params: float) -> MetricModel:
    """Build (or fetch from cache) a model by registry name.

    Unknown names raise :class:`UnknownModelError`; unknown parameter names
    raise ``ValueError`` listing the accepted ones.  Instances are cached by
    (name, params) so the JIT caches hanging off each model are reused.
    """
    info = _REGISTRY.get(name)
    if info is None:
        raise UnknownModelError(name, available_models())
    bad = set(params) - set(info.defaults)
    if bad:
        accepted = ", ".join(sorted(info.defaults)) or "(none)"
        raise ValueError(
            f"model '{name}' does not accept parameter(s) {sorted(bad)}; "
            f"accepted: {accepted}"
        )
    merged = {**info.defaults, **{k: float(v) for k, v in params.items()}}
    key = (name, tuple(sorted(merged.items())))
    model = _CACHE.get(key)
    if model is None:
        model = info.factory(**merged)
        _CACHE[key] = model
    return model
