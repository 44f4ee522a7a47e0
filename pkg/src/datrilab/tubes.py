"""Tubes about regular curves: geometry, total scalar curvature, profiles.

A tube of radius r about a unit-speed curve gamma is swept by radial
geodesics leaving gamma orthogonally.  Writing E(t, phi) for the unit
normal at angle phi in a transported normal frame (N2, N3), the tube is
parameterized by Phi(t, phi) = exp_{gamma(t)}(r E(t, phi)), and its first
and second fundamental forms at radius r come from the same Jacobi system
used for geodesic spheres, with tube initial conditions

    A(0) = [[1, 0], [0, 0]],   A'(0) = [[-<E, gamma''>, 0], [0, 1]]

in the parallel frame (F1, F2) = (gamma', d_phi E).  Then I = A^T A,
II = A'^T A with the outward radial normal, and the intrinsic curvature is
K_tube = K_ambient(tangent plane) + det A' / det A.  Integrands are
assembled as 2 (K_ambient det A + det A'), which stays finite as det A
approaches zero at the axis.
"""

from __future__ import annotations

import dataclasses
import math

import jax
import jax.numpy as jnp
import numpy as np
from scipy.integrate import solve_ivp

from .curvature import complete_frame, get_engine, unit_tangent
from .errors import ChartExitError, GeometryError, ImmersionError
from .geodesics import (
    GeodesicPath,
    TangentVector,
    geodesic,
    integrate_radial,
    parallel_frame,
)
from .models import MetricModel
from .quadrature import fsum_weighted, gauss_legendre, periodic_trapezoid
from .spheres import SeriesFit, _fit_powers, total_scalar_hemisphere

__all__ = [
    "RegularCurve",
    "CircleCurve",
    "TubePatch",
    "geodesic_axis",
    "chart_circle_axis",
    "tube_geometry_at",
    "total_scalar_tube",
    "capsule_total",
    "cylinder_coefficient",
    "knu_profile",
]


class RegularCurve:
    """Unit-speed curve interface expected by the tube integrators.

    Implementations provide ``position``, ``velocity`` and
    ``covariant_accel`` (all chart components), the parameter range
    ``t_min``/``t_max`` in arclength, and the flags ``is_geodesic`` and
    ``closed``.
    """

    t_min: float
    t_max: float
    closed: bool = False
    is_geodesic: bool = False

    def position(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def velocity(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def covariant_accel(self, t: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def length(self) -> float:
        return self.t_max - self.t_min


def geodesic_axis(model: MetricModel, p, direction, half_length: float) -> GeodesicPath:
    """Unit-speed geodesic axis through p, running half_length both ways."""
    if half_length <= 0.0:
        raise ValueError("half_length must be positive")
    p = np.asarray(p, float)
    u = unit_tangent(model, p, direction)
    return geodesic(model, p, u, -half_length, half_length)


class CircleCurve(RegularCurve):
    """Unit-speed reparameterization of a coordinate circle in the chart.

    The raw curve is center + chart_radius (cos s E_i + sin s E_j) for s in
    [0, 2 pi arc]; arclength is recovered by integrating ds/da = 1/|c'(s)|_g
    with a dense inverse map.  arc = 1 gives a closed curve, arc < 1 an
    open sub-arc (generically non-geodesic either way).
    """

    is_geodesic = False

    def __init__(self, model: MetricModel, center, chart_radius: float,
                 plane: tuple[int, int] = (0, 1), arc: float = 1.0):
        if not 0.0 < arc <= 1.0:
            raise ValueError("arc must lie in (0, 1]")
        if chart_radius <= 0.0:
            raise ValueError("chart_radius must be positive")
        i, j = plane
        if i == j or not (0 <= i <= 2 and 0 <= j <= 2):
            raise ValueError("plane must name two distinct chart axes")
        self.model = model
        self.center = np.asarray(center, float).reshape(3)
        self.chart_radius = float(chart_radius)
        self.plane = (int(i), int(j))
        self.arc = float(arc)
        self.closed = arc == 1.0
        self._engine = get_engine(model)

        ei = np.zeros(3)
        ei[i] = 1.0
        ej = np.zeros(3)
        ej[j] = 1.0
        self._ei, self._ej = ei, ej

        s_end = 2.0 * np.pi * self.arc
        samples = self._pos_raw(np.linspace(0.0, s_end, 97))
        margin = 0.01 * model.chart_halfwidth
        inside = np.max(np.abs(samples), axis=1) <= model.chart_halfwidth - margin
        if not np.all(inside):
            worst = samples[int(np.argmin(inside))]
            raise ChartExitError(model.name, worst, context="circle axis")

        metric = model.metric
        cen = jnp.asarray(self.center)
        eij = jnp.asarray(ei), jnp.asarray(ej)
        rad = self.chart_radius

        def speed(s):
            c, sn = jnp.cos(s), jnp.sin(s)
            pos = cen + rad * (c * eij[0] + sn * eij[1])
            vel = rad * (-sn * eij[0] + c * eij[1])
            return jnp.sqrt(vel @ metric(pos) @ vel)

        self._speed = jax.jit(speed)
        self._speed_prime = jax.jit(jax.grad(speed))

        # rough length estimate bounds the inverse integration window
        sg, wg = gauss_legendre(96, 0.0, s_end)
        l_est = float(jnp.sum(jax.vmap(speed)(jnp.asarray(sg)) * jnp.asarray(wg)))

        def rhs(a, y):
            return [1.0 / float(self._speed(y[0]))]

        def hit_end(a, y):
            return y[0] - s_end

        hit_end.terminal = True
        hit_end.direction = 1.0
        sol = solve_ivp(
            rhs, (0.0, 3.0 * l_est + 1.0), [0.0], rtol=1e-12, atol=1e-13,
            dense_output=True, events=[hit_end],
        )
        if sol.status != 1:
            raise GeometryError("arclength reparameterization did not close")
        self.t_min = 0.0
        self.t_max = float(sol.t_events[0][0])
        self._raw_of_arc = sol.sol

    def _pos_raw(self, s):
        s = np.asarray(s, float)
        c, sn = np.cos(s), np.sin(s)
        return self.center + self.chart_radius * (
            np.multiply.outer(c, self._ei) + np.multiply.outer(sn, self._ej)
        )

    def _vel_raw(self, s):
        return self.chart_radius * (-np.sin(s) * self._ei + np.cos(s) * self._ej)

    def _raw(self, t: float) -> float:
        return float(self._raw_of_arc(np.clip(t, self.t_min, self.t_max))[0])

    def position(self, t: float) -> np.ndarray:
        return self._pos_raw(self._raw(t))

    def velocity(self, t: float) -> np.ndarray:
        s = self._raw(t)
        return self._vel_raw(s) / float(self._speed(s))

    def covariant_accel(self, t: float) -> np.ndarray:
        s = self._raw(t)
        h = float(self._speed(s))
        hp = float(self._speed_prime(s))
        sp = 1.0 / h
        spp = -hp * sp**3
        acc_raw = -(self._pos_raw(s) - self.center)
        xdd = acc_raw * sp * sp + self._vel_raw(s) * spp
        xd = self._vel_raw(s) * sp
        gam = np.asarray(self._engine.christoffel(jnp.asarray(self.position(t))))
        return xdd + np.einsum("kij,i,j->k", gam, xd, xd)


def chart_circle_axis(model: MetricModel, center, chart_radius: float,
                      plane: tuple[int, int] = (0, 1), arc: float = 1.0) -> CircleCurve:
    """Closed (arc=1) or open coordinate-circle axis, reparameterized to unit speed."""
    return CircleCurve(model, center, chart_radius, plane=plane, arc=arc)


# ---------------------------------------------------------------------------
# axis sampling and radial seeds


def _axis_nodes(model: MetricModel, curve, n_t: int):
    """Curve data and the transported normal frame at Gauss nodes."""
    engine = get_engine(model)
    tn, tw = gauss_legendre(n_t, curve.t_min, curve.t_max)
    p0 = curve.position(curve.t_min)
    v0 = curve.velocity(curve.t_min)
    fr0 = complete_frame(engine, p0, v0)
    field = parallel_frame(model, curve, fr0[:, 1:3], mode="normal")
    x = np.array([curve.position(t) for t in tn])
    v = np.array([curve.velocity(t) for t in tn])
    acc = np.array([curve.covariant_accel(t) for t in tn])
    frames = np.array([field.at(t) for t in tn])  # (n_t, 3, 2): columns N2, N3
    return tn, tw, x, v, acc, frames


def _tube_seeds(engine, x, v, acc, frames, n_phi: int):
    """Radial 20-states for every (t_k, phi_l) node of the tube rectangle."""
    n_t = x.shape[0]
    phi, wphi = periodic_trapezoid(n_phi)
    cosp, sinp = np.cos(phi), np.sin(phi)

    n2 = frames[:, :, 0]
    n3 = frames[:, :, 1]
    e_dir = cosp[None, :, None] * n2[:, None, :] + sinp[None, :, None] * n3[:, None, :]
    f2 = -sinp[None, :, None] * n2[:, None, :] + cosp[None, :, None] * n3[:, None, :]

    g = np.asarray(engine.metric_batch(jnp.asarray(x)))
    k_e = np.einsum("tpi,tij,tj->tp", e_dir, g, acc)

    b = n_t * n_phi
    seeds = np.zeros((b, 20))
    seeds[:, 0:3] = np.repeat(x, n_phi, axis=0)
    seeds[:, 3:6] = e_dir.reshape(b, 3)
    seeds[:, 6:9] = np.repeat(v, n_phi, axis=0)
    seeds[:, 9:12] = f2.reshape(b, 3)
    seeds[:, 12] = 1.0          # A(0) = [[1,0],[0,0]]
    seeds[:, 16] = -k_e.reshape(b)  # A'(0) = [[-<E,acc>,0],[0,1]]
    seeds[:, 19] = 1.0
    return seeds, wphi


def _tube_integrand(engine, states, b):
    """Per-node 2 K_tube dA density: 2 (K_amb det A + det A')."""
    st = states.reshape(b, 20)
    a = st[:, 12:16].reshape(b, 2, 2)
    ap = st[:, 16:20].reshape(b, 2, 2)
    det_a = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    if np.min(det_a) <= 0.0:
        raise ImmersionError(
            "tube radius reaches the focal distance of the axis; "
            "the tube is not immersed at this radius"
        )
    det_ap = ap[:, 0, 0] * ap[:, 1, 1] - ap[:, 0, 1] * ap[:, 1, 0]
    rm = np.asarray(engine.riemann_batch(jnp.asarray(st[:, 0:3])))
    e2 = st[:, 6:9]
    e3 = st[:, 9:12]
    k_amb = np.einsum("bijkl,bi,bj,bk,bl->b", rm, e2, e3, e3, e2)
    return 2.0 * (k_amb * det_a + det_ap)


def total_scalar_tube(model: MetricModel, curve, r: float, *,
                      n_t: int = 32, n_phi: int = 64) -> float:
    """Integral of the intrinsic scalar curvature 2 K over the tube surface.

    Vanishes for every metric when the axis closes up (Gauss-Bonnet on a
    torus); vanishing for open axes of every kind characterizes D'Atri
    models.
    """
    if r <= 0.0:
        raise ValueError("tube radius must be positive")
    engine = get_engine(model)
    tn, tw, x, v, acc, frames = _axis_nodes(model, curve, n_t)
    seeds, wphi = _tube_seeds(engine, x, v, acc, frames, n_phi)
    states = integrate_radial(model, seeds, [r])[:, 0, :]
    vals = _tube_integrand(engine, states, seeds.shape[0])
    weights = (tw[:, None] * wphi[None, :]).reshape(-1)
    return fsum_weighted(weights, vals)


def capsule_total(model: MetricModel, curve, r: float, *,
                  n_t: int = 32, n_phi: int = 64) -> float:
    """Tube plus two hemispherical caps: a closed surface, so always 8 pi.

    The caps are the hemispheres of radius r at the curve ends, poles along
    the outward-pointing axis directions.
    """
    if getattr(curve, "closed", False):
        raise ValueError("capsule needs an open axis; a closed one has no ends")
    tube = total_scalar_tube(model, curve, r, n_t=n_t, n_phi=n_phi)
    va = -r * curve.velocity(curve.t_min)
    vb = r * curve.velocity(curve.t_max)
    cap_a = total_scalar_hemisphere(
        model, TangentVector(curve.position(curve.t_min), va))
    cap_b = total_scalar_hemisphere(
        model, TangentVector(curve.position(curve.t_max), vb))
    return tube + cap_a + cap_b


_CYL_FRACTIONS = (0.08, 0.12, 0.16, 0.20, 0.24)


def cylinder_coefficient(model: MetricModel, curve, r_grid=None, *,
                         n_t: int = 32, n_phi: int = 64) -> float:
    """Leading odd coefficient c3 of the tube total about a geodesic axis.

    Fits T(r) = 2 pi L (c3 r^3 + c5 r^5) / 6 over the radius grid (default
    {0.08, 0.12, 0.16, 0.20, 0.24} * working_radius) and returns c3.  For a
    D'Atri model c3 = 0; in general c3 tracks the mean of
    Hess tau(u,u) - 2 (nabla^2 rho)(u,u;u,u) along the axis.
    """
    if not curve.is_geodesic:
        raise ValueError("cylinder_coefficient requires a geodesic axis")
    if r_grid is None:
        r_grid = np.asarray(_CYL_FRACTIONS) * model.working_radius
    r_grid = np.sort(np.asarray(r_grid, float))
    if r_grid[0] <= 0.0:
        raise ValueError("radii must be positive")
    engine = get_engine(model)
    tn, tw, x, v, acc, frames = _axis_nodes(model, curve, n_t)
    seeds, wphi = _tube_seeds(engine, x, v, acc, frames, n_phi)
    states = integrate_radial(model, seeds, r_grid)
    weights = (tw[:, None] * wphi[None, :]).reshape(-1)
    totals = np.array([
        fsum_weighted(weights, _tube_integrand(engine, states[:, k, :], seeds.shape[0]))
        for k in range(len(r_grid))
    ])
    coef, _, rms = _fit_powers(r_grid, totals, [3.0, 5.0], float(r_grid[-1]))
    scale = max(float(np.max(np.abs(totals))), 1e-12)
    if rms > max(1e-6, 0.02 * scale):
        raise GeometryError(
            f"odd-power fit of the tube totals leaves rms residual {rms:.3e}; "
            "the radius grid is outside the asymptotic regime"
        )
    length = curve.t_max - curve.t_min
    return float(6.0 * coef[0] / (2.0 * np.pi * length))


def knu_profile(model: MetricModel, u: TangentVector, t_grid=None) -> SeriesFit:
    """Quadratic fit of K(nu(t)) = tau/2 - rho(gamma', gamma') along a geodesic.

    K(nu) is the ambient sectional curvature of the plane normal to the
    geodesic through u.  Constant for D'Atri models; its second derivative
    equals half of Hess tau(u,u) - 2 (nabla^2 rho)(u,u;u,u) in general.
    """
    base = np.asarray(u.base, float)
    ut = unit_tangent(model, base, u.components)
    if t_grid is None:
        half = 0.5 * model.working_radius
        t_grid = np.linspace(-half, half, 25)
    t_grid = np.asarray(t_grid, float)
    path = geodesic(model, base, ut,
                    float(min(t_grid.min(), 0.0)), float(max(t_grid.max(), 0.0)))
    x = np.array([path.position(t) for t in t_grid])
    v = np.array([path.velocity(t) for t in t_grid])
    vals = np.asarray(get_engine(model).knu_batch(jnp.asarray(x), jnp.asarray(v)))
    scale = float(np.max(np.abs(t_grid)))
    coef, unc, rms = _fit_powers(t_grid, vals, [0.0, 1.0, 2.0], scale)
    return SeriesFit(
        label="knu",
        k_min=0,
        coefficients=coef,
        uncertainty=unc,
        residual=rms,
        grid=t_grid,
    )


# ---------------------------------------------------------------------------
# pointwise tube geometry


@dataclasses.dataclass(frozen=True)
class TubePatch:
    """Fundamental forms of a tube at a single (t, phi, r) sample.

    Forms are expressed in the Jacobi basis (J_t, J_phi); ``tangent_plane``
    holds the corresponding chart vectors as columns.  ``area_density`` is
    the surface measure relative to dt dphi.
    """

    point: np.ndarray
    first_fundamental: np.ndarray
    second_fundamental: np.ndarray
    tangent_plane: np.ndarray
    gauss_tube: float
    gauss_ambient: float
    area_density: float
    radius: float
    t: float
    phi: float


def tube_geometry_at(model: MetricModel, curve, t: float, phi: float,
                     r: float) -> TubePatch:
    """Evaluate tube point, I, II and curvatures at one parameter sample."""
    if r <= 0.0:
        raise ValueError("tube radius must be positive")
    engine = get_engine(model)
    p0 = curve.position(curve.t_min)
    v0 = curve.velocity(curve.t_min)
    fr0 = complete_frame(engine, p0, v0)
    field = parallel_frame(model, curve, fr0[:, 1:3], mode="normal")
    frame = field.at(t)[None, :, :]
    x = curve.position(t)[None, :]
    v = curve.velocity(t)[None, :]
    acc = curve.covariant_accel(t)[None, :]

    n2, n3 = frame[0, :, 0], frame[0, :, 1]
    e_dir = np.cos(phi) * n2 + np.sin(phi) * n3
    f2 = -np.sin(phi) * n2 + np.cos(phi) * n3
    g = engine.metric_np(x[0])
    k_e = float(e_dir @ g @ acc[0])

    seed = np.zeros((1, 20))
    seed[0, 0:3] = x[0]
    seed[0, 3:6] = e_dir
    seed[0, 6:9] = v[0]
    seed[0, 9:12] = f2
    seed[0, 12] = 1.0
    seed[0, 16] = -k_e
    seed[0, 19] = 1.0
    st = integrate_radial(model, seed, [r])[0, 0, :]

    a = st[12:16].reshape(2, 2)
    ap = st[16:20].reshape(2, 2)
    det_a = float(np.linalg.det(a))
    if det_a <= 0.0:
        raise ImmersionError(
            "tube radius reaches the focal distance of the axis; "
            "the tube is not immersed at this radius"
        )
    first = a.T @ a
    # A'^T A is symmetric up to ODE error (the Wronskian A^T A' - A'^T A
    # vanishes at r=0 and is conserved); returned raw so the defect stays
    # measurable.
    second = ap.T @ a
    rm = np.asarray(engine.riemann_batch(jnp.asarray(st[None, 0:3])))[0]
    e2, e3 = st[6:9], st[9:12]
    k_amb = float(np.einsum("ijkl,i,j,k,l->", rm, e2, e3, e3, e2))
    k_tube = k_amb + float(np.linalg.det(ap)) / det_a
    plane = np.column_stack([e2, e3]) @ a
    return TubePatch(
        point=st[0:3].copy(),
        first_fundamental=first,
        second_fundamental=second,
        tangent_plane=plane,
        gauss_tube=k_tube,
        gauss_ambient=k_amb,
        area_density=det_a,
        radius=float(r),
        t=float(t),
        phi=float(phi),
    )
