"""Scalar curvature of geodesic spheres: pointwise values, totals, series.

Everything here reduces to the radial transport state computed in
:mod:`datrilab.geodesics`: position, velocity, a parallel normal frame and
the Jacobi matrix A with its derivative.  The sphere scalar curvature is
obtained from the contracted Gauss equation

    tau_S = tau - 2 rho(xi, xi) + H^2 - |S|^2

with xi the unit radial field, S = A' A^{-1} the shape operator and
H = tr S.  The radial-derivative identity checked by
:func:`steiner_residual` is never used to produce tau_S; it stays an
independent cross-check.
"""

from __future__ import annotations

import dataclasses

import jax.numpy as jnp
import numpy as np

from .curvature import CurvatureEngine, get_engine, tangent_basis, unit_tangent
from .errors import ConjugatePointError, GeometryError, RadialConstancyError
from .geodesics import TangentVector, integrate_radial, seed_radial
from .quadrature import (
    QuadratureRule,
    fsum_weighted,
    hemisphere_rule,
    rotation_to,
    sphere_rule,
)

__all__ = [
    "SeriesFit",
    "SurfaceScalars",
    "surface_scalars",
    "tau_sphere",
    "steiner_residual",
    "total_scalar_sphere",
    "total_scalar_hemisphere",
    "theta_series",
    "tauS_theta_series",
    "recursion_residual",
]


# ---------------------------------------------------------------------------
# pointwise data on a geodesic sphere


@dataclasses.dataclass(frozen=True)
class SurfaceScalars:
    """Per-node scalars on a geodesic sphere of radius ``radius``.

    ``theta_r`` and ``theta_rr`` are only populated when the radial
    derivatives were requested; they come from the transport state, not
    from finite differences.
    """

    radius: float
    tau: np.ndarray
    rho_radial: np.ndarray
    tau_sphere: np.ndarray
    theta: np.ndarray
    mean_curvature: np.ndarray
    theta_r: np.ndarray | None = None
    theta_rr: np.ndarray | None = None


def surface_scalars(
    engine: CurvatureEngine,
    states: np.ndarray,
    radius: float,
    *,
    radial_derivatives: bool = False,
) -> SurfaceScalars:
    """Evaluate sphere scalars from radial states at one radius.

    ``states`` is (..., 20) as produced by :func:`integrate_radial`.  A
    non-positive Jacobi determinant means the sphere has folded; that is
    reported, never integrated through.
    """
    st = np.asarray(states, float).reshape(-1, 20)
    x = st[:, 0:3]
    v = st[:, 3:6]
    a = st[:, 12:16].reshape(-1, 2, 2)
    ap = st[:, 16:20].reshape(-1, 2, 2)

    det_a = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    if np.min(det_a) <= 0.0:
        raise ConjugatePointError(radius, radius)
    theta = det_a / (radius * radius)

    shape = ap @ np.linalg.inv(a)
    mean = shape[:, 0, 0] + shape[:, 1, 1]
    tr_s2 = np.einsum("bij,bji->b", shape, shape)

    xj = jnp.asarray(x)
    tau = np.asarray(engine.tau_batch(xj))
    rho = np.asarray(engine.ricci_batch(xj))
    rho_vv = np.einsum("bij,bi,bj->b", rho, v, v)

    tau_s = tau - 2.0 * rho_vv + mean * mean - tr_s2

    theta_r = theta_rr = None
    if radial_derivatives:
        fr = np.stack([st[:, 6:9], st[:, 9:12]], axis=1)
        rm = np.asarray(engine.riemann_batch(xj))
        m = np.einsum("bijkl,bai,bj,bk,bcl->bac", rm, fr, v, v, fr)
        mean_r = -(m[:, 0, 0] + m[:, 1, 1]) - tr_s2
        g = mean - 2.0 / radius
        theta_r = theta * g
        theta_rr = theta * (g * g + mean_r + 2.0 / (radius * radius))

    return SurfaceScalars(
        radius=radius,
        tau=tau,
        rho_radial=rho_vv,
        tau_sphere=tau_s,
        theta=theta,
        mean_curvature=mean,
        theta_r=theta_r,
        theta_rr=theta_rr,
    )


def _radial_states(model, p, dirs, radii) -> np.ndarray:
    engine = get_engine(model)
    seeds = seed_radial(engine, np.asarray(p, float), np.asarray(dirs, float))
    return integrate_radial(model, seeds, radii)


# ---------------------------------------------------------------------------
# pointwise operations


def tau_sphere(model, v: TangentVector) -> float:
    """Scalar curvature of the geodesic sphere through exp_p(v), at that point.

    The radius is the metric norm of ``v``; the footpoint on the sphere is
    exp_p(v).
    """
    engine = get_engine(model)
    base = np.asarray(v.base, float)
    comp = np.asarray(v.components, float)
    r = engine.norm(base, comp)
    if r <= 0.0:
        raise ValueError("tau_sphere needs a nonzero tangent vector")
    states = _radial_states(model, base, (comp / r)[None, :], [r])[:, 0, :]
    data = surface_scalars(engine, states, r)
    return float(data.tau_sphere[0])


def steiner_residual(model, u: TangentVector, r: float) -> float:
    """Defect of the radial identity tying tau_S to derivatives of theta.

    Returns (rho(xi,xi) + tau_S - tau) * theta
          - (theta'' + 4 theta'/r + 2 theta/r^2)
    at radius r along the unit direction ``u``.  Vanishes identically for
    every metric; the returned number is pure discretization error.
    """
    engine = get_engine(model)
    base = np.asarray(u.base, float)
    d = unit_tangent(model, base, u.components)
    if r <= 0.0:
        raise ValueError("radius must be positive")
    states = _radial_states(model, base, d[None, :], [r])[:, 0, :]
    data = surface_scalars(engine, states, r, radial_derivatives=True)
    lhs = (data.rho_radial + data.tau_sphere - data.tau) * data.theta
    rhs = data.theta_rr + 4.0 * data.theta_r / r + 2.0 * data.theta / (r * r)
    return float((lhs - rhs)[0])


# ---------------------------------------------------------------------------
# total integrals


def total_scalar_sphere(
    model, p, r: float, *, rule: QuadratureRule | None = None
) -> float:
    """Integral of tau_S over the geodesic sphere S(p, r).

    Equals 8*pi for every metric and every radius below the conjugate
    radius (Gauss-Bonnet, since the sphere is a topological S^2 and
    tau_S = 2 K).
    """
    if r <= 0.0:
        raise ValueError("radius must be positive")
    engine = get_engine(model)
    rule = rule if rule is not None else sphere_rule()
    frame = tangent_basis(engine, np.asarray(p, float))
    dirs = rule.nodes @ frame.T
    states = _radial_states(model, p, dirs, [r])[:, 0, :]
    data = surface_scalars(engine, states, r)
    return fsum_weighted(rule.weights, data.tau_sphere * data.theta) * r * r


def total_scalar_hemisphere(
    model, v: TangentVector, *, rule: QuadratureRule | None = None
) -> float:
    """Integral of tau_S over the hemisphere S^+(v) = {exp_p(r u) : <u, v> >= 0}.

    The radius is |v|; the hemisphere pole is v/|v|.  For D'Atri spaces each
    hemisphere carries exactly half the total, 4*pi.
    """
    engine = get_engine(model)
    base = np.asarray(v.base, float)
    comp = np.asarray(v.components, float)
    r = engine.norm(base, comp)
    if r <= 0.0:
        raise ValueError("hemisphere needs a nonzero axis vector")
    axis = comp / r
    rule = rule if rule is not None else hemisphere_rule()
    frame = tangent_basis(engine, base)
    axis_onb = np.linalg.solve(frame, axis)
    axis_onb = axis_onb / np.linalg.norm(axis_onb)
    rot = rotation_to(axis_onb)
    dirs = (rule.nodes @ rot.T) @ frame.T
    states = _radial_states(model, base, dirs, [r])[:, 0, :]
    data = surface_scalars(engine, states, r)
    return fsum_weighted(rule.weights, data.tau_sphere * data.theta) * r * r


# ---------------------------------------------------------------------------
# radial series


@dataclasses.dataclass(frozen=True)
class SeriesFit:
    """Least-squares power-series fit along a radial or axial grid.

    ``coefficients[j]`` multiplies the power ``k_min + j``.  ``residual``
    is the rms misfit in the data's own scale; ``uncertainty`` holds the
    one-sigma errors propagated from that misfit.
    """

    label: str
    k_min: int
    coefficients: np.ndarray
    uncertainty: np.ndarray
    residual: float
    grid: np.ndarray

    @property
    def k_max(self) -> int:
        return self.k_min + len(self.coefficients) - 1

    def coefficient(self, k: int) -> float:
        if not self.k_min <= k <= self.k_max:
            raise IndexError(f"coefficient k={k} outside fitted range "
                             f"[{self.k_min}, {self.k_max}]")
        return float(self.coefficients[k - self.k_min])

    def coefficient_sigma(self, k: int) -> float:
        if not self.k_min <= k <= self.k_max:
            raise IndexError(f"coefficient k={k} outside fitted range "
                             f"[{self.k_min}, {self.k_max}]")
        return float(self.uncertainty[k - self.k_min])

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "coefficients": [float(c) for c in self.coefficients],
            "uncertainty": [float(s) for s in self.uncertainty],
            "residual": float(self.residual),
            "grid": [float(r) for r in self.grid],
        }


_COND_LIMIT = 1.0e12


def _fit_powers(grid, values, powers, scale):
    """Fit sum_k c_k r^k over the given powers; scaled for conditioning."""
    powers = np.asarray(powers, float)
    design = (np.asarray(grid, float)[:, None] / scale) ** powers[None, :]
    coef, _, _, sv = np.linalg.lstsq(design, np.asarray(values, float), rcond=None)
    if sv[-1] <= 0.0 or sv[0] / sv[-1] > _COND_LIMIT:
        raise GeometryError(
            "series fit is ill conditioned; widen the radial grid or lower k_max"
        )
    resid = values - design @ coef
    dof = max(len(grid) - len(powers), 1)
    sigma2 = float(np.sum(resid * resid)) / dof
    cov = np.linalg.inv(design.T @ design) * sigma2
    unc = np.sqrt(np.diag(cov))
    rms = float(np.sqrt(np.mean(resid * resid)))
    return coef / scale**powers, unc / scale**powers, rms


def _series_grid(model, n_radii: int = 12) -> np.ndarray:
    lo, hi = 0.05 * model.working_radius, 0.5 * model.working_radius
    return np.geomspace(lo, hi, n_radii)


def _even_odd_fit(label, grid, plus, minus, k_max, k_min=0):
    """Split samples at +-r into even/odd parts and fit each power family.

    ``k_min`` shifts the exponent range: the fitted powers are all k in
    [k_min, k_max] with matching parity after the shift by 2 used for the
    surface series (handled by the caller through the sample values).
    """
    even = 0.5 * (plus + minus)
    odd = 0.5 * (plus - minus)
    scale = float(grid[-1])
    powers_even = [k for k in range(0, k_max - k_min + 1) if k % 2 == 0]
    powers_odd = [k for k in range(0, k_max - k_min + 1) if k % 2 == 1]
    ce, ue, re_ = _fit_powers(grid, even, powers_even, scale)
    co, uo, ro = _fit_powers(grid, odd, powers_odd, scale)
    n = k_max - k_min + 1
    coefficients = np.zeros(n)
    uncertainty = np.zeros(n)
    coefficients[0::2] = ce
    uncertainty[0::2] = ue
    coefficients[1::2] = co
    uncertainty[1::2] = uo
    return SeriesFit(
        label=label,
        k_min=k_min,
        coefficients=coefficients,
        uncertainty=uncertainty,
        residual=max(re_, ro),
        grid=np.asarray(grid, float),
    )


def _series_states(model, u: TangentVector, n_radii=12):
    engine = get_engine(model)
    base = np.asarray(u.base, float)
    d = unit_tangent(model, base, u.components)
    grid = _series_grid(model, n_radii)
    states = _radial_states(model, base, np.stack([d, -d]), grid)
    return engine, base, d, grid, states


def _theta_of(states, grid):
    a = states[..., 12:16].reshape(states.shape[:-1] + (2, 2))
    det_a = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    return det_a / (np.asarray(grid, float) ** 2)


def theta_series(model, u: TangentVector, k_max: int = 8) -> SeriesFit:
    """Radial power series of the volume density theta along +-u.

    theta(r u) = 1 + a2 r^2 + a3 r^3 + ...; a0 and a1 are fitted rather
    than imposed, so recovering a0 = 1 and a1 = 0 doubles as a diagnostic.
    The even and odd parts are fitted separately on a geometric grid in
    [0.05, 0.5] * working_radius, sampled at both u and -u.
    """
    if k_max < 3:
        raise ValueError("k_max must be at least 3")
    _, _, _, grid, states = _series_states(model, u)
    theta = _theta_of(states, grid)
    return _even_odd_fit("theta", grid, theta[0], theta[1], k_max)


def tauS_theta_series(model, u: TangentVector, k_max: int = 6) -> SeriesFit:
    """Laurent-type series of tau_S * theta along +-u, from power k = -2.

    Fits r^2 * tau_S * theta as an ordinary power series in r, then shifts
    indices down by two: coefficient(-2) should be 2 and coefficient(-1)
    zero for every metric, while coefficient(0) = tau - 3 rho(u,u) and
    coefficient(1) = grad_u tau - (8/3) nabla_u rho(u,u).

    The default k_max = 6 keeps the unmodeled tail below 1e-4 on b1 for
    the fit grid in use; k_max = 4 leaves an r^5 alias an order larger.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    engine, _, _, grid, states = _series_states(model, u)
    values = np.empty((2, len(grid)))
    for j, r in enumerate(grid):
        data = surface_scalars(engine, states[:, j, :], float(r))
        values[:, j] = data.tau_sphere * data.theta * r * r
    return _even_odd_fit("tauS_theta", grid, values[0], values[1], k_max, k_min=-2)


_CONSTANCY_TOL = 1.0e-7


def recursion_residual(model, u: TangentVector, k: int) -> float:
    """Defect of the two-term recursion linking theta and tau_S * theta.

    With C = rho(u,u) - tau constant along the radial geodesic (checked;
    a drifting C raises RadialConstancyError), the series coefficients obey

        a_{k+2} (k+4)(k+3) = C a_k + b_k          (three dimensions)

    and the returned value is lhs - rhs.  k = 0 on the unit round sphere
    gives 12 * (-1/3) - (2 - 6) = 0.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > 6:
        raise ValueError("recursion beyond k = 6 would need a wider series fit")
    engine, base, d, grid, states = _series_states(model, u)

    # constancy of C(r) = rho(gamma', gamma') - tau along the +u geodesic
    x = states[0, :, 0:3]
    v = states[0, :, 3:6]
    xj = jnp.asarray(x)
    tau = np.asarray(engine.tau_batch(xj))
    rho = np.asarray(engine.ricci_batch(xj))
    c_along = np.einsum("bij,bi,bj->b", rho, v, v) - tau
    c0 = float(
        np.einsum(
            "ij,i,j->",
            np.asarray(engine.ricci(jnp.asarray(base, dtype=float))),
            d,
            d,
        )
        - float(engine.tau(jnp.asarray(base, dtype=float)))
    )
    drift = float(np.max(np.abs(c_along - c0)))
    if drift > _CONSTANCY_TOL * (1.0 + abs(c0)):
        raise RadialConstancyError(
            f"rho(u,u) - tau drifts by {drift:.3e} along the geodesic; "
            "the radial recursion does not apply to this direction"
        )

    a_fit = theta_series(model, u, k_max=max(8, k + 2))
    b_fit = tauS_theta_series(model, u, k_max=max(6, k + 2))
    lhs = a_fit.coefficient(k + 2) * (k + 4) * (k + 3)
    rhs = c0 * a_fit.coefficient(k) + b_fit.coefficient(k)
    return float(lhs - rhs)
