"""Curvature jets of a metric model, exact to machine precision.

Every derivative here comes from nested forward-mode differentiation of the
closed-form metric; there are no step sizes to tune anywhere.  The jet goes
four levels deep (metric -> Christoffel -> curvature -> nabla Ricci ->
nabla^2 Ricci), which is what the cylinder coefficient needs.

Index conventions, fixed once and used everywhere:

    Gamma^k_ij  = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    R(X,Y)Z     = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
    R_ijkl      = < R(d_i, d_j) d_k , d_l >
    ricci_jk    = R^i_jki   (trace on the first and last slot)
    K(X,Y)      = R(X,Y,Y,X) / (|X|^2 |Y|^2 - <X,Y>^2)

The overall sign is pinned by the round sphere having K = +1; the test suite
asserts this, so a convention slip cannot survive unnoticed.
"""

from __future__ import annotations

import dataclasses
from functools import cached_property
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from .errors import (
    ChartExitError,
    DegeneratePlaneError,
    GeometryError,
    NonUnitError,
)
from .models import MetricModel

_UNIT_TOL = 1e-9  # tolerance on <u,u> - 1 before a direction is rejected


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class CurvatureBundle:
    """Pointwise curvature data: everything algebraic, no derivatives of rho.

    ``riemann`` is fully covariant, R[i,j,k,l] = <R(d_i,d_j)d_k, d_l>.
    """

    metric: np.ndarray
    metric_inv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    tau: float
    at: np.ndarray


@dataclasses.dataclass(frozen=True)
class RicciJet:
    """First and second covariant derivatives of ricci/tau at a point.

    ``nabla_ricci[i, j, k]`` is (nabla_i rho)_jk.  The two scalars are the
    double radial derivatives in the supplied unit direction ``u``:
    nabla2_tau_uu = (nabla^2 tau)(u,u), nabla2_ricci_uu = (nabla^2 rho)(u,u;u,u).
    """

    nabla_ricci: np.ndarray
    nabla_tau: np.ndarray
    nabla2_tau_uu: float
    nabla2_ricci_uu: float
    at: np.ndarray
    direction: np.ndarray


# ---------------------------------------------------------------------------
# the engine: one per (model, params), cached
# ---------------------------------------------------------------------------

class CurvatureEngine:
    """JIT-compiled curvature functions for one model.

    The ``*_fn`` attributes are plain traceable closures, meant to be inlined
    into larger jitted computations (the geodesic right-hand side, the batch
    integrand evaluations).  The corresponding cached properties are jitted
    single-point versions for direct use.
    """

    def __init__(self, model: MetricModel):
        self.model = model
        g = model.metric

        def metric_fn(x):
            return g(x)

        def metric_inv_fn(x):
            return jnp.linalg.inv(g(x))

        def christoffel_fn(x):
            dg = jax.jacfwd(g)(x)  # dg[i, j, m] = d_m g_ij
            ginv = jnp.linalg.inv(g(x))
            # t[i,j,l] = d_i g_jl + d_j g_il - d_l g_ij
            t = jnp.einsum("jli->ijl", dg) + jnp.einsum("ilj->ijl", dg) - dg
            return 0.5 * jnp.einsum("kl,ijl->kij", ginv, t)

        def riemann_up_fn(x):
            # Rup[i,j,k,l] = (R(d_i, d_j) d_k)^l
            gam = christoffel_fn(x)
            dgam = jax.jacfwd(christoffel_fn)(x)  # dgam[l,a,b,m] = d_m Gamma^l_ab
            t1 = jnp.einsum("ljki->ijkl", dgam)
            t2 = jnp.einsum("likj->ijkl", dgam)
            q1 = jnp.einsum("lim,mjk->ijkl", gam, gam)
            q2 = jnp.einsum("ljm,mik->ijkl", gam, gam)
            return t1 - t2 + q1 - q2

        def riemann_fn(x):
            return jnp.einsum("ijkm,ml->ijkl", riemann_up_fn(x), g(x))

        def ricci_fn(x):
            return jnp.einsum("ijki->jk", riemann_up_fn(x))

        def tau_fn(x):
            return jnp.einsum("jk,jk->", metric_inv_fn(x), ricci_fn(x))

        def nabla_ricci_fn(x):
            # (nabla_i rho)_jk
            gam = christoffel_fn(x)
            rho = ricci_fn(x)
            dr = jax.jacfwd(ricci_fn)(x)  # dr[j,k,m] = d_m rho_jk
            return (
                jnp.einsum("jki->ijk", dr)
                - jnp.einsum("mij,mk->ijk", gam, rho)
                - jnp.einsum("mik,jm->ijk", gam, rho)
            )

        def nabla2_ricci_fn(x):
            # (nabla_a nabla rho)_ijk, covariant derivative of the 3-tensor
            gam = christoffel_fn(x)
            t = nabla_ricci_fn(x)
            dt = jax.jacfwd(nabla_ricci_fn)(x)  # dt[i,j,k,a] = d_a t_ijk
            return (
                jnp.einsum("ijka->aijk", dt)
                - jnp.einsum("mai,mjk->aijk", gam, t)
                - jnp.einsum("maj,imk->aijk", gam, t)
                - jnp.einsum("mak,ijm->aijk", gam, t)
            )

        def grad_tau_fn(x):
            return jax.grad(tau_fn)(x)

        def hess_tau_fn(x):
            gam = christoffel_fn(x)
            dt = jax.grad(tau_fn)(x)
            ddt = jax.jacfwd(jax.grad(tau_fn))(x)
            return ddt - jnp.einsum("mab,m->ab", gam, dt)

        def hat_a_fn(x, u):
            # nabla^2_uu tau - 2 nabla^2 rho(u,u;u,u): the cylinder integrand
            h = jnp.einsum("ab,a,b->", hess_tau_fn(x), u, u)
            n2 = jnp.einsum("aijk,a,i,j,k->", nabla2_ricci_fn(x), u, u, u, u)
            return h - 2.0 * n2

        def knu_fn(x, u):
            # sectional curvature of the plane normal to u (3-dim identity)
            rho_uu = jnp.einsum("jk,j,k->", ricci_fn(x), u, u)
            return 0.5 * tau_fn(x) - rho_uu

        self.metric_fn = metric_fn
        self.metric_inv_fn = metric_inv_fn
        self.christoffel_fn = christoffel_fn
        self.riemann_fn = riemann_fn
        self.ricci_fn = ricci_fn
        self.tau_fn = tau_fn
        self.nabla_ricci_fn = nabla_ricci_fn
        self.nabla2_ricci_fn = nabla2_ricci_fn
        self.grad_tau_fn = grad_tau_fn
        self.hess_tau_fn = hess_tau_fn
        self.hat_a_fn = hat_a_fn
        self.knu_fn = knu_fn

    # -- jitted single-point versions ------------------------------------

    @cached_property
    def metric(self) -> Callable:
        return jax.jit(self.metric_fn)

    @cached_property
    def metric_inv(self) -> Callable:
        return jax.jit(self.metric_inv_fn)

    @cached_property
    def christoffel(self) -> Callable:
        return jax.jit(self.christoffel_fn)

    @cached_property
    def riemann(self) -> Callable:
        return jax.jit(self.riemann_fn)

    @cached_property
    def ricci(self) -> Callable:
        return jax.jit(self.ricci_fn)

    @cached_property
    def tau(self) -> Callable:
        return jax.jit(self.tau_fn)

    @cached_property
    def nabla_ricci(self) -> Callable:
        return jax.jit(self.nabla_ricci_fn)

    @cached_property
    def nabla2_ricci(self) -> Callable:
        return jax.jit(self.nabla2_ricci_fn)

    @cached_property
    def grad_tau(self) -> Callable:
        return jax.jit(self.grad_tau_fn)

    @cached_property
    def hess_tau(self) -> Callable:
        return jax.jit(self.hess_tau_fn)

    @cached_property
    def hat_a(self) -> Callable:
        return jax.jit(self.hat_a_fn)

    # -- jitted batch versions (leading axis = points) -------------------

    @cached_property
    def metric_batch(self) -> Callable:
        return jax.jit(jax.vmap(self.metric_fn))

    @cached_property
    def christoffel_batch(self) -> Callable:
        return jax.jit(jax.vmap(self.christoffel_fn))

    @cached_property
    def ricci_batch(self) -> Callable:
        return jax.jit(jax.vmap(self.ricci_fn))

    @cached_property
    def tau_batch(self) -> Callable:
        return jax.jit(jax.vmap(self.tau_fn))

    @cached_property
    def riemann_batch(self) -> Callable:
        return jax.jit(jax.vmap(self.riemann_fn))

    @cached_property
    def hat_a_batch(self) -> Callable:
        return jax.jit(jax.vmap(self.hat_a_fn))

    @cached_property
    def knu_batch(self) -> Callable:
        return jax.jit(jax.vmap(self.knu_fn))

    # -- numpy-facing helpers ---------------------------------------------

    def metric_np(self, p) -> np.ndarray:
        return np.asarray(self.metric(jnp.asarray(p, dtype=jnp.float64)))

    def inner(self, p, a, b) -> float:
        """Metric inner product of two chart vectors at p."""
        g = self.metric_np(p)
        return float(np.asarray(a, float) @ g @ np.asarray(b, float))

    def norm(self, p, a) -> float:
        return float(np.sqrt(max(self.inner(p, a, a), 0.0)))


_ENGINES: dict[tuple, CurvatureEngine] = {}


def get_engine(model: MetricModel) -> CurvatureEngine:
    """Fetch the engine for a model, creating and caching it on first use.

    Caching matters: each engine carries its own JIT caches, and rebuilding
    them per call would recompile everything.
    """
    eng = _ENGINES.get(model.key)
    if eng is None:
        eng = CurvatureEngine(model)
        _ENGINES[model.key] = eng
    return eng


# ---------------------------------------------------------------------------
# argument checking
# ---------------------------------------------------------------------------

def _check_point(model: MetricModel, p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape != (3,):
        raise ValueError(f"chart point must have 3 coordinates, got shape {p.shape}")
    if not model.contains(p):
        raise ChartExitError(model.name, p)
    return p


def _check_unit(engine: CurvatureEngine, p, u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (3,):
        raise ValueError(f"direction must have 3 components, got shape {u.shape}")
    n2 = engine.inner(p, u, u)
    if abs(n2 - 1.0) > _UNIT_TOL:
        raise NonUnitError(np.sqrt(max(n2, 0.0)))
    return u


def unit_tangent(model: MetricModel, p, direction) -> np.ndarray:
    """Normalize a chart vector to unit metric length at p, explicitly.

    The computational operations refuse non-unit directions rather than
    normalizing behind the caller's back; this is the one sanctioned way to
    produce a unit vector from an arbitrary one.
    """
    engine = get_engine(model)
    p = _check_point(model, p)
    v = np.asarray(direction, dtype=float).reshape(3)
    n = engine.norm(p, v)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite direction")
    return v / n


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

def tangent_basis(engine: CurvatureEngine, p) -> np.ndarray:
    """Columns form a metric-orthonormal basis of T_pM (from Cholesky).

    With g = L L^T, the columns of L^{-T} satisfy F^T g F = I.
    """
    g = engine.metric_np(p)
    chol = np.linalg.cholesky(g)
    return np.linalg.inv(chol).T


def complete_frame(engine: CurvatureEngine, p, u) -> np.ndarray:
    """Extend a unit vector to a right-handed metric-orthonormal frame.

    Returns a 3x3 matrix whose columns are (u, e2, e3).  e2 is built by
    metric Gram-Schmidt against the coordinate axis least aligned with u
    (a deterministic choice), e3 by the metric cross product, so the frame
    depends continuously on u away from axis switches.
    """
    g = engine.metric_np(p)
    u = np.asarray(u, dtype=float)
    # pick the coordinate direction with the smallest |<u, e_i>| / |e_i|
    overlaps = [abs(g[i] @ u) / np.sqrt(g[i, i]) for i in range(3)]
    seed = np.zeros(3)
    seed[int(np.argmin(overlaps))] = 1.0
    e2 = seed - (u @ g @ seed) * u
    e2 = e2 / np.sqrt(e2 @ g @ e2)
    # metric cross product: e3^k = g^{kl} sqrt(det g) eps_lmn u^m e2^n
    sq = np.sqrt(np.linalg.det(g))
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    cov = sq * np.einsum("lmn,m,n->l", eps, u, e2)
    e3 = np.linalg.solve(g, cov)
    return np.column_stack([u, e2, e3])


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def curvature_at(model: MetricModel, p) -> CurvatureBundle:
    """Metric, Christoffel symbols, Riemann, Ricci and tau at a chart point.

    Raises ``ChartExitError`` outside the chart box and ``GeometryError`` if
    the metric fails to be positive definite there (a model bug, not an
    input bug, but better loud than wrong).
    """
    engine = get_engine(model)
    p = _check_point(model, p)
    xp = jnp.asarray(p)
    g = np.asarray(engine.metric(xp))
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= 0.0:
        raise GeometryError(
            f"metric of '{model.name}' is not positive definite at {tuple(p)}: "
            f"eigenvalues {eig}"
        )
    return CurvatureBundle(
        metric=g,
        metric_inv=np.asarray(engine.metric_inv(xp)),
        gamma=np.asarray(engine.christoffel(xp)),
        riemann=np.asarray(engine.riemann(xp)),
        ricci=np.asarray(engine.ricci(xp)),
        tau=float(engine.tau(xp)),
        at=p,
    )


def sectional(model: MetricModel, p, x_vec, y_vec) -> float:
    """Sectional curvature of the plane spanned by two tangent vectors."""
    engine = get_engine(model)
    p = _check_point(model, p)
    x = np.asarray(x_vec, dtype=float)
    y = np.asarray(y_vec, dtype=float)
    g = engine.metric_np(p)
    xx, yy, xy = x @ g @ x, y @ g @ y, x @ g @ y
    gram = xx * yy - xy * xy
    if gram <= 1e-12 * max(xx * yy, 1e-300):
        raise DegeneratePlaneError(
            "plane is degenerate: vectors are metrically parallel or zero"
        )
    rm = np.asarray(engine.riemann(jnp.asarray(p)))
    num = np.einsum("ijkl,i,j,k,l->", rm, x, y, y, x)
    return float(num / gram)


def nabla_ricci_uuu(model: MetricModel, p, u) -> float:
    """(nabla_u rho)(u, u) for a unit direction u.

    Equals d/dt rho(gamma', gamma') at t=0 along the geodesic from (p, u);
    the tests pin that equality by finite differences.
    """
    engine = get_engine(model)
    p = _check_point(model, p)
    u = _check_unit(engine, p, u)
    nr = np.asarray(engine.nabla_ricci(jnp.asarray(p)))
    return float(np.einsum("ijk,i,j,k->", nr, u, u, u))


def lemma_lin_residual(model: MetricModel, p, u, c: float) -> float:
    """The combination nabla_u rho(u,u) + c * nabla_u tau at (p, u).

    If this vanishes for every unit u (with one fixed c != -2/5), then both
    terms vanish separately: the cubic and linear odd parts of the defect
    live in orthogonal direction-harmonics, except exactly at c = -2/5 where
    the linear parts cancel identically and the test loses its teeth.  That
    degenerate value is rejected.
    """
    if abs(c + 0.4) < 1e-12:
        raise ValueError(
            "c = -2/5 is degenerate here: the combination can vanish without "
            "either term vanishing; pick any other c"
        )
    engine = get_engine(model)
    p = _check_point(model, p)
    u = _check_unit(engine, p, u)
    xp = jnp.asarray(p)
    nr = np.asarray(engine.nabla_ricci(xp))
    gt = np.asarray(engine.grad_tau(xp))
    return float(np.einsum("ijk,i,j,k->", nr, u, u, u) + c * (gt @ u))


def l3_residual(model: MetricModel, p) -> float:
    """Metric norm of the cyclic sum of nabla rho at p.

    Zero exactly when the Ricci tensor is cyclic parallel; this is the
    pointwise, direction-free version of the odd-theta diagnostics.
    """
    engine = get_engine(model)
    p = _check_point(model, p)
    xp = jnp.asarray(p)
    nr = np.asarray(engine.nabla_ricci(xp))
    cyc = nr + np.einsum("jki->ijk", nr) + np.einsum("kij->ijk", nr)
    ginv = np.asarray(engine.metric_inv(xp))
    n2 = np.einsum("ia,jb,kc,ijk,abc->", ginv, ginv, ginv, cyc, cyc)
    return float(np.sqrt(max(n2, 0.0)))


def second_radial_derivatives(model: MetricModel, p, u) -> tuple[float, float]:
    """(nabla^2 tau)(u,u) and (nabla^2 rho)(u,u;u,u) at p, for unit u.

    These are the second t-derivatives of tau and rho(gamma',gamma') along
    the geodesic with initial velocity u, since gamma' is parallel.
    """
    engine = get_engine(model)
    p = _check_point(model, p)
    u = _check_unit(engine, p, u)
    xp = jnp.asarray(p)
    h = np.asarray(engine.hess_tau(xp))
    n2 = np.asarray(engine.nabla2_ricci(xp))
    tau2 = float(np.einsum("ab,a,b->", h, u, u))
    ricci2 = float(np.einsum("aijk,a,i,j,k->", n2, u, u, u, u))
    return tau2, ricci2


def ricci_jet(model: MetricModel, p, u) -> RicciJet:
    """Bundle nabla rho, nabla tau and the two double radial derivatives."""
    engine = get_engine(model)
    p = _check_point(model, p)
    u = _check_unit(engine, p, u)
    xp = jnp.asarray(p)
    tau2, ricci2 = second_radial_derivatives(model, p, u)
    return RicciJet(
        nabla_ricci=np.asarray(engine.nabla_ricci(xp)),
        nabla_tau=np.asarray(engine.grad_tau(xp)),
        nabla2_tau_uu=tau2,
        nabla2_ricci_uu=ricci2,
        at=p,
        direction=u,
    )
