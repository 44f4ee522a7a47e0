"""Geodesic flow: exponential map, parallel frames, Jacobi fields, theta.

The radial workhorse integrates one augmented first-order system per
direction: position, velocity, the two parallel normal-frame vectors, and
the 2x2 Jacobi matrix A with its derivative.  Curvature is evaluated on the
fly from the engine's traceable closures, so the Jacobi right-hand side
never interpolates anything.

State layout per node (20 floats):
    y[0:3]   chart position x
    y[3:6]   velocity v = gamma'
    y[6:9]   parallel frame vector e2 (orthogonal to v)
    y[9:12]  parallel frame vector e3
    y[12:16] A, row-major 2x2      (Jacobi matrix in the (e2, e3) frame)
    y[16:20] A', row-major 2x2

For a unit-speed radial geodesic, A'' + M A = 0 with
M_ab = R(e_a, v, v, e_b), A(0) = 0, A'(0) = I, and the volume density is
theta(r u) = det A(r) / r^2.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np
from scipy.integrate import solve_ivp

from .curvature import (
    CurvatureEngine,
    _check_point,
    _check_unit,
    complete_frame,
    get_engine,
)
from .errors import ChartExitError, ConjugatePointError, GeometryError
from .models import MetricModel

# Integration tolerances used for every ODE in the package.  Tight enough
# that quadrature and series fits see integrator noise well below their own
# truncation levels.
RTOL = 1e-11
ATOL = 1e-13

_MIN_STEP_FRACTION = 1e-10  # reject absurdly small requested radii


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class TangentVector:
    """A chart point plus vector components at that point."""

    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, float).reshape(3))
        object.__setattr__(
            self, "components", np.asarray(self.components, float).reshape(3)
        )


@dataclasses.dataclass(frozen=True)
class JacobiTransport:
    """Jacobi data of one radial geodesic at radius r.

    ``frame`` has columns (gamma'(r), e2(r), e3(r)); A and Aprime are the
    2x2 Jacobi matrix and derivative in the (e2, e3) part of that frame.
    """

    A: np.ndarray
    Aprime: np.ndarray
    frame: np.ndarray
    radius: float
    base: np.ndarray
    direction: np.ndarray
    position: np.ndarray

    @property
    def theta(self) -> float:
        return float(np.linalg.det(self.A) / self.radius**2)


class GeodesicPath:
    """Dense-output geodesic through (p, v), defined for t in [t_min, t_max]."""

    def __init__(self, model, initial: TangentVector, sol_fwd, sol_bwd, t_min, t_max):
        self.model = model
        self.initial = initial
        self._fwd = sol_fwd
        self._bwd = sol_bwd
        self.t_min = float(t_min)
        self.t_max = float(t_max)

    def _state(self, t: float) -> np.ndarray:
        if not (self.t_min - 1e-12 <= t <= self.t_max + 1e-12):
            raise ValueError(f"t={t} outside [{self.t_min}, {self.t_max}]")
        if t >= 0.0:
            if self._fwd is None:
                return np.concatenate([self.initial.base, self.initial.components])
            return self._fwd.sol(min(t, self.t_max))
        return self._bwd.sol(max(t, self.t_min))

    def position(self, t: float) -> np.ndarray:
        return self._state(float(t))[0:3]

    def velocity(self, t: float) -> np.ndarray:
        return self._state(float(t))[3:6]

    def covariant_accel(self, t: float) -> np.ndarray:
        # geodesic: nabla_t gamma' = 0 identically
        return np.zeros(3)

    @property
    def is_geodesic(self) -> bool:
        return True


class FrameField:
    """Parallel (or normal-bundle parallel) frame along a curve."""

    def __init__(self, sol, k, t_min, t_max):
        self._sol = sol
        self.k = k
        self.t_min = t_min
        self.t_max = t_max

    def at(self, t: float) -> np.ndarray:
        """Frame at parameter t, as a 3 x k matrix of column vectors."""
        return self._sol(float(t)).reshape(self.k, 3).T


# ---------------------------------------------------------------------------
# cached right-hand sides
# ---------------------------------------------------------------------------

class _Flow:
    def __init__(self, model: MetricModel):
        self.model = model
        self.engine: CurvatureEngine = get_engine(model)
        ch = self.engine.christoffel_fn
        rm = self.engine.riemann_fn

        def rhs6(y):
            x, v = y[0:3], y[3:6]
            gam = ch(x)
            dv = -jnp.einsum("kij,i,j->k", gam, v, v)
            return jnp.concatenate([v, dv])

        def rhs20(y):
            x, v, e2, e3 = y[0:3], y[3:6], y[6:9], y[9:12]
            a = y[12:16].reshape(2, 2)
            ap = y[16:20].reshape(2, 2)
            gam = ch(x)
            dv = -jnp.einsum("kij,i,j->k", gam, v, v)
            de2 = -jnp.einsum("kij,i,j->k", gam, v, e2)
            de3 = -jnp.einsum("kij,i,j->k", gam, v, e3)
            fr = jnp.stack([e2, e3])
            m = jnp.einsum("ijkl,ai,j,k,bl->ab", rm(x), fr, v, v, fr)
            dap = -(m @ a)
            return jnp.concatenate(
                [v, dv, de2, de3, ap.reshape(4), dap.reshape(4)]
            )

        # jit re-specializes per input shape and caches; one callable each
        self.rhs6 = jax.jit(rhs6)
        self.rhs20_batch = jax.jit(jax.vmap(rhs20))


_FLOWS: dict[tuple, _Flow] = {}


def _flow(model: MetricModel) -> _Flow:
    fl = _FLOWS.get(model.key)
    if fl is None:
        fl = _Flow(model)
        _FLOWS[model.key] = fl
    return fl


# ---------------------------------------------------------------------------
# integration cores
# ---------------------------------------------------------------------------

def _solve(fun, t_span, y0, t_eval, events, dense=False):
    sol = solve_ivp(
        fun,
        t_span,
        y0,
        method="RK45",
        rtol=RTOL,
        atol=ATOL,
        t_eval=t_eval,
        events=events,
        dense_output=dense,
    )
    if sol.status == -1:
        raise GeometryError(f"ODE integration failed: {sol.message}")
    return sol


def _exit_event(halfwidth: float, block: int) -> Callable:
    def event(t, y):
        x = y.reshape(-1, block)[:, 0:3]
        return halfwidth - float(np.max(np.abs(x)))

    event.terminal = True
    event.direction = -1.0
    return event


def integrate_radial(model: MetricModel, seeds: np.ndarray, radii) -> np.ndarray:
    """Integrate the 20-component radial system for a batch of seeds.

    Parameters
    ----------
    seeds : (B, 20) array
        Initial states (see the module docstring for the layout).
    radii : increasing positive floats
        Evaluation parameters; integration runs to the largest.

    Returns
    -------
    (B, R, 20) array of states at each requested radius.

    Raises ``ChartExitError`` if any node leaves the chart box on the way.
    """
    fl = _flow(model)
    seeds = np.asarray(seeds, float)
    if seeds.ndim != 2 or seeds.shape[1] != 20:
        raise ValueError(f"seeds must be (B, 20), got {seeds.shape}")
    radii = np.atleast_1d(np.asarray(radii, float))
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    b = seeds.shape[0]
    r_end = float(radii[-1])

    def fun(t, yflat):
        y = yflat.reshape(b, 20)
        return np.asarray(fl.rhs20_batch(jnp.asarray(y))).reshape(-1)

    event = _exit_event(model.chart_halfwidth, 20)
    sol = _solve(fun, (0.0, r_end), seeds.reshape(-1), radii, [event])
    if sol.status == 1:
        y = sol.y_events[0][0].reshape(b, 20)
        worst = int(np.argmax(np.max(np.abs(y[:, 0:3]), axis=1)))
        raise ChartExitError(
            model.name,
            y[worst, 0:3],
            context=f"radial geodesic at t={sol.t_events[0][0]:.6g} of {r_end:.6g}",
        )
    out = sol.y.reshape(b, 20, len(radii))
    return np.transpose(out, (0, 2, 1))


def seed_radial(engine: CurvatureEngine, p, dirs: np.ndarray) -> np.ndarray:
    """Initial 20-states for radial geodesics: A(0)=0, A'(0)=I.

    ``dirs`` holds unit chart vectors, one per row; each gets the completed
    orthonormal frame (u, e2, e3) at p.
    """
    dirs = np.asarray(dirs, float)
    if dirs.ndim == 1:
        dirs = dirs[None, :]
    b = dirs.shape[0]
    seeds = np.zeros((b, 20))
    seeds[:, 0:3] = p
    seeds[:, 3:6] = dirs
    for i in range(b):
        fr = complete_frame(engine, p, dirs[i])
        seeds[i, 6:9] = fr[:, 1]
        seeds[i, 9:12] = fr[:, 2]
    seeds[:, 16] = 1.0
    seeds[:, 19] = 1.0
    return seeds


def _detA(states: np.ndarray) -> np.ndarray:
    a = states[..., 12:16].reshape(states.shape[:-1] + (2, 2))
    return np.linalg.det(a)


def _conjugate_scan(model, p, u, r, n_scan=96):
    """States on a scan grid up to r, with conjugate-point detection.

    det A starts at 0 and grows like r^2; a conjugate point shows up either
    as a sign change or as an interior dip of det A far below its running
    maximum (the round sphere's det A = sin^2 r touches zero without
    changing sign, so a pure sign test misses it).
    """
    engine = get_engine(model)
    grid = np.linspace(r / n_scan, r, n_scan)
    grid[-1] = r
    seeds = seed_radial(engine, p, u[None, :])
    states = integrate_radial(model, seeds, grid)[0]
    dets = _detA(states)
    runmax = np.maximum.accumulate(dets)
    for i in range(1, n_scan):
        if dets[i] < 0.0:
            raise ConjugatePointError(grid[i], r)
        interior_min = (
            0 < i < n_scan - 1 and dets[i] <= dets[i - 1] and dets[i] <= dets[i + 1]
        )
        collapsed = dets[i] <= 1e-3 * runmax[i] and dets[i] < dets[i - 1]
        if (interior_min and collapsed) or dets[i] <= 1e-12 * runmax[i]:
            raise ConjugatePointError(grid[i], r)
    return grid, states


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def geodesic(model: MetricModel, p, v, t_min: float = 0.0, t_max: float = 1.0) -> GeodesicPath:
    """Integrate the geodesic through (p, v) over [t_min, t_max], densely.

    v need not be unit; affine parameterization is whatever ``v`` implies.
    """
    fl = _flow(model)
    p = _check_point(model, p)
    v = np.asarray(v, float).reshape(3)
    if t_min > 0.0 or t_max < 0.0 or t_max < t_min:
        raise ValueError("need t_min <= 0 <= t_max")
    y0 = np.concatenate([p, v])

    def fun(t, y):
        return np.asarray(fl.rhs6(jnp.asarray(y)))

    event = _exit_event(model.chart_halfwidth, 6)

    def run(t_end):
        if t_end == 0.0:
            return None
        sol = _solve(fun, (0.0, t_end), y0, None, [event], dense=True)
        if sol.status == 1:
            raise ChartExitError(
                model.name,
                sol.y_events[0][0][0:3],
                context=f"geodesic at t={sol.t_events[0][0]:.6g}",
            )
        return sol

    return GeodesicPath(
        model,
        TangentVector(p, v),
        run(float(t_max)),
        run(float(t_min)),
        t_min,
        t_max,
    )


def exp_map(model: MetricModel, v: TangentVector) -> np.ndarray:
    """Exponential map: follow the geodesic with initial velocity v to t=1."""
    p = _check_point(model, v.base)
    comps = np.asarray(v.components, float)
    if np.allclose(comps, 0.0):
        return p.copy()
    path = geodesic(model, p, comps, 0.0, 1.0)
    return path.position(1.0)


def jacobi_along(model: MetricModel, p, u, r: float) -> JacobiTransport:
    """Jacobi matrix, derivative and parallel frame at radius r along (p, u).

    Scans det A on the way out and raises ``ConjugatePointError`` if a
    conjugate point is crossed (or grazed) before r.
    """
    engine = get_engine(model)
    p = _check_point(model, p)
    u = _check_unit(engine, p, u)
    r = float(r)
    if r <= _MIN_STEP_FRACTION:
        raise ValueError(f"radius must be positive, got {r}")
    grid, states = _conjugate_scan(model, p, u, r)
    s = states[-1]
    return JacobiTransport(
        A=s[12:16].reshape(2, 2),
        Aprime=s[16:20].reshape(2, 2),
        frame=np.column_stack([s[3:6], s[6:9], s[9:12]]),
        radius=r,
        base=p,
        direction=u,
        position=s[0:3],
    )


def volume_density(model: MetricModel, v: TangentVector) -> float:
    """theta(v) = det A(|v|) / |v|^2, with theta(0) = 1."""
    engine = get_engine(model)
    p = _check_point(model, v.base)
    comps = np.asarray(v.components, float)
    r = engine.norm(p, comps)
    if r == 0.0:
        return 1.0
    jt = jacobi_along(model, p, comps / r, r)
    return jt.theta


def sphere_shape_operator(model: MetricModel, p, u, r: float) -> np.ndarray:
    """Shape operator S(r) = A'(r) A(r)^{-1} of the geodesic sphere.

    Expressed in the parallel (e2, e3) frame, with respect to the outward
    radial normal; symmetric by the Lagrange identity.
    """
    jt = jacobi_along(model, p, u, r)
    det = np.linalg.det(jt.A)
    if abs(det) < 1e-300:
        raise ConjugatePointError(r, r)
    return jt.Aprime @ np.linalg.inv(jt.A)


def parallel_frame(model: MetricModel, curve, seed: np.ndarray, mode: str = "geodesic") -> FrameField:
    """Transport a frame of k vectors along a curve.

    mode="geodesic": plain parallel transport, dE/dt + Gamma(x'(t), E) = 0.
    mode="normal": normal-bundle transport along a unit-speed curve; each
    vector additionally gets -<E, gamma''> gamma' so it stays orthogonal to
    the velocity while its normal part is parallel.  The curve must expose
    ``covariant_accel(t)`` for this mode.

    ``seed`` is 3 x k, columns = vectors at curve parameter t_min (if the
    curve starts there) -- transport always starts at the curve's t_min.
    """
    engine = get_engine(model)
    seed = np.asarray(seed, float)
    if seed.ndim == 1:
        seed = seed[:, None]
    k = seed.shape[1]
    t0, t1 = curve.t_min, curve.t_max
    if mode not in ("geodesic", "normal"):
        raise ValueError(f"unknown transport mode '{mode}'")

    def fun(t, yflat):
        e = yflat.reshape(k, 3)
        x = curve.position(t)
        xd = curve.velocity(t)
        gam = np.asarray(engine.christoffel(jnp.asarray(x)))
        de = -np.einsum("kij,i,aj->ak", gam, xd, e)
        if mode == "normal":
            acc = curve.covariant_accel(t)
            g = engine.metric_np(x)
            de -= np.einsum("a,k->ak", e @ g @ acc, xd)
        return de.reshape(-1)

    sol = _solve(fun, (t0, t1), seed.T.reshape(-1), None, [], dense=True)
    return FrameField(sol.sol, k, t0, t1)
