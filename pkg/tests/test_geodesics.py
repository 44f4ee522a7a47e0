"""Geodesic flow, Jacobi transport and the radial 20-state system."""

import numpy as np
import pytest

import datrilab as dl
from datrilab.errors import ChartExitError
from datrilab.geodesics import integrate_radial, seed_radial
from datrilab.quadrature import fsum_weighted, gauss_legendre

import oracles
from conftest import (
    ALL_MODELS,
    CONSTANT_CURVATURE,
    base_point,
    frame_direction,
)


@pytest.mark.parametrize("name", ALL_MODELS)
def test_speed_is_conserved(name):
    model = dl.build_model(name)
    engine = dl.get_engine(model)
    p = base_point(model)
    u = frame_direction(model, 1)
    half = 0.5 * model.working_radius
    path = dl.geodesic(model, p, u, -half, half)
    for t in np.linspace(-half, half, 17):
        v = path.velocity(t)
        speed = float(np.sqrt(v @ engine.metric_np(path.position(t)) @ v))
        assert abs(speed - 1.0) <= 1e-9


@pytest.mark.parametrize("name", ALL_MODELS)
def test_wronskian_identity(name):
    # A^T A' - A'^T A starts at zero and is conserved along the flow
    model = dl.build_model(name)
    p = base_point(model)
    for j, r_factor in ((0, 0.3), (1, 0.55), (2, 0.8)):
        u = frame_direction(model, j)
        jt = dl.jacobi_along(model, p, u, r_factor * model.working_radius)
        w = jt.A.T @ jt.Aprime - jt.Aprime.T @ jt.A
        assert np.max(np.abs(w)) <= 1e-9


@pytest.mark.parametrize("name", ALL_MODELS)
def test_theta_positive_and_one_at_origin(name):
    model = dl.build_model(name)
    p = base_point(model)
    u = frame_direction(model, 0)
    for r in np.linspace(0.02, model.working_radius, 8):
        theta = dl.volume_density(model, dl.TangentVector(p, r * u))
        assert theta > 0.0
    small = dl.volume_density(model, dl.TangentVector(p, 1e-3 * u))
    assert small == pytest.approx(1.0, abs=1e-5)
    assert dl.volume_density(model, dl.TangentVector(p, np.zeros(3))) == 1.0


@pytest.mark.parametrize("name,kappa", sorted(CONSTANT_CURVATURE.items()))
def test_jacobi_closed_form_on_space_forms(name, kappa):
    model = dl.build_model(name)
    p = base_point(model)
    u = frame_direction(model, 2)
    for r in (0.2, 0.45, 0.7):
        jt = dl.jacobi_along(model, p, u, r)
        assert np.allclose(jt.A, oracles.sphere_jacobi(kappa, r), atol=1e-10)
        assert jt.theta == pytest.approx(
            float(oracles.sphere_theta(kappa, r)), abs=1e-10)
        s = dl.sphere_shape_operator(model, p, u, r)
        want = float(oracles.sphere_mean_curvature(kappa, r)) / 2.0 * np.eye(2)
        assert np.allclose(s, want, atol=1e-9)


@pytest.mark.parametrize("name,kappa", [("round_sphere", 1.0),
                                        ("hyperbolic", -1.0)])
def test_exp_map_matches_conformal_chart_formula(name, kappa):
    model = dl.build_model(name)
    rng = np.random.default_rng(21)
    for _ in range(5):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        t = rng.uniform(0.1, 0.7)
        # unit initial speed: the conformal factor at the origin is 4
        v = dl.TangentVector(np.zeros(3), (0.5 * t) * d)
        got = dl.exp_map(model, v)
        assert np.allclose(got, oracles.exp_origin_conformal(kappa, t, d),
                           atol=1e-10)


def test_exp_map_zero_vector_returns_base():
    model = dl.build_model("heisenberg")
    p = base_point(model) + 0.1
    assert np.allclose(dl.exp_map(model, dl.TangentVector(p, np.zeros(3))), p)


@pytest.mark.parametrize("name", ("product_s2xr", "perturbed_conformal"))
def test_geodesic_length_equals_radius(name):
    model = dl.build_model(name)
    engine = dl.get_engine(model)
    p = base_point(model)
    u = frame_direction(model, 1)
    r = 0.45
    path = dl.geodesic(model, p, u, 0.0, r)
    tn, tw = gauss_legendre(32, 0.0, r)
    speeds = np.array([
        float(np.sqrt(path.velocity(t) @ engine.metric_np(path.position(t))
                      @ path.velocity(t)))
        for t in tn
    ])
    assert fsum_weighted(tw, speeds) == pytest.approx(r, rel=1e-9)


def test_riccati_consistency_by_finite_differences():
    # dS/dr + S^2 + M = 0 with dS/dr from a five-point stencil; checks that
    # S = A' A^{-1} and the transported frame are mutually consistent
    import jax.numpy as jnp
    for name in ("perturbed_conformal", "heisenberg"):
        model = dl.build_model(name)
        engine = dl.get_engine(model)
        p = base_point(model)
        u = frame_direction(model, 0)
        r = 0.3

        def s_at(rr):
            return dl.sphere_shape_operator(model, p, u, rr)

        h = 1e-3
        ds = (-s_at(r + 2 * h) + 8 * s_at(r + h)
              - 8 * s_at(r - h) + s_at(r - 2 * h)) / (12 * h)
        jt = dl.jacobi_along(model, p, u, r)
        rm = np.asarray(engine.riemann_batch(jnp.asarray(jt.position[None, :])))[0]
        v, e_nor = jt.frame[:, 0], jt.frame[:, 1:3]
        m_rad = np.einsum("ijkl,ia,j,k,lb->ab", rm, e_nor, v, v, e_nor)
        res = ds + s_at(r) @ s_at(r) + m_rad
        assert np.max(np.abs(res)) <= 1e-7, name


def test_parallel_frame_stays_orthonormal():
    model = dl.build_model("berger_sphere")
    engine = dl.get_engine(model)
    p = base_point(model)
    u = frame_direction(model, 0)
    path = dl.geodesic(model, p, u, 0.0, 0.7)
    fr0 = dl.complete_frame(engine, p, u)
    field = dl.parallel_frame(model, path, fr0[:, 1:3], mode="normal")
    for t in np.linspace(0.0, 0.7, 9):
        e = field.at(t)
        g = engine.metric_np(path.position(t))
        gram = e.T @ g @ e
        assert np.allclose(gram, np.eye(2), atol=1e-9)
        # normal mode keeps the frame orthogonal to the velocity
        assert np.max(np.abs(e.T @ g @ path.velocity(t))) <= 1e-9


def test_radial_batch_matches_single_transport():
    model = dl.build_model("product_s2xr")
    engine = dl.get_engine(model)
    p = base_point(model)
    dirs = np.stack([frame_direction(model, 0), frame_direction(model, 2)])
    seeds = seed_radial(engine, p, dirs)
    states = integrate_radial(model, seeds, [0.2, 0.5])
    assert states.shape == (2, 2, 20)
    jt = dl.jacobi_along(model, p, dirs[1], 0.5)
    assert np.allclose(states[1, 1, 12:16].reshape(2, 2), jt.A, atol=1e-10)


def test_integrate_radial_validates_input():
    model = dl.build_model("euclidean")
    engine = dl.get_engine(model)
    seeds = seed_radial(engine, base_point(model), np.eye(3)[:1])
    with pytest.raises(ValueError):
        integrate_radial(model, seeds, [0.3, 0.2])
    with pytest.raises(ValueError):
        integrate_radial(model, seeds[:, :19], [0.3])


def test_chart_exit_is_reported():
    model = dl.build_model("hyperbolic")  # halfwidth 0.55, tightest chart
    engine = dl.get_engine(model)
    u = frame_direction(model, 0)
    seeds = seed_radial(engine, base_point(model), u[None, :])
    with pytest.raises(ChartExitError):
        integrate_radial(model, seeds, [5.0])


def test_path_rejects_parameters_outside_domain():
    model = dl.build_model("euclidean")
    path = dl.geodesic(model, base_point(model),
                       frame_direction(model, 0), -0.2, 0.4)
    with pytest.raises(ValueError):
        path.position(0.5)
    assert path.is_geodesic
    assert np.allclose(path.covariant_accel(0.1), 0.0)
