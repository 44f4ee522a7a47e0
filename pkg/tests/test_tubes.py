"""Tubes about curves: fundamental forms, totals, capsule and cylinder."""

import math

import numpy as np
import pytest

import datrilab as dl
from datrilab.errors import ChartExitError, ImmersionError
from datrilab.geodesics import integrate_radial
from datrilab.tubes import _axis_nodes, _tube_seeds

import oracles
from conftest import (
    ALL_MODELS,
    CONSTANT_CURVATURE,
    DATRI_MODELS,
    base_point,
    frame_direction,
)

EIGHT_PI = 8.0 * math.pi


def test_euclidean_cylinder_fixes_all_conventions():
    # radius-r tube about a line: I = diag(1, r^2), II = diag(0, r) with
    # the outward radial normal, flat, area density r
    model = dl.build_model("euclidean")
    axis = dl.geodesic_axis(model, base_point(model),
                            np.array([0.0, 0.0, 1.0]), 0.5)
    r = 0.25
    patch = dl.tube_geometry_at(model, axis, t=0.1, phi=0.7, r=r)
    assert np.allclose(patch.first_fundamental, np.diag([1.0, r * r]),
                       atol=1e-12)
    assert np.allclose(patch.second_fundamental, np.diag([0.0, r]),
                       atol=1e-12)
    assert patch.gauss_tube == pytest.approx(0.0, abs=1e-14)
    assert patch.gauss_ambient == pytest.approx(0.0, abs=1e-14)
    assert patch.area_density == pytest.approx(r, abs=1e-13)
    assert dl.total_scalar_tube(model, axis, r) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("name", ALL_MODELS)
def test_second_fundamental_form_is_symmetric(name):
    model = dl.build_model(name)
    curve = dl.chart_circle_axis(model, base_point(model),
                                 0.35 * model.working_radius, arc=0.5)
    for t in np.linspace(curve.t_min + 0.01, curve.t_max - 0.01, 3):
        for phi in (0.3, 2.1, 4.4):
            patch = dl.tube_geometry_at(model, curve, t=float(t),
                                        phi=phi, r=0.2)
            ii = patch.second_fundamental
            assert abs(ii[0, 1] - ii[1, 0]) < 1e-8


@pytest.mark.parametrize("name,kappa", sorted(CONSTANT_CURVATURE.items()))
def test_tube_jacobi_matches_sphere_data_on_space_forms(name, kappa):
    # around a geodesic the phi-direction Jacobi block equals the sphere one
    model = dl.build_model(name)
    engine = dl.get_engine(model)
    axis = dl.geodesic_axis(model, base_point(model),
                            frame_direction(model, 0), 0.3)
    tn, tw, x, v, acc, frames = _axis_nodes(model, axis, 8)
    seeds, _ = _tube_seeds(engine, x, v, acc, frames, 8)
    r = 0.24
    states = integrate_radial(model, seeds, [r])[:, 0, :]
    a = states[:, 12:16].reshape(-1, 2, 2)
    assert np.max(np.abs(a - oracles.tube_jacobi(kappa, r))) < 1e-7
    sphere_a = oracles.sphere_jacobi(kappa, r)
    assert np.max(np.abs(a[:, 1, 1] - sphere_a[1, 1])) < 1e-7


@pytest.mark.parametrize("name", ALL_MODELS)
def test_capsule_total_is_8pi(name, battery):
    rec = battery(name).record("capsule_total_8pi")
    assert rec.status == "pass"
    assert abs(rec.details["total"] / EIGHT_PI - 1.0) <= 1e-4


@pytest.mark.parametrize("name", ALL_MODELS)
def test_torus_total_vanishes(name, battery):
    rec = battery(name).record("torus_total_zero")
    assert rec.status == "pass"
    assert rec.defect < 1e-4


@pytest.mark.parametrize("name", DATRI_MODELS)
def test_tube_totals_vanish_on_datri_models(name, battery):
    rec = battery(name).record("tube_total_zero")
    assert rec.status == "pass"
    for label, total in rec.details["totals"].items():
        assert abs(total) < 1e-4, label


def test_tube_total_detects_the_perturbed_model(battery):
    rec = battery("perturbed_conformal").record("tube_total_zero")
    assert rec.status == "decisive-fail"
    assert rec.defect > 1e-3


def test_capsule_direct_call_and_closed_curve_rejection():
    model = dl.build_model("heisenberg")
    axis = dl.geodesic_axis(model, base_point(model),
                            frame_direction(model, 1), 0.4)
    total = dl.capsule_total(model, axis, 0.2)
    assert total == pytest.approx(EIGHT_PI, rel=1e-4)
    loop = dl.chart_circle_axis(model, base_point(model), 0.3, arc=1.0)
    with pytest.raises(ValueError):
        dl.capsule_total(model, loop, 0.2)


def test_circle_axis_is_unit_speed_and_closed():
    model = dl.build_model("product_s2xr")
    engine = dl.get_engine(model)
    curve = dl.chart_circle_axis(model, base_point(model), 0.35, arc=1.0)
    assert curve.closed
    assert not curve.is_geodesic
    for t in np.linspace(curve.t_min, curve.t_max, 11):
        v = curve.velocity(float(t))
        g = engine.metric_np(curve.position(float(t)))
        assert float(v @ g @ v) == pytest.approx(1.0, abs=1e-9)
        acc = curve.covariant_accel(float(t))
        # covariant acceleration of a unit-speed curve is normal to it
        assert abs(float(v @ g @ acc)) < 1e-8


def test_euclidean_circle_curvature():
    model = dl.build_model("euclidean")
    radius = 0.45
    curve = dl.chart_circle_axis(model, base_point(model), radius, arc=1.0)
    assert curve.length == pytest.approx(2 * math.pi * radius, rel=1e-10)
    acc = curve.covariant_accel(0.3)
    assert np.linalg.norm(acc) == pytest.approx(1.0 / radius, rel=1e-9)


def test_circle_beyond_chart_is_rejected():
    model = dl.build_model("hyperbolic")  # halfwidth 0.55
    with pytest.raises(ChartExitError):
        dl.chart_circle_axis(model, base_point(model), 0.56, arc=1.0)


def test_tube_radius_beyond_focal_distance_is_rejected():
    model = dl.build_model("round_sphere")
    axis = dl.geodesic_axis(model, base_point(model),
                            frame_direction(model, 0), 0.3)
    with pytest.raises(ImmersionError):
        dl.total_scalar_tube(model, axis, 1.7)
    with pytest.raises(ValueError):
        dl.tube_geometry_at(model, axis, t=0.0, phi=0.0, r=-0.1)


def test_cylinder_coefficient_requires_geodesic_axis():
    model = dl.build_model("euclidean")
    arc = dl.chart_circle_axis(model, base_point(model), 0.4, arc=0.5)
    with pytest.raises(ValueError):
        dl.cylinder_coefficient(model, arc)
    axis = dl.geodesic_axis(model, base_point(model),
                            np.array([1.0, 0.0, 0.0]), 0.5)
    assert abs(dl.cylinder_coefficient(model, axis)) < 1e-10


def test_cylinder_coefficient_tracks_mean_hat_a(battery):
    rec = battery("perturbed_conformal").record("cylinder_coefficient")
    assert rec.status == "decisive-fail"  # nonzero c3 flags the model
    for entry in rec.details["axes"]:
        c3, hat = entry["c3"], entry["hat_a_mean"]
        assert abs(c3 - hat) <= 0.05 * abs(hat)


@pytest.mark.parametrize("name,kappa", sorted(CONSTANT_CURVATURE.items()))
def test_knu_profile_is_flat_on_space_forms(name, kappa):
    model = dl.build_model(name)
    u = dl.TangentVector(base_point(model), frame_direction(model, 0))
    fit = dl.knu_profile(model, u)
    assert fit.coefficient(0) == pytest.approx(kappa, abs=1e-9)
    assert abs(fit.coefficient(1)) < 1e-6
    assert abs(fit.coefficient(2)) < 1e-6
    assert fit.residual < 1e-6
