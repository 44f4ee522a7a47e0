"""The diagnostics battery: universal identities first, D'Atri tests second.

The universal checks (total sphere curvature, the radial Steiner-type
identity, capsule and torus closure) hold for every metric; a failure
there means the numerics are broken, and the whole run is declared
INVALID rather than interpreted.  Only once those pass do the D'Atri
criteria mean anything.

Each D'Atri check has two thresholds: a pass tolerance and a decisive
(10x or more) detection tolerance.  The gap is deliberate; a defect in
between is reported as a plain fail and makes the verdict INCONSISTENT
instead of NOT-D'ATRI, so borderline numerics never masquerade as a
clean classification.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time

import jax.numpy as jnp
import numpy as np

from .curvature import get_engine, l3_residual, sectional, tangent_basis
from .errors import GeometryError
from .geodesics import ATOL, RTOL, TangentVector, integrate_radial, seed_radial
from .models import MetricModel, available_models, build_model, model_schema
from .quadrature import (
    fibonacci_directions,
    fsum_weighted,
    hemisphere_rule,
    rotation_to,
    sphere_rule,
)
from .spheres import surface_scalars, theta_series
from .tubes import (
    _axis_nodes,
    _tube_integrand,
    _tube_seeds,
    capsule_total,
    chart_circle_axis,
    cylinder_coefficient,
    geodesic_axis,
    knu_profile,
)

__all__ = [
    "BatteryConfig",
    "CheckRecord",
    "DiagnosticsReport",
    "ModelRegistryEntry",
    "register_builtin_models",
    "evenness_defect",
    "run_battery",
]

EIGHT_PI = 8.0 * math.pi
FOUR_PI = 4.0 * math.pi


# ---------------------------------------------------------------------------
# configuration and result records
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class BatteryConfig:
    """Knobs of the standard battery.  Defaults match the acceptance runs.

    Radii named ``*_factor`` scale with the model's working radius; plain
    radii are absolute.  Tolerances follow the ladder: universal identities
    at 1e-5 relative, D'Atri passes at 1e-4, decisive failures beyond 1e-3
    (the cylinder coefficient gets its own, looser pair since it comes out
    of a two-parameter fit).
    """

    seed: int = 7
    sphere_radii: tuple[float, ...] = (0.2, 0.4)
    sphere_big_factor: float = 0.8
    hemisphere_axes: int = 20
    hemisphere_radius: float = 0.3
    tube_radii: tuple[float, ...] = (0.15, 0.25)
    capsule_radius: float = 0.2
    axis_half_factor: float = 0.5
    circle_radius_factor: float = 0.4
    arc_fraction: float = 1.0 / 3.0
    steiner_samples: int = 20
    steiner_span: tuple[float, float] = (0.25, 0.7)
    evenness_samples: int = 100
    evenness_radius_factor: float = 0.7
    probe_directions: int = 3
    universal_rtol: float = 1.0e-5
    hemisphere_rtol: float = 1.0e-5
    pass_tol: float = 1.0e-4
    detect_tol: float = 1.0e-3
    cylinder_pass: float = 2.0e-3
    cylinder_detect: float = 2.0e-2
    n_polar: int = 24
    n_azimuth: int = 48
    n_tube_t: int = 32
    n_tube_phi: int = 64

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class CheckRecord:
    """One battery check: a named defect against its tolerance pair."""

    name: str
    kind: str  # "universal" | "datri" | "info"
    defect: float
    tol_pass: float | None
    tol_detect: float | None
    status: str  # "pass" | "fail" | "decisive-fail" | "info" | "error"
    elapsed_s: float
    details: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _status(kind: str, defect: float, tol_pass, tol_detect) -> str:
    if kind == "info":
        return "info"
    if not np.isfinite(defect):
        return "error"
    if defect <= tol_pass:
        return "pass"
    if kind == "datri" and tol_detect is not None and defect > tol_detect:
        return "decisive-fail"
    return "fail"


@dataclasses.dataclass
class DiagnosticsReport:
    """Everything one battery run produced, in JSON-ready form."""

    model: str
    params: dict
    expected_datri: bool
    verdict: str
    seed: int
    total_elapsed_s: float
    config: dict
    ode_tolerances: dict
    base_points: list
    records: list[CheckRecord]

    @property
    def matches_expected(self) -> bool:
        if self.verdict == "D'ATRI-CONSISTENT":
            return self.expected_datri
        if self.verdict == "NOT-D'ATRI":
            return not self.expected_datri
        return False

    def record(self, name: str) -> CheckRecord:
        for rec in self.records:
            if rec.name == name:
                return rec
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "expected_datri": self.expected_datri,
            "verdict": self.verdict,
            "verdict_matches_expected": self.matches_expected,
            "seed": self.seed,
            "total_elapsed_s": self.total_elapsed_s,
            "config": self.config,
            "ode_tolerances": self.ode_tolerances,
            "base_points": self.base_points,
            "checks": [rec.to_dict() for rec in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True,
                          ensure_ascii=False)

    def summary_text(self) -> str:
        expected = "D'Atri" if self.expected_datri else "non-D'Atri"
        match = "match" if self.matches_expected else "MISMATCH"
        lines = [
            f"model: {self.model}  params: {json.dumps(self.params, sort_keys=True)}",
            f"verdict: {self.verdict}  (expected {expected}; {match})",
            f"elapsed: {self.total_elapsed_s:.1f} s",
            "",
        ]
        for rec in self.records:
            tol = "" if rec.tol_pass is None else f"  pass<={rec.tol_pass:g}"
            det = "" if rec.tol_detect is None else f" detect>{rec.tol_detect:g}"
            lines.append(
                f"{rec.status:>13}  {rec.name:<26} defect={rec.defect: .3e}{tol}{det}"
            )
        return "\n".join(lines) + "\n"


def _verdict(records: list[CheckRecord]) -> str:
    for rec in records:
        if rec.kind == "universal" and rec.status != "pass":
            return "INVALID"
    statuses = {rec.status for rec in records if rec.kind == "datri"}
    if statuses <= {"pass"}:
        return "D'ATRI-CONSISTENT"
    if "decisive-fail" in statuses:
        return "INCONSISTENT" if "pass" in statuses else "NOT-D'ATRI"
    return "INCONSISTENT"


# ---------------------------------------------------------------------------
# model registry
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ModelRegistryEntry:
    """A built-in model plus its expected classification and spot checks.

    ``reference`` holds independently known curvature values (scalar
    curvature at the base point, selected sectional curvatures); they are
    re-verified against the engine when the registry is assembled, so a
    silently broken metric cannot reach the battery.
    """

    name: str
    summary: str
    params: dict
    expected_datri: bool
    rationale: str
    working_radius: float
    base_point: tuple
    reference: dict


def _builtin_references() -> dict[str, dict]:
    # tau values and sectional curvatures at explicitly chosen points and
    # frames; each is a closed-form consequence of the model definition.
    x, y = 0.3, 0.2
    amp = 0.4
    tau_pert = -2.0 * amp * amp * (x * x + y * y) * math.exp(-2.0 * amp * x * y)
    lam2 = 0.8 * 0.8
    return {
        "euclidean": {
            "tau": 0.0,
            "sectionals": [
                {"point": (0.0, 0.0, 0.0), "u": (1, 0, 0), "v": (0, 1, 0),
                 "value": 0.0},
            ],
        },
        "round_sphere": {
            "tau": 6.0,
            "sectionals": [
                {"point": (0.0, 0.0, 0.0), "u": (0.5, 0, 0), "v": (0, 0.5, 0),
                 "value": 1.0},
            ],
        },
        "hyperbolic": {
            "tau": -6.0,
            "sectionals": [
                {"point": (0.0, 0.0, 0.0), "u": (0.5, 0, 0), "v": (0, 0.5, 0),
                 "value": -1.0},
            ],
        },
        "product_s2xr": {
            "tau": 2.0,
            "sectionals": [
                {"point": (0.0, 0.0, 0.0), "u": (0.5, 0, 0), "v": (0, 0.5, 0),
                 "value": 1.0},
                {"point": (0.0, 0.0, 0.0), "u": (0.5, 0, 0), "v": (0, 0, 1),
                 "value": 0.0},
            ],
        },
        "berger_sphere": {
            "tau": 8.0 - 2.0 * lam2,
            "sectionals": [
                {"point": (0.0, 0.0, 0.0), "u": (0.625, 0, 0), "v": (0, 0.5, 0),
                 "value": lam2},
                {"point": (0.0, 0.0, 0.0), "u": (0, 0.5, 0), "v": (0, 0, 0.5),
                 "value": 4.0 - 3.0 * lam2},
            ],
        },
        "heisenberg": {
            "tau": -0.5,
            "sectionals": [
                {"point": (0.3, -0.2, 0.15), "u": (1, 0, 0), "v": (0, 1, 0.3),
                 "value": -0.75},
                {"point": (0.3, -0.2, 0.15), "u": (1, 0, 0), "v": (0, 0, 1),
                 "value": 0.25},
            ],
        },
        "perturbed_conformal": {
            "tau": tau_pert,
            "sectionals": [],
        },
    }


_RATIONALE = {
    "euclidean": "flat space; every sphere-symmetry test is exact",
    "round_sphere": "constant positive curvature, a symmetric space",
    "hyperbolic": "constant negative curvature, a symmetric space",
    "product_s2xr": "product of symmetric factors, still symmetric",
    "berger_sphere": "homogeneous, naturally reductive, non-symmetric",
    "heisenberg": "nilpotent group metric; homogeneous, non-symmetric",
    "perturbed_conformal": "generic conformal perturbation, the negative control",
}

_REGISTRY_CACHE: dict[str, ModelRegistryEntry] | None = None


def register_builtin_models(validate: bool = True) -> dict[str, ModelRegistryEntry]:
    """Assemble the built-in model registry, spot-checking each metric.

    With ``validate`` (the default) the scalar and sectional reference
    values are recomputed through the curvature engine and compared at
    1e-8; a mismatch raises GeometryError immediately.
    """
    global _REGISTRY_CACHE
    if _REGISTRY_CACHE is not None:
        return _REGISTRY_CACHE
    refs = _builtin_references()
    entries: dict[str, ModelRegistryEntry] = {}
    for name in available_models():
        model = build_model(name)
        ref = refs[name]
        if validate:
            engine = get_engine(model)
            tau = float(engine.tau(jnp.asarray(model.base_point, dtype=float)))
            if abs(tau - ref["tau"]) > 1e-8 * max(1.0, abs(ref["tau"])):
                raise GeometryError(
                    f"registry self-check failed for '{name}': "
                    f"tau at base = {tau!r}, reference {ref['tau']!r}"
                )
            for sc in ref["sectionals"]:
                val = sectional(model, np.asarray(sc["point"], float),
                                np.asarray(sc["u"], float),
                                np.asarray(sc["v"], float))
                if abs(val - sc["value"]) > 1e-8 * max(1.0, abs(sc["value"])):
                    raise GeometryError(
                        f"registry self-check failed for '{name}': sectional "
                        f"{sc['u']}^{sc['v']} = {val!r}, reference {sc['value']!r}"
                    )
        entries[name] = ModelRegistryEntry(
            name=name,
            summary=model_schema()[name]["summary"],
            params=dict(model.params),
            expected_datri=model.expected_datri,
            rationale=_RATIONALE[name],
            working_radius=model.working_radius,
            base_point=tuple(model.base_point),
            reference=ref,
        )
    _REGISTRY_CACHE = entries
    return entries


# ---------------------------------------------------------------------------
# individual probes
# ---------------------------------------------------------------------------


def _sphere_totals(model, engine, p, radii, rule) -> list[float]:
    frame = tangent_basis(engine, p)
    dirs = rule.nodes @ frame.T
    seeds = seed_radial(engine, p, dirs)
    states = integrate_radial(model, seeds, radii)
    totals = []
    for k, r in enumerate(np.atleast_1d(radii)):
        data = surface_scalars(engine, states[:, k, :], float(r))
        totals.append(
            float(fsum_weighted(rule.weights, data.tau_sphere * data.theta) * r * r)
        )
    return totals


def _hemisphere_pair(model, engine, p, axis, r, rule) -> tuple[float, float]:
    """Totals over the hemispheres about +axis and -axis, in one solve."""
    frame = tangent_basis(engine, p)
    axis_onb = np.linalg.solve(frame, axis)
    axis_onb /= np.linalg.norm(axis_onb)
    dirs = np.vstack([
        rule.nodes @ rotation_to(axis_onb).T,
        rule.nodes @ rotation_to(-axis_onb).T,
    ]) @ frame.T
    seeds = seed_radial(engine, p, dirs)
    states = integrate_radial(model, seeds, [r])[:, 0, :]
    data = surface_scalars(engine, states, r)
    f = data.tau_sphere * data.theta * r * r
    n = rule.size
    return (
        fsum_weighted(rule.weights, f[:n]),
        fsum_weighted(rule.weights, f[n:]),
    )


def evenness_defect(model: MetricModel, p=None, r: float | None = None,
                    sample_size: int = 100, seed: int = 7) -> float:
    """max_u |theta(r u) - theta(-r u)| over a deterministic direction sample.

    Zero (to solver tolerance) exactly when the volume density is an even
    function of the direction at p, the defining D'Atri property.
    """
    engine = get_engine(model)
    p = np.asarray(model.base_point if p is None else p, float)
    if r is None:
        r = 0.7 * model.working_radius
    frame = tangent_basis(engine, p)
    dirs_onb = fibonacci_directions(sample_size, seed)
    dirs = np.vstack([dirs_onb, -dirs_onb]) @ frame.T
    seeds = seed_radial(engine, p, dirs)
    states = integrate_radial(model, seeds, [r])[:, 0, :]
    a = states[:, 12:16].reshape(-1, 2, 2)
    det_a = np.linalg.det(a)
    theta = det_a / (r * r)
    return float(np.max(np.abs(theta[:sample_size] - theta[sample_size:])))


# ---------------------------------------------------------------------------
# the battery
# ---------------------------------------------------------------------------


_BASE_OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [0.1, -0.05, 0.08],
    [-0.07, 0.11, 0.06],
])


def run_battery(model: MetricModel, config: BatteryConfig | None = None) -> DiagnosticsReport:
    """Run every check on one model and classify the outcome.

    Check order is fixed: the four universal identities, then the D'Atri
    criteria.  Any universal failure short-circuits interpretation (the
    verdict is INVALID regardless of what the D'Atri checks say).
    """
    cfg = config or BatteryConfig()
    engine = get_engine(model)
    wr = model.working_radius
    base = np.asarray(model.base_point, float)
    points = base + _BASE_OFFSETS
    rule_s = sphere_rule(cfg.n_polar, cfg.n_azimuth)
    rule_h = hemisphere_rule(cfg.n_polar, cfg.n_azimuth)
    frame = tangent_basis(engine, base)
    records: list[CheckRecord] = []
    t0 = time.perf_counter()

    def add(name, kind, tol_pass, tol_detect, fn):
        tic = time.perf_counter()
        try:
            defect, details = fn()
            status = _status(kind, defect, tol_pass, tol_detect)
        except GeometryError as exc:
            defect, details, status = float("nan"), {"error": str(exc)}, "error"
        records.append(CheckRecord(
            name=name, kind=kind, defect=float(defect), tol_pass=tol_pass,
            tol_detect=tol_detect, status=status,
            elapsed_s=time.perf_counter() - tic, details=details,
        ))

    # --- universal identities -------------------------------------------

    def gauss_bonnet():
        tic = time.perf_counter()
        pair = _sphere_totals(model, engine, base, list(cfg.sphere_radii), rule_s)
        elapsed_pair = time.perf_counter() - tic
        r_big = cfg.sphere_big_factor * wr
        big = _sphere_totals(model, engine, base, [r_big], rule_s)
        totals = pair + big
        radii = list(cfg.sphere_radii) + [r_big]
        defect = max(abs(t / EIGHT_PI - 1.0) for t in totals)
        return defect, {
            "radii": radii,
            "totals": totals,
            "elapsed_pair_s": elapsed_pair,
        }

    add("sphere_total_8pi", "universal", cfg.universal_rtol, None, gauss_bonnet)

    def steiner():
        dirs_onb = fibonacci_directions(cfg.steiner_samples, cfg.seed + 1)
        dirs = dirs_onb @ frame.T
        lo, hi = cfg.steiner_span
        radii = np.linspace(lo * wr, hi * wr, cfg.steiner_samples)
        seeds = seed_radial(engine, base, dirs)
        states = integrate_radial(model, seeds, radii)
        residuals = []
        for i, r in enumerate(radii):
            data = surface_scalars(engine, states[i:i + 1, i, :], float(r),
                                   radial_derivatives=True)
            lhs = (data.rho_radial + data.tau_sphere - data.tau) * data.theta
            rhs = data.theta_rr + 4.0 * data.theta_r / r + 2.0 * data.theta / r**2
            residuals.append(float((lhs - rhs)[0]))
        return max(abs(x) for x in residuals), {
            "radii": radii.tolist(),
            "residuals": residuals,
        }

    add("steiner_identity", "universal", cfg.universal_rtol, None, steiner)

    probe_dirs = fibonacci_directions(cfg.probe_directions, cfg.seed + 3) @ frame.T
    axis_curve = geodesic_axis(model, base, probe_dirs[0], cfg.axis_half_factor * wr)

    def capsule():
        total = capsule_total(model, axis_curve, cfg.capsule_radius,
                              n_t=cfg.n_tube_t, n_phi=cfg.n_tube_phi)
        return abs(total / EIGHT_PI - 1.0), {
            "total": total,
            "radius": cfg.capsule_radius,
            "axis_half_length": cfg.axis_half_factor * wr,
        }

    add("capsule_total_8pi", "universal", cfg.universal_rtol * 10, None, capsule)

    circle_r = cfg.circle_radius_factor * wr

    def torus():
        curve = chart_circle_axis(model, base, circle_r, arc=1.0)
        tn, tw, x, v, acc, frames = _axis_nodes(model, curve, cfg.n_tube_t)
        seeds, wphi = _tube_seeds(engine, x, v, acc, frames, cfg.n_tube_phi)
        r = max(cfg.tube_radii)
        states = integrate_radial(model, seeds, [r])[:, 0, :]
        vals = _tube_integrand(engine, states, seeds.shape[0])
        weights = (tw[:, None] * wphi[None, :]).reshape(-1)
        total = fsum_weighted(weights, vals)
        mass = fsum_weighted(weights, np.abs(vals))
        return abs(total) / max(1.0, mass), {
            "total": total,
            "curvature_mass": mass,
            "tube_radius": r,
            "circle_chart_radius": circle_r,
        }

    add("torus_total_zero", "universal", cfg.pass_tol, None, torus)

    # --- D'Atri criteria --------------------------------------------------

    def evenness():
        r = cfg.evenness_radius_factor * wr
        defect = evenness_defect(model, base, r, cfg.evenness_samples, cfg.seed)
        return defect, {"radius": r, "samples": cfg.evenness_samples}

    add("theta_evenness", "datri", cfg.pass_tol, cfg.detect_tol, evenness)

    def hemispheres():
        axes = fibonacci_directions(cfg.hemisphere_axes, cfg.seed + 2) @ frame.T
        r = cfg.hemisphere_radius
        plus, minus = [], []
        for a in axes:
            hp, hm = _hemisphere_pair(model, engine, base, a, r, rule_h)
            plus.append(hp)
            minus.append(hm)
        four_pi_dev = max(
            abs(h / FOUR_PI - 1.0) for h in plus + minus
        )
        equality = max(abs(hp - hm) for hp, hm in zip(plus, minus))
        details = {
            "radius": r,
            "axes": axes.tolist(),
            "plus": plus,
            "minus": minus,
        }
        return four_pi_dev, equality, details

    tic = time.perf_counter()
    try:
        four_pi_dev, equality, hemi_details = hemispheres()
        hemi_err = None
    except GeometryError as exc:
        four_pi_dev = equality = float("nan")
        hemi_details = {"error": str(exc)}
        hemi_err = str(exc)
    hemi_elapsed = time.perf_counter() - tic
    records.append(CheckRecord(
        name="hemisphere_total_4pi", kind="datri", defect=float(four_pi_dev),
        tol_pass=cfg.hemisphere_rtol, tol_detect=cfg.hemisphere_rtol * 10,
        status="error" if hemi_err else _status(
            "datri", four_pi_dev, cfg.hemisphere_rtol, cfg.hemisphere_rtol * 10),
        elapsed_s=hemi_elapsed, details=hemi_details,
    ))
    records.append(CheckRecord(
        name="hemisphere_equality", kind="datri", defect=float(equality),
        tol_pass=cfg.pass_tol, tol_detect=cfg.detect_tol,
        status="error" if hemi_err else _status(
            "datri", equality, cfg.pass_tol, cfg.detect_tol),
        elapsed_s=0.0, details={} if hemi_err else {"radius": cfg.hemisphere_radius},
    ))

    def tube_vanishing():
        arc_curve = chart_circle_axis(model, base, circle_r, arc=cfg.arc_fraction)
        totals = {}
        for label, curve in (("geodesic", axis_curve), ("arc", arc_curve)):
            tn, tw, x, v, acc, frames = _axis_nodes(model, curve, cfg.n_tube_t)
            seeds, wphi = _tube_seeds(engine, x, v, acc, frames, cfg.n_tube_phi)
            radii = sorted(cfg.tube_radii)
            states = integrate_radial(model, seeds, radii)
            weights = (tw[:, None] * wphi[None, :]).reshape(-1)
            for k, r in enumerate(radii):
                vals = _tube_integrand(engine, states[:, k, :], seeds.shape[0])
                totals[f"{label}_r{r:g}"] = fsum_weighted(weights, vals)
        defect = max(abs(t) for t in totals.values())
        return defect, {"totals": totals}

    add("tube_total_zero", "datri", cfg.pass_tol, cfg.detect_tol, tube_vanishing)

    def ricci_cyclic():
        values = [l3_residual(model, p) for p in points]
        return max(abs(v) for v in values), {
            "points": points.tolist(),
            "residuals": values,
        }

    add("ricci_cyclic_parallel", "datri", cfg.pass_tol, cfg.detect_tol, ricci_cyclic)

    def odd_coefficients():
        worst = 0.0
        per_dir = []
        for d in probe_dirs:
            fit = theta_series(model, TangentVector(base, d), k_max=8)
            a1, a3 = fit.coefficient(1), fit.coefficient(3)
            per_dir.append({
                "direction": d.tolist(),
                "a1": a1,
                "a3": a3,
                "a0_dev": fit.coefficient(0) - 1.0,
                "residual": fit.residual,
            })
            worst = max(worst, abs(a1), abs(a3))
        return worst, {"fits": per_dir}

    add("theta_odd_coefficients", "datri", cfg.pass_tol, cfg.detect_tol,
        odd_coefficients)

    def cylinder():
        worst = 0.0
        per_axis = []
        for d in probe_dirs:
            curve = geodesic_axis(model, base, d, cfg.axis_half_factor * wr)
            c3 = cylinder_coefficient(model, curve,
                                      n_t=cfg.n_tube_t, n_phi=cfg.n_tube_phi)
            tn, tw, _, _, _, _ = _axis_nodes(model, curve, cfg.n_tube_t)
            x = np.array([curve.position(t) for t in tn])
            v = np.array([curve.velocity(t) for t in tn])
            hat = np.asarray(engine.hat_a_batch(jnp.asarray(x), jnp.asarray(v)))
            hat_mean = fsum_weighted(tw, hat) / (curve.t_max - curve.t_min)
            per_axis.append({
                "direction": d.tolist(),
                "c3": c3,
                "hat_a_mean": hat_mean,
            })
            worst = max(worst, abs(c3))
        return worst, {"axes": per_axis}

    add("cylinder_coefficient", "datri", cfg.cylinder_pass, cfg.cylinder_detect,
        cylinder)

    def knu_constancy():
        half = cfg.axis_half_factor * wr
        worst = 0.0
        per_dir = []
        for d in probe_dirs:
            fit = knu_profile(model, TangentVector(base, d))
            a, b = fit.coefficient(2), fit.coefficient(1)
            defect = abs(a) * half * half + abs(b) * half
            per_dir.append({
                "direction": d.tolist(),
                "constant": fit.coefficient(0),
                "slope": b,
                "quadratic": a,
                "residual": fit.residual,
            })
            worst = max(worst, defect)
        return worst, {"fits": per_dir, "half_length": half}

    add("knu_profile_constant", "datri", cfg.pass_tol, cfg.detect_tol,
        knu_constancy)

    # --- recorded context (not scored) ------------------------------------

    def point_spread():
        totals = [
            _sphere_totals(model, engine, p, [cfg.sphere_radii[0]], rule_s)[0]
            for p in points
        ]
        return float(max(totals) - min(totals)), {
            "radius": cfg.sphere_radii[0],
            "points": points.tolist(),
            "totals": totals,
        }

    add("sphere_total_point_spread", "info", None, None, point_spread)

    verdict = _verdict(records)
    return DiagnosticsReport(
        model=model.name,
        params=dict(model.params),
        expected_datri=model.expected_datri,
        verdict=verdict,
        seed=cfg.seed,
        total_elapsed_s=time.perf_counter() - t0,
        config=cfg.to_dict(),
        ode_tolerances={"rtol": RTOL, "atol": ATOL},
        base_points=points.tolist(),
        records=records,
    )
