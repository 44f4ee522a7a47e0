"""Quadrature rules: spheres, hemispheres, tube parameter rectangles.

The spherical rules are Gauss-Legendre in the polar cosine crossed with a
uniform trapezoid in azimuth.  The trapezoid is spectrally exact for
trigonometric polynomials, so the product rule integrates every spherical
polynomial of degree <= min(2*n_polar - 1, n_azimuth - 1) exactly; with the
default 24 x 48 that is degree 47.

All accumulation helpers use math.fsum in a fixed node order: totals are
exactly-rounded sums, reproducible bit for bit no matter how the node
values were computed in parallel.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np


@dataclasses.dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights, plus the declared polynomial exactness degree.

    For spherical kinds the nodes are unit vectors (N, 3) in a reference
    orientation with the pole along +z; rotate with :func:`rotate_rule`.
    For the tube rectangle the nodes are (t, phi) pairs (N, 2).
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    degree: int

    @property
    def size(self) -> int:
        return self.weights.shape[0]


def gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def periodic_trapezoid(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Equispaced nodes on [0, 2*pi), uniform weights."""
    phi = 2.0 * np.pi * np.arange(m) / m
    w = np.full(m, 2.0 * np.pi / m)
    return phi, w


def _polar_product(cos_nodes, cos_weights, n_azimuth) -> tuple[np.ndarray, np.ndarray]:
    phi, wphi = periodic_trapezoid(n_azimuth)
    c = np.repeat(cos_nodes, n_azimuth)
    s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    ph = np.tile(phi, len(cos_nodes))
    nodes = np.column_stack([s * np.cos(ph), s * np.sin(ph), c])
    weights = np.repeat(cos_weights, n_azimuth) * np.tile(wphi, len(cos_nodes))
    return nodes, weights


def sphere_rule(n_polar: int = 24, n_azimuth: int = 48) -> QuadratureRule:
    """Full-sphere rule; weights sum to 4*pi (up to roundoff)."""
    cn, cw = gauss_legendre(n_polar, -1.0, 1.0)
    nodes, weights = _polar_product(cn, cw, n_azimuth)
    return QuadratureRule(
        nodes=nodes,
        weights=weights,
        kind="full-sphere",
        degree=min(2 * n_polar - 1, n_azimuth - 1),
    )


def hemisphere_rule(n_polar: int = 24, n_azimuth: int = 48) -> QuadratureRule:
    """Hemisphere rule about +z; weights sum to 2*pi (up to roundoff)."""
    cn, cw = gauss_legendre(n_polar, 0.0, 1.0)
    nodes, weights = _polar_product(cn, cw, n_azimuth)
    return QuadratureRule(
        nodes=nodes,
        weights=weights,
        kind="hemisphere",
        degree=min(2 * n_polar - 1, n_azimuth - 1),
    )


def tube_rule(t_min: float, t_max: float, n_t: int = 32, n_phi: int = 64) -> QuadratureRule:
    """Product rule on [t_min, t_max] x [0, 2*pi): nodes are (t, phi) pairs."""
    tn, tw = gauss_legendre(n_t, t_min, t_max)
    phi, wphi = periodic_trapezoid(n_phi)
    t = np.repeat(tn, n_phi)
    ph = np.tile(phi, n_t)
    nodes = np.column_stack([t, ph])
    weights = np.repeat(tw, n_phi) * np.tile(wphi, n_t)
    return QuadratureRule(
        nodes=nodes, weights=weights, kind="tube-rectangle", degree=2 * n_t - 1
    )


def rotation_to(axis: np.ndarray) -> np.ndarray:
    """Rotation matrix taking +z to the given unit vector, deterministically.

    Rodrigues rotation about z x axis; falls back to a half-turn about x
    when the axis is antipodal to z.
    """
    a = np.asarray(axis, float)
    a = a / np.linalg.norm(a)
    c = a[2]
    if c > 1.0 - 1e-14:
        return np.eye(3)
    if c < -1.0 + 1e-14:
        return np.diag([1.0, -1.0, -1.0])
    k = np.array([-a[1], a[0], 0.0])
    s = np.linalg.norm(k)
    k = k / s
    kmat = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + s * kmat + (1.0 - c) * (kmat @ kmat)


def rotate_rule(rule: QuadratureRule, axis) -> QuadratureRule:
    """Same weights, nodes rotated so the pole lies along ``axis``."""
    if rule.nodes.shape[1] != 3:
        raise ValueError("only spherical rules can be rotated")
    rot = rotation_to(np.asarray(axis, float))
    return dataclasses.replace(rule, nodes=rule.nodes @ rot.T)


def fsum_weighted(weights, values) -> float:
    """Exactly-rounded weighted sum (order-independent by construction)."""
    prods = np.asarray(weights, float) * np.asarray(values, float)
    return math.fsum(prods.tolist())


def fibonacci_directions(n: int, seed: int = 0) -> np.ndarray:
    """n near-uniform unit vectors: Fibonacci lattice + a seeded rotation.

    The lattice gives low-discrepancy coverage; the random-but-seeded
    rotation decorrelates it from the coordinate axes so no sample sits on
    a symmetry axis of a model by accident.  Deterministic per (n, seed).
    """
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    phi = golden * i
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((3, 3))
    q, rr = np.linalg.qr(m)
    q = q @ np.diag(np.sign(np.diag(rr)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return pts @ q.T
