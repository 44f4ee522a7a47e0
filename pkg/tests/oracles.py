"""Independent reference values for the test suite.

Nothing in this file imports the package.  Space forms, the two
left-invariant models and the conformal perturbation all have curvature
data that can be written down in closed form; those expressions were
derived by hand (Koszul / structure-constant computations for the
homogeneous metrics, the standard conformal-change formulas for the
rest) and are kept here as the ground truth the library is tested
against.  Finite-difference stencils for derivative cross-checks live
here too, so the oracle side never touches automatic differentiation.
"""

import math

import numpy as np

# ---------------------------------------------------------------------------
# space forms (constant sectional curvature kappa)
# ---------------------------------------------------------------------------


def sn(kappa: float, r):
    """Generalized sine: solution of y'' + kappa y = 0, y(0)=0, y'(0)=1."""
    r = np.asarray(r, dtype=float)
    if kappa > 0.0:
        s = math.sqrt(kappa)
        return np.sin(s * r) / s
    if kappa < 0.0:
        s = math.sqrt(-kappa)
        return np.sinh(s * r) / s
    return r


def cs(kappa: float, r):
    """Generalized cosine, the derivative of sn."""
    r = np.asarray(r, dtype=float)
    if kappa > 0.0:
        return np.cos(math.sqrt(kappa) * r)
    if kappa < 0.0:
        return np.cosh(math.sqrt(-kappa) * r)
    return np.ones_like(r)


def sphere_jacobi(kappa: float, r):
    """Jacobi matrix of a geodesic sphere: A(r) = sn(r) * I."""
    return float(sn(kappa, r)) * np.eye(2)


def tube_jacobi(kappa: float, r):
    """Jacobi matrix of a tube about a geodesic: diag(cs, sn)."""
    return np.diag([float(cs(kappa, r)), float(sn(kappa, r))])


def sphere_theta(kappa: float, r):
    """Volume density theta(r) = (sn(r)/r)^2."""
    r = np.asarray(r, dtype=float)
    return (sn(kappa, r) / r) ** 2


def sphere_mean_curvature(kappa: float, r):
    """Trace of the sphere shape operator, 2 cs/sn."""
    return 2.0 * cs(kappa, r) / sn(kappa, r)


def sphere_tau_s(kappa: float, r):
    """Intrinsic scalar curvature of the geodesic r-sphere: 2/sn(r)^2."""
    return 2.0 / sn(kappa, r) ** 2


def sphere_theta_taylor(kappa: float):
    """Taylor coefficients of theta(r) = (sn/r)^2 through r^6."""
    return np.array([
        1.0, 0.0, -kappa / 3.0, 0.0,
        2.0 * kappa**2 / 45.0, 0.0, -kappa**3 / 315.0,
    ])


def exp_origin_conformal(kappa: float, t, d):
    """Chart position of exp_0(t d) in the metric 4 (1+kappa|x|^2)^-2 dx^2.

    d is a Euclidean unit vector; the geodesic leaves the origin with
    chart speed 1/2 (the conformal factor at 0 is 4).
    """
    d = np.asarray(d, dtype=float)
    if kappa > 0.0:
        s = math.sqrt(kappa)
        return (math.tan(s * t / 2.0) / s) * d
    if kappa < 0.0:
        s = math.sqrt(-kappa)
        return (math.tanh(s * t / 2.0) / s) * d
    return (t / 2.0) * d


# ---------------------------------------------------------------------------
# left-invariant metrics: frozen structure-constant curvature tables
# ---------------------------------------------------------------------------

def berger_table(lam: float) -> dict:
    """Sectional curvatures and scalar curvature of the Berger sphere.

    In the orthonormal left-invariant frame (f1 fiber, f2, f3):
    K(f1,f2) = K(f1,f3) = lam^2, K(f2,f3) = 4 - 3 lam^2.
    """
    return {
        "K12": lam * lam,
        "K13": lam * lam,
        "K23": 4.0 - 3.0 * lam * lam,
        "tau": 8.0 - 2.0 * lam * lam,
    }


# chart frame at the origin for the lam-Berger model (columns)
def berger_frame(lam: float) -> np.ndarray:
    return np.diag([1.0 / (2.0 * lam), 0.5, 0.5])


# Heisenberg with ds^2 = dx^2 + (dy - x dz)^2 + dz^2
HEISENBERG = {
    "K12": -0.75,
    "K13": 0.25,
    "K23": 0.25,
    "tau": -0.5,
    "ricci_frame": np.diag([-0.5, -0.5, 0.5]),
}


def heisenberg_frame(x: float) -> np.ndarray:
    """Orthonormal frame columns at chart point (x, y, z)."""
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, x, 1.0],
    ], dtype=float)


# ---------------------------------------------------------------------------
# conformal perturbation g = e^{2f} delta, f = a x y
# ---------------------------------------------------------------------------


def cf_factor(a: float, x: float, y: float) -> float:
    return math.exp(a * x * y)


def cf_tau(a: float, x: float, y: float) -> float:
    return -2.0 * a * a * (x * x + y * y) * math.exp(-2.0 * a * x * y)


def cf_ricci(a: float, x: float, y: float) -> np.ndarray:
    """Coordinate components (lower indices) of the Ricci tensor."""
    return np.array([
        [-a * a * x * x, -a + a * a * x * y, 0.0],
        [-a + a * a * x * y, -a * a * y * y, 0.0],
        [0.0, 0.0, -a * a * (x * x + y * y)],
    ])


def cf_nabla_u_rho_uu(a: float, x: float, y: float) -> float:
    """(nabla_u rho)(u,u) for the unit vector u along +x."""
    return math.exp(-3.0 * a * x * y) * (-4.0 * a * a * x + 4.0 * a**3 * x * x * y)


def cf_nabla_u_tau(a: float, x: float, y: float) -> float:
    """Directional derivative of tau along the unit +x vector."""
    return math.exp(-3.0 * a * x * y) * (
        -4.0 * a * a * x + 4.0 * a**3 * y * (x * x + y * y)
    )


# hand value of cf_nabla_u_rho_uu(0.4, 0.3, 0.2), kept as a literal so a
# typo in the formula above cannot silently agree with the library
CF_NABLA_U_RHO_UU_BASE = -0.17437404562785


# ---------------------------------------------------------------------------
# sphere monomial integrals and difference stencils
# ---------------------------------------------------------------------------


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def monomial_sphere_integral(a: int, b: int, c: int) -> float:
    """Integral of x^a y^b z^c over the unit 2-sphere."""
    if a % 2 or b % 2 or c % 2:
        return 0.0
    num = (_double_factorial(a - 1) * _double_factorial(b - 1)
           * _double_factorial(c - 1))
    return 4.0 * math.pi * num / _double_factorial(a + b + c + 1)


def d1(f, t0: float = 0.0, h: float = 1e-3) -> float:
    """Five-point first derivative at t0."""
    return (-f(t0 + 2 * h) + 8 * f(t0 + h)
            - 8 * f(t0 - h) + f(t0 - 2 * h)) / (12 * h)


def d2(f, t0: float = 0.0, h: float = 1e-3) -> float:
    """Five-point second derivative at t0."""
    return (-f(t0 + 2 * h) + 16 * f(t0 + h) - 30 * f(t0)
            + 16 * f(t0 - h) - f(t0 - 2 * h)) / (12 * h * h)
