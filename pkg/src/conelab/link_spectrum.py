"""Laplace eigenmodes of the link S^p(r1) x S^q(r2) and their projection kernels.

Modes are indexed by the pair of harmonic degrees (k1, k2).  The reproducing
kernel of a mode eigenspace factorizes into one zonal kernel per sphere factor,
each a normalized Gegenbauer polynomial in the cosine of the factor angle.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from conelab.cone_geometry import ConeSpec, sphere_volume, unit_angle


@dataclass(frozen=True)
class LinkMode:
    k1: int
    k2: int
    mu: float
    mult: int


def harmonic_dim(k: int, d: int) -> int:
    """Dimension of degree-k spherical harmonics on S^d."""
    if k == 0:
        return 1
    return (2 * k + d - 1) * math.factorial(k + d - 2) // (math.factorial(k) * math.factorial(d - 1))


def factor_eigenvalue(c: ConeSpec, k: int, which: int) -> float:
    d = c.p if which == 1 else c.q
    return (c.p + c.q) * k * (k + d - 1) / d


def make_mode(c: ConeSpec, k1: int, k2: int) -> LinkMode:
    mu = factor_eigenvalue(c, k1, 1) + factor_eigenvalue(c, k2, 2)
    return LinkMode(k1, k2, mu, harmonic_dim(k1, c.p) * harmonic_dim(k2, c.q))


def enumerate_modes(c: ConeSpec, mu_max: float) -> list[LinkMode]:
    """All modes with mu <= mu_max, ascending in mu, ties by (k1, k2)."""
    if mu_max < 0:
        raise ValueError("mu_max must be nonnegative")
    slack = 1e-12 * max(1.0, mu_max)
    modes = []
    k1 = 0
    while factor_eigenvalue(c, k1, 1) <= mu_max + slack:
        k2 = 0
        while True:
            m = make_mode(c, k1, k2)
            if m.mu > mu_max + slack:
                break
            modes.append(m)
            k2 += 1
        k1 += 1
    modes.sort(key=lambda m: (m.mu, m.k1, m.k2))
    return modes


def modes_by_degree(c: ConeSpec, max_degree: int) -> list[LinkMode]:
    """All modes with k1 + k2 <= max_degree, ascending in mu."""
    modes = [make_mode(c, k1, m - k1) for m in range(max_degree + 1) for k1 in range(m + 1)]
    modes.sort(key=lambda m: (m.mu, m.k1, m.k2))
    return modes


def modes_to_csv(modes: list[LinkMode]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k1", "k2", "mu", "mult"])
    for m in modes:
        w.writerow([m.k1, m.k2, repr(float(m.mu)), m.mult])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Gegenbauer polynomials

def gegenbauer(k: int, alpha: float, t):
    """C_k^(alpha)(t) by the three-term recurrence."""
    t = np.asarray(t, dtype=float)
    c_prev = np.ones_like(t)
    if k == 0:
        return c_prev
    c_cur = 2.0 * alpha * t
    for j in range(2, k + 1):
        c_prev, c_cur = c_cur, (2.0 * t * (j + alpha - 1.0) * c_cur - (j + 2.0 * alpha - 2.0) * c_prev) / j
    return c_cur


def normalized_gegenbauer_table(kmax: int, alpha: float, t) -> np.ndarray:
    """P_k(t) = C_k(t)/C_k(1) for k = 0..kmax, stacked on a trailing axis.

    The normalized recurrence keeps |P_k| <= 1 on [-1, 1], so high degrees do not
    overflow.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (kmax + 1,))
    out[..., 0] = 1.0
    if kmax >= 1:
        out[..., 1] = t
    for k in range(2, kmax + 1):
        out[..., k] = (2.0 * t * (k + alpha - 1.0) * out[..., k - 1]
                       - (k - 1.0) * out[..., k - 2]) / (k + 2.0 * alpha - 1.0)
    return out


def zonal_table(d: int, radius: float, kmax: int, cos_angle) -> np.ndarray:
    """Reproducing kernels of degree-k harmonics on S^d(radius), k = 0..kmax."""
    alpha = (d - 1) / 2.0
    dims = np.array([harmonic_dim(k, d) for k in range(kmax + 1)], dtype=float)
    return normalized_gegenbauer_table(kmax, alpha, cos_angle) * dims / sphere_volume(d, radius)


@dataclass(frozen=True)
class ProjectionKernel:
    cone: ConeSpec
    mode: LinkMode

    def __call__(self, u, v, u2, v2):
        return eval_projection_kernel(self, (u, v), (u2, v2))


def _cosines(theta, theta_prime):
    u, v = theta
    u2, v2 = theta_prime
    return np.cos(unit_angle(u, u2)), np.cos(unit_angle(v, v2))


def eval_projection_kernel(pk: ProjectionKernel, theta, theta_prime):
    c, m = pk.cone, pk.mode
    t1, t2 = _cosines(theta, theta_prime)
    z1 = zonal_table(c.p, c.r1, m.k1, t1)[..., m.k1]
    z2 = zonal_table(c.q, c.r2, m.k2, t2)[..., m.k2]
    return z1 * z2


def zonal_harmonic(c: ConeSpec, mode: LinkMode, center):
    """Real eigenfunction of ``mode`` with sup norm 1 attained at ``center``."""
    alpha1, alpha2 = (c.p - 1) / 2.0, (c.q - 1) / 2.0

    def y(u, v):
        t1, t2 = _cosines((u, v), center)
        return (normalized_gegenbauer_table(mode.k1, alpha1, t1)[..., mode.k1]
                * normalized_gegenbauer_table(mode.k2, alpha2, t2)[..., mode.k2])
    return y


# ---------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre nodes in the polar angle of each factor about ``center``.

    Exact up to rounding for integrands that are zonal about ``center`` in each
    factor and smooth in the polar angles.
    """

    n1: int = 64
    n2: int = 64
    center: tuple | None = None


def _meridian(dim: int, pole_vec: np.ndarray, angles: np.ndarray) -> np.ndarray:
    e = np.zeros(dim)
    j = 1 if abs(pole_vec[1]) < 0.9 else 0
    e[j] = 1.0
    e = e - np.dot(e, pole_vec) * pole_vec
    e /= np.linalg.norm(e)
    return np.cos(angles)[:, None] * pole_vec[None, :] + np.sin(angles)[:, None] * e[None, :]


def quadrature_on_link(c: ConeSpec, f: Callable, rule: QuadratureSpec = QuadratureSpec()) -> float:
    """Integral of ``f(u, v)`` over the link for integrands zonal about ``rule.center``."""
    if rule.n1 < 2 or rule.n2 < 2:
        raise ValueError("need at least 2 nodes per polar angle")
    if rule.center is None:
        u0 = np.zeros(c.p + 1); u0[0] = 1.0
        v0 = np.zeros(c.q + 1); v0[0] = 1.0
    else:
        u0, v0 = (np.asarray(x, dtype=float) for x in rule.center)
    x1, w1 = np.polynomial.legendre.leggauss(rule.n1)
    x2, w2 = np.polynomial.legendre.leggauss(rule.n2)
    ph1 = 0.5 * math.pi * (x1 + 1.0)
    ph2 = 0.5 * math.pi * (x2 + 1.0)
    # polar-angle measure on S^d(rho): rho^d vol(S^{d-1}) sin^{d-1}(phi) dphi
    m1 = 0.5 * math.pi * w1 * np.sin(ph1) ** (c.p - 1) * sphere_volume(c.p - 1) * c.r1 ** c.p
    m2 = 0.5 * math.pi * w2 * np.sin(ph2) ** (c.q - 1) * sphere_volume(c.q - 1) * c.r2 ** c.q
    us = _meridian(c.p + 1, u0, ph1)
    vs = _meridian(c.q + 1, v0, ph2)
    U = np.repeat(us, rule.n2, axis=0)
    V = np.tile(vs, (rule.n1, 1))
    vals = np.asarray(f(U, V), dtype=float).reshape(rule.n1, rule.n2)
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand returned non-finite samples")
    return float(m1 @ vals @ m2)
