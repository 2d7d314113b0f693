"""Model cones over S^p(r1) x S^q(r2), their intrinsic metric and the S-transform a/r.

A point of the cone is stored as a radius ``r`` together with a link point, i.e. a
pair of unit vectors ``u`` in R^{p+1} and ``v`` in R^{q+1}.  The embedded point in
R^{p+q+2} is ``r * (r1 * u, r2 * v)``.

Batch versions of the metric functions take arrays with a leading sample axis so
that sampling checks over 10^5 points stay vectorized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConeSpec:
    p: int
    q: int
    n: int
    r1: float
    r2: float
    kappa: float
    a: float
    minimizing_flag: bool

    @property
    def link_diameter(self) -> float:
        # sqrt((pi r1)^2 + (pi r2)^2) with r1^2 + r2^2 = 1
        return math.pi

    @property
    def s_transform(self) -> "STransform":
        return STransform(a=self.a)

    def link_volume(self) -> float:
        return sphere_volume(self.p, self.r1) * sphere_volume(self.q, self.r2)

    def principal_curvatures(self) -> np.ndarray:
        """Principal curvatures of the link inside the unit sphere S^{p+q+1}."""
        return np.concatenate([
            np.full(self.p, math.sqrt(self.q / self.p)),
            np.full(self.q, -math.sqrt(self.p / self.q)),
        ])

    def to_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q, "n": self.n, "r1": self.r1, "r2": self.r2,
            "kappa": self.kappa, "a": self.a, "minimizing": self.minimizing_flag,
        }


@dataclass(frozen=True, eq=False)
class ConePoint:
    r: float
    u: np.ndarray
    v: np.ndarray

    def scaled(self, tau: float) -> "ConePoint":
        return ConePoint(self.r * tau, self.u, self.v)


@dataclass(frozen=True)
class STransform:
    """The S-transform <A> = a/r and its reciprocal, the S-distance r/a."""

    a: float

    @property
    def lipschitz_constant(self) -> float:
        return 1.0 / self.a

    def value(self, r):
        return self.a / np.asarray(r, dtype=float)

    def distance(self, r):
        return np.asarray(r, dtype=float) / self.a


TIP = "tip"


@dataclass(frozen=True, eq=False)
class Pencil:
    """S-pencil {x : delta(x) > omega * d(x, apex)}; ``apex`` is a ConePoint or ``TIP``."""

    apex: object
    omega: float


def sphere_volume(d: int, radius: float = 1.0) -> float:
    """Volume of the round d-sphere of the given radius."""
    return radius ** d * 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


def make_cone(p: int, q: int, a_override: float | None = None) -> ConeSpec:
    """Cone over S^p(sqrt(p/(p+q))) x S^q(sqrt(q/(p+q))) with <A> = a/r."""
    if int(p) != p or int(q) != q:
        raise ValueError(f"sphere dimensions must be integers, got p={p}, q={q}")
    p, q = int(p), int(q)
    if p < 2 or q < 2:
        # p = 0 or q = 0 is a hyperplane (totally geodesic, trivial gauge); p = 1 or
        # q = 1 is not in the catalog either.
        raise ValueError(f"cone catalog requires p, q >= 2, got p={p}, q={q}")
    kappa = float(p + q)
    a = math.sqrt(kappa) if a_override is None else float(a_override)
    if a < math.sqrt(kappa) * (1.0 - 1e-15):
        raise ValueError(f"a={a} violates <A> >= |A|, need a >= sqrt(kappa)={math.sqrt(kappa)}")
    return ConeSpec(
        p=p, q=q, n=p + q + 1,
        r1=math.sqrt(p / (p + q)), r2=math.sqrt(q / (p + q)),
        kappa=kappa, a=a, minimizing_flag=(p + q >= 6),
    )


def load_cone(document: str | dict) -> tuple[ConeSpec, int]:
    """Read ``{"p":3,"q":3,"a":null,"seed":42}``; returns the cone and the seed."""
    data = json.loads(document) if isinstance(document, str) else dict(document)
    cone = make_cone(data["p"], data["q"], data.get("a"))
    return cone, int(data.get("seed", 0))


# ---------------------------------------------------------------------------
# link points and sampling

def unit_angle(x, y):
    """Angle between unit vectors along the last axis, accurate near 0 and pi."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))


def random_unit(rng: np.random.Generator, dim: int, size=None) -> np.ndarray:
    shape = (dim,) if size is None else (size, dim)
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def random_link(c: ConeSpec, rng: np.random.Generator, size=None):
    return random_unit(rng, c.p + 1, size), random_unit(rng, c.q + 1, size)


def pole(c: ConeSpec):
    """Fixed reference link point theta_0 = (e_0, e_0)."""
    u = np.zeros(c.p + 1)
    v = np.zeros(c.q + 1)
    u[0] = v[0] = 1.0
    return u, v


def link_distance(c: ConeSpec, u1, v1, u2, v2):
    """Geodesic distance on S^p(r1) x S^q(r2)."""
    a1 = unit_angle(u1, u2)
    a2 = unit_angle(v1, v2)
    return np.sqrt((c.r1 * a1) ** 2 + (c.r2 * a2) ** 2)


def link_geodesic(c: ConeSpec, u1, v1, u2, v2, s):
    """Point at fraction ``s`` along the product geodesic from (u1,v1) to (u2,v2)."""
    return _sphere_slerp(u1, u2, s), _sphere_slerp(v1, v2, s)


def _sphere_slerp(x, y, s):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)[..., None]
    ang = unit_angle(x, y)[..., None]
    w = y - np.sum(x * y, axis=-1, keepdims=True) * x
    nw = np.linalg.norm(w, axis=-1, keepdims=True)
    e = np.divide(w, nw, out=np.zeros_like(w), where=nw > 0)
    return np.cos(s * ang) * x + np.sin(s * ang) * e


def embed(c: ConeSpec, r, u, v) -> np.ndarray:
    """Cone point as a vector of R^{p+q+2}."""
    r = np.asarray(r, dtype=float)[..., None]
    return r * np.concatenate([c.r1 * np.asarray(u), c.r2 * np.asarray(v)], axis=-1)


# ---------------------------------------------------------------------------
# metric

def cone_distance_arrays(c: ConeSpec, rx, ux, vx, ry, uy, vy):
    rx = np.asarray(rx, dtype=float)
    ry = np.asarray(ry, dtype=float)
    ang = np.minimum(link_distance(c, ux, vx, uy, vy), math.pi)
    d2 = (rx - ry) ** 2 + 2.0 * rx * ry * (1.0 - np.cos(ang))
    return np.sqrt(np.maximum(d2, 0.0))


def cone_distance(c: ConeSpec, x: ConePoint, y: ConePoint) -> float:
    """Intrinsic distance; geodesics through the tip once the link distance reaches pi."""
    return float(cone_distance_arrays(c, x.r, x.u, x.v, y.r, y.u, y.v))


def s_value(c: ConeSpec, r):
    return c.a / np.asarray(r, dtype=float)


def s_distance(c: ConeSpec, r):
    return np.asarray(r, dtype=float) / c.a


def chart_radius(c: ConeSpec, r, gamma: float = 0.5):
    """Chart radius Gamma * delta(x) used for scaled normal coordinates."""
    return gamma * s_distance(c, r)


# ---------------------------------------------------------------------------
# S-axiom and uniformity checks

def sample_pairs(c: ConeSpec, rng: np.random.Generator, count: int,
                 log_r_range: tuple[float, float] = (-3.0, 3.0)):
    """Pairs with log-uniform radii and uniform link points."""
    lo, hi = log_r_range
    rx = np.exp(rng.uniform(lo, hi, count))
    ry = np.exp(rng.uniform(lo, hi, count))
    ux, vx = random_link(c, rng, count)
    uy, vy = random_link(c, rng, count)
    return rx, ux, vx, ry, uy, vy


def s_distance_lower_bound_check(c: ConeSpec, pairs, tol: float = 1e-9) -> dict:
    """Lipschitz bound for delta = r/a and the comparison delta <= L * dist(x, tip).

    ``pairs`` is a 6-tuple of batch arrays (rx, ux, vx, ry, uy, vy).
    """
    rx, ux, vx, ry, uy, vy = pairs
    rx = np.atleast_1d(np.asarray(rx, dtype=float))
    ry = np.atleast_1d(np.asarray(ry, dtype=float))
    if rx.size == 0:
        raise ValueError("empty sample list")
    d = cone_distance_arrays(c, rx, ux, vx, ry, uy, vy)
    dx, dy = s_distance(c, rx), s_distance(c, ry)
    with np.errstate(divide="ignore", invalid="ignore"):
        lip = np.where(d > 0, np.abs(dx - dy) / d, 0.0)
    tip_ratio = np.concatenate([dx / rx, dy / ry])
    bound = 1.0 / c.a
    i = int(np.argmax(lip))
    report = {
        "check": "s_distance_lipschitz",
        "max_ratio": float(lip[i]),
        "max_tip_ratio": float(np.max(tip_ratio)),
        "bound": bound,
        "certified_constant": bound,
        "witnesses": [{"index": i, "r_x": float(rx[i]), "r_y": float(ry[i]), "ratio": float(lip[i])}],
    }
    report["passed"] = bool(report["max_ratio"] <= bound + tol and report["max_tip_ratio"] <= bound + tol)
    if not report["passed"]:
        raise AssertionError(f"S-distance Lipschitz bound violated at pair {i}: {report}")
    return report


def three_leg_curve(c: ConeSpec, rx, ux, vx, ry, uy, vy, samples_per_leg: int = 33):
    """Radial-out / link-arc at rho = max(r_x, r_y) / radial-in candidate curve.

    Returns the total length and, for sample points z along the curve, the radius
    r(z) and the arclength from x to z.
    """
    rx = np.atleast_1d(np.asarray(rx, dtype=float))
    ry = np.atleast_1d(np.asarray(ry, dtype=float))
    rho = np.maximum(rx, ry)
    arc = rho * link_distance(c, ux, vx, uy, vy)
    leg1 = rho - rx
    leg3 = rho - ry
    total = leg1 + arc + leg3
    s = np.linspace(0.0, 1.0, samples_per_leg)
    r1 = rx[:, None] + s[None, :] * leg1[:, None]
    l1 = s[None, :] * leg1[:, None]
    r2 = np.broadcast_to(rho[:, None], (rho.size, s.size))
    l2 = leg1[:, None] + s[None, :] * arc[:, None]
    r3 = rho[:, None] - s[None, :] * leg3[:, None]
    l3 = (leg1 + arc)[:, None] + s[None, :] * leg3[:, None]
    radii = np.concatenate([r1, r2, r3], axis=1)
    lengths = np.concatenate([l1, l2, l3], axis=1)
    return total, radii, lengths


def uniformity_certificate(c: ConeSpec, pairs, c_max: float = 1e3,
                           samples_per_leg: int = 33) -> dict:
    """Smallest c >= 1 for which every three-leg curve is c-S-uniform.

    Checks l(gamma) <= c d(x, y) and min(l(x->z), l(z->y)) <= c delta(z) at
    sampled curve points z.
    """
    rx, ux, vx, ry, uy, vy = pairs
    rx = np.atleast_1d(np.asarray(rx, dtype=float))
    ry = np.atleast_1d(np.asarray(ry, dtype=float))
    if rx.size == 0:
        raise ValueError("empty sample list")
    d = cone_distance_arrays(c, rx, ux, vx, ry, uy, vy)
    total, radii, lengths = three_leg_curve(c, rx, ux, vx, ry, uy, vy, samples_per_leg)
    with np.errstate(divide="ignore", invalid="ignore"):
        quasi = np.where(d > 0, total / d, 1.0)
    lmin = np.minimum(lengths, total[:, None] - lengths)
    cone_cond = np.max(lmin / s_distance(c, radii), axis=1)
    per_pair = np.maximum(np.maximum(quasi, cone_cond), 1.0)
    worst = int(np.argmax(per_pair))
    failing = np.flatnonzero(~(per_pair <= c_max))
    report = {
        "check": "s_uniformity",
        "certified_constant": float(per_pair[worst]),
        "max_ratio": float(np.max(quasi)),
        "max_cone_ratio": float(np.max(cone_cond)),
        "witnesses": [{
            "index": worst, "r_x": float(rx[worst]), "r_y": float(ry[worst]),
            "length": float(total[worst]), "distance": float(d[worst]),
            "c": float(per_pair[worst]),
        }],
        "failures": [int(i) for i in failing],
        "c_uniform": float(per_pair[worst]),
    }
    report["passed"] = failing.size == 0
    return report


def pencil_membership(c: ConeSpec, pencil: Pencil, x: ConePoint) -> bool:
    if isinstance(pencil.apex, str) and pencil.apex == TIP:
        # delta(x) / d(x, tip) = 1/a everywhere
        return (1.0 / c.a) > pencil.omega
    d = cone_distance(c, x, pencil.apex)
    return bool(float(s_distance(c, x.r)) > pencil.omega * d)
