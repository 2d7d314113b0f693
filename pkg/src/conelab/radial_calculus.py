"""Operators L_lambda = -Delta - c_A |A|^2 - lambda <A>^2 on the cone and their Green's functions.

On the cone |A|^2 = kappa/r^2 and <A>^2 = a^2/r^2, so every term of L_lambda is
homogeneous of degree -2 and the operator separates over link modes.  A mode
with link eigenvalue mu has homogeneous solutions r^gamma with

    gamma (gamma + n - 2) = mu - c_A kappa - lambda a^2.

The minimal Green's function is the mode sum of matched radial solutions,
r_<^{gamma+} r_>^{gamma-} / (gamma+ - gamma-), times the mode projection kernel.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from conelab.cone_geometry import ConePoint, ConeSpec, unit_angle
from conelab.link_spectrum import LinkMode, make_mode, modes_by_degree, zonal_table


class CriticalityError(ValueError):
    """No minimal Green's function: a mode has a degenerate or oscillatory root pair."""


class TailNotConvergent(ValueError):
    """The certified mode-sum tail bound cannot be met for this point pair."""


class NotCoercive(ValueError):
    pass


@dataclass(frozen=True)
class OperatorSpec:
    c_A: float = 0.0
    lam: float = 0.0

    @classmethod
    def laplace(cls, lam: float = 0.0) -> "OperatorSpec":
        return cls(0.0, lam)

    @classmethod
    def jacobi(cls, lam: float = 0.0) -> "OperatorSpec":
        return cls(1.0, lam)

    @classmethod
    def named(cls, name: str, lam: float = 0.0) -> "OperatorSpec":
        try:
            return {"laplace": cls.laplace, "jacobi": cls.jacobi}[name](lam)
        except KeyError:
            raise ValueError(f"unknown operator {name!r}; expected 'laplace' or 'jacobi'") from None

    def shifted(self, lam: float) -> "OperatorSpec":
        return OperatorSpec(self.c_A, lam)

    @property
    def name(self) -> str:
        base = {0.0: "laplace", 1.0: "jacobi"}.get(float(self.c_A), f"c_A={self.c_A:g}")
        return base if self.lam == 0 else f"{base}(lambda={self.lam:g})"


def mode_potential(c: ConeSpec, op: OperatorSpec, mu: float) -> float:
    """V = mu - c_A kappa - lambda a^2; roots solve gamma(gamma+n-2) = V."""
    return mu - op.c_A * c.kappa - op.lam * c.a ** 2


def lambda_star(c: ConeSpec, c_A: float) -> float:
    """Principal eigenvalue of <A>^{-2} L for L = -Delta - c_A |A|^2."""
    return (((c.n - 2) / 2.0) ** 2 - c_A * c.kappa) / c.a ** 2


@dataclass(frozen=True)
class IndicialRoots:
    mode: LinkMode
    disc: float
    gamma_plus: complex | float
    gamma_minus: complex | float
    degenerate_flag: bool
    oscillatory_flag: bool
    n: int

    @property
    def positive(self) -> bool:
        return not (self.degenerate_flag or self.oscillatory_flag)


def indicial_roots(c: ConeSpec, op: OperatorSpec, mode: LinkMode, tol: float = 1e-12) -> IndicialRoots:
    half = (c.n - 2) / 2.0
    v = mode_potential(c, op, mode.mu)
    disc = half * half + v
    scale = max(1.0, half * half, abs(v))
    degenerate = abs(disc) <= tol * scale
    if disc < 0 and not degenerate:
        s = cmath.sqrt(disc)
        gp, gm = -half + s, -half - s
    else:
        s = math.sqrt(max(disc, 0.0))
        gp, gm = -half + s, -half - s
    return IndicialRoots(mode, disc, gp, gm, degenerate, disc < 0 and not degenerate, c.n)


@dataclass(frozen=True)
class AdaptednessCertificate:
    k_L: float
    eps_L: float
    supersolution_exponent: float | None
    adapted: bool
    weakly_coercive: bool
    lambda_star: float
    disc0: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def adaptedness_certificate(c: ConeSpec, op: OperatorSpec) -> AdaptednessCertificate:
    """Coefficient bound k_L and <A>-weak coercivity margin for radial operators.

    In coordinates scaled by delta = r/a the principal part is the identity and
    delta^2 |c| = |c_A kappa + lambda a^2| / a^2, so k_L = max(1, that).  The
    Hoelder seminorm of a_ij depends on the chart radius and is not included.
    """
    ls = lambda_star(c, op.c_A)
    disc0 = ((c.n - 2) / 2.0) ** 2 - op.c_A * c.kappa - op.lam * c.a ** 2
    # lambda within rounding of lambda* is critical, as for the indicial roots
    coercive = indicial_roots(c, op, make_mode(c, 0, 0)).positive
    k_L = max(1.0, abs(op.c_A * c.kappa + op.lam * c.a ** 2) / c.a ** 2)
    return AdaptednessCertificate(
        k_L=k_L,
        eps_L=(ls - op.lam) if coercive else 0.0,
        supersolution_exponent=-(c.n - 2) / 2.0 if coercive else None,
        adapted=coercive,
        weakly_coercive=coercive,
        lambda_star=ls,
        disc0=disc0,
    )


def operator_on_power(c: ConeSpec, op: OperatorSpec, gamma: float, mu: float = 0.0) -> float:
    """Coefficient C with L_lambda(r^gamma phi_mu) = C r^{gamma-2} phi_mu."""
    return -gamma * (gamma + c.n - 2) + mode_potential(c, op, mu)


@dataclass(frozen=True)
class RadialPower:
    """u = r^exponent with the certified identity L_lambda u = margin <A>^2 u."""

    exponent: float
    margin: float

    def __call__(self, r):
        return np.asarray(r, dtype=float) ** self.exponent


def supersolution_factory(c: ConeSpec, op: OperatorSpec) -> RadialPower:
    ls = lambda_star(c, op.c_A)
    if not indicial_roots(c, op, make_mode(c, 0, 0)).positive:
        raise NotCoercive(f"lambda={op.lam} >= lambda*={ls}: no positive supersolution with margin")
    gamma = -(c.n - 2) / 2.0
    # L_lambda r^gamma = (lambda* - lambda) a^2 r^{gamma-2} = (lambda* - lambda) <A>^2 r^gamma
    return RadialPower(gamma, ls - op.lam)


def unfolded_principal_eigenvalue(c: ConeSpec, op: OperatorSpec) -> float:
    """Generalized principal eigenvalue of the unfolded cylinder operator.

    In t = log r the operator r^2 L_lambda becomes -(d_t^2 + (n-2) d_t + Delta_link)
    - c_A kappa - lambda a^2 with constant coefficients; positive solutions of the
    form e^{gamma t} give the eigenvalue as the maximum of its symbol over gamma.
    """
    def neg_symbol(g):
        return g * g + (c.n - 2) * g + op.c_A * c.kappa + op.lam * c.a ** 2

    res = minimize_scalar(neg_symbol, bracket=(-c.n, 0.0), tol=1e-14)
    return float(-res.fun)


# ---------------------------------------------------------------------------
# matched radial Green's functions

def mode_green(roots: IndicialRoots, r, s):
    """Per-mode minimal Green's function with s^{n-1} [d_r g](s) = -1."""
    if not roots.positive:
        raise CriticalityError(
            f"no minimal Green's function for mode ({roots.mode.k1},{roots.mode.k2}): "
            f"disc={roots.disc:.3e}")
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    lo = np.minimum(r, s)
    hi = np.maximum(r, s)
    gp, gm = float(roots.gamma_plus), float(roots.gamma_minus)
    out = np.exp(gp * np.log(lo) + gm * np.log(hi)) / (gp - gm)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ModeTable:
    k1: np.ndarray
    k2: np.ndarray
    mu: np.ndarray
    mult: np.ndarray
    sqrt_disc: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    group_end: np.ndarray  # True where the next mode has a strictly larger mu
    max_degree: int


@lru_cache(maxsize=64)
def mode_table(c: ConeSpec, op: OperatorSpec, max_degree: int) -> ModeTable:
    modes = modes_by_degree(c, max_degree)
    k1 = np.array([m.k1 for m in modes])
    k2 = np.array([m.k2 for m in modes])
    mu = np.array([m.mu for m in modes])
    mult = np.array([float(m.mult) for m in modes])
    half = (c.n - 2) / 2.0
    disc = half * half + mu - op.c_A * c.kappa - op.lam * c.a ** 2
    sd = np.sqrt(disc)
    group_end = np.append(np.diff(mu) > 1e-12 * np.maximum(1.0, mu[1:]), True)
    for arr in (k1, k2, mu, mult, sd, group_end):
        arr.setflags(write=False)
    return ModeTable(k1, k2, mu, mult, sd, -half + sd, -half - sd, group_end, max_degree)


def _log_binom(m, n):
    return gammaln(m + n + 1.0) - gammaln(m + 1.0) - gammaln(n + 1.0)


def remainder_bound(c: ConeSpec, sqrt_disc0: float, rho, r_hi, degree: int):
    """Bound on the sum of |g_k E_k| over all modes with k1 + k2 > degree.

    Uses mu >= c0 m^2 with m = k1 + k2, sqrt(disc_k) >= sqrt(mu_k), and that the
    multiplicities at total degree m sum to at most binom(m+n, n) (bihomogeneous
    harmonics are independent polynomials of degree m in n+1 variables).
    """
    rho = np.asarray(rho, dtype=float)
    r_hi = np.asarray(r_hi, dtype=float)
    n = c.n
    c0 = (c.p + c.q) / (2.0 * max(c.p, c.q))
    with np.errstate(divide="ignore"):
        log_x = math.sqrt(c0) * np.log(rho)
    m = degree + 1
    ratio = (m + 1.0 + n) / (m + 1.0) * np.exp(log_x)
    log_first = _log_binom(m, n) + m * log_x
    log_pref = (-(n - 2) / 2.0) * np.log(rho) + (2 - n) * np.log(r_hi) - math.log(2.0 * sqrt_disc0 * c.link_volume())
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(log_first + log_pref) / (1.0 - ratio)
    return np.where(ratio < 1.0, out, np.inf)


@dataclass(frozen=True)
class GreenResult:
    value: np.ndarray
    tail_bound: np.ndarray
    mu_used: np.ndarray


@dataclass(frozen=True)
class GreenEvaluator:
    """Truncated mode-sum Green's function with a certified relative tail bound.

    ``mu_max=None`` picks the truncation per query: the smallest mu level at which
    the bound on the neglected remainder is <= tol * |partial sum|.
    """

    cone: ConeSpec
    op: OperatorSpec
    tol: float = 1e-10
    mu_max: float | None = None
    max_degree: int = 320

    def __post_init__(self):
        r0 = indicial_roots(self.cone, self.op, make_mode(self.cone, 0, 0))
        if not r0.positive:
            raise CriticalityError(
                f"operator {self.op.name} is not subcritical on this cone (disc0={r0.disc:.3e}); "
                "no positive Green's function")

    @property
    def roots0(self) -> IndicialRoots:
        return indicial_roots(self.cone, self.op, make_mode(self.cone, 0, 0))

    def required_degree(self, rho, r_hi) -> int:
        c = self.cone
        sd0 = self.roots0.disc ** 0.5
        scale = float(np.min(mode_green(self.roots0, rho * r_hi, r_hi))) / c.link_volume()
        target = 1e-3 * self.tol * scale
        for deg in _degree_ladder(self.max_degree):
            b = float(np.max(remainder_bound(c, sd0, rho, r_hi, deg)))
            if b <= target:
                return deg
        raise TailNotConvergent(
            f"radius ratio {float(np.max(rho)):.6f} needs more than "
            f"{self.max_degree} harmonic degrees for tol={self.tol:g}")

    def evaluate(self, rx, ux, vx, ry, uy, vy) -> GreenResult:
        """Batch evaluation; returns values, certified tail bounds and the mu cut."""
        c = self.cone
        rx = np.atleast_1d(np.asarray(rx, dtype=float))
        ry = np.atleast_1d(np.asarray(ry, dtype=float))
        rx, ry = np.broadcast_arrays(rx, ry)
        lo = np.minimum(rx, ry)
        hi = np.maximum(rx, ry)
        rho = lo / hi
        if np.any(rho >= 1.0):
            raise TailNotConvergent("equal radii: mode sum is not absolutely convergent")
        deg = self.required_degree(rho, hi)
        if self.mu_max is not None:
            deg = max(deg, self._degree_covering(self.mu_max))
        tab = mode_table(c, self.op, deg)
        t1 = np.cos(unit_angle(ux, uy))
        t2 = np.cos(unit_angle(vx, vy))
        t1, t2 = np.broadcast_to(t1, rx.shape), np.broadcast_to(t2, rx.shape)
        z1 = zonal_table(c.p, c.r1, deg, t1)
        z2 = zonal_table(c.q, c.r2, deg, t2)
        E = z1[:, tab.k1] * z2[:, tab.k2]
        log_lo, log_hi = np.log(lo)[:, None], np.log(hi)[:, None]
        g = np.exp(tab.gamma_plus[None, :] * log_lo + tab.gamma_minus[None, :] * log_hi) / (2.0 * tab.sqrt_disc[None, :])
        terms = g * E
        partial = np.cumsum(terms, axis=1)
        bounds = g * tab.mult[None, :] / c.link_volume()
        rem = remainder_bound(c, float(tab.sqrt_disc[0]), rho, hi, deg)
        tail = np.cumsum(bounds[:, ::-1], axis=1)[:, ::-1]
        tail = np.concatenate([tail[:, 1:], np.zeros((tail.shape[0], 1))], axis=1) + rem[:, None]
        if self.mu_max is not None:
            idx = int(np.searchsorted(tab.mu, self.mu_max * (1 + 1e-12), side="right")) - 1
            cut = np.full(rx.shape, max(idx, 0))
            ok = tail[np.arange(rx.size), cut] <= self.tol * np.abs(partial[np.arange(rx.size), cut])
            if not np.all(ok):
                bad = int(np.flatnonzero(~ok)[0])
                raise TailNotConvergent(
                    f"mu_max={self.mu_max} leaves tail {tail[bad, cut[bad]]:.3e} > tol * |G| at pair {bad}")
        else:
            good = (tail <= self.tol * np.abs(partial)) & tab.group_end[None, :]
            if not np.all(good.any(axis=1)):
                bad = int(np.flatnonzero(~good.any(axis=1))[0])
                raise TailNotConvergent(f"tail bound not met within degree {deg} at pair {bad}")
            cut = np.argmax(good, axis=1)
        rows = np.arange(rx.size)
        return GreenResult(partial[rows, cut], tail[rows, cut], tab.mu[cut])

    def _degree_covering(self, mu: float) -> int:
        c = self.cone
        k = 0
        while (c.p + c.q) / max(c.p, c.q) * k * k <= mu:
            k += 1
        return min(2 * k, self.max_degree)

    def green(self, x: ConePoint, y: ConePoint) -> float:
        res = self.evaluate(x.r, x.u, x.v, y.r, y.u, y.v)
        return float(res.value[0])

    def green_with_bound(self, x: ConePoint, y: ConePoint) -> tuple[float, float, float]:
        res = self.evaluate(x.r, x.u, x.v, y.r, y.u, y.v)
        return float(res.value[0]), float(res.tail_bound[0]), float(res.mu_used[0])

    def fixed(self, mu_max: float) -> "GreenEvaluator":
        return GreenEvaluator(self.cone, self.op, self.tol, mu_max, self.max_degree)


def _degree_ladder(max_degree: int):
    d = 8
    while d < max_degree:
        yield d
        d = int(d * 1.25) + 1
    yield max_degree


def green(ge: GreenEvaluator, x: ConePoint, y: ConePoint) -> float:
    return ge.green(x, y)


# ---------------------------------------------------------------------------
# finite-difference residual of L f

def _tangent_basis(w: np.ndarray) -> np.ndarray:
    dim = w.size
    m = np.column_stack([w, np.eye(dim)])
    q, _ = np.linalg.qr(m)
    basis = q[:, 1:dim]
    # orthogonalize against w exactly once more
    basis = basis - np.outer(w, w @ basis)
    basis /= np.linalg.norm(basis, axis=0, keepdims=True)
    return basis


def operator_residual(c: ConeSpec, op: OperatorSpec, f: Callable, x: ConePoint, h: float) -> float:
    """Second-order finite-difference value of L_lambda f at x.

    ``f(r, u, v)`` is evaluated on batches.  The link Laplacian is the sum of
    second differences along unit-speed geodesics in orthonormal tangent
    directions of each sphere factor.
    """
    u, v = np.asarray(x.u, dtype=float), np.asarray(x.v, dtype=float)
    r = x.r
    rs, us, vs = [r, r + h, r - h], [u, u, u], [v, v, v]
    for vec, rad, which in ((u, c.r1, 0), (v, c.r2, 1)):
        for e in _tangent_basis(vec).T:
            for sgn in (1.0, -1.0):
                # unit-speed geodesic of S^d(rad): angle h/rad on the unit sphere
                ang = sgn * h / rad
                moved = math.cos(ang) * vec + math.sin(ang) * e
                rs.append(r)
                if which == 0:
                    us.append(moved); vs.append(v)
                else:
                    us.append(u); vs.append(moved)
    vals = np.asarray(f(np.array(rs), np.array(us), np.array(vs)), dtype=float)
    f0, fp, fm = vals[0], vals[1], vals[2]
    d2r = (fp - 2 * f0 + fm) / h ** 2
    d1r = (fp - fm) / (2 * h)
    ang_vals = vals[3:]
    lap_link = np.sum(ang_vals[0::2] + ang_vals[1::2] - 2 * f0) / h ** 2
    lap = d2r + (c.n - 1) / r * d1r + lap_link / r ** 2
    return float(-lap - (op.c_A * c.kappa + op.lam * c.a ** 2) / r ** 2 * f0)


def harmonic_residual(ge: GreenEvaluator, x: ConePoint, y: ConePoint, h: float) -> float:
    """L G(., y) at x by finite differences, with one mode truncation for all stencil points.

    Each retained mode term solves L f = 0 off the pole exactly, so the residual
    measures discretization error only.
    """
    _, _, mu_used = ge.green_with_bound(x, y)
    # stencil points sit at slightly different radius ratios; give them headroom
    fixed = GreenEvaluator(ge.cone, ge.op, max(ge.tol, 1e-6), mu_used, ge.max_degree)

    def f(r, u, v):
        return fixed.evaluate(r, u, v, y.r, y.u, y.v).value
    return operator_residual(ge.cone, ge.op, f, x, h)
