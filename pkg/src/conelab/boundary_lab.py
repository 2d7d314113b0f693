"""Hyperbolic unfolding of the cone and boundary potential theory at the tip and at infinity.

The unfolded metric <A>^2 g equals a^2 (dt^2 + g_link) with t = log r, a metric
cylinder.  The two ends of the cylinder are the two boundary points of the cone:
the tip (t -> -inf) and infinity (t -> +inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from conelab.cone_geometry import (
    TIP,
    ConePoint,
    ConeSpec,
    embed,
    link_distance,
    pole,
    random_link,
)
from conelab.link_spectrum import LinkMode, enumerate_modes, make_mode, zonal_harmonic
from conelab.radial_calculus import (
    GreenEvaluator,
    NotCoercive,
    OperatorSpec,
    indicial_roots,
    supersolution_factory,
)

INFINITY = "infinity"
BOUNDARY_POINTS = (TIP, INFINITY)


class FitFailure(ValueError):
    pass


class PositivityUnverifiable(ValueError):
    pass


class DivisionUnstable(ValueError):
    pass


class NegativeCoefficient(ValueError):
    pass


class EmptyPencil(ValueError):
    pass


def _check_boundary_point(at: str) -> None:
    if at not in BOUNDARY_POINTS:
        raise ValueError(f"boundary point must be one of {BOUNDARY_POINTS}, got {at!r}")


# ---------------------------------------------------------------------------
# unfolded metric

@dataclass(frozen=True, eq=False)
class UnfoldedPoint:
    t: float
    u: np.ndarray
    v: np.ndarray

    @classmethod
    def from_cone(cls, x: ConePoint) -> "UnfoldedPoint":
        return cls(math.log(x.r), x.u, x.v)

    def to_cone(self) -> ConePoint:
        return ConePoint(math.exp(self.t), self.u, self.v)


def unfolded_distance_arrays(c: ConeSpec, tx, ux, vx, ty, uy, vy):
    dt = np.asarray(tx, dtype=float) - np.asarray(ty, dtype=float)
    return c.a * np.hypot(dt, link_distance(c, ux, vx, uy, vy))


def unfolded_distance(c: ConeSpec, x: UnfoldedPoint, y: UnfoldedPoint) -> float:
    return float(unfolded_distance_arrays(c, x.t, x.u, x.v, y.t, y.u, y.v))


def unfolded_curve_length(c: ConeSpec, r, u, v) -> float:
    """Length of a sampled curve in the metric <A>^2 g, from its embedding.

    Chord lengths of the embedded polyline are weighted by <A> at the geometric
    mean radius of each chord.
    """
    pts = embed(c, r, u, v)
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=-1)
    r = np.asarray(r, dtype=float)
    r_mid = np.sqrt(r[1:] * r[:-1])
    return float(np.sum(c.a / r_mid * chords))


def four_point_delta(d_wx, d_yz, d_wy, d_xz, d_wz, d_xy):
    """Per-quadruple four-point hyperbolicity constant (largest minus second largest pair sum)/2."""
    s = np.sort(np.stack([d_wx + d_yz, d_wy + d_xz, d_wz + d_xy], axis=-1), axis=-1)
    return 0.5 * (s[..., 2] - s[..., 1])


def sample_quadruples(c: ConeSpec, rng: np.random.Generator, count: int,
                      t_range: tuple[float, float] = (-20.0, 20.0), window: float = 2.0):
    """Mixture of quadruple families on the cylinder.

    A third are uniform in t_range, a third are clustered in a t-window of the
    given width around a uniform center, and a third are clustered antipodal
    pairs (w, -w, y, -y) which probe the link-scale thin triangles.
    """
    lo, hi = t_range
    k = count // 3
    kinds = rng.permutation(np.concatenate([np.zeros(count - 2 * k, int), np.ones(k, int), np.full(k, 2)]))
    center = rng.uniform(lo + window, hi - window, count)
    t = np.where(kinds[:, None] == 0, rng.uniform(lo, hi, (count, 4)),
                 center[:, None] + rng.uniform(-0.5 * window, 0.5 * window, (count, 4)))
    pts = [random_link(c, rng, count) for _ in range(4)]
    anti = kinds == 2
    for src, dst in ((0, 1), (2, 3)):
        u, v = pts[src]
        pu, pv = pts[dst]
        pu[anti] = -u[anti]
        pv[anti] = -v[anti]
    return t, pts


def gromov_delta_estimate(c: ConeSpec, seed: int = 0, count: int = 100_000,
                          t_range: tuple[float, float] = (-20.0, 20.0)) -> dict:
    if count < 1000:
        raise ValueError("count must be at least 10^3")
    rng = np.random.default_rng(seed)
    t, pts = sample_quadruples(c, rng, count, t_range)

    def d(i, j):
        return unfolded_distance_arrays(c, t[:, i], *pts[i], t[:, j], *pts[j])
    delta = four_point_delta(d(0, 1), d(2, 3), d(0, 2), d(1, 3), d(0, 3), d(1, 2))
    half = count // 2
    first, second = float(np.max(delta[:half])), float(np.max(delta[half:]))
    delta_hat = float(np.max(delta))
    return {
        "check": "gromov_four_point",
        "count": count,
        "delta_hat": delta_hat,
        "delta_hat_first_half": first,
        "delta_hat_second_half": second,
        "stability": abs(first - second) / delta_hat if delta_hat > 0 else 0.0,
        "cylinder_bound": c.a * c.link_diameter,
        "argmax": int(np.argmax(delta)),
    }


# ---------------------------------------------------------------------------
# Phi-chains

@dataclass(frozen=True, eq=False)
class PhiChain:
    """Nested ends N_i = {t < t_i} (tip) or {t > t_i} (infinity) of the cylinder."""

    boundary_point: str
    levels: np.ndarray
    track_u: np.ndarray
    track_v: np.ndarray
    a_delta: float
    b_delta: float
    spacing: float

    @property
    def radii(self) -> np.ndarray:
        return np.exp(self.levels)

    @property
    def depth_sign(self) -> int:
        return -1 if self.boundary_point == TIP else 1

    def phi(self, s):
        return self.a_delta + self.b_delta * np.asarray(s, dtype=float)

    def to_dict(self) -> dict:
        return {
            "boundary_point": self.boundary_point,
            "levels_t": [float(x) for x in self.levels],
            "a_delta": self.a_delta,
            "b_delta": self.b_delta,
            "spacing": self.spacing,
        }


def antipode(u, v):
    return -np.asarray(u), -np.asarray(v)


def chain_boundary_sample(c: ConeSpec, u0, v0, rng: np.random.Generator, count: int = 256):
    """Link points for the boundary slices: the anchor, its antipode and random points."""
    u, v = random_link(c, rng, count)
    au, av = antipode(u0, v0)
    return np.vstack([u0[None], au[None], u]), np.vstack([v0[None], av[None], v])


def build_phi_chain(c: ConeSpec, boundary_point: str, m: int, spacing: float,
                    anchor: UnfoldedPoint | None = None, min_slope: float = 0.5,
                    seed: int = 0, boundary_samples: int = 256) -> PhiChain:
    """Canonical chain of axial sublevel sets with track points on the anchor ray.

    Phi(s) = a_delta + b_delta s is fitted on the boundary sample: with D the
    largest sampled d(x, x_i), b_delta = min(1, (2/3) spacing / D) and
    a_delta = spacing - b_delta D, so spacing <= 3 Phi(0) holds by construction.
    """
    _check_boundary_point(boundary_point)
    if m < 3:
        raise ValueError("chain needs m >= 3 levels")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if anchor is None:
        u0, v0 = pole(c)
        anchor = UnfoldedPoint(0.0, u0, v0)
    sign = -1 if boundary_point == TIP else 1
    dt = spacing / c.a
    levels = anchor.t + sign * dt * np.arange(m)
    rng = np.random.default_rng(seed)
    su, sv = chain_boundary_sample(c, anchor.u, anchor.v, rng, boundary_samples)
    d_max = float(np.max(c.a * link_distance(c, su, sv, anchor.u[None], anchor.v[None])))
    b = 1.0 if d_max == 0 else min(1.0, (2.0 / 3.0) * spacing / d_max)
    a_delta = spacing - b * d_max
    if b < min_slope or a_delta <= 0:
        raise FitFailure(
            f"spacing {spacing:.4g} is too small for link-scale boundary distances up to {d_max:.4g} "
            f"(slope {b:.3g} < {min_slope})")
    return PhiChain(boundary_point, levels, np.asarray(anchor.u), np.asarray(anchor.v), a_delta, b, spacing)


def distance_to_slice(c: ConeSpec, t, t_slice):
    """d_<A>(x, {t = t_slice}); the nearest slice point lies on the ray of x."""
    return c.a * np.abs(np.asarray(t, dtype=float) - t_slice)


def verify_phi_chain(c: ConeSpec, chain: PhiChain, seed: int = 1, samples: int = 256, tol: float = 1e-9) -> dict:
    """Check the chain inequalities at sampled boundary points of every level."""
    rng = np.random.default_rng(seed)
    su, sv = chain_boundary_sample(c, chain.track_u, chain.track_v, rng, samples)
    phi0 = chain.a_delta
    lv = chain.levels
    m = len(lv)
    nested = bool(np.all(np.diff(lv) * chain.depth_sign > 0))
    track = [unfolded_distance_arrays(c, lv[i], chain.track_u, chain.track_v, lv[i + 1], chain.track_u, chain.track_v)
             for i in range(m - 1)]
    track = np.asarray(track, dtype=float)
    spacing_ok = bool(np.all(track >= phi0 - tol) and np.all(track <= 3 * phi0 + tol))
    worst_margin = math.inf
    for i in range(m):
        d_track = unfolded_distance_arrays(c, lv[i], su, sv, lv[i], chain.track_u[None], chain.track_v[None])
        need = chain.phi(d_track)
        for j in (i - 1, i + 1):
            if 0 <= j < m:
                d_nb = distance_to_slice(c, np.full(len(su), lv[i]), lv[j])
                worst_margin = min(worst_margin, float(np.min(d_nb - need)))
    return {
        "check": "phi_chain",
        "boundary_point": chain.boundary_point,
        "levels": m,
        "nested": nested,
        "track_spacing_min": float(track.min()),
        "track_spacing_max": float(track.max()),
        "phi0": phi0,
        "spacing_ok": spacing_ok,
        "separation_margin": worst_margin,
        "passed": bool(nested and spacing_ok and worst_margin >= -tol),
    }


# ---------------------------------------------------------------------------
# positive solutions vanishing at a boundary point

@dataclass(frozen=True, eq=False)
class VanishingSolution:
    """u = r^{gamma0} (c0 + sum_k c_k (r/r_work)^{e_k} Y_k) with Y_k zonal, sup |Y_k| = 1.

    Minimal-growth exponents are used at the boundary point ``at``, so every e_k
    has the sign that makes the admixtures die out there.
    """

    cone: ConeSpec
    op: OperatorSpec
    at: str
    gamma0: float
    c0: float
    modes: tuple
    exponents: np.ndarray
    coeffs: np.ndarray
    centers: tuple
    r_work: float
    margin: float

    def profile(self, t, u, v):
        """u / r^{gamma0} at log-radius t, i.e. c0 plus the admixtures."""
        return self.c0 + self.admixture(t, u, v)

    def admixture(self, t, u, v):
        t = np.asarray(t, dtype=float)
        total = np.zeros(np.broadcast_shapes(t.shape, np.shape(u)[:-1]))
        for mode, e, ck, cen in zip(self.modes, self.exponents, self.coeffs, self.centers):
            if ck == 0.0:
                continue
            y = zonal_harmonic(self.cone, mode, cen)(u, v)
            total = total + ck * np.exp(e * (t - math.log(self.r_work))) * y
        return total

    def __call__(self, r, u, v):
        r = np.asarray(r, dtype=float)
        return r ** self.gamma0 * self.profile(np.log(r), u, v)

    def in_working_region(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return r <= self.r_work if self.at == TIP else r >= self.r_work


def _minimal_growth(c: ConeSpec, op: OperatorSpec, mode: LinkMode, at: str) -> float:
    roots = indicial_roots(c, op, mode)
    if not roots.positive:
        raise NotCoercive(f"mode ({mode.k1},{mode.k2}) has disc {roots.disc:.3e} <= 0")
    return float(roots.gamma_plus if at == TIP else roots.gamma_minus)


def vanishing_solution(c: ConeSpec, op: OperatorSpec, at: str, coeffs: Sequence[float],
                       modes: Sequence[LinkMode], centers: Sequence, c0: float = 1.0,
                       r_work: float = 1.0) -> VanishingSolution:
    """Solution with explicit coefficients; raises unless positivity is certified on the working region."""
    _check_boundary_point(at)
    g0 = _minimal_growth(c, op, make_mode(c, 0, 0), at)
    exps = np.array([_minimal_growth(c, op, m, at) - g0 for m in modes], dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    # on the working region (r/r_work)^{e_k} <= 1 and |Y_k| <= 1
    margin = c0 - float(np.sum(np.abs(coeffs)))
    if not c0 > 0 or not margin > 0:
        raise PositivityUnverifiable(
            f"c0={c0} with admixture mass {float(np.sum(np.abs(coeffs))):.6g} leaves no positivity margin")
    return VanishingSolution(c, op, at, g0, float(c0), tuple(modes), exps, coeffs,
                             tuple(centers), float(r_work), margin)


def sample_vanishing_solution(c: ConeSpec, op: OperatorSpec, at: str, rng: np.random.Generator,
                              K_modes: int = 3, budget: tuple[float, float] = (0.05, 0.6),
                              mu_cap: float | None = None, r_work: float = 1.0) -> VanishingSolution:
    """Random positive solution with minimal growth at ``at``.

    Draws c0 in [1/2, 2], K_modes nonzero modes among the lowest link levels, and
    admixture coefficients whose total mass is a random fraction of c0 drawn from
    ``budget``.
    """
    _check_boundary_point(at)
    if mu_cap is None:
        mu_cap = 3.0 * (c.p + c.q) * 2
    pool = [m for m in enumerate_modes(c, mu_cap) if m.mu > 0]
    if K_modes > len(pool):
        raise ValueError("K_modes exceeds the available modes below mu_cap")
    idx = np.sort(rng.choice(len(pool), size=K_modes, replace=False)) if K_modes else np.array([], int)
    modes = [pool[i] for i in idx]
    c0 = float(rng.uniform(0.5, 2.0))
    w = rng.dirichlet(np.ones(K_modes)) if K_modes else np.zeros(0)
    mass = float(rng.uniform(*budget)) * c0
    signs = rng.choice([-1.0, 1.0], size=K_modes)
    coeffs = signs * w * mass
    cu, cv = random_link(c, rng, K_modes) if K_modes else (np.zeros((0, c.p + 1)), np.zeros((0, c.q + 1)))
    centers = [(cu[i], cv[i]) for i in range(K_modes)]
    return vanishing_solution(c, op, at, coeffs, modes, centers, c0=c0, r_work=r_work)


def vanishing_ratio_slope(sol: VanishingSolution) -> float:
    """Exponent of u/w at the boundary point, w the midpoint supersolution; positive means u/w -> 0."""
    w = supersolution_factory(sol.cone, sol.op)
    slope = sol.gamma0 - w.exponent
    return slope if sol.at == TIP else -slope


# ---------------------------------------------------------------------------
# boundary Harnack and oscillation decay

def _shell_grid(c: ConeSpec, chain: PhiChain, k: int, link_u, link_v, nt: int):
    """Sample points of the shell between levels k and k+1."""
    t = np.linspace(chain.levels[k], chain.levels[k + 1], nt)
    T = np.repeat(t, len(link_u))
    U = np.tile(link_u, (nt, 1))
    V = np.tile(link_v, (nt, 1))
    return T, U, V


def _quotient_deviation(u: VanishingSolution, v: VanishingSolution, t, U, V):
    """(u/v) scaled by r^{gamma0} cancelled, minus the limit c0u/c0v, without cancellation."""
    au = u.admixture(t, U, V)
    av = v.admixture(t, U, V)
    pv = v.c0 + av
    if np.any(pv <= 0):
        raise DivisionUnstable("v is not positive on the sample grid")
    return (v.c0 * au - u.c0 * av) / (v.c0 * pv)


def _link_probe(c: ConeSpec, sols: Sequence[VanishingSolution], rng: np.random.Generator, count: int):
    u, v = random_link(c, rng, count)
    extra_u, extra_v = [], []
    for s in sols:
        for cu, cv in s.centers:
            extra_u += [cu, -cu]
            extra_v += [cv, -cv]
    if extra_u:
        u = np.vstack([u, np.array(extra_u)])
        v = np.vstack([v, np.array(extra_v)])
    return u, v


def _same_exponents(u: VanishingSolution, v: VanishingSolution) -> None:
    if u.at != v.at or u.gamma0 != v.gamma0:
        raise ValueError("u and v must vanish at the same boundary point for the same operator")


def bhp_pair(c: ConeSpec, chain: PhiChain, u: VanishingSolution, v: VanishingSolution,
             rng: np.random.Generator, link_count: int = 64, nt: int = 9) -> np.ndarray:
    """Per-level sup/inf of u/v over N_{i+1}, for i = 0 .. m-2, including the limit value."""
    _same_exponents(u, v)
    lu, lv = _link_probe(c, [u, v], rng, link_count)
    m = len(chain.levels)
    lim = u.c0 / v.c0
    sups, infs = [], []
    for k in range(m - 1):
        t, U, V = _shell_grid(c, chain, k, lu, lv, nt)
        q = lim + _quotient_deviation(u, v, t, U, V)
        sups.append(float(q.max()))
        infs.append(float(q.min()))
    # sup and inf over N_j: all shells from j on, plus the limit at the boundary point
    sup_tail = np.maximum.accumulate(np.array(sups + [lim])[::-1])[::-1]
    inf_tail = np.minimum.accumulate(np.array(infs + [lim])[::-1])[::-1]
    return sup_tail[1:m] / inf_tail[1:m]


def bhp_verify(c: ConeSpec, op: OperatorSpec, chain: PhiChain, trials: int = 100, seed: int = 0,
               K_modes: int = 3, tol: float = 1e-6, pairs: Sequence | None = None) -> dict:
    """Empirical boundary Harnack constants C_i = sup_{N_{i+1}}(u/v) / inf_{N_{i+1}}(u/v)."""
    rng = np.random.default_rng(seed)
    if pairs is None:
        pairs = [(sample_vanishing_solution(c, op, chain.boundary_point, rng, K_modes, r_work=math.exp(chain.levels[0])),
                  sample_vanishing_solution(c, op, chain.boundary_point, rng, K_modes, r_work=math.exp(chain.levels[0])))
                 for _ in range(trials)]
    per_level = np.array([bhp_pair(c, chain, u, v, np.random.default_rng([seed, i]))
                          for i, (u, v) in enumerate(pairs)])
    level_max = per_level.max(axis=0)
    half = len(level_max) // 2
    first, deep = float(level_max[:half].max()), float(level_max[half:].max())
    c_hat = float(level_max.max())
    return {
        "check": "boundary_harnack",
        "trials": len(pairs),
        "levels": int(len(level_max)),
        "C_hat": c_hat,
        "per_level_max": [float(x) for x in level_max],
        "first_half_max": first,
        "deep_half_max": deep,
        "finite": bool(math.isfinite(c_hat)),
        "level_stable": bool(deep <= first + tol),
        "passed": bool(math.isfinite(c_hat) and deep <= first + tol),
    }


@dataclass
class OscillationTrace:
    sup: list
    inf: list
    osc: list
    rho_hat: float
    rho_predicted: float
    limit: float
    limit_error: float

    def to_dict(self) -> dict:
        return {
            "levels": [{"k": k, "sup": s, "inf": i, "osc": o}
                       for k, (s, i, o) in enumerate(zip(self.sup, self.inf, self.osc))],
            "rho_hat": self.rho_hat,
            "rho_predicted": self.rho_predicted,
            "limit": self.limit,
            "limit_error": self.limit_error,
        }


def predicted_decay_ratio(chain: PhiChain, u: VanishingSolution, v: VanishingSolution) -> float:
    """exp(-dt * e_min) over admixed modes of u and v, dt the level step in t."""
    es = [abs(e) for s in (u, v) for e, ck in zip(s.exponents, s.coeffs) if ck != 0.0]
    if not es:
        return 0.0
    dt = abs(chain.levels[1] - chain.levels[0])
    return math.exp(-dt * min(es))


def oscillation_decay(c: ConeSpec, op: OperatorSpec, chain: PhiChain, u: VanishingSolution,
                      v: VanishingSolution, seed: int = 0, link_count: int = 64, nt: int = 9) -> OscillationTrace:
    """osc(k) of u/v on successive shells, with a least-squares geometric ratio."""
    _same_exponents(u, v)
    rng = np.random.default_rng(seed)
    lu, lv = _link_probe(c, [u, v], rng, link_count)
    lim = u.c0 / v.c0
    sups, infs, oscs = [], [], []
    for k in range(len(chain.levels) - 1):
        t, U, V = _shell_grid(c, chain, k, lu, lv, nt)
        dev = _quotient_deviation(u, v, t, U, V)
        sups.append(lim + float(dev.max()))
        infs.append(lim + float(dev.min()))
        oscs.append(float(dev.max() - dev.min()))
    osc = np.array(oscs)
    # the first shell still carries every admixed mode at full strength
    pos = osc > 0
    pos[0] = False
    if pos.sum() >= 2:
        k = np.flatnonzero(pos)
        slope = np.polyfit(k, np.log(osc[pos]), 1)[0]
        rho = float(math.exp(slope))
    else:
        rho = 0.0
    t_deep = chain.levels[-1]
    uu, vv = chain.track_u[None], chain.track_v[None]
    deep = float(u.profile(t_deep, uu, vv)[0] / v.profile(t_deep, uu, vv)[0])
    return OscillationTrace(sups, infs, oscs, rho, predicted_decay_ratio(chain, u, v), lim, abs(deep - lim))


def oscillation_checks(trace: OscillationTrace, rel_tol: float = 0.1, tail_tol: float = 1e-6) -> dict:
    osc = np.array(trace.osc)
    monotone = bool(np.all(np.diff(osc[1:]) <= 1e-15 * max(osc.max(), 1e-300))) if len(osc) > 2 else True
    if trace.rho_predicted > 0:
        match = abs(trace.rho_hat - trace.rho_predicted) <= rel_tol * trace.rho_predicted
    else:
        match = trace.rho_hat == 0.0
    return {
        "rho_hat": trace.rho_hat,
        "rho_predicted": trace.rho_predicted,
        "contracting": bool(trace.rho_hat < 1.0),
        "monotone": monotone,
        "rate_matches": bool(match),
        "limit_error": trace.limit_error,
        "limit_ok": bool(trace.limit_error <= tail_tol),
    }


def green_domination(ge: GreenEvaluator, sol: VanishingSolution, r0s: Sequence[float],
                     r_min: float = 1e-3, nr: int = 25, link_count: int = 32, seed: int = 0) -> dict:
    """min of G(., p)/u over {r <= r0} for decreasing r0, p = (1, theta_0); tip solutions only."""
    if sol.at != TIP:
        raise ValueError("domination is checked toward the tip")
    c = ge.cone
    rng = np.random.default_rng(seed)
    lu, lv = _link_probe(c, [sol], rng, link_count)
    rs = np.geomspace(r_min, max(r0s), nr)
    R = np.repeat(rs, len(lu))
    U = np.tile(lu, (nr, 1))
    V = np.tile(lv, (nr, 1))
    pu, pv = pole(c)
    g = ge.evaluate(R, U, V, 1.0, pu[None], pv[None]).value
    ratio = g / sol(R, U, V)
    mins = [float(ratio[R <= r0 * (1 + 1e-12)].min()) for r0 in r0s]
    order = np.argsort(r0s)[::-1]
    seq = [mins[i] for i in order]
    return {
        "check": "green_domination",
        "r0": [float(r0s[i]) for i in order],
        "min_ratio": seq,
        "positive": bool(min(seq) > 0),
        "nondecreasing": bool(all(b >= a for a, b in zip(seq, seq[1:]))),
    }


# ---------------------------------------------------------------------------
# Martin kernels

@dataclass
class MartinEstimate:
    at: str
    radii: list
    grid_r: list
    kernels: np.ndarray  # [direction, n, grid point]
    base_values: np.ndarray  # K(p, p_n), should be 1
    consecutive_diff: list
    direction_diff: list
    limit_profile: list
    slope: float
    slope_expected: float

    def to_dict(self) -> dict:
        return {
            "boundary_point": self.at,
            "pole_radii": self.radii,
            "consecutive_diff": self.consecutive_diff,
            "direction_diff": self.direction_diff,
            "limit_profile": [{"r": r, "K": k} for r, k in self.limit_profile],
            "slope": self.slope,
            "slope_expected": self.slope_expected,
            "normalization_max_error": float(np.max(np.abs(self.base_values - 1.0))),
        }


def default_martin_grid(at: str) -> np.ndarray:
    return np.geomspace(2.0, 8.0, 7) if at == TIP else np.geomspace(0.125, 0.5, 7)


def martin_kernel(c: ConeSpec, op: OperatorSpec, at: str = TIP, n_max: int = 12, directions: int = 3,
                  grid_r: Sequence[float] | None = None, grid_links: int = 5, seed: int = 0,
                  tol: float = 1e-10) -> MartinEstimate:
    """K(x, p_n) = G(x, p_n)/G(p, p_n) for poles p_n = (2^{-+n}, theta_j) and base point p = (1, theta_0)."""
    _check_boundary_point(at)
    ge = GreenEvaluator(c, op, tol=tol)
    rng = np.random.default_rng(seed)
    du, dv = random_link(c, rng, directions)
    gu, gv = random_link(c, rng, grid_links)
    u0, v0 = pole(c)
    gu = np.vstack([u0[None], gu])
    gv = np.vstack([v0[None], gv])
    grid_r = np.asarray(default_martin_grid(at) if grid_r is None else grid_r, dtype=float)
    R = np.repeat(grid_r, len(gu))
    GU = np.tile(gu, (len(grid_r), 1))
    GV = np.tile(gv, (len(grid_r), 1))
    ns = np.arange(1, n_max + 1)
    radii = 2.0 ** (-ns) if at == TIP else 2.0 ** ns
    K = np.empty((directions, n_max, R.size))
    base = np.empty((directions, n_max))
    for j in range(directions):
        for i, rn in enumerate(radii):
            num = ge.evaluate(R, GU, GV, rn, du[j][None], dv[j][None]).value
            den = ge.evaluate(1.0, u0[None], v0[None], rn, du[j][None], dv[j][None]).value[0]
            K[j, i] = num / den
            base[j, i] = den / den
    consecutive = [float(np.max(np.abs(K[:, i + 1] - K[:, i]))) for i in range(n_max - 1)]
    direction = []
    for i in range(n_max):
        diffs = [np.max(np.abs(K[a, i] - K[b, i])) for a in range(directions) for b in range(a + 1, directions)]
        direction.append(float(max(diffs)) if diffs else 0.0)
    last = K[:, -1].mean(axis=0).reshape(len(grid_r), len(gu)).mean(axis=1)
    slope = float(np.polyfit(np.log(grid_r), np.log(last), 1)[0])
    roots = indicial_roots(c, op, make_mode(c, 0, 0))
    expected = float(roots.gamma_minus if at == TIP else roots.gamma_plus)
    return MartinEstimate(at, [float(r) for r in radii], [float(r) for r in grid_r], K, base,
                          consecutive, direction, [(float(r), float(k)) for r, k in zip(grid_r, last)],
                          slope, expected)


def martin_basis(c: ConeSpec, op: OperatorSpec, r):
    """Minimal positive solutions normalized at r = 1: columns k(., tip), k(., infinity)."""
    roots = indicial_roots(c, op, make_mode(c, 0, 0))
    if not roots.positive:
        raise NotCoercive("mode 0 is not subcritical")
    r = np.asarray(r, dtype=float)
    return np.stack([r ** float(roots.gamma_minus), r ** float(roots.gamma_plus)], axis=-1)


def martin_representation_fit(c: ConeSpec, op: OperatorSpec, u_values, r, residual_tol: float = 1e-8,
                              coef_tol: float = 1e-12) -> dict:
    """Fit u = mu_0 k(., tip) + mu_inf k(., infinity) on a radial grid, relative least squares."""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u_values, dtype=float)
    B = martin_basis(c, op, r)
    w = 1.0 / np.abs(u)
    coef, *_ = np.linalg.lstsq(B * w[:, None], u * w, rcond=None)
    resid = float(np.max(np.abs(B @ coef - u) * w))
    scale = float(np.max(np.abs(coef))) if coef.size else 0.0
    representable = resid < residual_tol
    if representable and np.any(coef < -coef_tol * max(scale, 1.0)):
        raise NegativeCoefficient(f"fit needs negative mass {coef.tolist()}")
    return {"mu_0": float(coef[0]), "mu_inf": float(coef[1]), "residual": resid, "representable": bool(representable)}


def atomic_potential(c: ConeSpec, op: OperatorSpec, mu: tuple[float, float], r):
    B = martin_basis(c, op, r)
    return mu[0] * B[..., 0] + mu[1] * B[..., 1]


def fatou_atomic(c: ConeSpec, op: OperatorSpec, mu: tuple[float, float], nu: tuple[float, float],
                 omega: float, r_tip: float = 1e-6, r_inf: float = 1e6, tol: float = 1e-5) -> dict:
    """Ratios u_mu/u_nu along the pencil axis toward the tip and toward infinity."""
    if omega >= 1.0 / c.a:
        raise EmptyPencil(f"omega={omega} >= 1/a leaves the tip pencil empty")
    out = {"check": "fatou_atomic", "omega": omega}
    rs_tip = np.geomspace(1e-1, r_tip, 6)
    rs_inf = np.geomspace(1e1, r_inf, 6)
    for name, rs, idx in (("tip", rs_tip, 0), ("infinity", rs_inf, 1)):
        if nu[idx] <= 0:
            out[name] = None
            continue
        ratio = atomic_potential(c, op, mu, rs) / atomic_potential(c, op, nu, rs)
        target = mu[idx] / nu[idx]
        out[name] = {
            "r": [float(x) for x in rs],
            "ratio": [float(x) for x in ratio],
            "target": target,
            "error": float(abs(ratio[-1] - target)),
            "passed": bool(abs(ratio[-1] - target) <= tol),
        }
    out["passed"] = all(out[k]["passed"] for k in ("tip", "infinity") if out[k] is not None)
    return out


def pencil_tube_check(c: ConeSpec, omega: float, eta: float, count: int = 1000, seed: int = 0,
                      tol: float = 1e-6) -> dict:
    """Largest unfolded distance from sampled pencil points near the tip to the axis ray through theta_0."""
    if omega >= 1.0 / c.a:
        raise EmptyPencil(f"omega={omega} >= 1/a leaves the tip pencil empty")
    if not eta > 0:
        raise ValueError("eta must be positive")
    rng = np.random.default_rng(seed)
    u, v = random_link(c, rng, count)
    s = rng.uniform(0.0, 1.0, count)
    r = eta * np.exp(-12.0 * s)
    # delta / d(., tip) = 1/a > omega, so every sample lies in the pencil
    u0, v0 = pole(c)
    t = np.log(r)
    zeta = unfolded_distance_arrays(c, t, u, v, t, u0[None], v0[None])
    zeta_hat = float(np.max(zeta))
    bound = c.a * c.link_diameter
    return {
        "check": "pencil_tube",
        "omega": omega,
        "eta": eta,
        "zeta_hat": zeta_hat,
        "bound": bound,
        "passed": bool(zeta_hat <= bound + tol),
    }


def dirichlet_hypotheses(c: ConeSpec, op: OperatorSpec) -> dict:
    """Status of the hypotheses under which the Dirichlet problem at the boundary is solvable."""
    roots = indicial_roots(c, op, make_mode(c, 0, 0))
    constants = op.c_A == 0 and op.lam == 0
    if roots.positive:
        gp, gm = float(roots.gamma_plus), float(roots.gamma_minus)
        tip, inf = gp > 0, gm < 0
    else:
        gp = gm = None
        tip = inf = False
    return {
        "check": "dirichlet_hypotheses",
        "operator": op.name,
        "lambda": op.lam,
        "constants_harmonic": bool(constants),
        "green_to_zero_at_tip": bool(tip),
        "green_to_zero_at_infinity": bool(inf),
        "solvable": bool(constants and tip and inf),
        "gamma_plus_0": gp,
        "gamma_minus_0": gm,
    }
