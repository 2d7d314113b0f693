"""Weighted Sobolev norms, Hardy quotients and the criticality trichotomy.

Everything radial is done in the unfolding coordinate t = log r.  Writing a
mode-k function as u = r^{-(n-2)/2} v(t) phi_k turns <A>^{-2} L into the
constant-coefficient operator (-v'' + V_k v)/a^2 with
V_k = ((n-2)/2)^2 + mu_k - c_A kappa, so Dirichlet problems on annuli
e^{-T/2} <= r <= e^{T/2} are regular Sturm-Liouville problems on [-T/2, T/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from conelab.cone_geometry import ConeSpec
from conelab.link_spectrum import LinkMode, enumerate_modes, make_mode
from conelab.radial_calculus import (
    CriticalityError,
    OperatorSpec,
    adaptedness_certificate,
    indicial_roots,
    lambda_star,
    mode_green,
)


class MonotonicityViolation(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


class DivergentNorm(ValueError):
    pass


@dataclass(frozen=True)
class LogGrid:
    T: float
    N: int

    def __post_init__(self):
        if self.N < 16:
            raise ValueError(f"LogGrid needs N >= 16, got {self.N}")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def h(self) -> float:
        return self.T / (self.N - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.T / 2.0, self.T / 2.0, self.N)


def unfolded_potential(c: ConeSpec, c_A: float, mu: float) -> float:
    return ((c.n - 2) / 2.0) ** 2 + mu - c_A * c.kappa


def dirichlet_closed_form(c: ConeSpec, op: OperatorSpec, T: float, mode: LinkMode | None = None) -> float:
    mu = 0.0 if mode is None else mode.mu
    return (unfolded_potential(c, op.c_A, mu) + (math.pi / T) ** 2) / c.a ** 2


def dirichlet_discrete_exact(c: ConeSpec, op: OperatorSpec, grid: LogGrid, mode: LinkMode | None = None) -> float:
    """Lowest eigenvalue of the three-point stencil matrix itself."""
    mu = 0.0 if mode is None else mode.mu
    h = grid.h
    return (unfolded_potential(c, op.c_A, mu) + 4.0 / h ** 2 * math.sin(math.pi * h / (2.0 * grid.T)) ** 2) / c.a ** 2


@dataclass(frozen=True)
class EigenPair:
    value: float
    t: np.ndarray
    vector: np.ndarray
    iterations: int


def dirichlet_eigen(c: ConeSpec, op: OperatorSpec, grid: LogGrid, mode: LinkMode | None = None,
                    max_iter: int = 500, rtol: float = 1e-12, vtol: float = 1e-12) -> EigenPair:
    """First Dirichlet eigenpair of <A>^{-2} L (without the lambda shift) on an annulus.

    The eigenvalue of <A>^{-2} L_lambda is ``value - op.lam``.  Shifted inverse
    iteration with shift V/a^2, which lies strictly below the spectrum, started
    from the all-ones vector.
    """
    mu = 0.0 if mode is None else mode.mu
    V = unfolded_potential(c, op.c_A, mu)
    a2 = c.a ** 2
    h = grid.h
    m = grid.N - 2
    diag = (2.0 / h ** 2 + V) / a2
    off = -1.0 / (h ** 2 * a2)
    sigma = V / a2
    ab = np.zeros((3, m))
    ab[0, 1:] = off
    ab[1, :] = diag - sigma
    ab[2, :-1] = off
    norm_A = (4.0 / h ** 2 + abs(V)) / a2

    def apply(x):
        y = diag * x
        y[1:] += off * x[:-1]
        y[:-1] += off * x[1:]
        return y

    x = np.ones(m) / math.sqrt(m)
    lam = float(x @ apply(x))
    for it in range(1, max_iter + 1):
        y = solve_banded((1, 1), ab, x)
        y = y / np.linalg.norm(y)
        step = np.linalg.norm(y - x)
        x = y
        Ax = apply(x)
        lam = float(x @ Ax)
        # the residual of A x has a rounding floor near eps*|A|, so it is measured
        # against |A|; the vector must also have stopped moving
        if np.linalg.norm(Ax - lam * x) <= rtol * norm_A and step <= vtol:
            break
    else:
        raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps")
    if x[m // 2] < 0:
        x = -x
    t = grid.nodes
    v = np.concatenate([[0.0], x, [0.0]])
    v = v / _lagrange_at(t, v, 0.0)
    return EigenPair(lam, t, v, it)


def _lagrange_at(t: np.ndarray, v: np.ndarray, x: float) -> float:
    """Cubic interpolation through the four nodes nearest x."""
    j = int(np.clip(np.searchsorted(t, x) - 2, 0, len(t) - 4))
    ts, vs = t[j:j + 4], v[j:j + 4]
    total = 0.0
    for i in range(4):
        w = 1.0
        for k in range(4):
            if k != i:
                w *= (x - ts[k]) / (ts[i] - ts[k])
        total += w * vs[i]
    return total


@dataclass
class CriticalityReport:
    lambda_star: float
    regime: str
    dirichlet_sequence: list
    ground_state_profile: list
    certificate: dict
    lambda_query: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "lambda_query": self.lambda_query,
            "regime": self.regime,
            "sequence": [{"T": T, "lambda": lam} for T, lam in self.dirichlet_sequence],
            "ground_state_profile": [{"r": r, "value": v} for r, v in self.ground_state_profile],
            "witness": self.certificate,
        }


def classify(lam: float, lam_star: float, band: float = 1e-9) -> str:
    if abs(lam - lam_star) <= band * max(1.0, abs(lam_star)):
        return "critical"
    return "subcritical" if lam < lam_star else "supercritical"


def lowest_nonzero_mode(c: ConeSpec) -> LinkMode:
    mu1 = min(c.p + c.q, (c.p + c.q) / c.p * c.p, (c.p + c.q) / c.q * c.q)
    return [m for m in enumerate_modes(c, mu1 * 1.0001) if m.mu > 0][0]


def principal_eigenvalue(c: ConeSpec, op: OperatorSpec, schedule: Sequence[float], N: int = 4096,
                         band: float = 1e-9) -> CriticalityReport:
    """Dirichlet eigenvalues of <A>^{-2} L over exhausting annuli and the limit lambda*.

    The report classifies ``op.lam`` against lambda* of the unshifted operator.
    """
    schedule = [float(T) for T in schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    exact = lambda_star(c, op.c_A)
    base = OperatorSpec(op.c_A, 0.0)
    seq = []
    mode1 = lowest_nonzero_mode(c)
    for T in schedule:
        grid = LogGrid(T, N)
        ep0 = dirichlet_eigen(c, base, grid)
        ep1 = dirichlet_eigen(c, base, grid, mode1)
        if not ep1.value > ep0.value:
            raise MonotonicityViolation(f"mode {mode1} undercuts mode 0 at T={T}")
        seq.append((T, ep0.value))
    lams = [lam for _, lam in seq]
    for (T0, l0), (T1, l1) in zip(seq, seq[1:]):
        if not l1 < l0:
            raise MonotonicityViolation(f"Dirichlet eigenvalue did not decrease from T={T0} to T={T1}")
    if len(seq) >= 2:
        (Ta, la), (Tb, lb) = seq[-2], seq[-1]
        extrap = (Tb ** 2 * lb - Ta ** 2 * la) / (Tb ** 2 - Ta ** 2)
    else:
        extrap = lams[-1]
    gaps = [{"T": T, "gap": lam - exact, "predicted_gap": (math.pi / T) ** 2 / c.a ** 2} for T, lam in seq]
    cert = {
        "kind": "indicial",
        "lambda_star_exact": exact,
        "lambda_star_extrapolated": extrap,
        "gaps": gaps,
        "mode0_minimal": True,
        "comparison_mode": [mode1.k1, mode1.k2],
    }
    return CriticalityReport(exact, classify(op.lam, exact, band), seq, [], cert, op.lam)


def ground_state_trace(c: ConeSpec, c_A: float, schedule: Sequence[float], N: int = 4096,
                       window: tuple[float, float] = (0.5, 2.0)) -> list[dict]:
    """Sup distance on an r-window between normalized Dirichlet eigenfunctions and r^{-(n-2)/2}."""
    op = OperatorSpec(c_A, 0.0)
    gamma = -(c.n - 2) / 2.0
    lo, hi = math.log(window[0]), math.log(window[1])
    out = []
    for T in schedule:
        ep = dirichlet_eigen(c, op, LogGrid(T, N))
        sel = (ep.t >= lo - 1e-12) & (ep.t <= hi + 1e-12)
        r = np.exp(ep.t[sel])
        u = r ** gamma * ep.vector[sel]
        out.append({"T": float(T), "sup_error": float(np.max(np.abs(u - r ** gamma))),
                    "sup_rel_error": float(np.max(np.abs(ep.vector[sel] - 1.0)))})
    return out


def supercritical_witness_T(c: ConeSpec, c_A: float, lam: float) -> float:
    """Annulus width T with (V_0 + (pi/T)^2)/a^2 = lam."""
    gap = lam * c.a ** 2 - unfolded_potential(c, c_A, 0.0)
    if gap <= 0:
        raise ValueError("lambda is not supercritical")
    return math.pi / math.sqrt(gap)


def trichotomy(c: ConeSpec, op0: OperatorSpec, lambda_query: float,
               schedule: Sequence[float] = (2.0, 4.0, 8.0, 16.0, 32.0),
               ground_schedule: Sequence[float] = (4.0, 8.0, 16.0, 32.0, 64.0, 128.0),
               N: int = 4096, band: float = 1e-9) -> CriticalityReport:
    rep = principal_eigenvalue(c, op0.shifted(lambda_query), schedule, N=N, band=band)
    ls = rep.lambda_star
    gamma = -(c.n - 2) / 2.0
    if rep.regime == "subcritical":
        op = op0.shifted(lambda_query)
        roots = indicial_roots(c, op, make_mode(c, 0, 0))
        cert = {
            "kind": "green_function",
            "adaptedness": adaptedness_certificate(c, op).to_dict(),
            "mode0_roots": [float(roots.gamma_plus), float(roots.gamma_minus)],
            "mode0_green_1_2": float(mode_green(roots, 1.0, 2.0)),
        }
    elif rep.regime == "critical":
        op = op0.shifted(ls)
        roots = indicial_roots(c, op, make_mode(c, 0, 0))
        try:
            mode_green(roots, 1.0, 2.0)
            green_fails = False
        except CriticalityError:
            green_fails = True
        trace = ground_state_trace(c, op0.c_A, ground_schedule, N=N)
        cert = {
            "kind": "ground_state",
            "ground_state_exponent": gamma,
            "eigenfunction_trace": trace,
            "green_function_fails": green_fails,
        }
        rs = np.exp(np.linspace(math.log(0.5), math.log(2.0), 9))
        rep.ground_state_profile = [(float(r), float(r ** gamma)) for r in rs]
    else:
        T_w = supercritical_witness_T(c, op0.c_A, lambda_query)
        ep = dirichlet_eigen(c, op0.shifted(0.0), LogGrid(T_w, N))
        cert = {
            "kind": "dirichlet_drop",
            "witness_T": T_w,
            "witness_eigenvalue": ep.value,
            "eigenvalue_below_query": bool(ep.value <= lambda_query),
        }
    rep.certificate = {**rep.certificate, **cert}
    rep.lambda_query = lambda_query
    return rep


# ---------------------------------------------------------------------------
# quadrature and weighted norms

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _composite(f: Callable, a: float, b: float, cells: int) -> float:
    edges = np.linspace(a, b, cells + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    vals = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ConvergenceError("non-finite integrand samples")
    return float(vals @ w)


def integrate(f: Callable, a: float, b: float, rtol: float = 1e-10,
              start_cells: int = 8, max_cells: int = 1 << 15) -> float:
    """Composite 8-point Gauss-Legendre with cell doubling until the relative change < rtol."""
    cells = start_cells
    prev = _composite(f, a, b, cells)
    while cells < max_cells:
        cells *= 2
        cur = _composite(f, a, b, cells)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise ConvergenceError(f"quadrature did not converge on [{a}, {b}]")


@dataclass(frozen=True)
class ModeComponent:
    """coeff * profile(r) * Y(theta) with Y an L^2-normalized eigenfunction of link eigenvalue mu.

    ``profile(r)`` returns (value, d/dr value); ``support`` bounds log r.
    """

    mu: float
    coeff: float
    profile: Callable
    support: tuple[float, float]
    knots: tuple = ()


@dataclass(frozen=True)
class ModeFunction:
    components: tuple

    def scaled_profile(self, factor: Callable, knots: Sequence[float] = ()) -> "ModeFunction":
        """Multiply by a radial factor; ``factor(r)`` returns (value, derivative).

        ``knots`` are log r positions where the factor loses smoothness.
        """
        comps = []
        for comp in self.components:
            def prof(r, _p=comp.profile):
                f, df = _p(r)
                g, dg = factor(r)
                return f * g, df * g + f * dg
            comps.append(ModeComponent(comp.mu, comp.coeff, prof, comp.support,
                                       tuple(sorted(set(comp.knots) | set(knots)))))
        return ModeFunction(tuple(comps))


@dataclass(frozen=True)
class SobolevForm:
    """Per-mode radial quadratic forms on the cone for <A> = a/r."""

    cone: ConeSpec
    op: OperatorSpec = OperatorSpec()
    rtol: float = 1e-10

    def _integral(self, comp: ModeComponent, kind: str, support=None) -> float:
        c = self.cone
        lo, hi = support if support is not None else comp.support

        def integrand(t):
            r = np.exp(t)
            f, df = comp.profile(r)
            vol = r ** c.n  # r^{n-1} dr = r^n dt
            if kind == "weighted_l2":
                return c.a ** 2 * f ** 2 / r ** 2 * vol
            if kind == "gradient":
                return (df ** 2 + comp.mu * f ** 2 / r ** 2) * vol
            if kind == "energy":
                pot = comp.mu - self.op.c_A * c.kappa - self.op.lam * c.a ** 2
                return (df ** 2 + pot * f ** 2 / r ** 2) * vol
            raise ValueError(kind)
        if hi <= lo:
            return 0.0
        edges = [lo] + [k for k in comp.knots if lo < k < hi] + [hi]
        total = sum(integrate(integrand, x0, x1, self.rtol) for x0, x1 in zip(edges, edges[1:]))
        return comp.coeff ** 2 * total

    def l2_norm(self, f: ModeFunction) -> float:
        return math.sqrt(sum(self._integral(comp, "weighted_l2") for comp in f.components))

    def h_norm(self, f: ModeFunction) -> float:
        total = sum(self._integral(comp, "weighted_l2") + self._integral(comp, "gradient") for comp in f.components)
        return math.sqrt(total)

    def energy(self, f: ModeFunction) -> float:
        """Quadratic form of L_lambda, i.e. the integral of f L_lambda f."""
        return sum(self._integral(comp, "energy") for comp in f.components)

    def rayleigh_quotient(self, f: ModeFunction) -> float:
        return self.energy(f) / self.l2_norm(f) ** 2

    def check_finite_norm(self, f: ModeFunction, growth: float = 0.1) -> None:
        """Reject profiles whose H-norm integral keeps growing as the support widens.

        Compares the contributions of [lo-2s, lo-s] and [lo-s, lo] (and the mirror
        at the upper end) for s = 10, 20, 40; a convergent integral has
        geometrically shrinking pieces.
        """
        for comp in f.components:
            lo, hi = comp.support
            for end in ("lo", "hi"):
                edge = lo if end == "lo" else hi
                if not math.isinf(edge):
                    continue
                pieces = []
                for s in (10.0, 20.0, 40.0):
                    if end == "lo":
                        seg = (-2 * s, -s)
                    else:
                        seg = (s, 2 * s)
                    pieces.append(self._integral(comp, "weighted_l2", seg) + self._integral(comp, "gradient", seg))
                if pieces[2] > growth * max(pieces[0], 1e-300) and pieces[2] > 1e-300:
                    raise DivergentNorm(
                        f"H^(1,2) norm diverges toward {'the tip' if end == 'lo' else 'infinity'} "
                        f"(pieces {pieces[0]:.3e}, {pieces[1]:.3e}, {pieces[2]:.3e})")


def effective_support(f: ModeFunction, cap: float = 80.0) -> ModeFunction:
    comps = tuple(ModeComponent(cp.mu, cp.coeff, cp.profile,
                                (max(cp.support[0], -cap), min(cp.support[1], cap)), cp.knots)
                  for cp in f.components)
    return ModeFunction(comps)


# ---------------------------------------------------------------------------
# Hardy inequality

def bump(s):
    """exp(-1/(1-s^2)) on (-1, 1) and its derivative."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    denom = np.where(inside, 1.0 - s * s, 1.0)
    val = np.where(inside, np.exp(-1.0 / denom), 0.0)
    dval = np.where(inside, val * (-2.0 * s / denom ** 2), 0.0)
    return val, dval


def log_bump_component(c: ConeSpec, mu: float, coeff: float, center: float, half_width: float) -> ModeComponent:
    """r^{-(n-2)/2} bump((log r - center)/half_width) in mode mu."""
    g = -(c.n - 2) / 2.0

    def profile(r):
        t = np.log(r)
        b, db = bump((t - center) / half_width)
        f = r ** g * b
        df = r ** (g - 1.0) * (g * b + db / half_width)
        return f, df
    return ModeComponent(mu, coeff, profile, (center - half_width, center + half_width))


def random_test_function(c: ConeSpec, rng: np.random.Generator, mu_cap: float = 20.0,
                         max_modes: int = 3) -> ModeFunction:
    modes = enumerate_modes(c, mu_cap)
    mus = sorted({m.mu for m in modes})
    k = int(rng.integers(1, max_modes + 1))
    picks = rng.choice(len(mus), size=min(k, len(mus)), replace=False)
    comps = []
    for i in sorted(picks):
        comps.append(log_bump_component(c, mus[i], float(rng.standard_normal()) or 1.0,
                                        float(rng.uniform(-2.0, 2.0)), float(rng.uniform(0.5, 6.0))))
    return ModeFunction(tuple(comps))


def hardy_check(c: ConeSpec, op: OperatorSpec, count: int = 100, seed: int = 0,
                widening: Sequence[float] = (4.0, 8.0, 16.0, 32.0), tol: float = 1e-9) -> dict:
    """Rayleigh quotients of L_lambda against <A>^2 for seeded compactly supported test functions."""
    form = SobolevForm(c, op)
    floor = lambda_star(c, op.c_A) - op.lam
    rng = np.random.default_rng(seed)
    quotients = [form.rayleigh_quotient(random_test_function(c, rng)) for _ in range(count)]
    widen = [form.rayleigh_quotient(ModeFunction((log_bump_component(c, 0.0, 1.0, 0.0, T0),)))
             for T0 in widening]
    min_q = min(quotients) if quotients else math.inf
    i = int(np.argmin(quotients)) if quotients else -1
    report = {
        "check": "hardy_inequality",
        "lambda_star": floor,
        "min_quotient": min_q,
        "argmin_sample": i,
        "all_above_floor": bool(min_q >= floor - tol),
        "widening": [{"T0": T0, "quotient": q} for T0, q in zip(widening, widen)],
        "widening_decreasing": bool(all(b < a for a, b in zip(widen, widen[1:]))),
        "infimum": min(widen + quotients),
        "final_gap_rel": (widen[-1] - floor) / abs(floor) if floor != 0 else widen[-1],
    }
    return report


# ---------------------------------------------------------------------------
# cutoffs

PSI_SUP_DERIV = 30.0 / 16.0


def psi(s):
    """Quintic smoothstep cutoff: 1 for s <= 0, 0 for s >= 1; returns (value, derivative)."""
    s = np.asarray(s, dtype=float)
    x = np.clip(s, 0.0, 1.0)
    val = 1.0 - x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)
    d = np.where((s > 0) & (s < 1), -30.0 * x * x * (1.0 - x) ** 2, 0.0)
    return val, d


def near_cutoff(c: ConeSpec, eta: float):
    """psi(delta/eta - 1) with delta = r/a, as a radial factor (value, d/dr)."""
    def factor(r):
        v, d = psi(np.asarray(r) / (c.a * eta) - 1.0)
        return v, d / (c.a * eta)
    return factor


def far_cutoff(R: float):
    """psi(|x|/R - 1) as a radial factor."""
    def factor(r):
        v, d = psi(np.asarray(r) / R - 1.0)
        return v, d / R
    return factor


def cutoff_gradient_check(c: ConeSpec, etas: Sequence[float], Rs: Sequence[float],
                          count: int = 1000, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    c_psi = 2.0 * PSI_SUP_DERIV / c.a  # sup|psi'| * L_<A> * (1/eta < 2<A> on the transition band)
    worst_near, worst_far = 0.0, 0.0
    support_ok = True
    for eta in etas:
        r = c.a * eta * np.exp(rng.uniform(math.log(0.25), math.log(4.0), count))
        val, grad = near_cutoff(c, eta)(r)
        delta = r / c.a
        band = (delta > eta) & (delta < 2 * eta)
        worst_near = max(worst_near, float(np.max(np.abs(grad[band]) / (c.a / r[band]))))
        support_ok &= bool(np.all(grad[~band] == 0.0))
        support_ok &= bool(np.all(val[delta <= eta] == 1.0) and np.all(val[delta >= 2 * eta] == 0.0))
    for R in Rs:
        r = R * np.exp(rng.uniform(math.log(0.25), math.log(4.0), count))
        _, grad = far_cutoff(R)(r)
        band = (r > R) & (r < 2 * R)
        worst_far = max(worst_far, float(np.max(np.abs(grad[band]) * R)))
        support_ok &= bool(np.all(grad[~band] == 0.0))
    return {
        "c_psi": c_psi,
        "max_near_ratio": worst_near,
        "c_psi_far": PSI_SUP_DERIV,
        "max_far_ratio": worst_far,
        "support_ok": support_ok,
        "passed": bool(worst_near <= c_psi * (1 + 1e-12) and worst_far <= PSI_SUP_DERIV * (1 + 1e-12) and support_ok),
    }


def power_taper_function(c: ConeSpec, beta: float = -2.0, far_power: float = -1.0, mu: float = 0.0) -> ModeFunction:
    """Profile r^beta (1 + r)^far_power on the whole cone."""
    def profile(r):
        r = np.asarray(r, dtype=float)
        f = r ** beta * (1.0 + r) ** far_power
        df = f * (beta / r + far_power / (1.0 + r))
        return f, df
    return ModeFunction((ModeComponent(mu, 1.0, profile, (-math.inf, math.inf)),))


def cutoff_convergence(c: ConeSpec, f: ModeFunction, etas: Sequence[float], Rs: Sequence[float],
                       seed: int = 0) -> dict:
    """H-norms of psi[eta] f (eta -> 0) and (1 - psi_R) f (R -> infinity)."""
    form = SobolevForm(c)
    form.check_finite_norm(f)
    base = effective_support(f)
    full = form.h_norm(base)
    near = []
    for eta in etas:
        hi = math.log(2 * c.a * eta)
        g = base.scaled_profile(near_cutoff(c, eta), (math.log(c.a * eta), hi))
        g = ModeFunction(tuple(ModeComponent(cp.mu, cp.coeff, cp.profile, (cp.support[0], min(cp.support[1], hi)),
                                             cp.knots) for cp in g.components))
        near.append(form.h_norm(g))
    far = []
    for R in Rs:
        def one_minus(r, _R=R):
            v, d = far_cutoff(_R)(r)
            return 1.0 - v, -d
        lo = math.log(R)
        g = base.scaled_profile(one_minus, (lo, math.log(2 * R)))
        g = ModeFunction(tuple(ModeComponent(cp.mu, cp.coeff, cp.profile, (max(cp.support[0], lo), cp.support[1]),
                                             cp.knots) for cp in g.components))
        far.append(form.h_norm(g))
    grad = cutoff_gradient_check(c, etas, Rs, seed=seed)
    return {
        "full_norm": full,
        "near": [{"eta": e, "norm": v} for e, v in zip(etas, near)],
        "far": [{"R": R, "norm": v} for R, v in zip(Rs, far)],
        "near_decreasing": bool(all(b < a for a, b in zip(near, near[1:]))),
        "far_decreasing": bool(all(b < a for a, b in zip(far, far[1:]))),
        "gradient": grad,
    }
