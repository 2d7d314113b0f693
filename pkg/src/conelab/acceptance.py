"""The acceptance suite: one function per criterion, each returning a pass/fail row.

``tol_scale`` multiplies every tolerance; values below 1 tighten the suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from conelab import boundary_lab as bl
from conelab import spectral_lab as sl
from conelab.cone_geometry import (
    TIP,
    ConePoint,
    make_cone,
    pole,
    random_link,
    sample_pairs,
    s_distance_lower_bound_check,
    uniformity_certificate,
)
from conelab.experiments import _green_pairs
from conelab.link_spectrum import make_mode
from conelab.radial_calculus import (
    CriticalityError,
    GreenEvaluator,
    OperatorSpec,
    harmonic_residual,
    indicial_roots,
    lambda_star,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def check(self, name: str, ok) -> None:
        self.checks[name] = bool(ok)

    def to_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "passed": self.passed,
                "checks": self.checks, "metrics": self.metrics}


SIMONS = (3, 3)


def criterion_1(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(1, "indicial consistency")
    c = make_cone(*SIMONS)
    J = OperatorSpec.jacobi()
    r0 = indicial_roots(c, J, make_mode(c, 0, 0))
    r1 = indicial_roots(c, J, make_mode(c, 1, 0))
    tol = 1e-12 * tol_scale
    res.metrics.update(mode0=[float(r0.gamma_plus), float(r0.gamma_minus)], mode10_plus=float(r1.gamma_plus))
    res.check("mode 0 roots (-2, -3)", abs(r0.gamma_plus + 2) <= tol and abs(r0.gamma_minus + 3) <= tol)
    res.check("mode (1,0) gamma+ = 0", abs(r1.gamma_plus) <= tol)
    return res


def criterion_2(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(2, "trichotomy reproduction")
    c = make_cone(*SIMONS)
    J = OperatorSpec.jacobi()
    ls = lambda_star(c, 1.0)
    res.check("lambda* = 1/24", abs(ls - 1.0 / 24.0) <= 1e-15 * tol_scale)
    schedule = (2.0, 4.0, 8.0, 16.0, 32.0)
    rep = sl.principal_eigenvalue(c, J, schedule, N=4096)
    rel = [abs(lam - (1 / 24 + (math.pi / T) ** 2 / 6)) / (1 / 24 + (math.pi / T) ** 2 / 6)
           for T, lam in rep.dirichlet_sequence]
    res.metrics["max_rel_error"] = max(rel)
    res.check("closed form within 1e-5", max(rel) <= 1e-5 * tol_scale)
    lams = [lam for _, lam in rep.dirichlet_sequence]
    res.check("strictly decreasing", all(b < a for a, b in zip(lams, lams[1:])))
    # h halves exactly when N - 1 doubles
    errs = [abs(sl.dirichlet_eigen(c, J, sl.LogGrid(2.0, n)).value - (1 + math.pi ** 2) / 24) for n in (1024, 2047, 4093)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    res.metrics["h_ratios"] = ratios
    res.check("second-order convergence", all(abs(q / 4.0 - 1.0) <= 0.5 for q in ratios))
    crit = sl.trichotomy(c, J, 1.0 / 24.0)
    trace = crit.certificate["eigenfunction_trace"]
    sup = [t["sup_error"] for t in trace]
    res.metrics["ground_state_sup_error"] = sup
    res.check("critical regime", crit.regime == "critical" and crit.certificate["green_function_fails"])
    res.check("ground-state profiles converge", all(b < a for a, b in zip(sup, sup[1:])) and sup[-1] < 1e-3 * tol_scale)
    sup_rep = sl.trichotomy(c, J, 1.0 / 12.0)
    T_w = sup_rep.certificate["witness_T"]
    res.metrics["witness_T"] = T_w
    res.check("supercritical witness T = 2 pi", sup_rep.regime == "supercritical"
              and abs(T_w - 2 * math.pi) <= 1e-9 * tol_scale and sup_rep.certificate["eigenvalue_below_query"])
    return res


def criterion_3(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(3, "Hardy sharpness")
    c = make_cone(*SIMONS)
    rep = sl.hardy_check(c, OperatorSpec.jacobi(), count=100, seed=seed, tol=1e-9 * tol_scale)
    res.metrics.update(min_quotient=rep["min_quotient"], final_gap_rel=rep["final_gap_rel"])
    res.check("all quotients >= lambda* - 1e-9", rep["all_above_floor"])
    res.check("widening infimum within 5%", rep["widening_decreasing"] and rep["final_gap_rel"] <= 0.05 * tol_scale)
    return res


def criterion_4(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(4, "Green's function contracts")
    c = make_cone(*SIMONS)
    ge = GreenEvaluator(c, OperatorSpec.laplace(), tol=1e-10)
    rng = np.random.default_rng(seed)
    rx, ux, vx, ry, uy, vy = _green_pairs(c, rng, 20)
    a = ge.evaluate(rx, ux, vx, ry, uy, vy).value
    b = ge.evaluate(ry, uy, vy, rx, ux, vx).value
    res.check("symmetry exact on 20 pairs", np.array_equal(a, b))
    x = ConePoint(1.0, *pole(c))
    u1, v1 = random_link(c, rng)
    y = ConePoint(3.0, u1, v1)
    g = ge.green(x, y)
    resid = [abs(harmonic_residual(ge, x, y, h)) for h in (2e-3, 1e-3, 5e-4)]
    ratios = [resid[0] / resid[1], resid[1] / resid[2]]
    res.metrics.update(relative_residual=resid[1] / g, richardson=ratios)
    res.check("residual < 1e-4 relative", resid[1] <= 1e-4 * tol_scale * g)
    res.check("order-2 Richardson", all(abs(q / 4.0 - 1.0) <= 0.25 for q in ratios))
    y4 = ConePoint(4.0, u1, v1)
    val, tail, mu_cut = ge.green_with_bound(x, y4)
    val2 = ge.fixed(2 * mu_cut + 1).green(x, y4)
    res.metrics.update(truncation_diff=abs(val - val2), tail_bound=tail)
    res.check("two-level truncation within tail bound", abs(val - val2) <= tail * tol_scale + 1e-15 * abs(val))
    return res


def criterion_5(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(5, "Martin uniqueness")
    c = make_cone(*SIMONS)
    L = OperatorSpec.laplace()
    tip = bl.martin_kernel(c, L, TIP, n_max=12, directions=3, seed=seed)
    inf = bl.martin_kernel(c, L, bl.INFINITY, n_max=12, directions=3, seed=seed)
    res.metrics.update(direction_diff=tip.direction_diff[-1], slope_tip=tip.slope, slope_infinity=inf.slope)
    res.check("directions agree within 1e-4", tip.direction_diff[-1] <= 1e-4 * tol_scale)
    res.check("tip slope -5 within 1e-3", abs(tip.slope + 5.0) <= 1e-3 * tol_scale)
    res.check("infinity slope 0 within 1e-3", abs(inf.slope) <= 1e-3 * tol_scale)
    res.check("normalization K(p, p_n) = 1", np.all(tip.base_values == 1.0) and np.all(inf.base_values == 1.0))
    return res


def criterion_6(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(6, "representation and Fatou")
    c = make_cone(*SIMONS)
    L = OperatorSpec.laplace()
    r = np.geomspace(0.25, 4.0, 33)
    fit = bl.martin_representation_fit(c, L, 2.0 * r ** -5.0 + 3.0, r)
    res.metrics["fit"] = fit
    res.check("fit residual < 1e-8, nonnegative", fit["residual"] < 1e-8 * tol_scale and fit["mu_0"] >= 0
              and fit["mu_inf"] >= 0)
    fat = bl.fatou_atomic(c, L, (1.0, 1.0), (2.0, 1.0), 1.0 / (2.0 * c.a), tol=1e-5 * tol_scale)
    res.metrics.update(fatou_tip_error=fat["tip"]["error"], fatou_infinity_error=fat["infinity"]["error"])
    res.check("atomic Fatou limits", fat["passed"])
    return res


def criterion_7(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(7, "BHP and continuous extension")
    c = make_cone(*SIMONS)
    L = OperatorSpec.laplace()
    chain = bl.build_phi_chain(c, TIP, 12, 5.0 * c.a, seed=seed)
    rng = np.random.default_rng(seed)
    pairs = [(bl.sample_vanishing_solution(c, L, TIP, rng), bl.sample_vanishing_solution(c, L, TIP, rng))
             for _ in range(100)]
    rep = bl.bhp_verify(c, L, chain, seed=seed, pairs=pairs, tol=1e-6 * tol_scale)
    res.metrics.update(C_hat=rep["C_hat"], levels=len(chain.levels))
    res.check("C_hat finite", rep["finite"])
    res.check("level-stable", rep["level_stable"])
    worst_rate, worst_limit, all_ok = 0.0, 0.0, True
    for i, (u, v) in enumerate(pairs):
        tr = bl.oscillation_decay(c, L, chain, u, v, seed=seed + i)
        chk = bl.oscillation_checks(tr, rel_tol=0.1 * tol_scale, tail_tol=1e-6 * tol_scale)
        worst_rate = max(worst_rate, abs(tr.rho_hat / tr.rho_predicted - 1.0))
        worst_limit = max(worst_limit, tr.limit_error)
        all_ok &= chk["contracting"] and chk["monotone"] and chk["rate_matches"] and chk["limit_ok"]
    res.metrics.update(worst_rate_deviation=worst_rate, worst_limit_error=worst_limit)
    res.check("geometric decay at the mode-gap rate, limits match", all_ok)
    return res


def criterion_8(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(8, "geometry suite")
    c = make_cone(*SIMONS)
    rng = np.random.default_rng(seed)
    pairs = sample_pairs(c, rng, 1000)
    try:
        lip = s_distance_lower_bound_check(c, pairs, tol=1e-9 * tol_scale)
        res.metrics["lipschitz_max_ratio"] = lip["max_ratio"]
        res.check("S-axiom Lipschitz bound", True)
    except AssertionError:
        res.check("S-axiom Lipschitz bound", False)
    uni = uniformity_certificate(c, pairs)
    rx, ux, vx, ry, uy, vy = pairs
    uni_s = uniformity_certificate(c, (8.0 * rx, ux, vx, 8.0 * ry, uy, vy))
    res.metrics["c_uniform"] = uni["c_uniform"]
    res.check("single uniformity constant", uni["passed"])
    res.check("scale-invariant constant", uni_s["c_uniform"] == uni["c_uniform"])
    chains_ok = True
    for at in (TIP, bl.INFINITY):
        chain = bl.build_phi_chain(c, at, 12, 5.0 * c.a, seed=seed)
        chains_ok &= bl.verify_phi_chain(c, chain, seed=seed + 1, tol=1e-9 * tol_scale)["passed"]
    res.check("chain inequalities", chains_ok)
    g1 = bl.gromov_delta_estimate(c, seed, 100_000)
    g2 = bl.gromov_delta_estimate(c, seed, 200_000)
    dh = g1["delta_hat"]
    change = abs(g2["delta_hat"] - dh) / dh
    res.metrics.update(delta_hat=dh, delta_doubling_change=change)
    res.check("delta_hat in [a, a(pi+0.5)]", c.a <= dh <= c.a * (math.pi + 0.5))
    res.check("delta_hat stable within 5%", change <= 0.05 * tol_scale)
    omega = 1.0 / (2.0 * c.a)
    zetas = [bl.pencil_tube_check(c, omega, eta, seed=seed)["zeta_hat"] for eta in (1.0, 0.5, 0.25)]
    res.metrics["zeta_hat"] = zetas[0]
    res.check("tube bound", max(zetas) <= c.a * math.pi + 1e-6 * tol_scale)
    res.check("tube eta-independent", max(zetas) - min(zetas) <= 1e-9 * tol_scale)
    return res


def criterion_9(seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    res = CriterionResult(9, "Dirichlet hypothesis ledger")
    rows = []
    ok = True
    for p, q in ((3, 3), (2, 4)):
        c = make_cone(p, q)
        for name in ("laplace", "jacobi"):
            for lam in (0.0, 1.0 / 48.0):
                op = OperatorSpec.named(name, lam)
                rep = bl.dirichlet_hypotheses(c, op)
                roots = indicial_roots(c, op, make_mode(c, 0, 0))
                # independent evaluation of each hypothesis
                const = name == "laplace" and lam == 0.0
                tip = float(roots.gamma_plus) > 0
                inf = float(roots.gamma_minus) < 0
                ok &= (rep["constants_harmonic"] == const and rep["green_to_zero_at_tip"] == tip
                       and rep["green_to_zero_at_infinity"] == inf and rep["solvable"] == (const and tip and inf))
                if const:
                    ok &= (not rep["solvable"]) and rep["gamma_plus_0"] == 0.0
                rows.append({"cone": f"{p},{q}", "operator": name, "lambda": lam, "solvable": rep["solvable"]})
    res.metrics["catalog"] = rows
    res.check("hypotheses flagged across the catalog", ok)
    return res


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9)


def run_all(seed: int = 0, tol_scale: float = 1.0) -> list[CriterionResult]:
    out = []
    for fn in CRITERIA:
        try:
            out.append(fn(seed, tol_scale))
        except (CriticalityError, sl.ConvergenceError, sl.MonotonicityViolation) as e:
            res = CriterionResult(int(fn.__name__.rsplit("_", 1)[1]), fn.__name__)
            res.metrics["error"] = f"{type(e).__name__}: {e}"
            res.check("completed", False)
            out.append(res)
    return out
