"""Config-driven experiments: each returns a report, named assertions and CSV tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from conelab import boundary_lab as bl
from conelab import spectral_lab as sl
from conelab.cone_geometry import (
    TIP,
    ConePoint,
    ConeSpec,
    make_cone,
    pole,
    random_link,
    sample_pairs,
    s_distance_lower_bound_check,
    uniformity_certificate,
)
from conelab.link_spectrum import (
    ProjectionKernel,
    QuadratureSpec,
    enumerate_modes,
    eval_projection_kernel,
    make_mode,
    quadrature_on_link,
)
from conelab.radial_calculus import (
    CriticalityError,
    GreenEvaluator,
    NotCoercive,
    OperatorSpec,
    TailNotConvergent,
    adaptedness_certificate,
    harmonic_residual,
    lambda_star,
)

EXPERIMENTS = (
    "spectrum", "green", "bhp", "martin", "fatou", "criticality", "hardy",
    "hyperbolicity", "uniformity", "chains", "sobolev", "dirichlet-hypotheses",
)

THEOREMS = {
    "spectrum": "link spectrum and zonal projection kernels",
    "green": "minimal Green's function as a mode sum",
    "bhp": "boundary Harnack inequality along Phi-chains; continuous extension of quotients",
    "martin": "Martin boundary of the cone: one point at the tip, one at infinity; Radon measure representation",
    "fatou": "relative Fatou theorem for atomic boundary measures",
    "criticality": "criticality trichotomy via Dirichlet eigenvalues of exhausting annuli",
    "hardy": "Hardy inequality with the principal eigenvalue",
    "hyperbolicity": "Gromov hyperbolicity of the hyperbolic unfolding; pencil tube inclusion",
    "uniformity": "S-transform axioms and S-uniformity of the cone",
    "chains": "canonical Phi-chains at the tip and at infinity",
    "sobolev": "compactly supported approximation in S-Sobolev spaces",
    "dirichlet-hypotheses": "hypotheses of the boundary Dirichlet problem",
}


@dataclass
class ExperimentResult:
    name: str
    report: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @property
    def theorem(self) -> str:
        return THEOREMS[self.name]

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def check(self, name: str, passed, **detail) -> bool:
        self.assertions.append({"name": name, "passed": bool(passed), "detail": detail})
        return bool(passed)


def _cone(cfg) -> ConeSpec:
    return make_cone(cfg.p, cfg.q, cfg.a)


def _op(cfg) -> OperatorSpec:
    return OperatorSpec.named(cfg.op, cfg.lam)


def _link_cols(prefix: str, u, v) -> list[str]:
    return [f"{prefix}u{i}" for i in range(len(u))] + [f"{prefix}v{i}" for i in range(len(v))]


# ---------------------------------------------------------------------------

def run_spectrum(cfg) -> ExperimentResult:
    res = ExperimentResult("spectrum")
    c = _cone(cfg)
    modes = enumerate_modes(c, cfg.mu_max)
    res.report["modes"] = len(modes)
    res.check("zero mode is simple", modes[0].k1 == modes[0].k2 == 0 and modes[0].mult == 1)
    res.check("sorted by eigenvalue", all(a.mu <= b.mu for a, b in zip(modes, modes[1:])))
    rng = np.random.default_rng(cfg.seed)
    u, v = random_link(c, rng, 8)
    worst = 0.0
    for m in modes:
        val = eval_projection_kernel(ProjectionKernel(c, m), (u, v), (u, v))
        worst = max(worst, float(np.max(np.abs(val * c.link_volume() / m.mult - 1.0))))
    res.check("trace identity", worst <= 1e-12 * cfg.tol_scale, max_rel_error=worst)
    vol = quadrature_on_link(c, lambda a, b: np.ones(len(a)))
    res.check("link volume by quadrature", abs(vol - c.link_volume()) <= 1e-10 * cfg.tol_scale * c.link_volume(),
              quadrature=vol, closed_form=c.link_volume())
    u0, v0 = pole(c)
    pk = ProjectionKernel(c, make_mode(c, 1, 0))
    orth = quadrature_on_link(c, lambda a, b: eval_projection_kernel(pk, (a, b), (u0, v0)), QuadratureSpec(center=(u0, v0)))
    res.check("orthogonality to constants", abs(orth) <= 1e-8 * cfg.tol_scale, integral=orth)
    res.tables["modes"] = (["k1", "k2", "mu", "mult"], [[m.k1, m.k2, m.mu, m.mult] for m in modes])
    return res


def _green_pairs(c: ConeSpec, rng: np.random.Generator, count: int):
    """Pairs with radius ratio at least 3/2, so every mode sum converges fast."""
    rx = np.exp(rng.uniform(-1.5, 1.5, count))
    ratio = np.exp(rng.uniform(math.log(1.5), 1.5, count)) ** rng.choice([-1.0, 1.0], count)
    ry = rx * ratio
    ux, vx = random_link(c, rng, count)
    uy, vy = random_link(c, rng, count)
    return rx, ux, vx, ry, uy, vy


def run_green(cfg) -> ExperimentResult:
    res = ExperimentResult("green")
    c, op = _cone(cfg), _op(cfg)
    ge = GreenEvaluator(c, op, tol=1e-10)
    rng = np.random.default_rng(cfg.seed)
    rx, ux, vx, ry, uy, vy = _green_pairs(c, rng, 20)
    g_xy = ge.evaluate(rx, ux, vx, ry, uy, vy)
    g_yx = ge.evaluate(ry, uy, vy, rx, ux, vx)
    res.check("symmetry", np.array_equal(g_xy.value, g_yx.value),
              max_abs_diff=float(np.max(np.abs(g_xy.value - g_yx.value))))
    res.check("positivity", np.all(g_xy.value > 0))
    tau = 8.0
    g_s = ge.evaluate(tau * rx, ux, vx, tau * ry, uy, vy)
    scale_err = float(np.max(np.abs(g_s.value / (tau ** (2 - c.n) * g_xy.value) - 1.0)))
    res.check("homogeneity of degree 2-n", scale_err <= 1e-9 * cfg.tol_scale, max_rel_error=scale_err)
    # two truncation levels
    x = ConePoint(1.0, *pole(c))
    uy1, vy1 = random_link(c, rng)
    y = ConePoint(4.0, uy1, vy1)
    val, tail, mu_cut = ge.green_with_bound(x, y)
    val2 = ge.fixed(2 * mu_cut + 1).green(x, y)
    res.check("two-level truncation within tail bound", abs(val - val2) <= tail + 1e-15 * abs(val),
              value=val, doubled=val2, tail_bound=tail, mu_cut=mu_cut)
    y3 = ConePoint(3.0, uy1, vy1)
    g3 = ge.green(x, y3)
    hs = (2e-3, 1e-3, 5e-4)
    resid = [abs(harmonic_residual(ge, x, y3, h)) for h in hs]
    ratios = [resid[i] / resid[i + 1] for i in range(2)]
    res.check("finite-difference residual", resid[1] <= 1e-4 * cfg.tol_scale * g3,
              relative=resid[1] / g3, h=hs[1])
    res.check("second-order residual", all(3.0 <= q <= 5.0 for q in ratios), ratios=ratios)
    rows = []
    for i in range(len(rx)):
        rows.append([rx[i], *ux[i], *vx[i], ry[i], *uy[i], *vy[i], g_xy.value[i], g_xy.tail_bound[i]])
    header = ["r_x"] + _link_cols("x_", ux[0], vx[0]) + ["r_y"] + _link_cols("y_", uy[0], vy[0]) + ["value", "tail_bound"]
    res.tables["green_samples"] = (header, rows)
    res.report.update(residuals=dict(zip(map(str, hs), resid)), green_1_3=g3)
    return res


def _chain(cfg, c: ConeSpec, at: str) -> bl.PhiChain:
    if cfg.hub_spacing:
        delta = bl.gromov_delta_estimate(c, cfg.seed, max(1000, cfg.quadruples // 10))["delta_hat"]
        spacing = 300.0 * delta
    else:
        spacing = cfg.spacing if cfg.spacing is not None else 5.0 * c.a
    return bl.build_phi_chain(c, at, cfg.levels, spacing, seed=cfg.seed)


def run_bhp(cfg) -> ExperimentResult:
    res = ExperimentResult("bhp")
    c, op = _cone(cfg), _op(cfg)
    chain = _chain(cfg, c, TIP)
    rng = np.random.default_rng(cfg.seed)
    r_work = math.exp(chain.levels[0])
    pairs = [(bl.sample_vanishing_solution(c, op, TIP, rng, r_work=r_work),
              bl.sample_vanishing_solution(c, op, TIP, rng, r_work=r_work)) for _ in range(cfg.trials)]
    rep = bl.bhp_verify(c, op, chain, seed=cfg.seed, pairs=pairs)
    res.report["bhp"] = rep
    res.check("C_hat finite", rep["finite"], C_hat=rep["C_hat"])
    res.check("C_hat level-stable", rep["level_stable"], first=rep["first_half_max"], deep=rep["deep_half_max"])
    osc_rows, bad_rate, bad_limit, bad_mono = [], [], [], []
    for i, (u, v) in enumerate(pairs):
        tr = bl.oscillation_decay(c, op, chain, u, v, seed=cfg.seed + i)
        chk = bl.oscillation_checks(tr, rel_tol=0.1 * cfg.tol_scale, tail_tol=1e-6 * cfg.tol_scale)
        if not (chk["contracting"] and chk["rate_matches"]):
            bad_rate.append(i)
        if not chk["monotone"]:
            bad_mono.append(i)
        if not chk["limit_ok"]:
            bad_limit.append(i)
        osc_rows += [[i, k, o, tr.rho_hat, tr.rho_predicted] for k, o in enumerate(tr.osc)]
    res.check("geometric oscillation decay at the mode-gap rate", not bad_rate, failing_trials=bad_rate)
    res.check("oscillation nonincreasing", not bad_mono, failing_trials=bad_mono)
    res.check("quotient limit equals coefficient ratio", not bad_limit, failing_trials=bad_limit)
    res.report["chain"] = chain.to_dict()
    res.tables["bhp_levels"] = (["level", "C_max"], [[i, q] for i, q in enumerate(rep["per_level_max"])])
    res.tables["oscillation"] = (["trial", "k", "osc", "rho_hat", "rho_predicted"], osc_rows)
    return res


def run_martin(cfg) -> ExperimentResult:
    res = ExperimentResult("martin")
    c, op = _cone(cfg), _op(cfg)
    for at in (TIP, bl.INFINITY):
        est = bl.martin_kernel(c, op, at, n_max=cfg.n, directions=cfg.dirs, seed=cfg.seed)
        res.report[at] = est.to_dict()
        norm_err = float(np.max(np.abs(est.base_values - 1.0)))
        res.check(f"{at}: K(p, p_n) = 1", norm_err <= 1e-14, max_error=norm_err)
        if at == TIP:
            res.check("tip: direction independence", est.direction_diff[-1] <= 1e-4 * cfg.tol_scale,
                      sup_difference=est.direction_diff[-1])
        res.check(f"{at}: limit slope", abs(est.slope - est.slope_expected) <= 1e-3 * cfg.tol_scale,
                  slope=est.slope, expected=est.slope_expected)
        res.tables[f"martin_{at}"] = (
            ["n", "r_n", "direction_diff", "consecutive_diff"],
            [[i + 1, est.radii[i], est.direction_diff[i], est.consecutive_diff[i - 1] if i else ""]
             for i in range(len(est.radii))])
    r = np.geomspace(0.25, 4.0, 33)
    basis = bl.martin_basis(c, op, r)
    fit = bl.martin_representation_fit(c, op, 2.0 * basis[:, 0] + 3.0 * basis[:, 1], r)
    res.report["representation"] = fit
    res.check("two-atom representation", fit["residual"] < 1e-8 * cfg.tol_scale and fit["mu_0"] >= 0 and fit["mu_inf"] >= 0,
              **fit)
    return res


def run_fatou(cfg) -> ExperimentResult:
    res = ExperimentResult("fatou")
    c, op = _cone(cfg), _op(cfg)
    rep = bl.fatou_atomic(c, op, tuple(cfg.mu), tuple(cfg.nu), 1.0 / (2.0 * c.a), tol=1e-5 * cfg.tol_scale)
    res.report = rep
    for at in ("tip", "infinity"):
        if rep[at] is not None:
            res.check(f"limit at {at}", rep[at]["passed"], error=rep[at]["error"], target=rep[at]["target"])
    return res


def run_criticality(cfg) -> ExperimentResult:
    res = ExperimentResult("criticality")
    c, op = _cone(cfg), _op(cfg)
    op0 = op.shifted(0.0)
    try:
        rep = sl.trichotomy(c, op0, op.lam, cfg.T, N=cfg.N)
    except sl.MonotonicityViolation as e:
        res.check("Dirichlet eigenvalues decrease", False, error=str(e))
        return res
    ls = rep.lambda_star
    res.report = rep.to_dict()
    seq = rep.dirichlet_sequence
    res.check("strictly decreasing", all(b < a for (_, a), (_, b) in zip(seq, seq[1:])))
    res.check("above lambda*", all(lam > ls for _, lam in seq))
    gaps = [abs((lam - ls) / ((math.pi / T) ** 2 / c.a ** 2) - 1.0) for T, lam in seq]
    res.check("gap matches (pi/T)^2/a^2", max(gaps) <= 0.02 * cfg.tol_scale, max_rel_deviation=max(gaps))
    expected = "critical" if abs(op.lam - ls) <= 1e-9 * max(1.0, abs(ls)) else (
        "subcritical" if op.lam < ls else "supercritical")
    res.check("regime", rep.regime == expected, regime=rep.regime, lambda_query=op.lam, lambda_star=ls)
    res.tables["sequence"] = (["T", "lambda", "closed_form"],
                              [[T, lam, sl.dirichlet_closed_form(c, op0, T)] for T, lam in seq])
    ep = sl.dirichlet_eigen(c, op0, sl.LogGrid(cfg.T[-1], cfg.N))
    res.tables["eigenfunction"] = (["t", "v"], [[t, v] for t, v in zip(ep.t, ep.vector)])
    return res


def run_hardy(cfg) -> ExperimentResult:
    res = ExperimentResult("hardy")
    c, op = _cone(cfg), _op(cfg)
    rep = sl.hardy_check(c, op, count=cfg.hardy_count, seed=cfg.seed)
    res.report = rep
    res.check("quotients above lambda*", rep["all_above_floor"], min_quotient=rep["min_quotient"], floor=rep["lambda_star"])
    res.check("widening bumps decrease", rep["widening_decreasing"])
    res.check("widening infimum within 5%", rep["final_gap_rel"] <= 0.05 * cfg.tol_scale, gap=rep["final_gap_rel"])
    res.tables["widening"] = (["T0", "quotient"], [[w["T0"], w["quotient"]] for w in rep["widening"]])
    return res


def run_hyperbolicity(cfg) -> ExperimentResult:
    res = ExperimentResult("hyperbolicity")
    c = _cone(cfg)
    u0, v0 = pole(c)
    d_axis = bl.unfolded_distance(c, bl.UnfoldedPoint(0.0, u0, v0), bl.UnfoldedPoint(1.0, u0, v0))
    res.check("axial distance equals a", abs(d_axis - c.a) <= 1e-12 * c.a, value=d_axis)
    g1 = bl.gromov_delta_estimate(c, cfg.seed, cfg.quadruples)
    g2 = bl.gromov_delta_estimate(c, cfg.seed, 2 * cfg.quadruples)
    res.report["delta"] = g1
    res.report["delta_doubled"] = g2["delta_hat"]
    dh = g1["delta_hat"]
    res.check("delta_hat in [a, a(pi + 0.5)]", c.a <= dh <= c.a * (math.pi + 0.5), delta_hat=dh)
    change = abs(g2["delta_hat"] - dh) / dh
    res.check("delta_hat stable under doubling", change <= 0.05 * cfg.tol_scale, relative_change=change)
    omega = 1.0 / (2.0 * c.a)
    zetas = [bl.pencil_tube_check(c, omega, eta, seed=cfg.seed)["zeta_hat"] for eta in (1.0, 0.5, 0.25)]
    res.report["zeta_hat"] = zetas
    res.check("tube bound a*pi", max(zetas) <= c.a * math.pi + 1e-6, zeta_hat=max(zetas))
    res.check("tube radius independent of eta", max(zetas) - min(zetas) <= 1e-9, zetas=zetas)
    return res


def run_uniformity(cfg) -> ExperimentResult:
    res = ExperimentResult("uniformity")
    c = _cone(cfg)
    rng = np.random.default_rng(cfg.seed)
    pairs = sample_pairs(c, rng, cfg.samples)
    try:
        lip = s_distance_lower_bound_check(c, pairs, tol=1e-9 * cfg.tol_scale)
        res.check("S-distance Lipschitz bound", True, max_ratio=lip["max_ratio"], bound=lip["bound"])
    except AssertionError as e:
        res.check("S-distance Lipschitz bound", False, error=str(e))
    uni = uniformity_certificate(c, pairs)
    tau = 8.0
    rx, ux, vx, ry, uy, vy = pairs
    uni_s = uniformity_certificate(c, (tau * rx, ux, vx, tau * ry, uy, vy))
    res.report.update(c_uniform=uni["c_uniform"], c_uniform_scaled=uni_s["c_uniform"], witnesses=uni["witnesses"])
    res.check("single uniformity constant", uni["passed"], c_uniform=uni["c_uniform"], failures=uni["failures"])
    res.check("scale invariance", uni_s["c_uniform"] == uni["c_uniform"], scaled=uni_s["c_uniform"])
    return res


def run_chains(cfg) -> ExperimentResult:
    res = ExperimentResult("chains")
    c = _cone(cfg)
    rows = []
    for at in (TIP, bl.INFINITY):
        try:
            chain = _chain(cfg, c, at)
        except bl.FitFailure as e:
            res.check(f"{at}: chain fit", False, error=str(e))
            continue
        ver = bl.verify_phi_chain(c, chain, seed=cfg.seed + 1)
        res.report[at] = {**chain.to_dict(), "verification": ver}
        res.check(f"{at}: chain inequalities", ver["passed"], margin=ver["separation_margin"], nested=ver["nested"])
        rows += [[at, i, t, math.exp(t)] for i, t in enumerate(chain.levels)]
    if TIP in res.report and bl.INFINITY in res.report:
        same = (res.report[TIP]["a_delta"], res.report[TIP]["b_delta"]) == (
            res.report[bl.INFINITY]["a_delta"], res.report[bl.INFINITY]["b_delta"])
        res.check("mirror chains share parameters", same)
    res.tables["chain_levels"] = (["boundary_point", "level", "t", "r"], rows)
    return res


def run_sobolev(cfg) -> ExperimentResult:
    res = ExperimentResult("sobolev")
    c = _cone(cfg)
    f = sl.power_taper_function(c)
    rep = sl.cutoff_convergence(c, f, cfg.etas, cfg.Rs, seed=cfg.seed)
    res.report = rep
    res.check("near-tip norms decrease", rep["near_decreasing"], norms=[x["norm"] for x in rep["near"]])
    res.check("far norms decrease", rep["far_decreasing"], norms=[x["norm"] for x in rep["far"]])
    grad = {k: v for k, v in rep["gradient"].items() if k != "passed"}
    res.check("cutoff gradient bounds", rep["gradient"]["passed"], **grad)
    try:
        sl.SobolevForm(c).check_finite_norm(sl.power_taper_function(c, -(c.n - 2) / 2.0, 0.0))
        rejected = False
    except sl.DivergentNorm:
        rejected = True
    res.check("ground-state profile rejected", rejected)
    res.tables["cutoff_norms"] = (["kind", "parameter", "norm"],
                                  [["near", x["eta"], x["norm"]] for x in rep["near"]]
                                  + [["far", x["R"], x["norm"]] for x in rep["far"]])
    return res


def run_dirichlet_hypotheses(cfg) -> ExperimentResult:
    res = ExperimentResult("dirichlet-hypotheses")
    rows = []
    catalog = [(cfg.p, cfg.q)] + [pq for pq in ((3, 3), (2, 4)) if pq != (cfg.p, cfg.q)]
    ops = [(cfg.op, cfg.lam)] + [(o, l) for o in ("laplace", "jacobi") for l in (0.0, 1.0 / 48.0)
                                 if (o, l) != (cfg.op, cfg.lam)]
    for p, q in catalog:
        c = make_cone(p, q)
        for name, lam in ops:
            op = OperatorSpec.named(name, lam)
            rep = bl.dirichlet_hypotheses(c, op)
            rows.append([f"{p},{q}", name, lam, rep["constants_harmonic"], rep["green_to_zero_at_tip"],
                         rep["green_to_zero_at_infinity"], rep["solvable"], rep["gamma_plus_0"], rep["gamma_minus_0"]])
            if rep["constants_harmonic"]:
                res.check(f"C_{p},{q} {op.name}: not solvable, gamma+_0 = 0",
                          not rep["solvable"] and rep["gamma_plus_0"] == 0.0, gamma_plus_0=rep["gamma_plus_0"])
    res.report["catalog"] = [dict(zip(["cone", "operator", "lambda", "constants_harmonic", "green_to_zero_at_tip",
                                       "green_to_zero_at_infinity", "solvable", "gamma_plus_0", "gamma_minus_0"], r))
                             for r in rows]
    res.tables["hypotheses"] = (["cone", "operator", "lambda", "constants_harmonic", "green_to_zero_at_tip",
                                 "green_to_zero_at_infinity", "solvable", "gamma_plus_0", "gamma_minus_0"], rows)
    if not res.assertions:
        res.check("report produced", True)
    return res


RUNNERS: dict[str, Callable] = {
    "spectrum": run_spectrum,
    "green": run_green,
    "bhp": run_bhp,
    "martin": run_martin,
    "fatou": run_fatou,
    "criticality": run_criticality,
    "hardy": run_hardy,
    "hyperbolicity": run_hyperbolicity,
    "uniformity": run_uniformity,
    "chains": run_chains,
    "sobolev": run_sobolev,
    "dirichlet-hypotheses": run_dirichlet_hypotheses,
}

LAB_ERRORS = (CriticalityError, NotCoercive, TailNotConvergent, sl.ConvergenceError, sl.DivergentNorm,
              bl.FitFailure, bl.PositivityUnverifiable, bl.DivisionUnstable, bl.NegativeCoefficient, bl.EmptyPencil)


def run_experiment(name: str, cfg) -> ExperimentResult:
    if name not in RUNNERS:
        raise KeyError(name)
    try:
        return RUNNERS[name](cfg)
    except LAB_ERRORS as e:
        res = ExperimentResult(name)
        res.check("experiment preconditions", False, error=f"{type(e).__name__}: {e}")
        return res


def cone_summary(c: ConeSpec, op: OperatorSpec) -> dict:
    cert = adaptedness_certificate(c, op)
    return {"cone": c.to_dict(), "operator": {"c_A": op.c_A, "lambda": op.lam, "name": op.name},
            "lambda_star": lambda_star(c, op.c_A), "adaptedness": cert.to_dict()}
