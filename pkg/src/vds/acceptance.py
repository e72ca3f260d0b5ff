"""Acceptance suite: twelve end-to-end numerical checks with fixed tolerances.

Each check returns a CriterionResult.  The couplings used by default are
collected in DEFAULT_COUPLINGS; all random sample points come from a seeded
numpy generator.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .adoeigen import (
    check_F_identity,
    check_Hn_identities,
    check_kernel_identity,
    eigen_report,
    free_E,
    symmetry_residue_probe,
    unboundedness_probe,
    v_probe,
)
from .hsspec import decompose, elliptic_lambda, free_eigvecs, free_lambda, gauss_rule
from .polyasym import (
    build_ortho,
    decay_I_on_psi,
    decay_psi_vs_a,
    f_vs_psi,
    lambda_vs_kappa,
)
from .specfun import Params, specfun_suite
from .symlab import (
    T_matrix,
    commutator_test,
    default_words,
    dual_isospectrality,
    isospectrality_scan,
    normalized_commutator,
)
from .vdcore import (
    Coupling,
    check_Dj,
    cluster_members,
    gamma_dot,
    gamma_L,
    gamma_l,
    gamma_s,
    self_dual_mixed,
)

DEFAULT_PARAMS = Params(1.0, 0.7, 1.1)

# generic couplings inside Pi_r for the default parameters
DEFAULT_COUPLINGS = {
    "real": [
        [-0.6, -0.35, -0.2, -0.3, 0.05, -0.25, 0.1, -0.25],
        [-0.3, -0.1, 0.0, -0.2, 0.05, -0.1, 0.1, -0.65],
        [-0.45, -0.2, -0.3, -0.1, -0.15, 0.05, -0.2, -0.25],
    ],
    "mixed": [
        [-0.5, -0.2, -0.1, 0.1, -0.3, -0.2, 0.05, -0.35],
        [-0.4, -0.3, 0.1, -0.2, -0.1, -0.25, -0.15, -0.2],
        [-0.35, -0.25, -0.15, 0.05, -0.2, -0.3, 0.0, -0.2],
    ],
    "cluster": [0.33, 0.3, -0.26, -0.22, -0.28, -0.84, -0.83, 0.22],
    "weyl": [-0.3, -0.1, 0.0, -0.2, 0.05, -0.1, 0.1, -0.65],
    "f_vs_psi": ([-0.2, 0.1, -0.1, 0.05], 0.3),
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{tag}] {self.name} ({self.seconds:.1f} s)"

    def to_json(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "seconds": round(self.seconds, 3), "details": self.details}


def generic_couplings(p: Params, regime: str) -> list[Coupling]:
    make = Coupling.real if regime == "real" else Coupling.mixed
    return [make(p, g) for g in DEFAULT_COUPLINGS[regime]]


# ---------------------------------------------------------------- criteria

def crit_specfun(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    errs = specfun_suite(p, n_points=200, seed=seed)
    worst = max(errs.values())
    return CriterionResult(1, "special-function identities", worst < 1e-11,
                           {"max_error": worst, "errors": errs, "tol": 1e-11})


def crit_kernel_identity(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    rng = np.random.default_rng(seed)
    h = p.period
    x = rng.uniform(0, h, 50) + 1j * rng.uniform(-0.15, 0.15, 50) * p.a
    y = rng.uniform(0, h, 50) + 1j * rng.uniform(-0.15, 0.15, 50) * p.a
    rows, worst = [], 0.0
    for regime in ("real", "mixed"):
        for gc in generic_couplings(p, regime):
            res = check_kernel_identity(gc, x, y)
            worst = max(worst, max(res.values()))
            rows.append({"regime": regime, "g": gc.g.tolist(), **res})
    return CriterionResult(2, "kernel identity", worst < 1e-9, {"max_error": worst, "rows": rows, "tol": 1e-9})


def crit_Dj(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    rng = np.random.default_rng(seed)
    y = rng.uniform(0, p.period, 20)
    rows, worst = [], 0.0
    for regime in ("real", "mixed"):
        for gc in generic_couplings(p, regime):
            res = check_Dj(p, gc.sigma, y)
            worst = max(worst, max(res.values()))
            rows.append({"sigma": gc.sigma, **{f"j{j}_tau{t}": v for (j, t), v in res.items()}})
    return CriterionResult(3, "D_j cancellation", worst < 1e-11, {"max_ratio": worst, "rows": rows, "tol": 1e-11})


def crit_free_lame(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    gc = gamma_dot(p)
    rule = gauss_rule(p, n_nodes)
    dec = decompose(gc, rule, 12)
    n = np.arange(11)
    lam_err = float(np.max(np.abs(dec.lambdas[:11] / free_lambda(p, n) - 1)))
    e = dec.e(0)[:, :11]
    ef = free_eigvecs(p, rule.nodes, 11)
    sgn = np.sign(np.sum(e * ef, axis=0))
    vec_err = float(np.max(np.abs(e - ef * sgn[None, :])))
    rep = eigen_report(dec, n_max=9)
    Es = float(np.max(np.abs(rep.E_s / free_E(p, "s", np.arange(9)) - 1)))
    El = float(np.max(np.abs(rep.E_l / free_E(p, "l", np.arange(9)) - 1)))
    ok = lam_err < 1e-8 and vec_err < 1e-7 and Es < 1e-7 and El < 1e-7
    return CriterionResult(4, "free Lame closed forms", ok,
                           {"lambda_rel": lam_err, "eigvec_sup": vec_err, "E_s_rel": Es, "E_l_rel": El})


def crit_heun_pair(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    rule = gauss_rule(p, n_nodes)
    n = np.arange(11)
    errs = {}
    for name, gc in (("l", gamma_l(p)), ("s", gamma_s(p))):
        dec = decompose(gc, rule, 11)
        errs[f"lambda_{name}_rel"] = float(np.max(np.abs(dec.lambdas / elliptic_lambda(p, name, n) - 1)))
    Ts = [T_matrix(g, rule) for g in (gamma_dot(p), gamma_l(p), gamma_s(p))]
    comm = [normalized_commutator(Ts[i], Ts[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    ok = max(errs.values()) < 1e-8 and max(comm) < 1e-9
    return CriterionResult(5, "flipped free couplings", ok, {**errs, "commutators": comm})


def crit_cluster(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    gd = Coupling.real(p, DEFAULT_COUPLINGS["cluster"])
    members = cluster_members(gd, "full")
    r1 = commutator_test(gd, gauss_rule(p, n_nodes), members=members)
    r2 = commutator_test(gd, gauss_rule(p, 2 * n_nodes), members=members)
    improving = r2.max <= max(r1.max, 1e-13)
    ok = len(members) >= 8 and r1.max < 1e-7 and improving
    return CriterionResult(6, "cluster commutativity", ok,
                           {"members": len(members), "min_sigma": min(m.sigma for m in members),
                            "max_N": r1.max, "max_2N": r2.max, "improving": improving})


def crit_dual(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    rule = gauss_rule(p, n_nodes)
    rows, ok, worst = [], True, 0.0
    for regime in ("real", "mixed"):
        for gc in generic_couplings(p, regime):
            res = dual_isospectrality(gc, rule)
            ok = ok and res["pass"]
            dev = max(res["s"]["max_dev"], res["l"]["max_dev"])
            worst = max(worst, dev)
            rows.append({"regime": regime, "g": gc.g.tolist(), "max_dev": dev, "pass": res["pass"]})
    ok = ok and worst <= 1e-5
    return CriterionResult(7, "dual isospectrality", ok, {"max_dev": worst, "rows": rows})


def crit_weyl(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    gc = Coupling.real(p, DEFAULT_COUPLINGS["weyl"])
    words = default_words(gc, seed=seed)
    rep = isospectrality_scan(gc, words, gauss_rule(p, n_nodes))
    d8 = [e for e in rep.entries if e.word.is_D8 and not e.escaped]
    d8_op = max((e.same_operator for e in d8), default=0.0)
    d8_spec = max((max(e.dev_s, e.dev_l) for e in d8), default=0.0)
    n_in = sum(1 for e in rep.entries if not e.escaped)
    ok = rep.all_match and d8_op < 1e-8 and d8_spec < 1e-8 and n_in > 0
    return CriterionResult(8, "Weyl orbit isospectrality", ok,
                           {"words": len(words), "in_domain": n_in, "max_dev": rep.max_dev,
                            "D8_operator_diff": d8_op, "D8_spectral_dev": d8_spec,
                            "entries": [{"word": e.word.label(), "match": e.match, "escaped": e.escaped,
                                         "dev_s": e.dev_s, "dev_l": e.dev_l} for e in rep.entries]})


def crit_Hn(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    rule = gauss_rule(p, n_nodes)
    rows, worst = [], 0.0
    chosen = [g for g in generic_couplings(p, "real") + generic_couplings(p, "mixed") if g.sigma > p.a_s / 2][:2]
    for gc in chosen:
        res = check_Hn_identities(decompose(gc, rule), n_max=4)
        done = [c for c in res if not c.skipped]
        w = max(c.error for c in done)
        worst = max(worst, w)
        rows.append({"g": gc.g.tolist(), "sigma": gc.sigma, "checked": len(done),
                     "skipped": len(res) - len(done), "max_error": w})
    free = check_Hn_identities(decompose(gamma_dot(p), rule), n_max=4, families=("small_step",))
    free_done = [c for c in free if not c.skipped]
    free_ok = bool(free_done) and all(c.vanishing for c in free_done)
    ok = len(chosen) == 2 and worst < 1e-5 and free_ok
    return CriterionResult(9, "H_n identities", ok,
                           {"max_error": worst, "rows": rows, "free_vanishing": free_ok,
                            "free_instances": len(free_done)})


def crit_poly(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    n1, n2 = 2 * n_nodes, 4 * n_nodes
    r1, r2 = gauss_rule(p, n1), gauss_rule(p, n2)
    gc = Coupling.real(p, DEFAULT_COUPLINGS["real"][0])
    ns = range(4, 15)
    psi = decay_psi_vs_a(build_ortho(gc, r1, 14), ns, build_ortho(gc, r2, 14))
    ipsi = decay_I_on_psi(gc, r1, ns, r2)
    lk = lambda_vs_kappa(decompose(gc, r1), ns, decompose(gc, r2))
    u, frac = DEFAULT_COUPLINGS["f_vs_psi"]
    gs = self_dual_mixed(p, u, frac * p.a_s)
    fp = f_vs_psi(decompose(gs, r1), build_ortho(gs, r1, 14), ns)
    ratio10 = lk.extra["ratios"][list(ns).index(10)]
    ok = (psi.passed() and ipsi.passed() and lk.passed() and abs(ratio10 - 1) < 0.01
          and gc.sigma < p.a_s and np.isfinite(fp.slope) and fp.slope > 0)
    return CriterionResult(10, "polynomial asymptotics", ok,
                           {"bound": 0.85 * 2 * p.r * p.a_s, "psi_vs_a": psi.slope, "I_on_psi": ipsi.slope,
                            "lambda_vs_kappa": lk.slope, "ratio_n10": ratio10, "f_vs_psi": fp.slope,
                            "f_vs_psi_sigma": gs.sigma})


def crit_negative(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    rule = gauss_rule(p, n_nodes)
    ratio, pred = check_F_identity(decompose(gamma_dot(p), rule), ell=1, tau=0)
    gap = float(np.min(np.abs(ratio - pred) / abs(pred)))
    dec = decompose(Coupling.real(p, DEFAULT_COUPLINGS["real"][0]), rule)
    base = symmetry_residue_probe(dec, 0, n=1)
    vn = symmetry_residue_probe(dec, v_probe(p, 1), n=1)
    ratio_probe = vn["relative"] / max(base["relative"], 1e-300)
    ok = gap > 0.1 and ratio_probe > 1e3
    return CriterionResult(11, "negative controls", ok,
                           {"F_identity_min_gap": gap, "H_probe": base["relative"], "v_probe": vn["relative"],
                            "probe_ratio": ratio_probe})


def crit_unbounded(p: Params, n_nodes: int, seed: int) -> CriterionResult:
    rule = gauss_rule(p, n_nodes)
    rows, ok = [], True
    for name, gc in (("gamma_dot", gamma_dot(p)), ("gamma_L(0.3)", gamma_L(p, 0.3))):
        res = unboundedness_probe(gc, rule)
        good = abs(res["slope"] / res["expected"] - 1) <= 0.1
        ok = ok and good
        rows.append({"coupling": name, "slope": res["slope"], "expected": res["expected"], "pass": good})
    return CriterionResult(12, "unboundedness probe", ok, {"rows": rows})


CRITERIA = {
    1: crit_specfun, 2: crit_kernel_identity, 3: crit_Dj, 4: crit_free_lame, 5: crit_heun_pair,
    6: crit_cluster, 7: crit_dual, 8: crit_weyl, 9: crit_Hn, 10: crit_poly, 11: crit_negative,
    12: crit_unbounded,
}


def run_criterion(k: int, p: Params = DEFAULT_PARAMS, n_nodes: int = 200, seed: int = 0) -> CriterionResult:
    """Run one criterion, converting package errors into a failed result."""
    from .errors import VdsError

    t0 = time.perf_counter()
    try:
        res = CRITERIA[k](p, n_nodes, seed)
    except VdsError as exc:
        res = CriterionResult(k, CRITERIA[k].__name__, False, {"error": f"{type(exc).__name__}: {exc}"})
    res.seconds = time.perf_counter() - t0
    return res


def run_all(p: Params = DEFAULT_PARAMS, n_nodes: int = 200, seed: int = 0, which=None) -> list[CriterionResult]:
    return [run_criterion(k, p, n_nodes, seed) for k in (which or sorted(CRITERIA))]
