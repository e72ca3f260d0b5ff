"""Eigenvalues of the analytic difference operators from continued
eigenfunctions, and the H_n identity families.

Operator labels: ``"s"`` is the operator shifting by i a_s and ``"l"`` the one
shifting by i a_l.  In the sign convention of vdcore the operator with shift
a_s carries delta = sign of a_l, and vice versa.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContinuationFailure, DomainError, NearNodeZero, OutOfStrip, RatioGuard
from .hsspec import SpectralDecomposition, _side
from .specfun import eval_E, eval_R, p_delta
from .vdcore import (
    Coupling,
    M_delta,
    P_func,
    c_func,
    cP_func,
    coef_V,
    coef_Va,
    coef_Vb,
    kernel_K,
    kernel_S,
    pi_ell_tau,
    _ratio_guard,
)

_PROBE_FRACTIONS = (1 / 6, 1 / 5, 1 / 4, 1 / 3, 2 / 5)


def op_delta(gc_or_params, which: str) -> int:
    """delta of the operator whose shift is a_s (which='s') or a_l (which='l')."""
    p = getattr(gc_or_params, "params", gc_or_params)
    return -p.sign(which)


def default_probes(params) -> np.ndarray:
    """Default probe points pi/6r, pi/5r, pi/4r, pi/3r, 2pi/5r."""
    return np.array([f * math.pi / params.r for f in _PROBE_FRACTIONS])


# ---------------------------------------------------------------- E extraction

@dataclass
class EigenReport:
    """Per-mode eigenvalue pairs of the two difference operators."""

    coupling: Coupling
    side: int
    E_s: np.ndarray
    E_l: np.ndarray
    residual_s: np.ndarray
    residual_l: np.ndarray
    cross_s: np.ndarray
    cross_l: np.ndarray
    M_s: float
    identity_errors: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def n_modes(self) -> int:
        return len(self.E_s)

    def accepted(self, tol: float = 1e-6) -> np.ndarray:
        return (self.residual_s < tol) & (self.residual_l < tol)

    def to_rows(self) -> list[dict]:
        rows = []
        for n in range(self.n_modes):
            fl = [k for k, v in self.flags.items() if n in v]
            rows.append({"n": n, "E_s": float(self.E_s[n]), "res_s": float(self.residual_s[n]),
                         "E_l": float(self.E_l[n]), "res_l": float(self.residual_l[n]), "flags": ";".join(fl)})
        return rows

    def to_json(self) -> dict:
        return {
            "coupling": self.coupling.to_json(),
            "side": self.side,
            "M_s": self.M_s,
            "rows": self.to_rows(),
            "identity_errors": self.identity_errors,
            "flags": {k: list(map(int, v)) for k, v in self.flags.items()},
        }


def _A_values(dec: SpectralDecomposition, which: str, xs, side: int):
    """(A F)(x) and F(x) for all modes at real probe points, A in the form with V, V_b."""
    gcs = dec.side_coupling(side)
    p = gcs.params
    d = op_delta(p, which)
    _ratio_guard(p, d)
    am = p.ad(-d)
    xs = np.asarray(xs, dtype=float)
    cont = dec.continuator
    Fup = cont.F_batch(side, list(xs + 1j * am))
    F0 = dec.F_real(side, xs).astype(complex)
    Fdn = np.conj(Fup)
    Vm = coef_V(d, gcs, -xs.astype(complex))[:, None]
    Vp = coef_V(d, gcs, xs.astype(complex))[:, None]
    Vb = coef_Vb(d, gcs, xs.astype(complex))[:, None]
    AF = Vm * Fup + Vp * Fdn + Vb * F0
    return AF, F0, (Fup, Fdn, Vb)


def _cA_values(dec: SpectralDecomposition, which: str, xs, side: int, parts):
    """(cal A f)(x) and f(x) with f = F/c, in the form with V_a, V_b."""
    gcs = dec.side_coupling(side)
    p = gcs.params
    d = op_delta(p, which)
    am = p.ad(-d)
    xs = np.asarray(xs, dtype=float).astype(complex)
    Fup, Fdn, Vb = parts
    F0 = dec.F_real(side, xs.real).astype(complex)
    c0 = c_func(gcs, xs)[:, None]
    cup = c_func(gcs, xs + 1j * am)[:, None]
    cdn = c_func(gcs, xs - 1j * am)[:, None]
    Va = coef_Va(d, gcs, xs)[:, None]
    cAf = Fdn / cdn + Va * Fup / cup + Vb * F0 / c0
    return cAf, F0 / c0


def _extract(num, den, floor):
    """Median ratio per mode and its relative spread; probes with tiny den are skipped."""
    n_modes = num.shape[1]
    E = np.full(n_modes, np.nan)
    res = np.full(n_modes, np.inf)
    for n in range(n_modes):
        ok = np.abs(den[:, n]) > floor[n]
        if ok.sum() < 2:
            continue
        vals = num[ok, n] / den[ok, n]
        med = np.median(vals.real)
        spread = np.max(np.abs(vals - med)) / abs(med) if med != 0 else np.inf
        E[n] = med
        res[n] = spread
    return E, res


def extract_E(dec: SpectralDecomposition, which: str, n: int | None = None, probe_points=None,
              side=0, node_zero: float = 1e-6):
    """Eigenvalue E_n of the difference operator 'which' (s or l) by the median over probe points.

    Returns (E, residual) for a single n, or arrays over all modes when n is None.
    The residual is the max relative deviation of the probe values (imaginary
    parts included) from the median.
    """
    side = _side(side)
    p = dec.coupling.params
    xs = default_probes(p) if probe_points is None else np.asarray(probe_points, dtype=float)
    AF, F0, _ = _A_values(dec, which, xs, side)
    floor = node_zero * np.max(np.abs(dec.F(side)), axis=0)
    E, res = _extract(AF, F0, floor)
    if n is None:
        return E, res
    if not np.isfinite(E[n]):
        raise NearNodeZero(f"mode {n}: fewer than two usable probe points")
    return float(E[n]), float(res[n])


def _block_rediag(dec, which, xs, side, E, blocks):
    """Re-diagonalize the operator inside degenerate lambda-blocks by least squares on probe values."""
    AF, F0, _ = _A_values(dec, which, xs, side)
    E = E.copy()
    for b in blocks:
        B, *_ = np.linalg.lstsq(F0[:, b], AF[:, b], rcond=None)
        ev = np.sort(np.linalg.eigvals(B).real)
        E[b] = ev
    return E


def eigen_report(dec: SpectralDecomposition, n_max: int | None = None, probe_points=None,
                 side=0, tol: float = 1e-6) -> EigenReport:
    """E_{n,s}, E_{n,l} with residuals and cross-checks for n < n_max."""
    side = _side(side)
    gcs = dec.side_coupling(side)
    p = gcs.params
    xs = default_probes(p) if probe_points is None else np.asarray(probe_points, dtype=float)
    n_max = dec.n_modes if n_max is None else min(n_max, dec.n_modes)
    out = {}
    floor = 1e-6 * np.max(np.abs(dec.F(side)), axis=0)
    for which in ("s", "l"):
        AF, F0, parts = _A_values(dec, which, xs, side)
        E, res = _extract(AF, F0, floor)
        cAf, f0 = _cA_values(dec, which, xs, side, parts)
        Ec, _ = _extract(cAf, f0, floor * np.min(np.abs(1 / c_func(gcs, xs.astype(complex)))))
        cross = np.abs(Ec - E) / np.abs(E)
        if dec.degenerate_blocks:
            E = _block_rediag(dec, which, xs, side, E, dec.degenerate_blocks)
        out[which] = (E[:n_max], res[:n_max], cross[:n_max])
    Ms = M_delta(op_delta(p, "s"), gcs)
    flags = {}
    if dec.degenerate_blocks:
        flags["degenerate_block"] = sorted({i for b in dec.degenerate_blocks for i in b if i < n_max})
    Es, rs, _ = out["s"]
    El, rl, _ = out["l"]
    low = [n for n in range(n_max) if rs[n] < tol and not Es[n] > Ms]
    if low:
        flags["below_lower_bound"] = low
    comb = np.maximum(rs, rl)
    clash = []
    for i in range(n_max):
        for j in range(i + 1, n_max):
            if (abs(Es[i] - Es[j]) <= 10 * comb[i] * abs(Es[i]) + 1e-300
                    and abs(El[i] - El[j]) <= 10 * comb[i] * abs(El[i]) + 1e-300):
                clash += [i, j]
    if clash:
        flags["joint_degeneracy"] = sorted(set(clash))
    return EigenReport(gcs, side, Es, El, rs, rl, out["s"][2], out["l"][2], Ms, {}, flags)


def free_E(params, which: str, n):
    """Closed-form eigenvalues 2 e^{-2ra'} cosh(2(n+1) r a') of the free Lame operators (a' the shift)."""
    am = params.a_s if which == "s" else params.a_l
    n = np.asarray(n)
    return 2 * np.exp(-2 * params.r * am) * np.cosh(2 * (n + 1) * params.r * am)


# ---------------------------------------------------------------- kernel identity

def check_kernel_identity(gc: Coupling, x, y) -> dict:
    """Max relative residual of the kernel identities at complex sample points.

    'A+' / 'A-': A_delta(gamma; x) S - A_delta(gamma'; y) S.
    'cA+' / 'cA-': the same for the c-gauged operators acting on the kernel K.
    """
    if not gc.in_Pi_r():
        raise DomainError("kernel identity requires g in Pi_r")
    p = gc.params
    s = gc.sigma
    gd = gc.dual()
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    out = {}
    for d in (1, -1):
        am = p.ad(-d)
        S = lambda u, v: kernel_S(p, s, u, v, method="product")
        lhs = (coef_V(d, gc, x) * S(x - 1j * am, y) + coef_V(d, gc, -x) * S(x + 1j * am, y)
               + coef_Vb(d, gc, x) * S(x, y))
        rhs = (coef_V(d, gd, y) * S(x, y - 1j * am) + coef_V(d, gd, -y) * S(x, y + 1j * am)
               + coef_Vb(d, gd, y) * S(x, y))
        scale = np.abs(lhs) + np.abs(rhs) + np.abs(coef_Vb(d, gc, x) * S(x, y))
        tag = "+" if d > 0 else "-"
        out[f"A{tag}"] = float(np.max(np.abs(lhs - rhs) / scale))
        Kf = lambda u, v: kernel_K(gc, u, v)
        lhs_c = Kf(x - 1j * am, y) + coef_Va(d, gc, x) * Kf(x + 1j * am, y) + coef_Vb(d, gc, x) * Kf(x, y)
        rhs_c = Kf(x, y + 1j * am) + coef_Va(d, gd, -y) * Kf(x, y - 1j * am) + coef_Vb(d, gd, -y) * Kf(x, y)
        scale_c = np.abs(lhs_c) + np.abs(rhs_c) + np.abs(coef_Vb(d, gc, x) * Kf(x, y))
        out[f"cA{tag}"] = float(np.max(np.abs(lhs_c - rhs_c) / scale_c))
    return out


# ---------------------------------------------------------------- H_n identities

# small_step: H(x_t + i l a_s/2) vs H(x_t - i l a_s/2), l <= L; small_step_beyond_L: l > L
# large_step: steps k a_l/2 around tau h + i a_s/2
# small_shift_at_large_step / large_shift_at_small_step: shifts +-i a_s (+-i a_l) at height k a_l/2 (k a_s/2)
FAMILIES = ("small_step", "large_step", "small_shift_at_large_step", "small_step_beyond_L",
            "large_shift_at_small_step")


def _flip_prod(gc: Coupling, k: int, tau: int, step: float, offsets=(0.0,)) -> complex:
    """prod_mu prod_{m=1}^k prod_off (1 - (-)^tau e^{2r(gamma_mu + off + (k+1-2m) step/2)})."""
    p = gc.params
    sgn = (-1) ** tau
    val = 1 + 0j
    for gm in gc.gamma:
        for m in range(1, k + 1):
            for off in offsets:
                val *= 1 - sgn * np.exp(2 * p.r * (gm + off + (k + 1 - 2 * m) * step / 2))
    return val


def identity_instances(gc: Coupling, families=FAMILIES, kmax: int = 8):
    """Yield (family, index, tau, x_plus, x_minus, factor) for the H_n identity families."""
    p = gc.params
    h = math.pi / (2 * p.r)
    L = p.L
    s, a, as_, al = gc.sigma, p.a, p.a_s, p.a_l
    for fam in families:
        for tau in (0, 1):
            if fam in ("small_step", "small_step_beyond_L"):
                if L is None:
                    continue
                rng = range(1, L + 1) if fam == "small_step" else range(L + 1, L + 1 + kmax)
                for ell in rng:
                    x0 = tau * h + 0.5j * al
                    yield fam, ell, tau, x0 + 0.5j * ell * as_, x0 - 0.5j * ell * as_, pi_ell_tau(gc, ell, tau)
            elif fam == "large_step":
                for k in range(1, kmax + 1):
                    x0 = tau * h + 0.5j * as_
                    fac = math.exp(4 * k * p.r * (s - a)) * _flip_prod(gc, k, tau, al)
                    yield fam, k, tau, x0 + 0.5j * k * al, x0 - 0.5j * k * al, fac
            elif fam == "small_shift_at_large_step":
                for k in range(1, kmax + 1):
                    x0 = tau * h + 0.5j * k * al
                    fac = math.exp(8 * k * p.r * (s - a)) * _flip_prod(gc, k, tau, al, (as_ / 2, -as_ / 2))
                    yield fam, k, tau, x0 + 1j * as_, x0 - 1j * as_, fac
            elif fam == "large_shift_at_small_step":
                for k in range(1, kmax + 1):
                    x0 = tau * h + 0.5j * k * as_
                    fac = math.exp(8 * k * p.r * (s - a)) * _flip_prod(gc, k, tau, as_, (al / 2, -al / 2))
                    yield fam, k, tau, x0 + 1j * al, x0 - 1j * al, fac
            else:
                raise ValueError(f"unknown identity family {fam!r}")


@dataclass
class IdentityCheck:
    """Outcome of one identity instance over all checked modes."""

    family: str
    index: int
    tau: int
    error: float
    vanishing: bool = False
    skipped: str = ""


def check_Hn_identities(dec: SpectralDecomposition, n_max: int | None = None, families=FAMILIES,
                        side=0, margin: float = 0.2, floor: float = 1e-9) -> list[IdentityCheck]:
    """Relative errors |LHS - factor RHS|/(|LHS| + |factor RHS| + floor scale) of the H_n identities.

    Instances with a point farther than sigma + a_l - margin from the real
    axis are skipped with a reason.  If both sides are below floor * scale for
    every mode the instance passes by vanishing.
    """
    side = _side(side)
    gcs = dec.side_coupling(side)
    p = gcs.params
    n_max = dec.n_modes if n_max is None else min(n_max, dec.n_modes)
    fams = list(families)
    if ("small_step_beyond_L" in fams or "large_shift_at_small_step" in fams) and not p.ratio_ok_l:
        fams = [f for f in fams if f not in ("small_step_beyond_L", "large_shift_at_small_step")]
    if p.L is None:
        return [IdentityCheck("equal_shifts", 0, 0, float("nan"), skipped="a_s = a_l is excluded")]
    lim = gcs.sigma + p.a_l - margin
    cont = dec.continuator
    todo, out = [], []
    for fam, k, tau, xp, xm, fac in identity_instances(gcs, fams):
        if max(abs(xp.imag), abs(xm.imag)) >= lim:
            out.append(IdentityCheck(fam, k, tau, float("nan"), skipped="point outside continuation strip"))
            continue
        todo.append((fam, k, tau, xp, xm, fac))
    if not todo:
        return out
    pts = []
    for _, _, _, xp, xm, _ in todo:
        pts += [xp, xm]
    H = cont.H_batch(side, pts)[:, :n_max]
    ref_pts = sorted({abs(z.imag) for z in pts})
    ref = cont.H_batch(side, [math.pi / (4 * p.r) + 1j * y for y in ref_pts])[:, :n_max]
    ref_scale = {y: np.abs(ref[i]) for i, y in enumerate(ref_pts)}
    for i, (fam, k, tau, xp, xm, fac) in enumerate(todo):
        lhs = H[2 * i]
        rhs = fac * H[2 * i + 1]
        scale = np.maximum(ref_scale[abs(xp.imag)], ref_scale[abs(xm.imag)] * abs(fac))
        vanish = bool(np.all((np.abs(lhs) < floor * scale) & (np.abs(rhs) < floor * scale)))
        err = np.abs(lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + floor * scale)
        out.append(IdentityCheck(fam, k, tau, 0.0 if vanish else float(np.max(err)), vanishing=vanish))
    return out


def check_F_identity(dec: SpectralDecomposition, ell: int = 1, tau: int = 0, side=0, n_max: int = 4):
    """Measured ratios F_n(x_tau + i ell a_s/2)/F_n(x_tau - i ell a_s/2) and the predicted e^{4 ell r(sigma-a)}."""
    side = _side(side)
    gcs = dec.side_coupling(side)
    p = gcs.params
    x0 = tau * math.pi / (2 * p.r) + 0.5j * p.a_l
    cont = dec.continuator
    F = cont.F_batch(side, [x0 + 0.5j * ell * p.a_s, x0 - 0.5j * ell * p.a_s])[:, :n_max]
    return F[0] / F[1], math.exp(4 * ell * p.r * (gcs.sigma - p.a))


# ---------------------------------------------------------------- residue probe

def _deriv(f, z, h: float = 1e-3):
    return (f(z - 2 * h) - 8 * f(z - h) + 8 * f(z + h) - f(z + 2 * h)) / (12 * h)


def rho_ell_tau(gc: Coupling, ell: int, tau: int) -> complex:
    """Residue weight rho_{ell,tau} of the symmetry residue sum for the large-shift operator."""
    p = gc.params
    h = math.pi / (2 * p.r)
    dl, ds = p.sign("l"), p.sign("s")
    x_t = tau * h + 0.5j * p.a_l
    xt_t = tau * h + 0.5j * p.a_s
    Rl = eval_R(p, dl, x_t + 1j * ell * p.a_s)
    dRs = _deriv(lambda z: eval_R(p, ds, z), xt_t + 1j * ell * p.a_s)
    den = 1 + 0j
    for gm in gc.gamma:
        for s1 in (1, -1):
            for s2 in (1, -1):
                den *= eval_E(p, -x_t + s1 * 0.5j * ell * p.a_s + s2 * 1j * gm)
    return 1j * math.pi * Rl / dRs / den


def v_probe(params, n: int):
    """Entire even test function E(+-2x - ia)(e^{2inrx} + e^{-2inrx})."""
    def f(x):
        x = np.asarray(x, dtype=complex)
        return (eval_E(params, 2 * x - 1j * params.a) * eval_E(params, -2 * x - 1j * params.a)
                * 2 * np.cos(2 * n * params.r * x))
    return f


def symmetry_residue_probe(dec: SpectralDecomposition, h1, n: int = 0, side=0) -> dict:
    """Residue sum sum_{tau,ell} rho [h1*(x_tau - i ell a_s/2) h2(x_tau + ..) - h1*(x_tau + ..) h2(x_tau - ..)].

    h2 = H_n.  h1 is a callable or an int m (then h1 = H_m).  Returns the sum,
    the sum of absolute term sizes and their ratio.
    """
    side = _side(side)
    gcs = dec.side_coupling(side)
    p = gcs.params
    if p.L is None or not p.ratio_ok_l:
        raise RatioGuard("residue probe requires a_l/a_s non-integer")
    cont = dec.continuator
    h = math.pi / (2 * p.r)
    pts, meta = [], []
    for tau in (0, 1):
        for ell in range(1, p.L + 1):
            x0 = tau * h + 0.5j * p.a_l
            pts += [x0 - 0.5j * ell * p.a_s, x0 + 0.5j * ell * p.a_s]
            meta.append((ell, tau))
    H = cont.H_batch(side, pts)
    if isinstance(h1, (int, np.integer)):
        h1s = np.conj(cont.H_batch(side, [np.conj(z) for z in pts])[:, int(h1)])
    else:
        h1s = np.conj(np.asarray(h1(np.conj(np.array(pts))), dtype=complex))
    h2 = H[:, n]
    tot, size = 0j, 0.0
    for i, (ell, tau) in enumerate(meta):
        rho = rho_ell_tau(gcs, ell, tau)
        t1 = rho * h1s[2 * i] * h2[2 * i + 1]
        t2 = rho * h1s[2 * i + 1] * h2[2 * i]
        tot += t1 - t2
        size += abs(t1) + abs(t2)
    return {"sum": complex(tot), "size": size, "relative": abs(tot) / size if size else 0.0}


# ---------------------------------------------------------------- unboundedness probe

def t_probe(gc: Coupling, n: int):
    """t_n(x) = (e^{2inrx} + e^{-2inrx})/c_P(gamma; x)."""
    p = gc.params

    def f(x):
        x = np.asarray(x, dtype=complex)
        return 2 * np.cos(2 * n * p.r * x) / cP_func(gc, x)
    return f


def unboundedness_probe(gc: Coupling, rule, n_range=range(1, 9)) -> dict:
    """Norm ratios ||cal A_s t_n|| / ||t_n|| and their log-slope in n."""
    p = gc.params
    d = op_delta(p, "s")
    am = p.ad(-d)
    x = rule.nodes.astype(complex)
    q = rule.weights
    Va = coef_Va(d, gc, x)
    Vb = coef_Vb(d, gc, x)
    cp0 = cP_func(gc, x)
    dn_f = cp0 / cP_func(gc, x - 1j * am)
    rn_f = cP_func(gc, -x) / cP_func(gc, -x - 1j * am)
    ratios, cross = [], []
    ns = np.array(list(n_range))
    for n in ns:
        t = t_probe(gc, int(n))
        At = t(x - 1j * am) + Va * t(x + 1j * am) + Vb * t(x)
        e = np.exp(2j * n * p.r * x)
        dn = (dn_f * e + np.conj(dn_f) / e) / cp0
        rn = (rn_f * e + np.conj(rn_f) / e) / cp0
        alt = math.exp(2 * n * p.r * am) * dn + Vb * t(x) + math.exp(-2 * n * p.r * am) * rn
        cross.append(float(np.max(np.abs(At - alt)) / np.max(np.abs(At))))
        ratios.append(math.sqrt(np.sum(q * np.abs(At) ** 2) / np.sum(q * np.abs(t(x)) ** 2)))
    ratios = np.array(ratios)
    slope = float(np.polyfit(ns, np.log(ratios), 1)[0])
    return {"n": ns.tolist(), "ratios": ratios.tolist(), "slope": slope,
            "expected": 2 * p.r * am, "cross_check": max(cross)}
