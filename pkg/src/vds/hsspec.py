"""Nystrom discretization of the Hilbert-Schmidt integral operators, their
singular value decomposition, and analytic continuation of the eigenfunctions
F_n, H_n = P F_n into the complex plane.

Side 0 refers to the coupling gamma of a decomposition and side 1 to its dual
gamma'.  With M the symmetrized matrix of I(gamma) we have M v_n = lambda_n u_n,
u_n <-> e_n(gamma), v_n <-> e_n(gamma').
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContinuationFailure, DomainError, IllConditioned, OutOfStrip
from .specfun import Params, eval_s, p_delta
from .vdcore import (
    Coupling,
    P_func,
    c_func,
    check_coupling,
    kernel_matrix,
    kernel_S,
    residue_coef,
    w_func,
)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [0, pi/2r]."""

    n_nodes: int
    nodes: np.ndarray
    weights: np.ndarray


def gauss_rule(params: Params, n_nodes: int) -> QuadratureRule:
    """Gauss-Legendre rule mapped to [0, pi/2r]."""
    if n_nodes < 8:
        raise ValueError("n_nodes must be >= 8")
    t, wt = np.polynomial.legendre.leggauss(n_nodes)
    h = math.pi / (2 * params.r)
    return QuadratureRule(n_nodes, 0.5 * h * (t + 1), 0.5 * h * wt)


def half_weights(gc: Coupling, x) -> np.ndarray:
    """w(gamma; x)^{1/2} at real x."""
    return np.sqrt(np.real(w_func(gc, np.asarray(x, dtype=float))))


def build_I_matrix(gc: Coupling, rule: QuadratureRule) -> np.ndarray:
    """Symmetrized Nystrom matrix sqrt(q_i q_j) w(gamma;x_i)^{1/2} S(x_i,x_j) w(gamma';x_j)^{1/2}."""
    check_coupling(gc, "Pi_r")
    x, q = rule.nodes, rule.weights
    S = kernel_matrix(gc.params, gc.sigma, x, x)
    a = np.sqrt(q) * half_weights(gc, x)
    b = np.sqrt(q) * half_weights(gc.dual(), x)
    return a[:, None] * S * b[None, :]


def build_cI_matrix(gc: Coupling, rule: QuadratureRule) -> np.ndarray:
    """Symmetrized Nystrom matrix of the c-gauge operator with kernel S/(c(gamma;x)c(gamma';-y))."""
    check_coupling(gc, "Pi_r")
    x, q = rule.nodes, rule.weights
    S = kernel_matrix(gc.params, gc.sigma, x, x)
    cx = c_func(gc, x.astype(complex))
    cy = c_func(gc.dual(), -x.astype(complex))
    sq = np.sqrt(q)
    return (sq / cx)[:, None] * S * (sq / cy)[None, :]


@dataclass
class SpectralDecomposition:
    """Singular values and grid eigenvectors of the discretized I(gamma)."""

    coupling: Coupling
    rule: QuadratureRule
    lambdas: np.ndarray
    U: np.ndarray
    V: np.ndarray
    rank: int
    degenerate_blocks: list = field(default_factory=list)
    sign_agree: np.ndarray = None
    _cont: object = field(default=None, repr=False)

    @property
    def n_modes(self) -> int:
        return len(self.lambdas)

    def side_coupling(self, side: int) -> Coupling:
        return self.coupling if side == 0 else self.coupling.dual()

    def vectors(self, side: int) -> np.ndarray:
        return self.U if side == 0 else self.V

    def e(self, side: int = 0) -> np.ndarray:
        """Grid samples e_n(x_i), columns indexed by n."""
        return self.vectors(side) / np.sqrt(self.rule.weights)[:, None]

    def F(self, side: int = 0) -> np.ndarray:
        """Grid samples F_n = w^{-1/2} e_n."""
        return self.e(side) / half_weights(self.side_coupling(side), self.rule.nodes)[:, None]

    def f(self, side: int = 0) -> np.ndarray:
        """Grid samples f_n = F_n / c."""
        c = c_func(self.side_coupling(side), self.rule.nodes.astype(complex))
        return self.F(side) / c[:, None]

    def F_real(self, side: int, x) -> np.ndarray:
        """F_n(side; x) at real x by the Nystrom extension; shape (len(x), n_modes)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        o = 1 - side
        gc = self.coupling
        S = kernel_matrix(gc.params, gc.sigma, x, self.rule.nodes)
        b = np.sqrt(self.rule.weights) * half_weights(self.side_coupling(o), self.rule.nodes)
        return (S * b[None, :]) @ self.vectors(o) / self.lambdas[None, :]

    @property
    def continuator(self) -> "Continuator":
        if self._cont is None:
            self._cont = Continuator(self)
        return self._cont

    def to_json(self) -> dict:
        return {
            "coupling": self.coupling.to_json(),
            "params": self.coupling.params.to_dict(),
            "n_nodes": self.rule.n_nodes,
            "rank": int(self.rank),
            "lambdas": [float(v) for v in self.lambdas],
            "degenerate_blocks": [list(map(int, b)) for b in self.degenerate_blocks],
            "sign_agree": [bool(v) for v in self.sign_agree],
        }


def decompose(gc: Coupling, rule: QuadratureRule, n_modes: int | None = None,
              rank_cut: float = 1e-13, degen_tol: float = 1e-9) -> SpectralDecomposition:
    """SVD of the Nystrom matrix with sign and ordering conventions applied."""
    M = build_I_matrix(gc, rule)
    U, s, Vt = np.linalg.svd(M)
    V = Vt.T
    rank = int(np.sum(s / s[0] >= rank_cut))
    if n_modes is None:
        n_modes = min(rank, 40)
    if n_modes > rank:
        raise IllConditioned(f"requested {n_modes} modes but resolved rank is {rank}")
    U, V, s = U[:, :n_modes].copy(), V[:, :n_modes].copy(), s[:n_modes].copy()
    sg = np.sign(U[0, :])
    sg[sg == 0] = 1
    U *= sg
    V *= sg
    agree = V[0, :] > 0
    blocks, i = [], 0
    while i < n_modes:
        j = i
        while j + 1 < n_modes and abs(s[j + 1] - s[i]) <= degen_tol * s[i]:
            j += 1
        if j > i:
            blocks.append(list(range(i, j + 1)))
        i = j + 1
    return SpectralDecomposition(gc, rule, s, U, V, rank, blocks, agree)


# ---------------------------------------------------------------- continuation

_LEVELS = (1024, 2048, 4096, 8192, 16384)


class Continuator:
    """Analytic continuation of F_n(side; x) into the cut strip |Im x| < sigma + a_l.

    lambda F(side; x) = int_0^{pi/2r} S(sigma;x,y) w(o;y) F(o;y) dy
                        + sum_ell C_ell(x) w(o; z_ell) F(o; z_ell),
    z_ell = x - i sigma - i ell a_s, summed over the kernel poles that crossed
    the real axis.  The integral uses a periodic midpoint rule whose node count
    is set by the distance of the nearest kernel pole to the real axis.  Near
    band lines and on the cuts Re x = 0 mod pi/2r the mean value of H = P F
    over a small circle is used instead.
    """

    def __init__(self, dec: SpectralDecomposition, band_min: float = 2e-3, cut_min: float = 0.05,
                 circle_radius: float = 0.15, circle_points: int = 32):
        self.dec = dec
        self.gc = dec.coupling
        self.p = self.gc.params
        self.sigma = self.gc.sigma
        self.band_min = band_min
        self.cut_min = cut_min
        self.rho = circle_radius
        self.kc = circle_points
        self._grids = {}
        self._memo = {}
        p = self.p
        lam = sorted({k * p.a_plus + l * p.a_minus for k in range(12) for l in range(12)})
        self._lam = np.array([v for v in lam if v < 4 * p.a_l + 4 * self.sigma])
        self.strip = self.sigma + p.a_l
        self.d_w = [self.dec.side_coupling(s).d for s in (0, 1)]

    # -- geometry
    def band_distance(self, X: float) -> float:
        return float(np.min(np.abs(X - self.sigma - self._lam)))

    def _cut_distance(self, x: complex) -> float:
        h = math.pi / (2 * self.p.r)
        re = x.real % h
        return min(re, h - re)

    def _safe(self, x: complex) -> bool:
        X = x.imag
        if X > 1e-14 and self.band_distance(X) < self.band_min:
            return False
        if X >= self.sigma - self.cut_min and self._cut_distance(x) < self.cut_min:
            return False
        return True

    def _pick_K(self, x: complex, side: int) -> int:
        d = min(self.band_distance(x.imag), self.d_w[1 - side])
        for K in _LEVELS:
            if 4 * self.p.r * d * K >= 40:
                return K
        return _LEVELS[-1]

    def _grid(self, K: int):
        if K not in self._grids:
            h = math.pi / (2 * self.p.r) / K
            y = (np.arange(K) + 0.5) * h
            WF = []
            for side in (0, 1):
                w = np.real(w_func(self.dec.side_coupling(side), y.astype(complex)))
                WF.append(w[:, None] * self.dec.F_real(side, y))
            self._grids[K] = (y, h, WF)
        return self._grids[K]

    # -- evaluation
    @staticmethod
    def _normalize(x: complex, r: float):
        per = math.pi / r
        re = x.real - per * math.floor(x.real / per + 0.5)
        z = complex(re, x.imag)
        if z.imag < 0:
            z = -z
        conj = False
        if z.real < 0:
            z = -z.conjugate()
            conj = True
        return z, conj

    def F_vec(self, side: int, x: complex, allow_circle: bool = True) -> np.ndarray:
        """F_n(side; x) for all modes n."""
        return self.F_batch(side, [x], allow_circle)[0]

    def H_vec(self, side: int, x: complex) -> np.ndarray:
        """H_n(side; x) = P(side; x) F_n(side; x), by circle means where needed."""
        return self.H_batch(side, [x])[0]

    def F_batch(self, side: int, xs, allow_circle: bool = True) -> np.ndarray:
        """F_n(side; x) for a list of points; shape (len(xs), n_modes)."""
        norm = [self._normalize(complex(x), self.p.r) for x in xs]
        self._fill(side, [z for z, _ in norm], allow_circle)
        out = np.empty((len(xs), self.dec.n_modes), dtype=complex)
        for i, (z, conj) in enumerate(norm):
            v = self._memo[self._key(side, z, allow_circle)]
            out[i] = np.conj(v) if conj else v
        return out

    def H_batch(self, side: int, xs) -> np.ndarray:
        """H_n(side; x) for a list of points; shape (len(xs), n_modes)."""
        norm = [self._normalize(complex(x), self.p.r) for x in xs]
        safe = [z for z, _ in norm if self._safe(z)]
        unsafe = [z for z, _ in norm if not self._safe(z)]
        self._fill(side, safe, False)
        circ = self._circle_H(side, unsafe) if unsafe else {}
        gcs = self.dec.side_coupling(side)
        out = np.empty((len(xs), self.dec.n_modes), dtype=complex)
        for i, (z, conj) in enumerate(norm):
            if self._safe(z):
                v = P_func(gcs, z) * self._memo[self._key(side, z, False)]
            else:
                v = circ[(round(z.real, 13), round(z.imag, 13))]
            out[i] = np.conj(v) if conj else v
        return out

    @staticmethod
    def _key(side, z, allow_circle):
        return (side, round(z.real, 13), round(z.imag, 13), allow_circle)

    def _fill(self, side: int, zs, allow_circle: bool):
        """Compute and memoize F(side; z) at normalized points zs."""
        todo, seen = [], set()
        for z in zs:
            k = self._key(side, z, allow_circle)
            if k in self._memo or k in seen:
                continue
            if z.imag >= self.strip - 1e-9:
                raise OutOfStrip(f"Im x = {z.imag:.4g} outside the strip |Im x| < sigma + a_l = {self.strip:.4g}")
            seen.add(k)
            todo.append(z)
        if not todo:
            return
        real = [z for z in todo if z.imag < 1e-14]
        circ = [z for z in todo if z.imag >= 1e-14 and allow_circle and not self._safe(z)]
        direct = [z for z in todo if z.imag >= 1e-14 and not (allow_circle and not self._safe(z))]
        if real:
            vals = self.dec.F_real(side, [z.real for z in real]).astype(complex)
            for z, v in zip(real, vals):
                self._memo[self._key(side, z, allow_circle)] = v
        if direct:
            vals = self._direct(side, direct, allow_circle)
            for z, v in zip(direct, vals):
                self._memo[self._key(side, z, allow_circle)] = v
        if circ:
            gcs = self.dec.side_coupling(side)
            hv, fv, pscale = self._circle_H(side, circ, with_F=True)
            for z in circ:
                kz = (round(z.real, 13), round(z.imag, 13))
                P0 = P_func(gcs, z)
                if abs(P0) > 1e-6 * pscale[kz]:
                    val = hv[kz] / P0
                else:
                    val = fv[kz]  # P vanishes at z; modes where H does not vanish have a pole (nan)
                self._memo[self._key(side, z, allow_circle)] = val

    def _direct(self, side: int, zs, allow_circle: bool) -> np.ndarray:
        zs = np.array(zs, dtype=complex)
        Ks = np.array([self._pick_K(z, side) for z in zs])
        out = np.empty((len(zs), self.dec.n_modes), dtype=complex)
        for K in np.unique(Ks):
            sel = np.nonzero(Ks == K)[0]
            out[sel] = self._direct_K(side, zs[sel], int(K), allow_circle)
        return out

    def _direct_K(self, side: int, zs: np.ndarray, K: int, allow_circle: bool) -> np.ndarray:
        o = 1 - side
        y, h, WF = self._grid(K)
        tot = np.empty((len(zs), WF[o].shape[1]), dtype=complex)
        step = max(1, 20000 // len(y))  # bounds the kernel block size
        for i in range(0, len(zs), step):
            S = kernel_S(self.p, self.sigma, zs[i:i + step, None], y[None, :].astype(complex), method="product")
            tot[i:i + step] = h * (S @ WF[o])
        L = self.p.L if self.p.L is not None else 0
        go = self.dec.side_coupling(o)
        for ell in range(L + 1):
            sel = np.nonzero(zs.imag > self.sigma + ell * self.p.a_s)[0]
            if sel.size == 0:
                break
            zl = zs[sel] - 1j * self.sigma - 1j * ell * self.p.a_s
            C = residue_coef(self.gc, ell, zs[sel])
            Fo = self.F_batch(o, list(zl), allow_circle)
            tot[sel] += (C * w_func(go, zl))[:, None] * Fo
        return tot / self.dec.lambdas[None, :]

    def _circle_points(self, z: complex) -> np.ndarray:
        k = self.kc
        best, best_pts = -np.inf, None
        for j in range(8):
            phi = (j + 0.5) * math.pi / (4 * k) + math.pi / k
            pts = z + self.rho * np.exp(1j * (2 * math.pi * np.arange(k) / k + phi))
            score = min(self._safety(pt) for pt in pts)
            if score > best:
                best, best_pts = score, pts
        return best_pts

    def _circle_H(self, side: int, zs, with_F: bool = False):
        """Mean of H over a circle around each z; keyed by rounded z.

        With with_F the circle means of F itself and the mean of |P| are
        returned too; the F mean is nan for modes where H does not vanish at z.
        """
        gcs = self.dec.side_coupling(side)
        allpts = [self._circle_points(z) for z in zs]
        flat = np.concatenate(allpts)
        Fv = self.F_batch(side, list(flat), allow_circle=False)
        Pv = P_func(gcs, flat)
        Hv = Pv[:, None] * Fv
        out, fout, pout, k = {}, {}, {}, self.kc
        for i, z in enumerate(zs):
            kz = (round(z.real, 13), round(z.imag, 13))
            sl = slice(i * k, (i + 1) * k)
            out[kz] = Hv[sl].mean(axis=0)
            if with_F:
                pout[kz] = float(np.mean(np.abs(Pv[sl])))
                fout[kz] = self._zero_quotient(Hv[sl], Pv[sl], allpts[i] - z)
        if with_F:
            return out, fout, pout
        return out

    @staticmethod
    def _zero_quotient(H: np.ndarray, P: np.ndarray, dz: np.ndarray) -> np.ndarray:
        """F = H/P at a zero of P from the Taylor coefficients of H and P on a circle.

        The first non-negligible coefficient of P fixes the zero order m; modes
        whose H coefficients below m do not vanish have a pole there (nan).
        """
        k = len(dz)
        rho = np.abs(dz[0])
        u = dz / rho
        cP = [np.mean(P * u ** (-j)) for j in range(4)]
        cH = [np.mean(H * (u ** (-j))[:, None], axis=0) for j in range(4)]
        scale = np.mean(np.abs(P))
        m = next((j for j in range(4) if abs(cP[j]) > 1e-6 * scale), None)
        hs = np.mean(np.abs(H), axis=0)
        if m is None:
            return np.full(H.shape[1], np.nan, dtype=complex)
        ok = np.all([np.abs(cH[j]) < 1e-7 * hs for j in range(m)], axis=0) if m else np.ones(H.shape[1], bool)
        return np.where(ok, cH[m] / cP[m], np.nan)

    def _safety(self, pt: complex) -> float:
        zz, _ = self._normalize(complex(pt), self.p.r)
        s = self.band_distance(zz.imag) / self.band_min if zz.imag > 1e-14 else 10.0
        if zz.imag >= self.sigma - self.cut_min:
            s = min(s, self._cut_distance(zz) / self.cut_min)
        if zz.imag >= self.strip - 0.02:
            s = -1.0
        return s


def _side(target) -> int:
    if target in (0, "gamma", "g"):
        return 0
    if target in (1, "dual", "gamma'", "gamma_prime"):
        return 1
    raise ValueError(f"unknown target {target!r}")


def continue_F(dec: SpectralDecomposition, target, n: int, x: complex) -> complex:
    """lambda_n F_n(target; x), continued into the cut strip."""
    if not (0 <= n < dec.n_modes):
        raise IllConditioned(f"mode {n} not resolved")
    return complex(dec.lambdas[n] * dec.continuator.F_vec(_side(target), x)[n])


def eval_F(dec: SpectralDecomposition, target, n: int, x: complex) -> complex:
    """F_n(target; x), continued into the cut strip."""
    return complex(dec.continuator.F_vec(_side(target), x)[n])


def eval_H(dec: SpectralDecomposition, target, n: int, x: complex) -> complex:
    """H_n(target; x) = P(target; x) F_n(target; x)."""
    return complex(dec.continuator.H_vec(_side(target), x)[n])


def convergence_check(gc: Coupling, n_nodes: int = 200, n_modes: int = 11) -> float:
    """Max relative change of lambda_n, n < n_modes, between N and 2N nodes."""
    p = gc.params
    a = decompose(gc, gauss_rule(p, n_nodes), n_modes)
    b = decompose(gc, gauss_rule(p, 2 * n_nodes), n_modes)
    return float(np.max(np.abs(a.lambdas - b.lambdas) / b.lambdas))


# ---------------------------------------------------------------- closed forms

def free_lambda(params: Params, n) -> np.ndarray:
    """Singular values of I(gamma_L(a_s)): 2 pi i e^{r a_l} sinh((n+1) r a_s) / (p_l^2 s_l(i a_s) sinh((n+1) r a_l))."""
    n = np.asarray(n)
    r, As, Al = params.r, params.a_s, params.a_l
    dl = params.sign("l")
    pre = 2j * math.pi * math.exp(r * Al) / (p_delta(params, dl) ** 2 * eval_s(params, dl, 1j * As))
    return pre.real * np.sinh((n + 1) * r * As) / np.sinh((n + 1) * r * Al)


def elliptic_lambda(params: Params, which: str, n) -> np.ndarray:
    """Singular values pi e^{r b} / (p_b cosh((n+1) r b)) of the flipped free couplings, b = a_l or a_s."""
    n = np.asarray(n)
    d = params.sign(which)
    b = params.ad(d)
    return math.pi * math.exp(params.r * b) / (p_delta(params, d) * np.cosh((n + 1) * params.r * b))


def free_eigvecs(params: Params, x, n_max: int) -> np.ndarray:
    """sqrt(4r/pi) sin(2(n+1) r x), columns n < n_max."""
    n = np.arange(n_max)
    x = np.asarray(x, dtype=float)
    return math.sqrt(4 * params.r / math.pi) * np.sin(2 * (n[None, :] + 1) * params.r * x[:, None])


__all__ = [
    "QuadratureRule", "gauss_rule", "build_I_matrix", "build_cI_matrix", "SpectralDecomposition",
    "decompose", "Continuator", "continue_F", "eval_F", "eval_H", "convergence_check", "DomainError",
    "free_lambda", "elliptic_lambda", "free_eigvecs",
]
