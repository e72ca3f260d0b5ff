"""Couplings, parameter-space predicates, the dual map, and the closed-form
kernels, weights and difference-operator coefficients built from specfun.

Conventions:
  * ``delta`` = +1 / -1 selects a_plus / a_minus; the A-operator with label
    delta shifts by a_{-delta} and its coefficients are built from R_delta.
  * A coupling in the mixed regime carries imaginary parts +-pi/2r on
    components 4..7.  Everything here depends on those only modulo i pi/r,
    provided their sum vanishes; flips are normalized back to that form.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, OutOfRange, PoleProximity, RatioGuard
from .specfun import (
    DEFAULT_TP,
    Params,
    eval_E,
    eval_G,
    eval_Gt_inv,
    eval_R,
    eval_s,
    p_delta,
    qprod,
    residue_r,
)

REAL = "real"
MIXED = "mixed"
_TOL = 1e-12


def _asc(x):
    return np.asarray(x, dtype=complex)


def _ret(val, like):
    return complex(val) if np.ndim(like) == 0 else val


# ---------------------------------------------------------------- couplings

def _balance_signs(g: np.ndarray, signs: list[int]) -> list[int]:
    """Rebalance imaginary signs of components 4..7 so that they sum to zero.

    Switching one sign shifts that component by i pi/r, which leaves every
    coupling-dependent function invariant once the sum is zero again.
    Components with zero real part are switched first, then higher indices.
    """
    signs = list(signs)
    order = sorted(range(4), key=lambda j: (abs(g[4 + j]) > _TOL, -j))
    while sum(signs) != 0:
        want = 1 if sum(signs) > 0 else -1
        for j in order:
            if signs[j] == want:
                signs[j] = -want
                break
    return signs


@dataclass(frozen=True)
class Coupling:
    """Coupling vector gamma (8 complex numbers) with its regime tag."""

    params: Params
    gamma: tuple
    regime: str = REAL

    def __post_init__(self):
        gam = tuple(complex(v) for v in self.gamma)
        if len(gam) != 8:
            raise DomainError("gamma must have 8 components")
        object.__setattr__(self, "gamma", gam)
        half = math.pi / (2 * self.params.r)
        im = np.array([v.imag for v in gam])
        if self.regime == REAL:
            if np.any(np.abs(im) > 1e-12):
                raise DomainError("real regime requires Im gamma = 0")
        elif self.regime == MIXED:
            if np.any(np.abs(im[:4]) > 1e-12):
                raise DomainError("mixed regime requires Im gamma_mu = 0 for mu < 4")
            units = im[4:] / half
            if np.any(np.abs(np.abs(units) - 1) > 1e-9):
                raise DomainError("mixed regime requires Im gamma_mu = +-pi/2r for mu >= 4")
            if abs(units.sum()) > 1e-9:
                raise DomainError("mixed regime requires sum of Im gamma_mu = 0")
        else:
            raise DomainError(f"unknown regime {self.regime!r}")

    # -- constructors
    @classmethod
    def real(cls, params: Params, g) -> "Coupling":
        return cls(params, tuple(complex(v) for v in g), REAL)

    @classmethod
    def mixed(cls, params: Params, g, signs=(1, 1, -1, -1)) -> "Coupling":
        g = np.asarray(g, dtype=float)
        signs = _balance_signs(g, [int(np.sign(s)) for s in signs])
        half = math.pi / (2 * params.r)
        gam = [complex(v) for v in g[:4]] + [complex(g[4 + j], signs[j] * half) for j in range(4)]
        return cls(params, tuple(gam), MIXED)

    # -- derived quantities
    @property
    def garr(self) -> np.ndarray:
        return np.array(self.gamma, dtype=complex)

    @property
    def g(self) -> np.ndarray:
        return self.garr.real.copy()

    @property
    def im_signs(self) -> list[int]:
        half = math.pi / (2 * self.params.r)
        return [int(round(v.imag / half)) for v in self.gamma[4:]]

    @property
    def sigma(self) -> float:
        return float(-0.25 * self.g.sum())

    @property
    def zeta_dot(self) -> float:
        """<zeta, gamma> (real, since the imaginary parts sum to zero)."""
        return float(self.g.sum())

    def dual(self) -> "Coupling":
        """gamma' = -J gamma = -gamma - sigma zeta."""
        s = self.sigma
        if self.regime == REAL:
            return Coupling.real(self.params, -self.g - s)
        return Coupling.mixed(self.params, -self.g - s, [-v for v in self.im_signs])

    def flip(self, mask) -> "Coupling":
        """Sign flip gamma_mu -> -gamma_mu on the components selected by mask."""
        mask = np.asarray(mask, dtype=bool)
        g = np.where(mask, -self.g, self.g)
        if self.regime == REAL:
            return Coupling.real(self.params, g)
        signs = [-s if mask[4 + j] else s for j, s in enumerate(self.im_signs)]
        return Coupling.mixed(self.params, g, signs)

    def permute(self, perm) -> "Coupling":
        perm = list(perm)
        if self.regime == REAL:
            return Coupling.real(self.params, self.g[perm])
        if sorted(perm[:4]) != [0, 1, 2, 3]:
            raise DomainError("mixed regime only allows S4 x S4 permutations")
        signs = self.im_signs
        return Coupling.mixed(self.params, self.g[perm], [signs[p - 4] for p in perm[4:]])

    @property
    def d(self) -> float:
        return float(np.min(self.g + self.params.a))

    @property
    def m(self) -> float:
        return float(min(self.params.a_s, self.d, self.sigma))

    def in_Pi_tilde(self) -> bool:
        return bool(np.all(np.abs(self.g) < self.params.a))

    def in_Pi(self) -> bool:
        return self.in_Pi_tilde() and self.dual().in_Pi_tilde()

    def in_Pi_r(self) -> bool:
        return self.in_Pi() and 0 < self.sigma < self.params.a

    def is_self_dual(self, tol: float = 1e-12) -> bool:
        """gamma' equals gamma up to a permutation of the real parts within each block."""
        gd = self.dual().g
        return bool(
            np.allclose(np.sort(gd[:4]), np.sort(self.g[:4]), atol=tol)
            and np.allclose(np.sort(gd[4:]), np.sort(self.g[4:]), atol=tol)
        ) if self.regime == MIXED else bool(np.allclose(np.sort(gd), np.sort(self.g), atol=tol))

    def key(self) -> tuple:
        return (self.regime,) + tuple(np.round(self.g, 12)) + tuple(self.im_signs if self.regime == MIXED else ())

    # -- serialization
    def to_json(self) -> dict:
        half = math.pi / (2 * self.params.r)
        return {
            "gamma_re": [float(v) for v in self.g],
            "gamma_im_units_pi_over_2r": [int(round(v.imag / half)) for v in self.gamma],
            "regime": self.regime,
        }

    @classmethod
    def from_json(cls, params: Params, data: dict) -> "Coupling":
        g = data["gamma_re"]
        units = data.get("gamma_im_units_pi_over_2r", [0] * 8)
        regime = data.get("regime", REAL)
        half = math.pi / (2 * params.r)
        return cls(params, tuple(complex(g[j], units[j] * half) for j in range(8)), regime)


def check_coupling(gc: Coupling, domain: str = "Pi_r") -> Coupling:
    """Validate membership of gc in Pi_tilde / Pi / Pi_r; return gc."""
    ok = {"Pi_tilde": gc.in_Pi_tilde, "Pi": gc.in_Pi, "Pi_r": gc.in_Pi_r}[domain]()
    if not ok:
        raise DomainError(f"coupling fails predicate in_{domain} (g={gc.g.tolist()}, sigma={gc.sigma:.6g})")
    return gc


# ---------------------------------------------------------------- presets

def gamma_f(p: Params) -> Coupling:
    """Free coupling: c = V = V_a = 1 and V_b = 0."""
    a = p.a
    g = [-a, -p.a_minus / 2, -p.a_plus / 2, 0.0]
    return Coupling.mixed(p, g + g, (1, 1, -1, -1))


def gamma_L(p: Params, b: float) -> Coupling:
    """Free Lame family gamma_f + b zeta/2."""
    return Coupling.mixed(p, gamma_f(p).g + b / 2, (1, 1, -1, -1))


def gamma_dot(p: Params) -> Coupling:
    """gamma_L(a_s), the explicitly solvable case."""
    return gamma_L(p, p.a_s)


def gamma_l(p: Params) -> Coupling:
    """Flip of components 3, 6, 7 of gamma_dot."""
    return gamma_dot(p).flip([0, 0, 0, 1, 0, 0, 1, 1])


def gamma_s(p: Params) -> Coupling:
    """Flip of components 1, 3, 5, 7 of gamma_dot."""
    return gamma_dot(p).flip([0, 1, 0, 1, 0, 1, 0, 1])


def gamma_0(p: Params) -> Coupling:
    """Flip of component 0 of gamma_dot (component 2 vanishes)."""
    return gamma_dot(p).flip([1, 0, 1, 0, 0, 0, 0, 0])


def gamma_3(p: Params) -> Coupling:
    """Flip of component 3 of gamma_dot."""
    return gamma_dot(p).flip([0, 0, 1, 1, 0, 0, 0, 0])


def gamma_p(p: Params) -> Coupling:
    """Flip of components 1, 5, 6 of gamma_dot; has sigma = 0."""
    return gamma_dot(p).flip([0, 1, 1, 0, 0, 1, 1, 0])


def self_dual_real(p: Params, u, s: float) -> Coupling:
    """Self-dual real coupling g = (u, -u - s); then sigma = s and g' = (-u - s, u)."""
    u = np.asarray(u, dtype=float)
    return Coupling.real(p, np.concatenate([u, -u - s]))


def self_dual_mixed(p: Params, u, s: float) -> Coupling:
    """Self-dual mixed coupling; u = (g0, g1, g4, g5) and the partners are -u - s."""
    u = np.asarray(u, dtype=float)
    if len(u) != 4:
        raise DomainError("need 4 free components")
    g = np.array([u[0], u[1], -u[1] - s, -u[0] - s, u[2], u[3], -u[3] - s, -u[2] - s])
    return Coupling.mixed(p, g, (1, 1, -1, -1))


PRESETS = ("gamma_f", "gamma_L", "gamma_dot", "gamma_l", "gamma_s", "gamma_0", "gamma_3",
           "gamma_p", "pi_rs1", "pi_rs2")


def preset(p: Params, name: str, **kw) -> Coupling:
    """Construct a named preset coupling."""
    if name == "gamma_f":
        return gamma_f(p)
    if name == "gamma_L":
        b = kw.get("b", p.a_s)
        if isinstance(b, str):
            b = {"a_s": p.a_s, "a_l": p.a_l, "a_plus": p.a_plus, "a_minus": p.a_minus}[b]
        return gamma_L(p, float(b))
    if name in ("gamma_dot", "gamma_l", "gamma_s", "gamma_0", "gamma_3", "gamma_p"):
        return globals()[name](p)
    if name == "pi_rs1":
        return self_dual_real(p, kw["u"], kw["s"])
    if name == "pi_rs2":
        return self_dual_mixed(p, kw["u"], kw["s"])
    raise DomainError(f"unknown preset {name!r}")


# ---------------------------------------------------------------- c, w, P

def c_func(gc: Coupling, x):
    """Harish-Chandra function c(gamma; x) = prod_mu G(x - i gamma_mu) / G(2x + ia)."""
    p = gc.params
    xx = _asc(x)
    val = 1 / eval_G(p, 2 * xx + 1j * p.a)
    for gm in gc.gamma:
        val = val * eval_G(p, xx - 1j * gm)
    return _ret(val, x)


def w_func(gc: Coupling, x):
    """Weight w = 1/(c(x) c(-x))."""
    xx = _asc(x)
    return _ret(1 / (c_func(gc, xx) * c_func(gc, -xx)), x)


def P_func(gc: Coupling, x):
    """P(gamma; x) = prod_mu E(x + i gamma_mu) E(-x + i gamma_mu) (entire)."""
    p = gc.params
    xx = _asc(x)
    val = np.ones_like(xx)
    for gm in gc.gamma:
        val = val * eval_E(p, xx + 1j * gm) * eval_E(p, -xx + 1j * gm)
    return _ret(val, x)


def mH_func(gc: Coupling, x):
    """Multiplier m_H = w/P = G(+-2x + ia)/P(-gamma; x)."""
    p = gc.params
    xx = _asc(x)
    den = np.ones_like(xx)
    for gm in gc.gamma:
        den = den * eval_E(p, xx - 1j * gm) * eval_E(p, -xx - 1j * gm)
    val = eval_G(p, 2 * xx + 1j * p.a) * eval_G(p, -2 * xx + 1j * p.a) / den
    return _ret(val, x)


def u_func(gc: Coupling, x):
    """u = -e^{-4irx} c(x)/c(-x)."""
    xx = _asc(x)
    r = gc.params.r
    return _ret(-np.exp(-4j * r * xx) * c_func(gc, xx) / c_func(gc, -xx), x)


def cP_func(gc: Coupling, x):
    """Auxiliary Harish-Chandra function c_P."""
    p = gc.params
    xx = _asc(x)
    num = np.ones_like(xx)
    for gm in gc.gamma:
        num = num * eval_E(p, xx + 1j * gm) * eval_E(p, xx - 1j * gm)
    h = 0.5j * (p.a_plus - p.a_minus)
    den = -np.expm1(-4j * p.r * xx) * eval_E(p, 2 * xx + h) * eval_E(p, 2 * xx - h)
    return _ret(num / den, x)


def weights(gc: Coupling, x):
    """(w, w_P, w_H) at real x in (0, pi/2r)."""
    if not gc.in_Pi_tilde():
        raise DomainError("weights require g in Pi_tilde")
    xx = _asc(x)
    w = w_func(gc, xx)
    wP = 1 / (cP_func(gc, xx) * cP_func(gc, -xx))
    wH = mH_func(gc, xx) / P_func(gc, xx)
    out = tuple(np.real(v) for v in (w, wP, wH))
    if np.ndim(x) == 0:
        return tuple(float(v) for v in out)
    return out


# ---------------------------------------------------------------- kernels

def _check_sigma(p: Params, sigma: float):
    if not (0 < sigma < 2 * p.a):
        raise DomainError("sigma must lie in (0, 2a)")


def _logS_coef(p: Params, sigma: float, tp=DEFAULT_TP):
    r = p.r
    rate = 2 * r * min(sigma, 2 * p.a - sigma)
    N = int(math.ceil(math.log(1 / tp.eps) / rate)) + 2
    n = np.arange(1, N + 1)
    num = np.exp(-2 * n * r * sigma) - np.exp(-2 * n * r * (2 * p.a - sigma))
    coef = 4 * num / (n * np.expm1(-2 * n * r * p.a_plus) * np.expm1(-2 * n * r * p.a_minus))
    return n, coef


def kernel_S(p: Params, sigma: float, x, y, method: str = "auto"):
    """Kernel S(sigma; x, y) = prod_{d1,d2} G(d1 x + d2 y - ia + i sigma) (broadcast)."""
    xx, yy = np.broadcast_arrays(_asc(x), _asc(y))
    real_pts = np.all(np.abs(xx.imag) < 1e-15) and np.all(np.abs(yy.imag) < 1e-15)
    if method == "series" or (method == "auto" and real_pts and 0 < sigma < 2 * p.a):
        _check_sigma(p, sigma)
        n, coef = _logS_coef(p, sigma)
        r = p.r
        cx = np.cos(2 * r * n * xx.real[..., None])
        cy = np.cos(2 * r * n * yy.real[..., None])
        val = np.exp(np.sum(cx * cy * coef, axis=-1))
        return _ret(val.astype(complex), np.broadcast(x, y) if np.ndim(x) or np.ndim(y) else x)
    shift = -1j * p.a + 1j * sigma
    val = (eval_G(p, xx + yy + shift) * eval_G(p, xx - yy + shift)
           * eval_G(p, -xx + yy + shift) * eval_G(p, -xx - yy + shift))
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return complex(val)
    return val


def kernel_matrix(p: Params, sigma: float, x, y):
    """Real kernel matrix S(sigma; x_i, y_j) for real node vectors x, y."""
    _check_sigma(p, sigma)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, coef = _logS_coef(p, sigma)
    cx = np.cos(2 * p.r * np.outer(x, n))
    cy = np.cos(2 * p.r * np.outer(y, n))
    return np.exp((cx * coef) @ cy.T)


def kernel_S_outer(p: Params, sigma: float, x, y):
    """S(sigma; x_i, y_j) for complex x (vector) and real y (vector); product form."""
    x = _asc(x)[:, None]
    y = _asc(y)[None, :]
    return kernel_S(p, sigma, x, y, method="product")


def kernel_D(p: Params, j: int, sigma: float, x, y):
    """D_j = S(sigma; x, y) - e^{4jr(sigma - a)} S(sigma; x - i j a_s, y)."""
    if j < 1:
        raise OutOfRange("j must be a positive integer")
    xx = _asc(x)
    return (kernel_S(p, sigma, xx, y, method="product")
            - math.exp(4 * j * p.r * (sigma - p.a)) * kernel_S(p, sigma, xx - 1j * j * p.a_s, y, method="product"))


def kernel_K(gc: Coupling, x, y):
    """Kernel S(sigma; x, y)/(c(gamma; x) c(gamma'; -y)) of the operator in the c-gauge."""
    xx, yy = np.broadcast_arrays(_asc(x), _asc(y))
    S = kernel_S(gc.params, gc.sigma, xx, yy)
    return S / (c_func(gc, xx) * c_func(gc.dual(), -yy))


# ---------------------------------------------------------------- coefficients

def _R(p, d, z):
    return eval_R(p, d, z)


def _ratio_guard(p: Params, delta: int):
    shift_small = p.ad(-delta) <= p.ad(delta)
    if p.a_plus == p.a_minus:
        raise RatioGuard("a_s = a_l is excluded")
    if shift_small and not p.ratio_ok_s:
        raise RatioGuard("a_s/a_l in {1, 1/2} excluded for the small-shift operator")
    if not shift_small and not p.ratio_ok_l:
        raise RatioGuard("a_l/a_s integer excluded for the large-shift operator")


def coef_V(delta: int, gc: Coupling, x):
    """Shift coefficient V_delta(gamma; x)."""
    p = gc.params
    xx = _asc(x)
    ad, am = p.ad(delta), p.ad(-delta)
    num = np.ones_like(xx)
    for gm in gc.gamma:
        num = num * _R(p, delta, xx - 1j * gm - 0.5j * am)
    den = _R(p, delta, 2 * xx + 0.5j * ad) * _R(p, delta, 2 * xx - 1j * am + 0.5j * ad)
    return _ret(num / den, x)


def _p_t(gc: Coupling, delta: int):
    p = gc.params
    ad = p.ad(delta)
    h = math.pi / (2 * p.r)
    gam = gc.garr
    zd = gc.zeta_dot
    p0 = np.prod(_R(p, delta, 1j * gam))
    p1 = np.prod(_R(p, delta, 1j * gam - h))
    p2 = math.exp(-2 * p.r * ad + p.r * zd) * np.prod(_R(p, delta, 1j * gam - 0.5j * ad))
    p3 = math.exp(-2 * p.r * ad - p.r * zd) * np.prod(_R(p, delta, 1j * gam + h + 0.5j * ad))
    return [p0, p1, p2, p3]


XI_DEFAULT = 0.31  # in units of pi/r


def coef_Vb(delta: int, gc: Coupling, x, xi: float = XI_DEFAULT):
    """Additive coefficient V_{b,delta}(gamma; x); xi (units of pi/r) is an auxiliary parameter."""
    p = gc.params
    xx = _asc(x)
    a, ad, am = p.a, p.ad(delta), p.ad(-delta)
    h = math.pi / (2 * p.r)
    xi = xi * math.pi / p.r
    om = [0.0, h, 0.5j * ad, -h - 0.5j * ad]
    pt = _p_t(gc, delta)
    Ew = (_R(p, delta, xi - 1j * a) / _R(p, delta, 1j * a)) ** 2
    tot = np.zeros_like(xx)
    for t in range(4):
        u = xx - om[t]
        Et = (_R(p, delta, u + xi - 1j * a) * _R(p, delta, u - xi + 1j * a)
              / (_R(p, delta, u - 1j * a) * _R(p, delta, u + 1j * a)))
        tot = tot + pt[t] * (Et - Ew)
    den = 2 * _R(p, delta, xi - 0.5j * ad) * _R(p, delta, xi - 1j * am - 0.5j * ad)
    return _ret(tot / den, x)


def coef_Va(delta: int, gc: Coupling, x, method: str = "explicit"):
    """Shift coefficient V_{a,delta} of the c-gauged operator."""
    p = gc.params
    xx = _asc(x)
    ad, am = p.ad(delta), p.ad(-delta)
    if method == "rel":
        val = coef_V(delta, gc, -xx) * coef_V(delta, gc, xx + 1j * am)
        return _ret(val, x)
    if method == "cP":
        val = (cP_func(gc, -xx) / cP_func(gc, xx)) * (cP_func(gc, xx + 1j * am) / cP_func(gc, -xx - 1j * am))
        return _ret(val, x)
    num = np.ones_like(xx)
    for gm in gc.gamma:
        num = num * _R(p, delta, xx + 0.5j * am + 1j * gm) * _R(p, delta, xx + 0.5j * am - 1j * gm)
    den = (_R(p, delta, 2 * xx - 0.5j * ad) * _R(p, delta, 2 * xx + 2j * am + 0.5j * ad)
           * _R(p, delta, 2 * xx + 1j * am + 0.5j * ad) * _R(p, delta, 2 * xx + 1j * am - 0.5j * ad))
    return _ret(num / den, x)


def coef_VH(delta: int, gc: Coupling, x, method: str = "explicit"):
    """Shift coefficient V^H_delta of the H-gauged operator."""
    p = gc.params
    xx = _asc(x)
    ad, am = p.ad(delta), p.ad(-delta)
    if method == "rel":
        val = coef_V(delta, gc, xx) * P_func(gc, xx) / P_func(gc, xx - 1j * am)
        return _ret(val, x)
    den = _R(p, delta, 2 * xx + 0.5j * ad) * _R(p, delta, 2 * xx - 1j * am + 0.5j * ad)
    fac = np.ones_like(xx)
    for gm in gc.gamma:
        fac = fac * eval_Gt_inv(p, ad, -xx + 0.5j * am + 1j * gm) * eval_Gt_inv(p, ad, -xx + 0.5j * am - 1j * gm)
    return _ret(fac / den, x)


def M_delta(delta: int, gc: Coupling, n_grid: int = 2001) -> float:
    """Minimum of V_{b,delta} over [0, pi/2r]."""
    x = np.linspace(0, math.pi / (2 * gc.params.r), n_grid)
    return float(np.min(np.real(coef_Vb(delta, gc, x))))


def apply_A(delta: int, gc: Coupling, f, x):
    """(A_delta(gamma) f)(x) for a callable f."""
    am = gc.params.ad(-delta)
    xx = _asc(x)
    return (coef_V(delta, gc, xx) * f(xx - 1j * am) + coef_V(delta, gc, -xx) * f(xx + 1j * am)
            + coef_Vb(delta, gc, xx) * f(xx))


def apply_cA(delta: int, gc: Coupling, f, x):
    """(cal A_delta(gamma) f)(x) for a callable f (c-gauge)."""
    am = gc.params.ad(-delta)
    xx = _asc(x)
    return f(xx - 1j * am) + coef_Va(delta, gc, xx) * f(xx + 1j * am) + coef_Vb(delta, gc, xx) * f(xx)


# ---------------------------------------------------------------- multipliers

def _xi_ell(gc: Coupling, ell: int, x):
    p = gc.params
    return P_func(gc.dual(), x) * mH_func(gc, x - 1j * gc.sigma - 1j * ell * p.a_s)


def mu_ell(gc: Coupling, ell: int, x):
    """Residue multiplier mu_ell(gamma; x), 0 <= ell <= L."""
    p = gc.params
    L = p.L
    if L is None or not (0 <= ell <= L):
        raise OutOfRange(f"ell={ell} outside [0, L]")
    xx = _asc(x)
    s, a, as_ = gc.sigma, p.a, p.a_s
    pref = -4j * math.pi * residue_r(p, ell)
    val = (pref * eval_G(p, 2j * s + 1j * ell * as_ - 1j * a) * eval_G(p, 2 * xx - 1j * ell * as_ - 1j * a)
           * eval_G(p, -2 * (xx - 1j * s) + 1j * ell * as_ - 1j * a) * _xi_ell(gc, ell, xx))
    return _ret(val, x)


def residue_coef(gc: Coupling, ell: int, x):
    """C_ell(x) with residue contribution C_ell(x) w(gamma;z) F(gamma;z), z = x - i sigma - i ell a_s.

    Equals mu_ell / (2 P(gamma'; x) m_H(gamma; z)).
    """
    p = gc.params
    xx = _asc(x)
    s, a, as_ = gc.sigma, p.a, p.a_s
    val = (-2j * math.pi * residue_r(p, ell) * eval_G(p, 2j * s + 1j * ell * as_ - 1j * a)
           * eval_G(p, 2 * xx - 1j * ell * as_ - 1j * a) * eval_G(p, -2 * xx + 2j * s + 1j * ell * as_ - 1j * a))
    return _ret(val, x)


def pi_ell_tau(gc: Coupling, ell: int, tau: int) -> complex:
    """pi_{ell,tau}(gamma) = e^{4 ell r (sigma-a)} prod_mu prod_{m=1}^ell (1 - (-)^tau e^{2r(gamma_mu + (ell+1-2m) a_s/2)})."""
    p = gc.params
    val = complex(math.exp(4 * ell * p.r * (gc.sigma - p.a)))
    sgn = (-1) ** tau
    for gm in gc.gamma:
        for m in range(1, ell + 1):
            val *= 1 - sgn * np.exp(2 * p.r * (gm + (ell + 1 - 2 * m) * p.a_s / 2))
    return val


def pid_limit(gc: Coupling, j: int, tau: int) -> complex:
    """Closed-form limit of P(gamma'; x + i j a_s/2)/P(gamma'; x - i j a_s/2) as x -> x_tau."""
    p = gc.params
    gd = gc.dual()
    val = 1 + 0j
    sgn = (-1) ** tau
    for gm in gd.gamma:
        for m in range(1, j + 1):
            val *= 1 - sgn * np.exp(2 * p.r * (gm + (j + 1 - 2 * m) * p.a_s / 2))
    return val


def kappa_n(p: Params, sigma: float, n):
    """kappa_n(sigma) = pi G(2i sigma - ia) e^{-2 n r sigma} / (r prod(1-e^{-2kra+})(1-e^{-2kra-}))."""
    if not (0 < sigma < p.a):
        raise DomainError("sigma must lie in (0, a)")
    n = np.asarray(n)
    pre = math.pi * eval_G(p, 2j * sigma - 1j * p.a).real / (p.r * qprod(p.r, p.a_plus) * qprod(p.r, p.a_minus))
    val = pre * np.exp(-2 * n * p.r * sigma)
    return float(val) if val.ndim == 0 else val


# ---------------------------------------------------------------- special points

@dataclass(frozen=True)
class HalfPeriods:
    """Half periods and the special points used by the identity families."""

    params: Params
    delta: int = 1

    @property
    def omega(self) -> list:
        p = self.params
        h = math.pi / (2 * p.r)
        ad = p.ad(self.delta)
        return [0.0, h, 0.5j * ad, -h - 0.5j * ad]

    def x_tau(self, tau: int) -> complex:
        p = self.params
        return tau * math.pi / (2 * p.r) + 0.5j * p.a_l

    def xt_tau(self, tau: int) -> complex:
        p = self.params
        return tau * math.pi / (2 * p.r) + 0.5j * p.a_s

    def x_tau_k(self, tau: int, k: int) -> complex:
        p = self.params
        return tau * math.pi / (2 * p.r) + 0.5j * k * p.a_l

    def xt_tau_k(self, tau: int, k: int) -> complex:
        p = self.params
        return tau * math.pi / (2 * p.r) + 0.5j * k * p.a_s


# ---------------------------------------------------------------- clusters

def even_flip_masks(n: int = 8):
    """All sign-flip masks of even weight."""
    for bits in itertools.product((0, 1), repeat=n):
        if sum(bits) % 2 == 0:
            yield np.array(bits, dtype=bool)


def restricted_flip_masks(gc: Coupling):
    """Even flips that keep the sum of imaginary parts zero without renormalization."""
    signs = np.array(gc.im_signs)
    for m in even_flip_masks():
        if int(np.sum(signs[m[4:]])) == 0:
            yield m


def cluster_members(gd: Coupling, group: str = "full") -> list[Coupling]:
    """All couplings in Pi_r related to gd by even sign flips.

    group="full": all 128 even flips, images normalized modulo i pi/r.
    group="restricted": in the mixed regime only the flips that keep the
    imaginary parts summing to zero (48 elements).
    """
    if not gd.in_Pi_r():
        raise DomainError("cluster base must lie in Pi_r")
    masks = even_flip_masks() if (group == "full" or gd.regime == REAL) else restricted_flip_masks(gd)
    out, seen = [], set()
    for m in masks:
        img = gd.flip(m)
        if not img.in_Pi_r():
            continue
        k = img.key()
        if k not in seen:
            seen.add(k)
            out.append(img)
    return out


# ---------------------------------------------------------------- identity suite

@dataclass
class IdentityReport:
    """Max relative error per identity over the sample points."""

    errors: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def worst(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0


def _rel(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-300)))


def identity_suite(gc: Coupling, x, tol: float = 1e-10) -> IdentityReport:
    """Evaluate coefficient identities at sample points x and report max relative errors."""
    p = gc.params
    x = _asc(x)
    rep = IdentityReport()
    for d in (1, -1):
        am = p.ad(-d)
        tag = "+" if d > 0 else "-"
        rep.errors[f"Vec{tag}"] = _rel(coef_V(d, gc, x), c_func(gc, x) / c_func(gc, x - 1j * am))
        rep.errors[f"Vew{tag}"] = _rel(coef_V(d, gc, x + 1j * am) * w_func(gc, x + 1j * am), coef_V(d, gc, -x) * w_func(gc, x))
        va = coef_Va(d, gc, x)
        rep.errors[f"Varel{tag}"] = _rel(va, coef_Va(d, gc, x, "rel"))
        rep.errors[f"Vaalt{tag}"] = _rel(va, coef_Va(d, gc, x, "cP"))
        rep.errors[f"VH{tag}"] = _rel(coef_VH(d, gc, x), coef_VH(d, gc, x, "rel"))
        rep.errors[f"Vper{tag}"] = _rel(coef_V(d, gc, x + 1j * p.ad(d)) / coef_V(d, gc, x),
                                        np.full(x.shape, math.exp(8 * p.r * (gc.sigma - p.a))))
        rep.errors[f"Vbxi{tag}"] = _rel(coef_Vb(d, gc, x, 0.31), coef_Vb(d, gc, x, 0.77))
    rep.errors["ccP"] = _rel(c_func(gc, x) / c_func(gc, -x), cP_func(gc, x) / cP_func(gc, -x))
    num = np.ones_like(x)
    for gm in gc.gamma:
        num = num * eval_E(p, x + 1j * gm) * eval_E(p, -x + 1j * gm)
    num = num / (eval_E(p, 2 * x - 1j * p.a) * eval_E(p, -2 * x - 1j * p.a))
    rep.errors["ccid"] = _rel(cP_func(gc, x) / c_func(gc, x), num)
    h = 0.5j * (p.a_plus - p.a_minus)
    lhs = -np.expm1(-4j * p.r * x) * eval_E(p, 2 * x + h) * eval_E(p, 2 * x - h)
    rep.errors["Eid"] = _rel(lhs, eval_E(p, 2 * x + 1j * p.a) * eval_E(p, 2 * x - 1j * p.a))
    rep.errors["mHP"] = _rel(mH_func(gc, x) * P_func(gc, x), w_func(gc, x))
    for k, v in rep.errors.items():
        if not v < tol:
            rep.failures[k] = v
    return rep




def check_Dj(p: Params, sigma: float, y, j_max: int | None = None) -> dict:
    """|D_j(sigma; x_tau + i j a_s/2, y)| / |S(sigma; x_tau - i j a_s/2, y)| maxed over y, per (j, tau)."""
    y = np.asarray(y, dtype=complex)
    j_max = (p.L or 1) if j_max is None else j_max
    out = {}
    for j in range(1, j_max + 1):
        for tau in (0, 1):
            x0 = tau * math.pi / (2 * p.r) + 0.5j * p.a_l
            num = kernel_D(p, j, sigma, x0 + 0.5j * j * p.a_s, y)
            den = kernel_S(p, sigma, x0 - 0.5j * j * p.a_s, y, method="product")
            out[(j, tau)] = float(np.max(np.abs(num) / np.abs(den)))
    return out


def check_pid(gc: Coupling, eps: float = 1e-6, j_max: int | None = None) -> dict:
    """Relative gap between the P(gamma')-ratio near x_tau and its closed-form limit, per (j, tau).

    The ratio is averaged over x_tau +- eps so the O(eps) term cancels.
    """
    p = gc.params
    gd = gc.dual()
    j_max = (p.L or 1) if j_max is None else j_max
    out = {}
    for j in range(1, j_max + 1):
        for tau in (0, 1):
            x0 = tau * math.pi / (2 * p.r) + 0.5j * p.a_l
            vals = []
            for e in (eps, -eps):
                x = x0 + e
                vals.append(P_func(gd, x + 0.5j * j * p.a_s) / P_func(gd, x - 0.5j * j * p.a_s))
            lim = pid_limit(gc, j, tau)
            out[(j, tau)] = _rel(0.5 * (vals[0] + vals[1]), lim)
    return out


__all__ = [n for n in dir() if not n.startswith("_")] + ["eval_s", "p_delta", "PoleProximity"]
