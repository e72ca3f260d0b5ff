"""Elliptic special functions: the elliptic gamma function G, its companions
E, R_delta, s_delta and the trigonometric gamma function G_t.

All evaluators are vectorized over ``z`` (scalars in, scalars out).  Signs
``delta`` are +1 / -1 and select a_plus / a_minus.

Method ``"auto"`` (default) shifts the argument by multiples of i*a_s with the
first-order difference equations until it lies in a narrow strip around the
real axis and then sums the exponential series there; ``"series"`` sums the
series directly and ``"product"`` evaluates the defining products.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonConvergent, OutOfRange, PoleProximity

_RATIO_RTOL = 1e-9


@dataclass(frozen=True)
class Params:
    """Period/shift triple (r, a_plus, a_minus)."""

    r: float
    a_plus: float
    a_minus: float

    def __post_init__(self):
        for name in ("r", "a_plus", "a_minus"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive real, got {v!r}")

    @property
    def a(self) -> float:
        return 0.5 * (self.a_plus + self.a_minus)

    @property
    def a_s(self) -> float:
        return min(self.a_plus, self.a_minus)

    @property
    def a_l(self) -> float:
        return max(self.a_plus, self.a_minus)

    @property
    def period(self) -> float:
        """Half period pi/2r, the length of the basic interval."""
        return math.pi / (2 * self.r)

    @property
    def L(self) -> int | None:
        """Unique L >= 1 with L a_s < a_l <= (L+1) a_s; None if a_s = a_l."""
        q = self.a_l / self.a_s
        if abs(q - 1) < _RATIO_RTOL:
            return None
        k = math.ceil(q - _RATIO_RTOL) - 1
        return max(k, 1)

    @property
    def ratio_ok_s(self) -> bool:
        q = self.a_s / self.a_l
        return not any(abs(q - t) < _RATIO_RTOL for t in (1.0, 0.5))

    @property
    def ratio_ok_l(self) -> bool:
        q = self.a_l / self.a_s
        return abs(q - round(q)) > _RATIO_RTOL * q

    def sign(self, which) -> int:
        """Map 's'/'l'/'+'/'-'/+1/-1 to the sign delta with a_delta the chosen shift."""
        if which in (1, "+", "plus"):
            return 1
        if which in (-1, "-", "minus"):
            return -1
        small = 1 if self.a_plus <= self.a_minus else -1
        if which == "s":
            return small
        if which == "l":
            return -small
        raise ValueError(f"unknown shift label {which!r}")

    def ad(self, delta: int) -> float:
        """a_delta for delta = +1 / -1."""
        return self.a_plus if delta > 0 else self.a_minus

    def to_dict(self) -> dict:
        return {"r": self.r, "a_plus": self.a_plus, "a_minus": self.a_minus}


@dataclass(frozen=True)
class TruncationPolicy:
    """Target accuracy of log-factors and per-index term cap."""

    eps: float = 1e-16
    max_terms: int = 4096

    def __post_init__(self):
        if not (0 < self.eps <= 1e-6):
            raise ValueError("eps must lie in (0, 1e-6]")
        if self.max_terms < 16:
            raise ValueError("max_terms must be >= 16")


DEFAULT_TP = TruncationPolicy()


def _wrap(z):
    arr = np.asarray(z, dtype=complex)
    return np.atleast_1d(arr), arr.ndim == 0


def _out(val, scalar):
    return complex(np.ravel(val)[0]) if scalar else val


def _nterms(rate_log: float, tp: TruncationPolicy, offset: float = 0.0) -> int:
    """Smallest N with exp(offset - N*rate_log) < eps (rate_log > 0)."""
    if rate_log <= 0:
        raise NonConvergent("series/product does not converge at this point")
    n = int(math.ceil((offset + math.log(1 / tp.eps)) / rate_log)) + 1
    if n > tp.max_terms:
        raise NonConvergent(f"needs {n} terms > max_terms={tp.max_terms}")
    return max(n, 1)


@lru_cache(maxsize=256)
def qprod(r: float, alpha: float, terms: int = 200) -> float:
    """prod_{k>=1} (1 - exp(-2 k alpha r))."""
    k = np.arange(1, terms + 1)
    return float(np.prod(-np.expm1(-2 * k * alpha * r)))


def p_delta(params: Params, delta: int) -> float:
    """Normalizer p_delta = 2r prod (1 - e^{-2k r a_delta})^2."""
    return 2 * params.r * qprod(params.r, params.ad(delta)) ** 2


# ---------------------------------------------------------------- theta-type

def eval_R_alpha(params: Params, alpha: float, z, tp: TruncationPolicy = DEFAULT_TP):
    """R(r, alpha; z) = prod_{k>=1} (1 - e^{2irz-(2k-1)alpha r})(1 - e^{-2irz-(2k-1)alpha r})."""
    z, sc = _wrap(z)
    r = params.r
    m = float(np.max(np.abs(z.imag))) if z.size else 0.0
    K = _nterms(2 * alpha * r, tp, offset=2 * r * m + alpha * r)
    k = np.arange(1, K + 1)
    damp = np.exp(-(2 * k - 1) * alpha * r)
    e = np.exp(2j * r * z)[..., None]
    val = np.prod((1 - e * damp) * (1 - damp / e), axis=-1)
    return _out(val, sc)


def eval_R(params: Params, delta: int, z, tp: TruncationPolicy = DEFAULT_TP, method: str = "product"):
    """R_delta(z) = R(r, a_delta; z); even, pi/r-periodic, entire."""
    alpha = params.ad(delta)
    if method == "series":
        z, sc = _wrap(z)
        r = params.r
        m = float(np.max(np.abs(z.imag))) if z.size else 0.0
        N = _nterms(r * alpha - 2 * r * m, tp)
        n = np.arange(1, N + 1)
        # cos(2nrz)/(n sinh(n r alpha)) written without overflow
        coef = 2 * np.exp(-n * r * alpha) / (n * -np.expm1(-2 * n * r * alpha))
        cz = np.cos(2 * r * z[..., None] * n)
        return _out(np.exp(-np.sum(cz * coef, axis=-1)), sc)
    return eval_R_alpha(params, alpha, z, tp)


def eval_s(params: Params, delta: int, z, tp: TruncationPolicy = DEFAULT_TP):
    """s_delta(z) = -i e^{irz} R_delta(z + i a_delta/2) / p_delta; odd, pi/r-antiperiodic."""
    z, sc = _wrap(z)
    ad = params.ad(delta)
    val = -1j * np.exp(1j * params.r * z) * eval_R(params, delta, z + 0.5j * ad, tp) / p_delta(params, delta)
    return _out(val, sc)


def eval_Gt_inv(params: Params, alpha: float, z, tp: TruncationPolicy = DEFAULT_TP):
    """1/G_t(r, alpha; z) = prod_{n>=0} (1 - q^{2n+1} e^{2irz}), q = e^{-alpha r} (entire)."""
    z, sc = _wrap(z)
    r = params.r
    m = float(np.max(-z.imag)) if z.size else 0.0
    N = _nterms(2 * alpha * r, tp, offset=max(2 * r * m, 0.0))
    n = np.arange(N)
    damp = np.exp(-(2 * n + 1) * alpha * r)
    e = np.exp(2j * r * z)[..., None]
    return _out(np.prod(1 - e * damp, axis=-1), sc)


def eval_Gt(params: Params, alpha: float, z, tp: TruncationPolicy = DEFAULT_TP):
    """Trigonometric gamma function G_t(r, alpha; z)."""
    z, sc = _wrap(z)
    r = params.r
    # poles at z = -i(2n+1)alpha/2 + m pi/r
    guard = 1e-8 * min(params.a_s, math.pi / r)
    if z.size:
        per = math.pi / r
        re = z.real - per * np.round(z.real / per)
        npos = np.round((-z.imag / alpha - 1) / 2)
        npos = np.maximum(npos, 0)
        d = np.abs(re + 1j * (z.imag + (2 * npos + 1) * alpha / 2))
        if np.any(d < guard):
            raise PoleProximity("G_t evaluated at a pole")
    inv = eval_Gt_inv(params, alpha, z, tp)
    return _out(1 / np.asarray(inv), sc)


# ---------------------------------------------------------------- E and G

def _e_series(params: Params, z, tp: TruncationPolicy):
    """Exponent e(z) of E(z) = exp(e(z)); requires Im z < a."""
    r, a = params.r, params.a
    m = float(np.max(z.imag)) if z.size else 0.0
    N = _nterms(2 * r * (a - m), tp)
    n = np.arange(1, N + 1)
    coef = np.exp(-2 * n * r * a) / (n * np.expm1(-2 * n * r * params.a_plus) * np.expm1(-2 * n * r * params.a_minus))
    t = np.exp(-2j * r * z)
    acc = np.full(z.shape, coef[-1], dtype=complex)
    for c in coef[-2::-1]:
        acc = acc * t + c
    return -acc * t


def _E_product(params: Params, z, tp: TruncationPolicy):
    r = params.r
    m = float(np.max(z.imag)) if z.size else 0.0
    off = max(2 * r * m, 0.0)
    M = _nterms(2 * r * params.a_plus, tp, off)
    N = _nterms(2 * r * params.a_minus, tp, off)
    mm = np.arange(M)[:, None]
    nn = np.arange(N)[None, :]
    damp = np.exp(-(2 * mm + 1) * r * params.a_plus - (2 * nn + 1) * r * params.a_minus).ravel()
    keep = damp * math.exp(off) > tp.eps * 1e-3
    damp = damp[keep]
    e = np.exp(-2j * r * z)[..., None]
    return np.prod(1 - e * damp, axis=-1)


def eval_E(params: Params, z, tp: TruncationPolicy = DEFAULT_TP, method: str = "auto"):
    """E(z) = prod_{m,n>=0} (1 - exp(-(2m+1) r a_+ - (2n+1) r a_- - 2irz)); entire."""
    z, sc = _wrap(z)
    if method == "product":
        return _out(_E_product(params, z, tp), sc)
    if method == "series":
        return _out(np.exp(_e_series(params, z, tp)), sc)
    a_s, a_l = params.a_s, params.a_l
    k = np.where(z.imag > 0, np.ceil(z.imag / a_s - 1e-12), 0).astype(int)
    zr = z - 1j * k * a_s
    val = np.exp(_e_series(params, zr, tp))
    kmax = int(k.max()) if k.size else 0
    for j in range(1, kmax + 1):
        sel = k >= j
        if np.any(sel):
            fac = eval_Gt_inv(params, a_l, -z[sel] + 1j * (j - 0.5) * a_s, tp)
            val[sel] = val[sel] * fac
    return _out(val, sc)


def _check_G_poles(params: Params, z):
    """Raise PoleProximity near p = -ia - i k a_+ - i l a_- + m pi/r."""
    if not z.size:
        return
    guard = 1e-8 * min(params.a_s, math.pi / params.r)
    low = z.imag < -params.a + guard
    if not np.any(low):
        return
    zz = z[low]
    per = math.pi / params.r
    re = zz.real - per * np.round(zz.real / per)
    depth = float(np.max(-zz.imag)) - params.a
    kmax = int(depth / params.a_plus) + 2
    lmax = int(depth / params.a_minus) + 2
    for kk in range(kmax):
        for ll in range(lmax):
            lev = params.a + kk * params.a_plus + ll * params.a_minus
            if np.any(np.abs(re + 1j * (zz.imag + lev)) < guard):
                raise PoleProximity("G evaluated at a pole")


def _G_product(params: Params, z, tp: TruncationPolicy):
    return _E_product(params, z, tp) / _E_product(params, -z, tp)


def eval_G(params: Params, z, tp: TruncationPolicy = DEFAULT_TP, method: str = "auto"):
    """Elliptic gamma function G(r, a_+, a_-; z)."""
    z, sc = _wrap(z)
    _check_G_poles(params, z)
    if method == "product":
        return _out(_G_product(params, z, tp), sc)
    if method == "series":
        return _out(np.exp(_e_series(params, z, tp) - _e_series(params, -z, tp)), sc)
    a_s = params.a_s
    neg = z.imag < 0
    zz = np.where(neg, -z, z)
    k = np.where(zz.imag > a_s / 2, np.ceil(zz.imag / a_s - 0.5 - 1e-12), 0).astype(int)
    zr = zz - 1j * k * a_s
    val = np.exp(_e_series(params, zr, tp) - _e_series(params, -zr, tp))
    kmax = int(k.max()) if k.size else 0
    dl = params.sign("l")
    for j in range(1, kmax + 1):
        sel = k >= j
        if np.any(sel):
            val[sel] = val[sel] * eval_R(params, dl, zz[sel] - 1j * (j - 0.5) * a_s, tp)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(neg, 1 / val, val)
    return _out(val, sc)


# ---------------------------------------------------------------- residues

def residue_r(params: Params, k: int, tp: TruncationPolicy = DEFAULT_TP) -> complex:
    """Residue r_k of G at z = -ia - i k a_s, 0 <= k <= L."""
    L = params.L
    if L is None or not (0 <= k <= L):
        raise OutOfRange(f"residue index k={k} outside [0, L]")
    r0 = 1j / (2 * params.r * qprod(params.r, params.a_plus) * qprod(params.r, params.a_minus))
    if k == 0:
        return complex(r0)
    dl = params.sign("l")
    j = np.arange(1, k + 1)
    den = np.prod(eval_R(params, dl, 0.5j * params.a_l + 1j * j * params.a_s, tp))
    return complex(r0 / den)


def G_special(params: Params, delta: int) -> float:
    """G(i(a_delta - a_{-delta})/2) = prod (1-e^{-2k r a_{-delta}})/(1-e^{-2k r a_delta})."""
    return qprod(params.r, params.ad(-delta)) / qprod(params.r, params.ad(delta))


# ---------------------------------------------------------------- invariant suite

def _relerr(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-300)))


def sample_points(params: Params, n: int, rng: np.random.Generator, im_frac: float = 0.5) -> np.ndarray:
    """Random points with Re z in (-pi/2r, pi/2r) and |Im z| < im_frac * a."""
    h = params.period
    return rng.uniform(-h, h, n) + 1j * rng.uniform(-im_frac * params.a, im_frac * params.a, n)


def specfun_suite(params: Params, n_points: int = 200, seed: int = 0) -> dict:
    """Max relative error of each functional identity at seeded random points."""
    rng = np.random.default_rng(seed)
    p = params
    z = sample_points(p, n_points, rng)
    per = math.pi / p.r
    swap = Params(p.r, p.a_minus, p.a_plus)
    G = lambda w: eval_G(p, w)
    E = lambda w: eval_E(p, w)
    out = {
        "G_reflection": _relerr(G(-z) * G(z), np.ones_like(z)),
        "G_periodicity": _relerr(G(z + per), G(z)),
        "E_periodicity": _relerr(E(z + per), E(z)),
        "G_modular": _relerr(eval_G(swap, z), G(z)),
        "E_modular": _relerr(eval_E(swap, z), E(z)),
        "GE_quotient": _relerr(E(z) / E(-z), G(z)),
        "G_product_vs_auto": _relerr(eval_G(p, z, method="product"), G(z)),
        "E_product_vs_auto": _relerr(eval_E(p, z, method="product"), E(z)),
    }
    for d in (1, -1):
        t = "+" if d > 0 else "-"
        ad, am = p.ad(d), p.ad(-d)
        out[f"G_ade{t}"] = _relerr(G(z + 0.5j * ad) / G(z - 0.5j * ad), eval_R(p, -d, z))
        out[f"E_ade{t}"] = _relerr(E(z + 0.5j * ad) / E(z - 0.5j * ad), 1 / eval_Gt(p, am, -z))
        out[f"Gt_ade{t}"] = _relerr(eval_Gt(p, ad, z + 0.5j * ad) / eval_Gt(p, ad, z - 0.5j * ad),
                                    1 - np.exp(2j * p.r * z))
        out[f"Gt_R{t}"] = _relerr(eval_Gt(p, ad, z) * eval_Gt(p, ad, -z), 1 / eval_R(p, d, z))
        out[f"R_ade{t}"] = _relerr(eval_R(p, d, z + 0.5j * ad) / eval_R(p, d, z - 0.5j * ad),
                                   -np.exp(-2j * p.r * z))
        out[f"s_ade{t}"] = _relerr(eval_s(p, d, z + 0.5j * ad) / eval_s(p, d, z - 0.5j * ad),
                                   -np.exp(-2j * p.r * z))
        out[f"R_series{t}"] = _relerr(eval_R(p, d, 0.5 * z, method="series"), eval_R(p, d, 0.5 * z))
        dup = np.ones_like(z)
        for tau in (1, -1):
            w = z - 0.25j * tau * ad
            dup = dup * eval_R(p, d, w) * eval_R(p, d, w - 0.5 * per)
        out[f"R_duplication{t}"] = _relerr(eval_R(p, d, 2 * z), dup)
        out[f"R_conj{t}"] = _relerr(np.conj(eval_R(p, d, np.conj(z))), eval_R(p, d, z))
        out[f"s_conj{t}"] = _relerr(np.conj(eval_s(p, d, np.conj(z))), eval_s(p, d, z))
        out[f"s_odd{t}"] = _relerr(eval_s(p, d, -z), -eval_s(p, d, z))
        out[f"Gt_conj{t}"] = _relerr(np.conj(eval_Gt(p, ad, np.conj(z))), eval_Gt(p, ad, -z))
    ia = 1j * p.a
    rr = G(z + ia) / G(z - ia)
    out["RR_first"] = _relerr(rr, eval_R(p, 1, z + 0.5j * p.a_plus) * eval_R(p, -1, z - 0.5j * p.a_minus))
    out["RR_second"] = _relerr(rr, eval_R(p, 1, z - 0.5j * p.a_plus) * eval_R(p, -1, z + 0.5j * p.a_minus))
    gdup, edup = np.ones_like(z), np.ones_like(z)
    for l in (1, -1):
        for m in (1, -1):
            w = z - 0.25j * (l * p.a_plus + m * p.a_minus)
            gdup = gdup * G(w) * G(w - 0.5 * per)
            edup = edup * E(w) * E(w - 0.5 * per)
    out["G_duplication"] = _relerr(G(2 * z), gdup)
    out["E_duplication"] = _relerr(E(2 * z), edup)
    out["G_conj"] = _relerr(np.conj(G(np.conj(z))), G(-z))
    out["E_conj"] = _relerr(np.conj(E(np.conj(z))), E(-z))
    return out
