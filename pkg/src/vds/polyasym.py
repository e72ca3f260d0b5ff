"""Orthonormal polynomials for w_P and large-n decay diagnostics.

The polynomials p_n(cos 2rx) are built by the discretized Stieltjes
procedure on a Gauss rule.  The comparison functions psi_n and a_n live in
L^2([0, pi/2r], dx), and the decay reports fit exponential rates to the
distances between these functions, their images under the integral
operator, and the Nystrom eigenvectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, LossOfOrthogonality
from .hsspec import QuadratureRule, SpectralDecomposition
from .vdcore import Coupling, c_func, check_coupling, cP_func, kappa_n, kernel_matrix, u_func

GRAM_TOL = 1e-8


@dataclass
class OrthoBasis:
    """Recurrence coefficients and grid samples of P_n, psi_n, a_n and D_n."""

    coupling: Coupling
    rule: QuadratureRule
    alpha: np.ndarray
    beta: np.ndarray
    P: np.ndarray
    psi: np.ndarray
    a: np.ndarray
    D: np.ndarray
    gram_error: float = 0.0

    @property
    def n_max(self) -> int:
        return self.P.shape[1] - 1

    def eval_P(self, x) -> np.ndarray:
        """P_n(x) for n = 0..n_max by the three-term recurrence; shape (len(x), n_max + 1)."""
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        return _recur(np.cos(2 * self.coupling.params.r * x), self.alpha, self.beta)

    def eval_psi(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        r = self.coupling.params.r
        return math.sqrt(r / math.pi) * self.eval_P(x) / cP_func(self.coupling, x)[:, None]

    def eval_a(self, x) -> np.ndarray:
        return a_functions(self.coupling, x, self.n_max)

    def inner(self, f, g) -> complex:
        """L^2([0, pi/2r], dx) inner product of grid samples (conjugate-linear in f)."""
        return complex(np.sum(self.rule.weights * np.conj(f) * g))

    def norm(self, f) -> float:
        return float(np.sqrt(np.sum(self.rule.weights * np.abs(f) ** 2)))


def _recur(t: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    n1 = len(alpha)
    out = np.empty((len(t), n1), dtype=np.result_type(t, float))
    prev = np.zeros_like(t)
    cur = np.full_like(t, 1 / beta[0])
    out[:, 0] = cur
    for k in range(n1 - 1):
        nxt = ((t - alpha[k]) * cur - beta[k] * prev) / beta[k + 1]
        prev, cur = cur, nxt
        out[:, k + 1] = cur
    return out


def wP_weight(gc: Coupling, x) -> np.ndarray:
    """w_P(x) = 1/(c_P(x) c_P(-x)), real and positive on (0, pi/2r)."""
    xx = np.asarray(x, dtype=complex)
    return np.real(1 / (cP_func(gc, xx) * cP_func(gc, -xx)))


def a_functions(gc: Coupling, x, n_max: int) -> np.ndarray:
    """a_n(x) = sqrt(r/pi)(e^{2inrx} - e^{-4irx} u(-x) e^{-2inrx}) for n = 0..n_max."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    r = gc.params.r
    ux = np.exp(-4j * r * x) * u_func(gc, -x)
    n = np.arange(n_max + 1)
    ph = np.exp(2j * r * x[:, None] * n[None, :])
    return math.sqrt(r / math.pi) * (ph - ux[:, None] / ph)


def build_ortho(gc: Coupling, rule: QuadratureRule, n_max: int) -> OrthoBasis:
    """Stieltjes procedure for p_n orthonormal w.r.t. (r/pi) w_P dx on [0, pi/2r]."""
    if not gc.in_Pi_tilde():
        raise DomainError("orthonormal polynomials require g in Pi_tilde")
    if not 0 <= n_max < rule.n_nodes // 2:
        raise DomainError(f"n_max must be below n_nodes/2 = {rule.n_nodes // 2}")
    p = gc.params
    x = rule.nodes
    t = np.cos(2 * p.r * x)
    m = (p.r / math.pi) * wP_weight(gc, x) * rule.weights
    if np.any(m <= 0):
        raise DomainError("w_P is not positive on the rule nodes")
    alpha = np.zeros(n_max + 1)
    beta = np.zeros(n_max + 2)
    beta[0] = math.sqrt(m.sum())
    prev = np.zeros_like(t)
    cur = np.full_like(t, 1 / beta[0])
    cols = [cur]
    for k in range(n_max + 1):
        alpha[k] = np.sum(m * t * cur * cur)
        q = (t - alpha[k]) * cur - beta[k] * prev
        # one re-orthogonalization pass against the last two vectors
        q -= np.sum(m * q * cur) * cur + np.sum(m * q * prev) * prev
        beta[k + 1] = math.sqrt(np.sum(m * q * q))
        prev, cur = cur, q / beta[k + 1]
        if k < n_max:
            cols.append(cur)
    P = np.column_stack(cols)
    cP = cP_func(gc, x.astype(complex))
    psi = math.sqrt(p.r / math.pi) * P / cP[:, None]
    a = a_functions(gc, x, n_max)
    n = np.arange(n_max + 1)
    ph = np.exp(2j * p.r * x[:, None] * n[None, :])
    D = cP[:, None] * ph + np.conj(cP)[:, None] / ph
    G = (psi.conj().T * rule.weights) @ psi
    gram = float(np.max(np.abs(G - np.eye(n_max + 1))))
    if gram > GRAM_TOL:
        raise LossOfOrthogonality(f"Gram residual {gram:.3g} exceeds {GRAM_TOL:g}")
    return OrthoBasis(gc, rule, alpha, beta[: n_max + 1], P, psi, a, D, gram)


# ---------------------------------------------------------------- fitting

@dataclass
class DecayReport:
    """Errors against n with a fitted exponential rate err ~ C e^{-slope n}."""

    name: str
    ns: np.ndarray
    errors: np.ndarray
    slope: float
    expected: float
    floor: float = 0.0
    used: np.ndarray = None
    extra: dict = field(default_factory=dict)

    def passed(self, rel_eps: float = 0.15) -> bool:
        """Fitted slope at least the expected rate reduced by the fraction rel_eps."""
        return bool(np.isfinite(self.slope) and self.slope >= (1 - rel_eps) * self.expected)

    def to_rows(self) -> list[dict]:
        rows = []
        for i, (n, e) in enumerate(zip(self.ns, self.errors)):
            fit = self.extra.get("fit_intercept", float("nan")) - self.slope * n
            rows.append({"n": int(n), "error": float(e), "used": bool(self.used[i]),
                         "model_residual": float(math.log(e) - fit) if e > 0 else float("nan")})
        return rows

    def to_json(self) -> dict:
        return {"name": self.name, "slope": float(self.slope), "expected": float(self.expected),
                "floor": float(self.floor), "rows": self.to_rows(),
                **{k: v for k, v in self.extra.items() if k != "fit_intercept"}}


def fit_decay(ns, errs, floor: float = 0.0, floor_factor: float = 10.0):
    """Weighted least squares fit of log(err) against n.

    Points below floor_factor * floor are dropped; the remaining points are
    weighted by their log-distance above the floor so the plateau does not
    dominate.  Returns (slope, intercept, used) with err ~ e^{intercept - slope n}.
    """
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    used = (errs > floor_factor * floor) & (errs > 0) & np.isfinite(errs)
    if used.sum() < 2:
        return float("nan"), float("nan"), used
    y = np.log(errs[used])
    w = np.ones_like(y) if floor <= 0 else np.log(errs[used] / floor)
    k, c = np.polyfit(ns[used], y, 1, w=np.sqrt(w))
    return float(-k), float(c), used


def _report(name, ns, errs, expected, floor, **extra) -> DecayReport:
    slope, c, used = fit_decay(ns, errs, floor)
    return DecayReport(name, np.asarray(ns), np.asarray(errs), slope, expected, floor, used,
                       {"fit_intercept": c, **extra})


def _floor(e1, e2) -> float:
    if e2 is None:
        return 0.0
    return float(np.max(np.abs(np.asarray(e1) - np.asarray(e2))))


# ---------------------------------------------------------------- diagnostics

def _psi_a_errors(basis: OrthoBasis, ns) -> np.ndarray:
    return np.array([basis.norm(basis.psi[:, n] - basis.a[:, n]) for n in ns])


def decay_psi_vs_a(basis: OrthoBasis, n_range=range(4, 15), basis2: OrthoBasis | None = None) -> DecayReport:
    """||psi_n - a_n|| against n; expected rate 2r a_s."""
    ns = np.array(list(n_range))
    errs = _psi_a_errors(basis, ns)
    floor = _floor(errs, _psi_a_errors(basis2, ns)) if basis2 is not None else 0.0
    p = basis.coupling.params
    return _report("psi_vs_a", ns, errs, 2 * p.r * p.a_s, floor)


def apply_cI(gc: Coupling, rule: QuadratureRule, f: np.ndarray) -> np.ndarray:
    """(I(gamma) f)(x_i) = c(gamma;x_i)^{-1} sum_j q_j S(x_i, y_j) f(y_j)/c(gamma';-y_j) on the rule nodes."""
    check_coupling(gc, "Pi_r")
    x = rule.nodes
    S = kernel_matrix(gc.params, gc.sigma, x, x)
    cx = c_func(gc, x.astype(complex))
    cy = c_func(gc.dual(), -x.astype(complex))
    return (S @ ((rule.weights / cy)[:, None] * f)) / cx[:, None]


def _I_psi_errors(gc, basis, basis_d, ns):
    img = apply_cI(gc.dual(), basis.rule, basis.psi[:, list(ns)])
    kap = kappa_n(gc.params, gc.sigma, np.asarray(ns))
    return np.array([basis.norm(img[:, i] - kap[i] * basis_d.psi[:, n]) for i, n in enumerate(ns)])


def decay_I_on_psi(gc: Coupling, rule: QuadratureRule, n_range=range(4, 15),
                   rule2: QuadratureRule | None = None) -> DecayReport:
    """||I(gamma') psi_n(gamma) - kappa_n psi_n(gamma')|| against n; expected rate 2r a_s."""
    check_coupling(gc, "Pi_r")
    ns = list(n_range)
    nm = max(ns)
    errs = _I_psi_errors(gc, build_ortho(gc, rule, nm), build_ortho(gc.dual(), rule, nm), ns)
    floor = 0.0
    if rule2 is not None:
        e2 = _I_psi_errors(gc, build_ortho(gc, rule2, nm), build_ortho(gc.dual(), rule2, nm), ns)
        floor = _floor(errs, e2)
    p = gc.params
    norm0 = float(np.linalg.norm(apply_cI(gc.dual(), rule, build_ortho(gc, rule, 0).psi[:, :1])[:, 0]
                                 * np.sqrt(rule.weights)))
    return _report("I_on_psi", ns, errs, 2 * p.r * p.a_s, floor, norm_n0=norm0)


def decay_b_vs_a(gc: Coupling, rule: QuadratureRule, n_range=range(4, 15)) -> DecayReport:
    """||I(gamma') a_n(gamma) - kappa_n a_n(gamma')|| against n; expected rate 2r min(a, sigma + a_s)."""
    check_coupling(gc, "Pi_r")
    ns = list(n_range)
    nm = max(ns)
    x = rule.nodes
    img = apply_cI(gc.dual(), rule, a_functions(gc, x, nm)[:, ns])
    ad = a_functions(gc.dual(), x, nm)
    kap = kappa_n(gc.params, gc.sigma, np.asarray(ns))
    sq = np.sqrt(rule.weights)
    errs = np.array([np.linalg.norm((img[:, i] - kap[i] * ad[:, n]) * sq) for i, n in enumerate(ns)])
    p = gc.params
    eta = min(p.a, gc.sigma + p.a_s)
    return _report("b_vs_a", ns, errs, 2 * p.r * eta, 0.0)


def lambda_vs_kappa(dec: SpectralDecomposition, n_range=range(4, 15),
                    dec2: SpectralDecomposition | None = None) -> DecayReport:
    """|lambda_n - kappa_n| against n and the ratios lambda_n/kappa_n."""
    gc = dec.coupling
    p = gc.params
    ns = np.array(list(n_range))
    kap = kappa_n(p, gc.sigma, ns)
    errs = np.abs(dec.lambdas[ns] - kap)
    floor = _floor(errs, np.abs(dec2.lambdas[ns] - kap)) if dec2 is not None else 0.0
    in_hyp = gc.sigma < p.a_s
    return _report("lambda_vs_kappa", ns, errs, 2 * p.r * p.a_s, floor,
                   ratios=[float(v) for v in dec.lambdas[ns] / kap],
                   hypotheses=("satisfied" if in_hyp else
                               "outside the convergence hypotheses, reported informationally"))


def f_vs_psi(dec: SpectralDecomposition, basis: OrthoBasis, n_range=range(4, 15),
             rho: float | None = None) -> DecayReport:
    """min over s = +-1 of ||f_n - s psi_n|| with the chosen signs recorded."""
    gc = dec.coupling
    p = gc.params
    if basis.rule.n_nodes != dec.rule.n_nodes or not np.allclose(basis.rule.nodes, dec.rule.nodes):
        raise DomainError("basis and decomposition must share the quadrature rule")
    ns = np.array(list(n_range))
    f = dec.f(0)
    errs, signs = [], []
    for n in ns:
        dp = basis.norm(f[:, n] - basis.psi[:, n])
        dm = basis.norm(f[:, n] + basis.psi[:, n])
        errs.append(min(dp, dm))
        signs.append(1 if dp <= dm else -1)
    sd = gc.is_self_dual()
    ok = (gc.sigma < p.a_s) if sd else (2 * gc.sigma < p.a_s)
    if rho is None:
        rho = (p.a_s - gc.sigma) if sd else (p.a_s - 2 * gc.sigma)
    return _report("f_vs_psi", ns, np.array(errs), 2 * p.r * rho, 0.0, signs=signs,
                   hypotheses=("satisfied" if ok else
                               "outside the convergence hypotheses, reported informationally"))


# ---------------------------------------------------------------- interval trapping

@dataclass
class TrapReport:
    """Outcome of the singular value interval-trapping argument."""

    K: int
    M: int
    mu_K: float
    trapped: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def all_trapped(self) -> bool:
        return bool(np.all(self.trapped[self.M + 1:]))


def trap_singular_values(T: np.ndarray, Pin: np.ndarray, Pout: np.ndarray, s: float, a: float,
                         C: float, N: int = 0) -> TrapReport:
    """Check that nu_n lies in [e^{-ns} - Ce^{-na}, e^{-ns} + Ce^{-na}] beyond the index M.

    Pin, Pout hold orthonormal columns p_n, p_n' with ||T p_n - e^{-ns} p_n'|| <= C e^{-na}
    for n > N.  K is the first index past which the intervals are positive and
    separated; M is the first index with e^{-Ms} + Ce^{-Ma} below the smallest
    singular value of T on span(p_0..p_K).
    """
    if not 0 < s < a:
        raise DomainError("need 0 < s < a")
    dim = T.shape[1]
    n = np.arange(dim)
    lo = np.exp(-n * s) - C * np.exp(-n * a)
    hi = np.exp(-n * s) + C * np.exp(-n * a)
    gap = lo[:-1] - hi[1:]
    good = (lo[:-1] > 0) & (gap > np.exp(-n[:-1] * s) * (1 - math.exp(-s)) / 2)
    K = N
    while K < dim - 1 and not np.all(good[K + 1:]):
        K += 1
    mu = float(np.linalg.svd(T @ Pin[:, : K + 1], compute_uv=False)[-1])
    M = K
    while M < dim - 1 and not (math.exp(-M * s) + C * math.exp(-M * a) < mu):
        M += 1
    nu = np.linalg.svd(T, compute_uv=False)
    slack = 10 * np.finfo(float).eps * dim * nu[0]  # absolute accuracy of the computed singular values
    return TrapReport(K, M, mu, (nu >= lo - slack) & (nu <= hi + slack), lo, hi)


def synthetic_trap_operator(dim: int, s: float, a: float, C: float, seed: int = 0, dense: bool = False):
    """Random T = Q' (diag(e^{-ns}) + E) Q^T with ||E e_n|| <= C e^{-na}; returns (T, Q, Q').

    By default E is strictly upper triangular, so the error of T p_n points into
    earlier output directions.  With dense=True, E is a full random matrix; column
    bounds alone then do not confine the singular values to the intervals."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    Qp, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    n = np.arange(dim)
    E = rng.standard_normal((dim, dim))
    if not dense:
        E = np.triu(E, 1)
    cn = np.linalg.norm(E, axis=0)
    cn[cn == 0] = 1
    E *= C * np.exp(-n * a) * rng.uniform(0.2, 1.0, dim) / cn
    T = Qp @ (np.diag(np.exp(-n * s)) + E) @ Q.T
    return T, Q, Qp
