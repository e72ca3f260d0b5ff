"""Weyl-group experiments: cluster commutativity and spectral invariance scans.

Words act on couplings through permutations, even sign flips and the
reflection J gamma = gamma + sigma zeta (zeta the all-ones vector).  Images
outside Pi_r are brought back by an even flip before spectra are computed,
since flips leave the difference operators' spectra unchanged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .adoeigen import eigen_report
from .errors import DomainError, OrbitEscapesDomain
from .hsspec import QuadratureRule, build_cI_matrix, decompose
from .vdcore import MIXED, REAL, Coupling, cluster_members, coef_Va, coef_Vb, even_flip_masks

GENERATORS = ("perm", "flip", "J")


# ---------------------------------------------------------------- words

def apply_J(gc: Coupling) -> Coupling:
    """Reflection in the highest root: gamma -> gamma + sigma zeta."""
    s = gc.sigma
    if gc.regime == REAL:
        return Coupling.real(gc.params, gc.g + s)
    return Coupling(gc.params, tuple(v + s for v in gc.gamma), MIXED)


@dataclass(frozen=True)
class WeylWord:
    """Sequence of generators applied left to right.

    Each letter is ("perm", permutation), ("flip", mask of even weight) or ("J",).
    """

    letters: tuple = ()

    def __post_init__(self):
        for lt in self.letters:
            if lt[0] not in GENERATORS:
                raise DomainError(f"unknown generator {lt[0]!r}")
            if lt[0] == "flip" and sum(bool(b) for b in lt[1]) % 2:
                raise DomainError("sign flips must have even weight")

    @property
    def is_D8(self) -> bool:
        """True if the word uses only permutations and even flips."""
        return all(lt[0] != "J" for lt in self.letters)

    def label(self) -> str:
        parts = []
        for lt in self.letters:
            if lt[0] == "J":
                parts.append("J")
            elif lt[0] == "flip":
                parts.append("F" + "".join(str(int(bool(b))) for b in lt[1]))
            else:
                parts.append("P" + "".join(str(i) for i in lt[1]))
        return "*".join(parts) or "id"

    def apply(self, gc: Coupling) -> tuple[Coupling, list[dict]]:
        """Image coupling and the membership trace after each prefix."""
        trace = []
        cur = gc
        for lt in self.letters:
            if lt[0] == "J":
                cur = apply_J(cur)
            elif lt[0] == "flip":
                cur = cur.flip(lt[1])
            else:
                cur = cur.permute(lt[1])
            trace.append({"letter": lt[0], "in_Pi_tilde": cur.in_Pi_tilde(), "in_Pi_r": cur.in_Pi_r(),
                          "norm_below_a": bool(np.linalg.norm(cur.g) < cur.params.a)})
        return cur, trace

    def to_json(self) -> list:
        return [[lt[0]] + ([list(map(int, lt[1]))] if len(lt) > 1 else []) for lt in self.letters]

    @classmethod
    def from_json(cls, data) -> "WeylWord":
        return cls(tuple((d[0], tuple(d[1])) if len(d) > 1 else (d[0],) for d in data))


def flip_normalize(gc: Coupling) -> Coupling:
    """An even-flip image of gc in Pi_r, preferring the best-conditioned one.

    The score is min(sigma, d, d') so that the Nystrom rule resolves kernel
    and weight singularities.  Raises OrbitEscapesDomain when no image exists.
    """
    if not gc.in_Pi_tilde():
        raise OrbitEscapesDomain("image leaves Pi_tilde")
    best, score = None, -math.inf
    for m in even_flip_masks():
        img = gc.flip(m)
        if not img.in_Pi_r():
            continue
        sc = min(img.sigma, img.d, img.dual().d)
        if sc > score + 1e-12:
            best, score = img, sc
    if best is None:
        raise OrbitEscapesDomain("no even-flip image lies in Pi_r")
    return best


def default_words(gc: Coupling, n_flips: int = 4, n_perms: int = 3, seed: int = 0) -> list[WeylWord]:
    """Orbit sample: single flips keeping Pi_r, random permutations, J and J flip J chains."""
    rng = np.random.default_rng(seed)
    words = []
    flips = [m for m in even_flip_masks() if m.any() and gc.flip(m).in_Pi_r()]
    for i in rng.permutation(len(flips))[:n_flips]:
        words.append(WeylWord((("flip", tuple(int(b) for b in flips[i])),)))
    for _ in range(n_perms):
        if gc.regime == REAL:
            perm = rng.permutation(8)
        else:
            perm = np.concatenate([rng.permutation(4), 4 + rng.permutation(4)])
        words.append(WeylWord((("perm", tuple(int(v) for v in perm)),)))
    words.append(WeylWord((("J",),)))
    masks = [m for m in even_flip_masks() if m.any()]
    for i in rng.permutation(len(masks))[:2]:
        words.append(WeylWord((("J",), ("flip", tuple(int(b) for b in masks[i])), ("J",))))
    return words


# ---------------------------------------------------------------- commutators

def T_matrix(gc: Coupling, rule: QuadratureRule) -> np.ndarray:
    """Discretized T(gamma) = I(gamma) I(gamma') in the c-function gauge."""
    return build_cI_matrix(gc, rule) @ build_cI_matrix(gc.dual(), rule)


def normalized_commutator(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.linalg.norm(A @ B - B @ A) / (np.linalg.norm(A) * np.linalg.norm(B)))


@dataclass
class CommutatorReport:
    """Pairwise normalized commutators of discretized T operators."""

    n_nodes: int
    members: list
    pairs: list
    values: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.values)) if len(self.values) else 0.0

    def to_rows(self) -> list[dict]:
        return [{"i": int(i), "j": int(j), "commutator": float(v)} for (i, j), v in zip(self.pairs, self.values)]


def commutator_test(gd: Coupling, rule: QuadratureRule, pairs=None, members=None,
                    group: str = "full") -> CommutatorReport:
    """||[T1, T2]||_F/(||T1||_F ||T2||_F) over pairs of cluster members.

    members defaults to cluster_members(gd, group); pairs are index pairs into
    members and default to all pairs.
    """
    if not gd.in_Pi_r():
        raise DomainError("commutator test needs a base coupling in Pi_r")
    if members is None:
        members = cluster_members(gd, group)
    for m in members:
        if not m.in_Pi_r():
            raise DomainError("every member must lie in Pi_r")
    if pairs is None:
        pairs = list(itertools.combinations(range(len(members)), 2))
    Ts = {}
    vals = []
    for i, j in pairs:
        for k in (i, j):
            if k not in Ts:
                Ts[k] = T_matrix(members[k], rule)
        vals.append(normalized_commutator(Ts[i], Ts[j]))
    return CommutatorReport(rule.n_nodes, list(members), list(pairs), np.array(vals))


# ---------------------------------------------------------------- isospectrality

def match_multisets(ref, other, tol_ref, tol_other) -> tuple[float, bool]:
    """Greedy nearest matching of ref into other; returns (max relative deviation, all within tolerance).

    Within-tolerance means |ref - match| <= 10 (tol_ref + tol_other) |ref| for
    the residuals of the two entries.
    """
    ref, other = np.asarray(ref, float), np.asarray(other, float)
    free = list(range(len(other)))
    worst, ok = 0.0, True
    for i in np.argsort(ref):
        if not free:
            return math.inf, False
        j = min(free, key=lambda k: abs(other[k] - ref[i]))
        free.remove(j)
        dev = abs(other[j] - ref[i]) / abs(ref[i])
        worst = max(worst, dev)
        if dev > 10 * (tol_ref[i] + tol_other[j]):
            ok = False
    return worst, ok


@dataclass
class OrbitEntry:
    word: WeylWord
    image: Coupling
    normalized: Coupling | None
    trace: list
    escaped: str = ""
    E_s: list = field(default_factory=list)
    E_l: list = field(default_factory=list)
    dev_s: float = float("nan")
    dev_l: float = float("nan")
    match: bool = False
    same_operator: float = float("nan")

    def to_json(self) -> dict:
        return {"word": self.word.label(), "letters": self.word.to_json(), "image": self.image.to_json(),
                "normalized": self.normalized.to_json() if self.normalized else None,
                "trace": self.trace, "escaped": self.escaped, "E_s": self.E_s, "E_l": self.E_l,
                "dev_s": self.dev_s, "dev_l": self.dev_l, "match": self.match,
                "same_operator": self.same_operator}


@dataclass
class OrbitReport:
    base: Coupling
    E_s: list
    E_l: list
    entries: list

    @property
    def max_dev(self) -> float:
        d = [max(e.dev_s, e.dev_l) for e in self.entries if not e.escaped]
        return float(max(d)) if d else 0.0

    @property
    def all_match(self) -> bool:
        return all(e.match for e in self.entries if not e.escaped)

    def to_json(self) -> dict:
        return {"base": self.base.to_json(), "E_s": self.E_s, "E_l": self.E_l,
                "max_dev": self.max_dev, "all_match": self.all_match,
                "entries": [e.to_json() for e in self.entries]}


def operator_difference(g1: Coupling, g2: Coupling, x=None) -> float:
    """Max relative difference of the c-gauge coefficients V_a, V_b of both operators at sample points."""
    if x is None:
        x = np.array([0.13, 0.41, 0.77, 1.09]) * math.pi / (2 * g1.params.r) + 0.05j
    worst = 0.0
    for d in (1, -1):
        for f in (coef_Va, coef_Vb):
            a, b = f(d, g1, x), f(d, g2, x)
            worst = max(worst, float(np.max(np.abs(a - b) / (np.abs(a) + np.abs(b) + 1e-300))))
    return worst


def _spectra(gc: Coupling, rule: QuadratureRule, n_compare: int):
    dec = decompose(gc, rule)
    rep = eigen_report(dec, n_max=n_compare)
    return rep


def isospectrality_scan(gc: Coupling, words, rule: QuadratureRule, n_compare: int = 8,
                        pad: int = 3, tol_floor: float = 1e-7) -> OrbitReport:
    """Compare sorted E_s, E_l lists of gc with those of each word image.

    Images are flip-normalized into Pi_r.  The base list (n < n_compare) is
    matched into the image list (n < n_compare + pad) as multisets; agreement
    means within 10x the combined residuals, floored at tol_floor.
    """
    if gc.regime == REAL and any(not w.is_D8 for w in words) and not np.linalg.norm(gc.g) < gc.params.a:
        raise DomainError("E8 words need ||g||_2 < a")
    base_norm = flip_normalize(gc)
    base = _spectra(base_norm, rule, n_compare + pad)
    nb = n_compare
    rs = np.maximum(base.residual_s, tol_floor)
    rl = np.maximum(base.residual_l, tol_floor)
    entries = []
    for w in words:
        img, trace = w.apply(gc)
        e = OrbitEntry(w, img, None, trace)
        try:
            e.normalized = flip_normalize(img)
        except OrbitEscapesDomain as exc:
            e.escaped = str(exc)
            entries.append(e)
            continue
        if w.is_D8:
            e.same_operator = operator_difference(gc, img)
        rep = _spectra(e.normalized, rule, n_compare + pad)
        e.E_s = [float(v) for v in rep.E_s]
        e.E_l = [float(v) for v in rep.E_l]
        ros = np.maximum(rep.residual_s, tol_floor)
        rol = np.maximum(rep.residual_l, tol_floor)
        e.dev_s, ok_s = match_multisets(base.E_s[:nb], rep.E_s, rs[:nb], ros)
        e.dev_l, ok_l = match_multisets(base.E_l[:nb], rep.E_l, rl[:nb], rol)
        e.match = ok_s and ok_l
        entries.append(e)
    return OrbitReport(gc, [float(v) for v in base.E_s[:nb]], [float(v) for v in base.E_l[:nb]], entries)


def dual_isospectrality(gc: Coupling, rule: QuadratureRule, n_compare: int = 8, tol_floor: float = 1e-7) -> dict:
    """Sorted E lists for gamma and gamma' from one decomposition (both sides)."""
    if not gc.in_Pi_r():
        raise DomainError("dual isospectrality needs g in Pi_r")
    dec = decompose(gc, rule)
    r0 = eigen_report(dec, n_max=n_compare, side=0)
    r1 = eigen_report(dec, n_max=n_compare, side=1)
    out = {}
    for which, a, b, ra, rb in (("s", r0.E_s, r1.E_s, r0.residual_s, r1.residual_s),
                                ("l", r0.E_l, r1.E_l, r0.residual_l, r1.residual_l)):
        ia, ib = np.argsort(a), np.argsort(b)
        dev = np.abs(a[ia] - b[ib]) / np.abs(a[ia])
        tol = 10 * (np.maximum(ra[ia], tol_floor) + np.maximum(rb[ib], tol_floor))
        out[which] = {"E": [float(v) for v in a[ia]], "E_dual": [float(v) for v in b[ib]],
                      "max_dev": float(dev.max()), "within": bool(np.all(dev <= tol)),
                      "max_residual": float(max(ra.max(), rb.max()))}
    out["pass"] = out["s"]["within"] and out["l"]["within"]
    return out
