import numpy as np
import pytest

from vds.errors import DomainError, OrbitEscapesDomain
from vds.hsspec import gauss_rule
from vds.symlab import (
    T_matrix,
    WeylWord,
    apply_J,
    commutator_test,
    default_words,
    dual_isospectrality,
    flip_normalize,
    isospectrality_scan,
    match_multisets,
    normalized_commutator,
    operator_difference,
)
from vds.vdcore import Coupling, cluster_members, gamma_dot, gamma_l, gamma_s

WEYL_BASE = [-0.3, -0.1, 0.0, -0.2, 0.05, -0.1, 0.1, -0.65]


def test_J_fixes_coupling_with_zero_sum(p):
    g = Coupling.real(p, [0.1, -0.2, 0.3, -0.1, 0.05, -0.05, 0.2, -0.3])
    assert np.allclose(apply_J(g).garr, g.garr)


def test_dual_is_minus_J(g_real):
    assert np.allclose(apply_J(g_real).garr, -g_real.dual().garr)


def test_word_validation_and_json():
    with pytest.raises(DomainError):
        WeylWord((("flip", (1, 0, 0, 0, 0, 0, 0, 0)),))
    with pytest.raises(DomainError):
        WeylWord((("rot",),))
    w = WeylWord((("J",), ("flip", (1, 1, 0, 0, 0, 0, 0, 0)), ("perm", (1, 0, 2, 3, 4, 5, 6, 7))))
    assert WeylWord.from_json(w.to_json()) == w
    assert not w.is_D8 and w.label() == "J*F11000000*P10234567"


def test_flip_normalize(p):
    g = Coupling.real(p, WEYL_BASE)
    n = flip_normalize(g.flip([1, 1, 0, 0, 0, 0, 0, 0]))
    assert n.in_Pi_r()
    with pytest.raises(OrbitEscapesDomain):
        flip_normalize(Coupling.real(p, [1.5] + [0.0] * 7))


def test_d8_words_give_same_operator(p):
    g = Coupling.real(p, WEYL_BASE)
    for w in default_words(g):
        if w.is_D8:
            img, _ = w.apply(g)
            assert operator_difference(g, img) < 1e-12


def test_free_cluster_commutes(p, rule):
    Ts = [T_matrix(g, rule) for g in (gamma_dot(p), gamma_l(p), gamma_s(p))]
    assert normalized_commutator(Ts[0], Ts[1]) < 1e-9
    assert normalized_commutator(Ts[1], Ts[2]) < 1e-9


def test_cluster_commutator_test(p, rule):
    g = Coupling.real(p, [0.33, 0.3, -0.26, -0.22, -0.28, -0.84, -0.83, 0.22])
    members = cluster_members(g)[:6]
    rep = commutator_test(g, rule, members=members)
    assert rep.max < 1e-7 and len(rep.to_rows()) == 15


def test_generic_operators_do_not_commute(g_real, g_mixed, rule):
    # control: T of unrelated couplings must not commute
    assert normalized_commutator(T_matrix(g_real, rule), T_matrix(g_mixed, rule)) > 1e-6


def test_match_multisets():
    dev, ok = match_multisets([1.0, 2.0, 3.0], [3.0, 1.0, 2.0 + 1e-9, 7.0], [1e-8] * 3, [1e-8] * 4)
    assert ok and dev == pytest.approx(5e-10)
    _, ok = match_multisets([1.0, 2.0], [1.0, 2.1], [1e-8] * 2, [1e-8] * 2)
    assert not ok


def test_dual_isospectrality(g_mixed, rule):
    res = dual_isospectrality(g_mixed, rule)
    assert res["pass"] and res["s"]["max_dev"] < 1e-5


def test_isospectrality_scan(p, rule):
    g = Coupling.real(p, WEYL_BASE)
    words = default_words(g, n_flips=2, n_perms=1)
    rep = isospectrality_scan(g, words, rule, n_compare=6)
    assert rep.all_match
    assert rep.to_json()["all_match"]


def test_scan_requires_small_norm(p, rule):
    g = Coupling.real(p, [0.33, 0.3, -0.26, -0.22, -0.28, -0.84, -0.83, 0.22])
    assert g.in_Pi_r() and np.linalg.norm(g.g) > p.a
    with pytest.raises(DomainError):
        isospectrality_scan(g, [WeylWord((("J",),))], rule)
