import math

import numpy as np
import pytest

from vds.errors import DomainError, IllConditioned, OutOfStrip
from vds.hsspec import (
    build_cI_matrix,
    build_I_matrix,
    convergence_check,
    decompose,
    elliptic_lambda,
    eval_F,
    eval_H,
    free_eigvecs,
    free_lambda,
    gauss_rule,
)
from vds.specfun import eval_s, p_delta
from vds.vdcore import gamma_dot, gamma_f, gamma_l, gamma_s, self_dual_real

# Nystrom reference at N = 400 for the generic real coupling of conftest
LAMBDA_REF_REAL = [44.70566240256841, 6.894035535180327, 1.6312996773929647, 0.482382909449713]
LAMBDA_REF_MIXED = [5.393880776353518, 2.808323777801147, 1.3590859035458889, 0.6458731118637261]


def test_gauss_rule_integrates_polynomials(p):
    r = gauss_rule(p, 20)
    h = math.pi / 2
    assert r.weights.sum() == pytest.approx(h, rel=1e-14)
    assert np.sum(r.weights * r.nodes ** 5) == pytest.approx(h ** 6 / 6, rel=1e-13)
    with pytest.raises(ValueError):
        gauss_rule(p, 4)


def test_lambdas_match_frozen_reference(dec_real, dec_mixed):
    assert np.allclose(dec_real.lambdas[:4], LAMBDA_REF_REAL, rtol=1e-12)
    assert np.allclose(dec_mixed.lambdas[:4], LAMBDA_REF_MIXED, rtol=1e-12)


def test_lambdas_positive_decreasing(dec_real):
    lam = dec_real.lambdas
    assert np.all(lam > 0) and np.all(np.diff(lam) <= 0)


def test_free_lame_lambda_closed_form(p, rule):
    dec = decompose(gamma_dot(p), rule, 11)
    assert np.allclose(dec.lambdas, free_lambda(p, np.arange(11)), rtol=1e-8)


def test_flipped_free_lambda_closed_forms(p, rule):
    n = np.arange(11)
    assert np.allclose(decompose(gamma_l(p), rule, 11).lambdas, elliptic_lambda(p, "l", n), rtol=1e-8)
    assert np.allclose(decompose(gamma_s(p), rule, 11).lambdas, elliptic_lambda(p, "s", n), rtol=1e-8)


def test_free_lame_eigenvectors(p, rule):
    dec = decompose(gamma_dot(p), rule, 11)
    ef = free_eigvecs(p, rule.nodes, 11)
    assert np.max(np.abs(dec.e(0) - ef)) < 1e-7


def test_free_lame_continuation_closed_form(p, rule):
    dec = decompose(gamma_dot(p), rule, 6)
    dl = p.sign("l")
    for x in (0.6 + 0.3j, 0.35 + 0.55j, 1.1 - 0.2j):
        for n in range(4):
            ref = math.sqrt(4 * p.r / math.pi) * np.sin(2 * (n + 1) * p.r * x) / (p_delta(p, dl) * eval_s(p, dl, 2 * x))
            assert abs(eval_F(dec, 0, n, x) - ref) < 1e-9 * max(1.0, abs(ref))


def test_self_dual_matrix_is_symmetric(p, rule):
    g = self_dual_real(p, [-0.1, -0.2, 0.05, -0.3], 0.2)
    M = build_I_matrix(g, rule)
    assert np.allclose(M, M.T, rtol=1e-12, atol=1e-14 * np.abs(M).max())
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))
    top = ev[ev > 1e-10 * ev.max()]
    assert np.all(top > 0)


def test_c_gauge_matrix_has_same_singular_values(g_real, rule, dec_real):
    s = np.linalg.svd(build_cI_matrix(g_real, rule), compute_uv=False)
    assert np.allclose(s[:6], dec_real.lambdas[:6], rtol=1e-10)


def test_duality_action(dec_real, g_real, rule):
    # I(gamma) maps the normalized eigenvector on the dual side to lambda_n times the one on this side
    M = build_I_matrix(g_real, rule)
    for n in range(5):
        assert np.allclose(M @ dec_real.V[:, n], dec_real.lambdas[n] * dec_real.U[:, n], atol=1e-12)


def test_node_doubling(g_real):
    assert convergence_check(g_real, 200, 11) < 1e-8


def test_continuation_matches_real_extension(dec_real):
    x = np.array([0.3, 0.77, 1.2])
    Fr = dec_real.F_real(0, x)
    for i, xv in enumerate(x):
        for n in range(4):
            assert abs(eval_F(dec_real, 0, n, xv) - Fr[i, n]) < 1e-9 * np.abs(Fr[:, n]).max()


def test_H_even_and_real(dec_mixed):
    for n in range(3):
        h1 = eval_H(dec_mixed, 0, n, 0.4 + 0.2j)
        h2 = eval_H(dec_mixed, 0, n, -0.4 - 0.2j)
        assert abs(h1 - h2) < 1e-9 * abs(h1)
        hr = eval_H(dec_mixed, 0, n, 0.55)
        assert abs(hr.imag) < 1e-10 * abs(hr)


def test_continuation_errors(dec_real):
    with pytest.raises(OutOfStrip):
        eval_F(dec_real, 0, 0, 0.5 + 3.0j)


def test_decompose_errors(p, rule):
    with pytest.raises(DomainError):
        decompose(gamma_f(p), rule)
    with pytest.raises(IllConditioned):
        decompose(gamma_dot(p), rule, n_modes=200)


def test_json_export(dec_real):
    d = dec_real.to_json()
    assert d["n_nodes"] == 200 and len(d["lambdas"]) == dec_real.n_modes
