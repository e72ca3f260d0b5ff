import numpy as np
import pytest

from vds.errors import DomainError
from vds.hsspec import decompose, gauss_rule
from vds.polyasym import (
    build_ortho,
    decay_b_vs_a,
    decay_I_on_psi,
    decay_psi_vs_a,
    f_vs_psi,
    fit_decay,
    lambda_vs_kappa,
    synthetic_trap_operator,
    trap_singular_values,
    wP_weight,
)
from vds.vdcore import gamma_dot, gamma_f, self_dual_mixed


@pytest.fixture(scope="module")
def rule400(p):
    return gauss_rule(p, 400)


@pytest.fixture(scope="module")
def rule800(p):
    return gauss_rule(p, 800)


def test_gram_and_leading_sign(g_real, rule400):
    b = build_ortho(g_real, rule400, 14)
    assert b.gram_error < 1e-10
    assert np.all(b.beta > 0)
    # grid samples and recurrence evaluation agree
    assert np.allclose(b.eval_P(rule400.nodes), b.P, atol=1e-10)
    assert np.allclose(b.eval_psi(rule400.nodes), b.psi, atol=1e-10)


def test_weight_positive(g_real, rule400):
    assert np.all(wP_weight(g_real, rule400.nodes) > 0)


def test_free_lame_psi_equals_a(p, rule400):
    b = build_ortho(gamma_dot(p), rule400, 10)
    for n in range(11):
        assert b.norm(b.psi[:, n] - b.a[:, n]) < 1e-10


def test_free_lame_f_equals_psi(p, rule400):
    dec = decompose(gamma_dot(p), rule400, 11)
    b = build_ortho(gamma_dot(p), rule400, 10)
    rep = f_vs_psi(dec, b, range(0, 11))
    assert np.max(rep.errors) < 1e-10


def test_decay_rates(g_real, rule400, rule800):
    bound = 0.85 * 2 * g_real.params.r * g_real.params.a_s
    ns = range(4, 15)
    assert decay_psi_vs_a(build_ortho(g_real, rule400, 14), ns, build_ortho(g_real, rule800, 14)).slope >= bound
    assert decay_I_on_psi(g_real, rule400, ns, rule800).slope >= bound
    lk = lambda_vs_kappa(decompose(g_real, rule400), ns, decompose(g_real, rule800))
    assert lk.slope >= bound
    assert abs(lk.extra["ratios"][6] - 1) < 0.01  # n = 10
    assert lk.extra["hypotheses"] == "satisfied"


def test_b_vs_a_decays(g_real, rule400):
    rep = decay_b_vs_a(g_real, rule400)
    assert np.isfinite(rep.slope) and rep.slope > 0


def test_f_vs_psi_positive_slope(p, rule400):
    g = self_dual_mixed(p, [-0.2, 0.1, -0.1, 0.05], 0.3 * p.a_s)
    rep = f_vs_psi(decompose(g, rule400), build_ortho(g, rule400, 14))
    assert rep.slope > 0
    assert set(rep.extra["signs"]) <= {1, -1}


def test_fit_decay_exact_exponential():
    ns = np.arange(4, 15)
    slope, c, used = fit_decay(ns, 3.0 * np.exp(-1.3 * ns))
    assert slope == pytest.approx(1.3, rel=1e-12)
    assert c == pytest.approx(np.log(3.0), rel=1e-12)
    slope, _, used = fit_decay(ns, np.maximum(np.exp(-1.3 * ns), 1e-7), floor=1e-7)
    assert slope == pytest.approx(1.3, rel=1e-9) and not used[-1]


def test_build_ortho_domain(p, rule400):
    with pytest.raises(DomainError):
        build_ortho(gamma_f(p), rule400, 4)
    with pytest.raises(DomainError):
        build_ortho(gamma_dot(p), gauss_rule(p, 20), 12)


def test_decomposition_and_basis_must_share_rule(g_real, rule400, rule800):
    with pytest.raises(DomainError):
        f_vs_psi(decompose(g_real, rule400), build_ortho(g_real, rule800, 14))


@pytest.mark.parametrize("seed", range(5))
def test_trapping_upper_triangular_error(seed):
    s, a, C = 0.3, 0.9, 0.5
    T, Q, Qp = synthetic_trap_operator(60, s, a, C, seed=seed)
    rep = trap_singular_values(T, Q, Qp, s, a, C)
    assert rep.all_trapped


def test_trapping_fails_for_dense_error():
    # Column bounds alone do not confine the singular values.
    s, a, C = 0.3, 0.9, 0.5
    fails = 0
    for seed in range(5):
        T, Q, Qp = synthetic_trap_operator(60, s, a, C, seed=seed, dense=True)
        fails += not trap_singular_values(T, Q, Qp, s, a, C).all_trapped
    assert fails > 0


def test_trap_domain():
    T, Q, Qp = synthetic_trap_operator(10, 0.3, 0.9, 0.5)
    with pytest.raises(DomainError):
        trap_singular_values(T, Q, Qp, 0.9, 0.3, 0.5)
