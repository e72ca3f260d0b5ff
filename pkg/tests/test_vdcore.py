import math

import numpy as np
import pytest

from vds.adoeigen import check_kernel_identity
from vds.errors import DomainError
from vds.specfun import eval_s, p_delta
from vds.vdcore import (
    MIXED,
    REAL,
    Coupling,
    HalfPeriods,
    check_coupling,
    check_Dj,
    check_pid,
    cluster_members,
    coef_V,
    coef_Va,
    coef_Vb,
    c_func,
    gamma_dot,
    gamma_f,
    gamma_l,
    gamma_p,
    gamma_s,
    identity_suite,
    kappa_n,
    kernel_S,
    preset,
    self_dual_mixed,
    self_dual_real,
    w_func,
)


def test_coupling_validation(p):
    with pytest.raises(DomainError):
        Coupling.real(p, [0.1] * 7)
    with pytest.raises(DomainError):
        Coupling(p, tuple([0.1j] + [0] * 7), REAL)
    gm = Coupling.mixed(p, [-0.1] * 8)
    assert gm.regime == MIXED and sum(gm.im_signs) == 0


def test_sigma_and_domain(p, g_real, g_mixed):
    assert g_real.sigma == pytest.approx(0.45)
    assert g_real.in_Pi_r() and g_mixed.in_Pi_r()
    assert not gamma_f(p).in_Pi_r()
    with pytest.raises(DomainError):
        check_coupling(gamma_f(p))
    assert gamma_p(p).sigma == pytest.approx(0.0, abs=1e-15)


def test_dual_is_involution_and_keeps_sigma(g_real, g_mixed):
    for g in (g_real, g_mixed):
        gd = g.dual()
        assert gd.sigma == pytest.approx(g.sigma)
        assert np.allclose(gd.dual().garr, g.garr)


def test_json_roundtrip(p, g_mixed):
    back = Coupling.from_json(p, g_mixed.to_json())
    assert back.key() == g_mixed.key()


def test_free_coupling_has_trivial_coefficients(p):
    g = gamma_f(p)
    x = np.array([0.2, 0.5, 1.1]) + 0.05j
    for d in (1, -1):
        assert np.allclose(coef_V(d, g, x), 1, atol=1e-13)
        assert np.allclose(coef_Va(d, g, x), 1, atol=1e-13)
        assert np.allclose(coef_Vb(d, g, x), 0, atol=1e-12)
    assert np.allclose(c_func(g, x), 1, atol=1e-13)


def test_presets_sigma_values(p):
    # sigma(gamma_dot) = (a_l - a_s)/2 and sigma(gamma^(l)) = a_l/2
    assert gamma_dot(p).sigma == pytest.approx((p.a_l - p.a_s) / 2)
    assert gamma_l(p).sigma == pytest.approx(p.a_l / 2)
    assert gamma_s(p).sigma == pytest.approx(p.a_s / 2)
    assert gamma_l(p).is_self_dual()


def test_flipped_free_weight_closed_form(p):
    x = np.array([0.15, 0.4, 0.9, 1.3])
    dl = p.sign("l")
    ref = p_delta(p, dl) ** 4 * eval_s(p, dl, x) ** 2 * eval_s(p, dl, x + math.pi / (2 * p.r)) ** 2
    assert np.allclose(w_func(gamma_l(p), x), ref, rtol=1e-12)


def test_preset_dispatch(p):
    assert preset(p, "gamma_L", b="a_s").key() == gamma_dot(p).key()
    assert preset(p, "pi_rs1", u=[-0.1, -0.2, 0.05, -0.3], s=0.2).is_self_dual()
    assert self_dual_mixed(p, [-0.2, 0.1, -0.1, 0.05], 0.21).is_self_dual()
    assert self_dual_real(p, [-0.1, -0.2, 0.05, -0.3], 0.2).sigma == pytest.approx(0.2)
    with pytest.raises(DomainError):
        preset(p, "nope")


def test_kernel_symmetry(p):
    x = np.array([0.3 + 0.1j, 0.8 - 0.05j])
    y = np.array([0.5 - 0.2j, 1.2 + 0.1j])
    S = kernel_S(p, 0.4, x, y)
    assert np.allclose(S, kernel_S(p, 0.4, -x, y), rtol=1e-13)
    assert np.allclose(S, kernel_S(p, 0.4, y, x), rtol=1e-13)
    assert np.allclose(S, kernel_S(p, 0.4, x + math.pi / p.r, y), rtol=1e-12)


def test_kernel_identity_generic(g_real, g_mixed):
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 1.5, 20) + 0.1j * rng.uniform(-1, 1, 20)
    y = rng.uniform(0, 1.5, 20) + 0.1j * rng.uniform(-1, 1, 20)
    for g in (g_real, g_mixed):
        assert max(check_kernel_identity(g, x, y).values()) < 1e-9


def test_identity_suite(g_real, g_mixed):
    x = np.array([0.21, 0.55, 0.93, 1.31]) + 0.07j
    for g in (g_real, g_mixed):
        rep = identity_suite(g, x)
        assert not rep.failures, rep.failures


def test_Dj_and_pi_limits(p, g_real):
    y = np.linspace(0.05, 1.5, 20)
    assert max(check_Dj(p, g_real.sigma, y).values()) < 1e-11
    assert max(check_pid(g_real).values()) < 1e-8


def test_kappa_reference(p):
    # 30-digit mpmath evaluation of the closed form at sigma = 0.45, n = 3
    assert kappa_n(p, 0.45, 3) == pytest.approx(0.347138251884613281, rel=1e-13)
    with pytest.raises(DomainError):
        kappa_n(p, p.a, 1)


def test_half_periods(p):
    hp = HalfPeriods(p)
    assert hp.x_tau(1) == pytest.approx(math.pi / (2 * p.r) + 0.5j * p.a_l)


def test_cluster_contains_flipped_free_couplings(p):
    keys = {m.key() for m in cluster_members(gamma_dot(p), "full")}
    assert gamma_l(p).key() in keys and gamma_s(p).key() in keys
    for m in cluster_members(gamma_dot(p), "full"):
        assert m.in_Pi_r()


def test_cluster_of_real_coupling(p):
    g = Coupling.real(p, [0.33, 0.3, -0.26, -0.22, -0.28, -0.84, -0.83, 0.22])
    mem = cluster_members(g)
    assert 8 <= len(mem) <= 64
    assert len({m.key() for m in mem}) == len(mem)
