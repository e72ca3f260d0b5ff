import numpy as np
import pytest

from vds.adoeigen import (
    check_F_identity,
    check_Hn_identities,
    check_kernel_identity,
    default_probes,
    eigen_report,
    extract_E,
    free_E,
    symmetry_residue_probe,
    unboundedness_probe,
    v_probe,
)
from vds.errors import DomainError, RatioGuard
from vds.hsspec import decompose, gauss_rule
from vds.specfun import Params
from vds.vdcore import Coupling, gamma_dot, gamma_f, gamma_L, pi_ell_tau

# Reference from a 400-node decomposition for the generic mixed coupling of conftest
E_S_REF_MIXED = [0.8008464275434518, 3.8390895832496716, 16.228855219465352, 66.47243366604138]
E_L_REF_MIXED = [1.090993800518217, 8.995249667412578, 81.18141811173635, 734.3033795195394]


@pytest.fixture(scope="module")
def dec_free(p, rule):
    return decompose(gamma_dot(p), rule, 12)


def test_free_lame_E_closed_form(p, dec_free):
    rep = eigen_report(dec_free, n_max=9)
    n = np.arange(9)
    assert np.allclose(rep.E_s, free_E(p, "s", n), rtol=1e-7)
    assert np.allclose(rep.E_l, free_E(p, "l", n), rtol=1e-7)


def test_E_matches_node_doubling_reference(dec_mixed):
    rep = eigen_report(dec_mixed, n_max=4)
    assert np.allclose(rep.E_s, E_S_REF_MIXED, rtol=1e-9)
    assert np.allclose(rep.E_l, E_L_REF_MIXED, rtol=1e-9)


def test_eigen_report_invariants(dec_mixed):
    rep = eigen_report(dec_mixed, n_max=8)
    assert np.all(rep.residual_s < 1e-6) and np.all(rep.residual_l < 1e-6)
    assert np.all(rep.E_s > rep.M_s)
    assert np.all(rep.cross_s < 1e-6) and np.all(rep.cross_l < 1e-6)
    assert "below_lower_bound" not in rep.flags
    rows = rep.to_rows()
    assert len(rows) == 8 and set(rows[0]) == {"n", "E_s", "res_s", "E_l", "res_l", "flags"}


def test_dual_side_has_same_E(dec_mixed):
    a = eigen_report(dec_mixed, n_max=6, side=0)
    b = eigen_report(dec_mixed, n_max=6, side=1)
    assert np.allclose(np.sort(a.E_s), np.sort(b.E_s), rtol=1e-8)
    assert np.allclose(np.sort(a.E_l), np.sort(b.E_l), rtol=1e-8)


def test_probe_consistency(dec_mixed, p):
    e1, _ = extract_E(dec_mixed, "s", 2, probe_points=[np.pi / (4 * p.r), np.pi / (5 * p.r)])
    e2, _ = extract_E(dec_mixed, "s", 2, probe_points=[np.pi / (6 * p.r), np.pi / (3 * p.r)])
    assert abs(e1 - e2) < 1e-6 * abs(e1)
    assert len(default_probes(p)) == 5


def test_Hn_identities_generic(dec_real):
    res = check_Hn_identities(dec_real, n_max=4)
    done = [c for c in res if not c.skipped]
    assert done and max(c.error for c in done) < 1e-5


def test_Hn_identities_free_vanish(dec_free):
    res = [c for c in check_Hn_identities(dec_free, n_max=4, families=("small_step",)) if not c.skipped]
    assert res and all(c.vanishing for c in res)


def test_F_identity_fails_for_free_lame(dec_free):
    ratio, pred = check_F_identity(dec_free)
    assert np.all(np.abs(ratio - pred) > 0.1 * abs(pred))


def test_residue_probe(dec_real, p):
    base = symmetry_residue_probe(dec_real, 0, n=1)
    bad = symmetry_residue_probe(dec_real, v_probe(p, 1), n=1)
    assert base["relative"] < 1e-8
    assert bad["relative"] > 1e3 * base["relative"]


def test_residue_probe_ratio_guard():
    q = Params(1.0, 0.55, 1.1)
    dec = decompose(gamma_dot(q), gauss_rule(q, 64), 4)
    with pytest.raises(RatioGuard):
        symmetry_residue_probe(dec, 0)


def test_pi_sign_for_small_negative_coupling(p):
    g = Coupling.real(p, [-0.05, -0.1, -0.02, -0.07, -0.04, -0.08, -0.03, -0.06])
    v = pi_ell_tau(g, 1, 0)
    assert abs(v.imag) < 1e-12 * abs(v) and v.real > 0


def test_kernel_identity_domain(p):
    with pytest.raises(DomainError):
        check_kernel_identity(gamma_f(p), [0.1], [0.2])


def test_unboundedness_slope(p, rule):
    for g in (gamma_dot(p), gamma_L(p, 0.3)):
        res = unboundedness_probe(g, rule)
        assert abs(res["slope"] / res["expected"] - 1) < 0.1
        assert res["cross_check"] < 1e-10
