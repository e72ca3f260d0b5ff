import math

import numpy as np
import pytest

from vds.errors import NonConvergent, OutOfRange, PoleProximity
from vds.specfun import (
    G_special,
    Params,
    TruncationPolicy,
    eval_E,
    eval_G,
    eval_Gt,
    eval_R,
    eval_s,
    p_delta,
    qprod,
    residue_r,
    specfun_suite,
)

# Reference values from a 30-digit mpmath evaluation of the defining double
# products (independent of the shift reduction used by the library).
G_REF = [
    (0.3 + 0.1j, 0.8719711349162739 + 0.2868233168878506j),
    (0.2 - 0.5j, 1.6912104571610056 + 0.7538789237600823j),
    (0.7 + 1.3j, -1.6897014603193805 + 1.5514601424046397j),
    (-0.4 + 2.1j, 5.67301667123563 - 5.813002920843762j),
]
E_REF = [
    (0.4 + 0.2j, 0.7434794789188399 + 0.22999911817387292j),
    (0.1 - 0.8j, 0.9517637346166317 + 0.009649438133369085j),
]


@pytest.mark.parametrize("z,ref", G_REF)
def test_G_against_product_reference(p, z, ref):
    assert abs(eval_G(p, z) - ref) < 1e-13 * abs(ref)


@pytest.mark.parametrize("z,ref", E_REF)
def test_E_against_product_reference(p, z, ref):
    assert abs(eval_E(p, z) - ref) < 1e-13 * abs(ref)


def test_R_against_product_reference(p):
    assert abs(eval_R(p, 1, 0.3 + 0.2j) - (0.25123382185955045 + 0.19468835985139674j)) < 1e-14
    assert abs(eval_R(p, -1, -0.6 + 0.4j) - (0.7197702790558783 - 0.5831949707013597j)) < 1e-14


def test_G_small_shift_parameters():
    q = Params(1.0, 0.3, 1.1)
    ref = -0.08442520741544246 - 0.07099768769158388j
    assert abs(eval_G(q, 0.25 + 0.9j) - ref) < 1e-13 * abs(ref)


def test_evaluation_methods_agree(p):
    z = np.array([0.1 + 0.2j, 0.7 - 0.3j, -0.5 + 0.05j])
    for m in ("product", "series"):
        assert np.allclose(eval_G(p, z, method=m), eval_G(p, z), rtol=1e-13)
        assert np.allclose(eval_E(p, z, method=m), eval_E(p, z), rtol=1e-13)
    assert np.allclose(eval_R(p, 1, z, method="series"), eval_R(p, 1, z), rtol=1e-13)


def test_scalar_and_array_shapes(p):
    assert isinstance(eval_G(p, 0.2), complex)
    out = eval_G(p, np.zeros((2, 3)) + 0.1)
    assert out.shape == (2, 3)


def test_G_at_origin_is_one(p):
    assert abs(eval_G(p, 0.0) - 1) < 1e-15


def test_G_special_values(p):
    for d in (1, -1):
        z = 0.5j * (p.ad(d) - p.ad(-d))
        assert abs(eval_G(p, z) - G_special(p, d)) < 1e-13


def test_s_has_zero_at_origin_and_unit_slope_scale(p):
    for d in (1, -1):
        assert abs(eval_s(p, d, 0.0)) < 1e-15
        # s_delta(z) ~ z near 0 by the choice of normalizer p_delta
        h = 1e-6
        assert abs(eval_s(p, d, h) / h - 1) < 1e-6


def test_p_delta_definition(p):
    assert p_delta(p, 1) == pytest.approx(2 * p.r * qprod(p.r, p.a_plus) ** 2, rel=1e-15)
    k = np.arange(1, 200)
    assert qprod(1.0, 0.7) == pytest.approx(np.prod(1 - np.exp(-1.4 * k)), rel=1e-14)


def test_G_pole_guard(p):
    with pytest.raises(PoleProximity):
        eval_G(p, -1j * p.a)
    with pytest.raises(PoleProximity):
        eval_Gt(p, p.a_plus, -0.5j * p.a_plus)


def test_residue_r_matches_limit(p):
    z0 = -1j * p.a
    eps = 1e-6
    approx = 0.5 * eps * (eval_G(p, z0 + eps) - eval_G(p, z0 - eps))
    assert abs(residue_r(p, 0) - approx) < 1e-8 * abs(approx)
    with pytest.raises(OutOfRange):
        residue_r(p, p.L + 1)


def test_truncation_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(eps=1e-3)
    with pytest.raises(ValueError):
        TruncationPolicy(max_terms=4)
    with pytest.raises(NonConvergent):
        eval_R(Params(1, 0.7, 1.1), 1, 0.1 + 30j, tp=TruncationPolicy(max_terms=16))


def test_params_validation():
    with pytest.raises(ValueError):
        Params(1.0, -0.7, 1.1)
    p = Params(1.0, 1.1, 0.7)
    assert p.a_s == 0.7 and p.a_l == 1.1 and p.sign("s") == -1
    assert Params(1, 0.7, 1.1).L == 1
    assert Params(1, 0.3, 1.1).L == 3
    assert Params(1, 0.7, 0.7).L is None
    assert not Params(1, 0.55, 1.1).ratio_ok_l


def test_specfun_suite_all_below_tolerance(p):
    errs = specfun_suite(p, n_points=200, seed=1)
    assert len(errs) > 30
    assert max(errs.values()) < 1e-11
