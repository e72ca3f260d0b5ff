import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vds.cli import ExperimentConfig
from vds.hsspec import gauss_rule
from vds.polyasym import build_ortho
from vds.specfun import Params, eval_E, eval_G, eval_R
from vds.symlab import apply_J, operator_difference
from vds.vdcore import Coupling, kernel_S

P = Params(1.0, 0.7, 1.1)
RULE = gauss_rule(P, 200)

re_part = st.floats(-math.pi / 2, math.pi / 2)
im_part = st.floats(-0.4, 0.4)
small = st.floats(-0.35, 0.35)
couplings = st.lists(small, min_size=8, max_size=8)
even_masks = st.lists(st.booleans(), min_size=8, max_size=8).filter(lambda m: sum(m) % 2 == 0)


@settings(max_examples=50, deadline=None)
@given(re_part, im_part)
def test_G_reflection_and_periodicity(x, y):
    z = complex(x, y)
    assert abs(eval_G(P, z) * eval_G(P, -z) - 1) < 1e-12
    assert abs(eval_G(P, z + math.pi / P.r) - eval_G(P, z)) < 1e-12 * abs(eval_G(P, z))


@settings(max_examples=50, deadline=None)
@given(re_part, im_part)
def test_E_and_R_conjugation(x, y):
    z = complex(x, y)
    assert abs(np.conj(eval_E(P, np.conj(z))) - eval_E(P, -z)) < 1e-12 * abs(eval_E(P, -z))
    for d in (1, -1):
        assert abs(eval_R(P, d, -z) - eval_R(P, d, z)) < 1e-12 * abs(eval_R(P, d, z))


@settings(max_examples=50, deadline=None)
@given(couplings)
def test_dual_involution(g):
    c = Coupling.real(P, g)
    d = c.dual()
    assert abs(d.sigma - c.sigma) < 1e-12
    assert np.allclose(d.dual().garr, c.garr, atol=1e-12)
    assert np.allclose(apply_J(c).garr, -d.garr, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(couplings, even_masks)
def test_even_flip_preserves_operators(g, mask):
    c = Coupling.real(P, g)
    assert operator_difference(c, c.flip(mask)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(re_part, im_part, re_part, im_part)
def test_kernel_symmetry(x1, y1, x2, y2):
    x, y = complex(x1, 0.5 * y1), complex(x2, 0.5 * y2)
    s = kernel_S(P, 0.4, x, y)
    assert abs(kernel_S(P, 0.4, y, x) - s) < 1e-12 * abs(s)
    assert abs(kernel_S(P, 0.4, -x, y) - s) < 1e-12 * abs(s)


@settings(max_examples=15, deadline=None)
@given(couplings)
def test_gram_orthonormality(g):
    b = build_ortho(Coupling.real(P, g), RULE, 10)
    G = (b.psi.conj().T * RULE.weights) @ b.psi
    assert np.max(np.abs(G - np.eye(11))) < 1e-10


configs = st.builds(
    ExperimentConfig,
    experiment=st.sampled_from(["spectrum", "eigens", "cluster", "all"]),
    params=st.fixed_dictionaries({"r": st.floats(0.5, 2), "a_plus": st.floats(0.1, 2), "a_minus": st.floats(0.1, 2)}),
    coupling=st.one_of(
        st.fixed_dictionaries({"preset": st.sampled_from(["gamma_dot", "gamma_l", "gamma_s"])}),
        st.fixed_dictionaries({"gamma": couplings, "regime": st.sampled_from(["real", "mixed"])}),
    ),
    nodes=st.integers(8, 1000),
    n_max=st.integers(1, 20),
    seed=st.integers(0, 2 ** 31),
    out=st.text(alphabet="abcdefgh/_-", min_size=1, max_size=12),
)


@settings(max_examples=50, deadline=None)
@given(configs)
def test_config_roundtrip(cfg):
    assert ExperimentConfig.loads(cfg.to_toml(), "toml") == cfg
    assert ExperimentConfig.loads(cfg.to_json(), "json") == cfg
