import json

import pytest

from vds.cli import ExperimentConfig, build_parser, main, resolve_config

TOML = """
nodes = 120
seed = 4
n_max = 4

[params]
r = 1.0
a_plus = 0.7
a_minus = 1.1

[coupling]
gamma = [-0.5, -0.2, -0.1, 0.1, -0.3, -0.2, 0.05, -0.35]
regime = "mixed"
"""


@pytest.fixture
def toml_cfg(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(TOML)
    return path


def _read(d):
    return {f.name: f.read_bytes() for f in sorted(d.iterdir())}


def test_toml_json_equivalence(tmp_path, toml_cfg):
    cfg = ExperimentConfig.load(toml_cfg)
    jpath = tmp_path / "cfg.json"
    jpath.write_text(cfg.to_json())
    assert ExperimentConfig.load(jpath) == cfg


def test_flags_override_config(toml_cfg):
    args = build_parser().parse_args(["spectrum", "--config", str(toml_cfg), "--seed", "9", "--nodes", "64",
                                      "--out", "x"])
    cfg = resolve_config(args)
    assert (cfg.seed, cfg.nodes, cfg.out, cfg.experiment) == (9, 64, "x", "spectrum")
    assert cfg.n_max == 4


def test_spectrum_reproducible(tmp_path, toml_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["spectrum", "--config", str(toml_cfg), "--out", str(a)]) == 0
    assert main(["spectrum", "--config", str(toml_cfg), "--out", str(b)]) == 0
    assert _read(a) == _read(b)
    rep = json.loads((a / "report.json").read_text())
    assert rep["header"]["seed"] == 4 and rep["passed"]
    assert (a / "lambdas.csv").read_text().startswith("# command=spectrum nodes=120 seed=4")


def test_identities_seeded(tmp_path, toml_cfg):
    outs = []
    for i, seed in enumerate(("1", "1", "2")):
        d = tmp_path / f"o{i}"
        assert main(["identities", "--config", str(toml_cfg), "--seed", seed, "--out", str(d)]) == 0
        outs.append(_read(d))
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_free_identities_trivial(tmp_path):
    path = tmp_path / "f.toml"
    path.write_text('[coupling]\npreset = "gamma_f"\n')
    assert main(["identities", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["result"]["free_coefficients"] < 1e-12


def test_acceptance_failure_exit_code(tmp_path, toml_cfg):
    text = TOML + "\n[tolerances]\nconvergence = 1e-30\n"
    path = tmp_path / "strict.toml"
    path.write_text(text)
    assert main(["spectrum", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert not json.loads((tmp_path / "o" / "report.json").read_text())["passed"]


@pytest.mark.parametrize("text", [
    "nodes = 3\n",
    "bogus = 1\n",
    "[params]\nr = 1.0\na_plus = -0.7\na_minus = 1.1\n",
    '[coupling]\npreset = "nope"\n',
    '[coupling]\ngamma = [0.1, 0.2]\n',
    "nodes = [\n",
])
def test_config_errors_exit_2(tmp_path, text):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    assert main(["spectrum", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_domain_error_exit_2(tmp_path):
    path = tmp_path / "f.toml"
    path.write_text('[coupling]\npreset = "gamma_f"\n')
    assert main(["spectrum", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_exit_2(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "none.toml")]) == 2


def test_free_gold(tmp_path):
    assert main(["free-gold", "--nodes", "200", "--out", str(tmp_path / "g")]) == 0
    lines = (tmp_path / "g" / "lambda_gold.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1].startswith("coupling,n,lambda,closed_form,rel_error")
