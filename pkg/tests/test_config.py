import pytest

from maxhom.config import DEFAULTS, ConfigError, RunConfig


def test_defaults_validate():
    cfg = RunConfig()
    assert cfg["coefficients"]["family"] in ("constant", "layered_isotropic")
    assert len(cfg["lattice"]["basis"]) == 3


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        RunConfig({"coefficients": {"famly": "constant"}})
    with pytest.raises(ConfigError):
        RunConfig({"mystery_section": {}})


def test_free_form_parameters_accepted():
    cfg = RunConfig({"coefficients": {"family": "layered_isotropic",
                                      "parameters": {"frequency": 2}}})
    assert cfg["coefficients"]["parameters"]["frequency"] == 2


def test_validation_rejects_bad_values():
    with pytest.raises(ConfigError):
        RunConfig({"coefficients": {"family": "no_such_family"}})
    with pytest.raises(ConfigError):
        RunConfig({"sweep": {"n_list": [0, 2]}})
    with pytest.raises(ConfigError):
        RunConfig({"lattice": {"basis": [[1, 0], [0, 1]]}})


def test_hash_is_deterministic_and_sensitive():
    a = RunConfig()
    b = RunConfig()
    c = RunConfig({"sweep": {"tau": 2.0}})
    assert a.hash() == b.hash()
    assert a.hash() != c.hash()
    assert len(a.hash()) == 16


def test_from_file_and_toml_roundtrip(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        '[coefficients]\nfamily = "layered_isotropic"\n'
        "[sweep]\nn_list = [2, 4]\ntau = 0.5\n"
    )
    cfg = RunConfig.from_file(str(path))
    assert cfg["sweep"]["n_list"] == [2, 4]
    assert cfg["sweep"]["tau"] == 0.5
    # untouched sections keep their defaults
    assert cfg["solver"]["cell_tol"] == DEFAULTS["solver"]["cell_tol"]

    rendered = tmp_path / "resolved.toml"
    rendered.write_text(cfg.to_toml())
    again = RunConfig.from_file(str(rendered))
    assert again.hash() == cfg.hash()


def test_from_file_bad_toml(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("[coefficients\nfamily =")
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(path))
