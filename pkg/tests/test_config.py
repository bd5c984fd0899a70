import pytest

from qcmembrane.config import RunConfig
from qcmembrane.errors import ConfigError


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_are_valid():
    cfg = RunConfig().validate()
    assert (cfg.grid_n, cfg.grid_l, cfg.beltrami_tol, cfg.beltrami_max_iter) == (1024, 4.0, 1e-8, 200)


def test_preset_spec_folds_into_params():
    cfg = RunConfig(preset="constant(re=0.3, im=0.1)")
    assert cfg.preset == "constant" and cfg.params == {"re": 0.3, "im": 0.1}
    assert cfg.preset_spec == "constant(im=0.1, re=0.3)"


def test_toml_round_trip(tmp_path):
    p = write(tmp_path, 'preset = "gaussian_bump"\ngrid_n = 512\nmesh_h = 0.03\n[params]\nsigma = 0.7\n')
    cfg = RunConfig.from_toml(p)
    assert cfg.preset == "gaussian_bump" and cfg.grid_n == 512 and cfg.params == {"sigma": 0.7}
    assert RunConfig.from_mapping(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_integer_accepted_for_float(tmp_path):
    cfg = RunConfig.from_toml(write(tmp_path, "grid_l = 4\n"))
    assert isinstance(cfg.grid_l, float)


@pytest.mark.parametrize(
    "text, field",
    [
        ("beltrami_tol = -1e-8\n", "beltrami_tol"),
        ("eigen_tol = 0\n", "eigen_tol"),
        ("grid_n = 1000\n", "grid_n"),
        ("grid_n = 32\n", "grid_n"),
        ('preset = "spiral"\n', "preset"),
        ('preset = "constant"\n[params]\nsigma = 1.0\n', "params.sigma"),
        ("seed = -3\n", "seed"),
        ("n_boundary = 10\n", "n_boundary"),
        ("extension_norm = 0.5\n", "extension_norm"),
    ],
)
def test_field_named_diagnostics(tmp_path, text, field):
    with pytest.raises(ConfigError, match=field):
        RunConfig.from_toml(write(tmp_path, text))


def test_unknown_field(tmp_path):
    with pytest.raises(ConfigError, match="colour"):
        RunConfig.from_toml(write(tmp_path, 'colour = "red"\n'))


def test_syntax_error_has_line(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        RunConfig.from_toml(write(tmp_path, "seed = 1\ngrid_n = = 3\n"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        RunConfig.from_toml(tmp_path / "absent.toml")
