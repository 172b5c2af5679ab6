import pytest

from cvqkd_arf.config import ScenarioConfig, load_config, parse_config
from cvqkd_arf.errors import ConfigParseError, ValidationError


def test_empty_document_gives_defaults():
    cfg = parse_config("")
    assert cfg == ScenarioConfig()
    g, p = cfg.geometry, cfg.protocol
    assert (g.z_link, g.aperture_radius, g.safe_radius, g.jitter_sigma, g.wavelength) == (
        500.0, 0.05, 0.15, 50e-6, 1550e-9)
    assert (p.eta_sys, p.v_mod, p.excess_noise, p.recon_eff) == (0.8, 5.0, 0.1, 0.95)
    assert (cfg.turbulence.alpha, cfg.turbulence.beta_gg) == (4.2, 1.4)
    assert cfg.quad.rel_tol == 1e-6 and cfg.inner_quad.rel_tol == 1e-7
    assert cfg.seed == 0 and cfg.clamped_k is False


def test_full_document():
    cfg = parse_config("""
seed = 12

[geometry]
z_link = 800
aperture_radius = 0.1
safe_radius = 0.2
rx_beam_radius = 0.09

[turbulence]
alpha = 2.0
beta = 1.0

[protocol]
v_mod = 4.0
excess_noise = 0.05

[quad]
rel_tol = 1e-7
inner_rel_tol = 1e-8
max_subdivisions = 500

[flags]
clamped_k = true
mc_strands = 3
""")
    assert cfg.seed == 12
    assert cfg.geometry.z_link == 800.0 and cfg.geometry.rx_beam_radius == 0.09
    assert cfg.turbulence.beta_gg == 1.0
    assert cfg.protocol.v_mod == 4.0 and cfg.protocol.recon_eff == 0.95
    assert cfg.quad.rel_tol == 1e-7 and cfg.inner_quad.rel_tol == 1e-8
    assert cfg.quad.max_subdivisions == 500
    assert cfg.clamped_k is True and cfg.mc_strands == 3


def test_negative_jitter_rejected():
    with pytest.raises(ValidationError, match="jitter_sigma"):
        parse_config("[geometry]\njitter_sigma = -1\n")


def test_guard_ring_constraint():
    with pytest.raises(ValidationError, match="guard ring"):
        parse_config("[geometry]\naperture_radius = 0.2\nsafe_radius = 0.1\n")


def test_negative_excess_noise_rejected():
    with pytest.raises(ValidationError, match="excess_noise"):
        parse_config("[protocol]\nexcess_noise = -1\n")


@pytest.mark.parametrize("text,key", [
    ("[geometry]\nlength = 3\n", "geometry.length"),
    ("[extras]\nx = 1\n", "extras"),
    ("colour = 'red'\n", "colour"),
    ("[flags]\nverbose = true\n", "flags.verbose"),
])
def test_unknown_keys_named(text, key):
    with pytest.raises(ValidationError, match=key):
        parse_config(text)


@pytest.mark.parametrize("text", [
    "[geometry]\nz_link = 'far'\n",
    "[flags]\nclamped_k = 1\n",
    "[quad]\nmax_subdivisions = 1.5\n",
    "seed = -4\n",
    "[geometry]\nz_link = true\n",
])
def test_wrong_types_rejected(text):
    with pytest.raises(ValidationError):
        parse_config(text)


def test_parse_error_reports_line():
    with pytest.raises(ConfigParseError) as info:
        parse_config("seed = 1\n[geometry\nz_link = 3\n")
    assert info.value.line == 2
    assert "line 2" in str(info.value)


def test_load_config(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[geometry]\nz_link = 650\n", encoding="utf-8")
    assert load_config(str(path)).geometry.z_link == 650.0
    assert load_config(None) == ScenarioConfig()


def test_to_dict_round_trip_keys():
    d = ScenarioConfig().to_dict()
    assert set(d) == {"seed", "geometry", "turbulence", "protocol", "quad", "flags"}
    assert d["turbulence"] == {"alpha": 4.2, "beta": 1.4}
