import pytest
from hypothesis import given, settings, strategies as st

from roughedge.config import DEFAULTS, load_config
from roughedge.errors import ConfigError


def test_defaults_validate_and_echo_round_trips():
    cfg = load_config()
    assert cfg.data == DEFAULTS
    assert load_config(text=cfg.echo()).data == cfg.data


def test_errors_name_key_and_line():
    with pytest.raises(ConfigError, match=r"grid\.eps \(line 2\): must be strictly decreasing"):
        load_config(text="grid:\n  eps: [0.01, 0.02]\n")
    with pytest.raises(ConfigError, match=r"kernel\.aperture_degree \(line 3\).*C\^"):
        load_config(text="kernel:\n  beta: 4.0\n  aperture_degree: 3\n")
    with pytest.raises(ConfigError, match=r"phantom\.colour \(line 2\): unknown key"):
        load_config(text="phantom:\n  colour: red\n")
    with pytest.raises(ConfigError, match=r"profile\.b \(line 3\): not a sinusoid parameter"):
        load_config(text="profile:\n  kind: sinusoid\n  b: 2\n")
    with pytest.raises(ConfigError, match="arc_halfwidth"):
        load_config(text="phantom:\n  arc_halfwidth: 0.9\n")
    with pytest.raises(ConfigError, match="diagnostics.M"):
        load_config(text="diagnostics:\n  M: 4\n")
    with pytest.raises(ConfigError, match="profile"):
        load_config(text="profile:\n  kind: weierstrass\n  a: 0.6\n  b: 2.0\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(text="grid: [unclosed\n")


def test_overrides():
    cfg = load_config(overrides={"seed": 11, "patch.box": 2.0})
    assert cfg["seed"] == 11 and cfg["patch"]["box"] == 2.0
    with pytest.raises(ConfigError, match="seed"):
        load_config(overrides={"seed": -1})


def test_profile_block_is_replaced_wholesale():
    cfg = load_config(text="profile:\n  kind: lattice\n  lattice_step: 0.25\n  seed: 7\n")
    assert cfg["profile"] == {"kind": "lattice", "lattice_step": 0.25, "seed": 7}


@settings(max_examples=30, deadline=None)
@given(eps=st.lists(st.floats(1e-4, 0.5), min_size=1, max_size=6, unique=True),
       box=st.floats(0.5, 8.0), seed=st.integers(0, 10**6), case=st.sampled_from("ABC"))
def test_echo_round_trip_property(eps, box, seed, case):
    eps = sorted(eps, reverse=True)
    cfg = load_config(overrides={"grid.eps": eps, "patch.box": box, "seed": seed, "point.case": case})
    assert load_config(text=cfg.echo()).data == cfg.data
