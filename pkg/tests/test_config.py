import pytest

from semifix.config import ConfigError, load_comparison, load_ifs, load_space, load_triangle


def test_euclidean_power_defaults_to_power_phi():
    space = load_space({"domain": {"euclidean": {"dim": 2}}, "kind": {"power": 3}})
    assert space.phi.kind == "power" and space.phi.param == 3
    assert space.distance((0, 0), (0, 2)) == 8


def test_phi_flags_recorded():
    space = load_space({"domain": {"euclidean": {"dim": 1}}, "phi_flags": {"usc": False, "regular": False}})
    assert not space.phi.usc_assumed and not space.phi.regular_assumed


def test_finite_space_defaults_to_basic():
    space = load_space({"domain": {"finite": {"points": ["a", "b"], "dist": [[0, 2], [2, 0]]}}})
    assert space.phi.kind == "table" and space.phi(2, 2) == 2


@pytest.mark.parametrize(
    "doc",
    [
        {},
        {"domain": {"torus": {}}},
        {"domain": {"euclidean": {"dim": 0}}},
        {"domain": {"finite": {"points": [0, 1], "dist": [[0, 1], [2, 0]]}}},
        {"domain": {"euclidean": {"dim": 1}}, "phi": "basic"},
        {"domain": {"euclidean": {"dim": 1}}, "kind": {"power": 0.5}},
    ],
)
def test_invalid_spaces(doc):
    with pytest.raises(ConfigError):
        load_space(doc)


def test_function_loaders():
    assert load_triangle({"scaled_additive": 2})(1, 1) == 4
    assert load_comparison({"rational": 1})(1) == 0.5
    assert load_comparison({"linear": "0.5"})(2) == 1
    for bad in ({"linear": 1.5}, {"cubic": 1}, {"linear": True}, {"a": 1, "b": 2}):
        with pytest.raises(ConfigError):
            load_comparison(bad)


def test_per_map_phi_is_majorized():
    doc = {
        "space": {"domain": {"euclidean": {"dim": 1}}, "kind": {"power": 2}},
        "phi_cmp": {"linear": 0.25},
        "maps": [
            {"scale_about": {"ratio": 0.5, "center": [0]}},
            {"scale_about": {"ratio": 0.7, "center": [1]}, "phi_cmp": {"linear": 0.49}},
        ],
    }
    assert load_ifs(doc).phi.param == 0.49


def test_uncertifiable_ifs_is_config_error():
    doc = {
        "space": {"domain": {"euclidean": {"dim": 1}}, "kind": {"power": 2}},
        "phi_cmp": {"linear": 0.1},
        "maps": [{"scale_about": {"ratio": 0.5, "center": [0]}}],
    }
    with pytest.raises(ConfigError):
        load_ifs(doc)


def test_table_map_must_be_total():
    doc = {
        "space": {"domain": {"finite": {"points": [0, 1], "dist": [[0, 1], [1, 0]]}}},
        "phi_cmp": {"linear": 0.5},
        "maps": [{"table": {"0": 0}}],
    }
    with pytest.raises(ConfigError):
        load_ifs(doc)


def test_table_map_with_numeric_labels():
    doc = {
        "space": {"domain": {"finite": {"points": [0, 1, 2], "dist": [[0, 1, 4], [1, 0, 1], [4, 1, 0]]}}},
        "phi_cmp": {"linear": 0.5},
        "maps": [{"table": {"0": 0, "1": 0, "2": 0}}],
    }
    ifs = load_ifs(doc)
    assert ifs.maps[0].table == {0: 0, 1: 0, 2: 0}
