import json

import pytest
from hypothesis import given, settings, strategies as st

from maxent_lab.config import (
    CHECK_IDS,
    ExperimentConfig,
    config_hash,
    from_dict,
    load_config,
    parse_config,
    save_config,
)
from maxent_lab.errors import ParseError, RangeError, UnknownKey, ValidationError


def test_empty_object_gives_defaults():
    assert parse_config("{}") == ExperimentConfig()
    cfg = parse_config("{}")
    assert cfg.estimator.bins == 30 and cfg.net.hidden == [2, 2]


def test_bins_lower_bound():
    with pytest.raises(RangeError):
        parse_config('{"estimator": {"bins": 1}}')


def test_unknown_keys():
    with pytest.raises(UnknownKey):
        parse_config('{"nope": {}}')
    with pytest.raises(UnknownKey):
        parse_config('{"net": {"widths": [2]}}')


def test_parse_error_position():
    with pytest.raises(ParseError) as err:
        parse_config('{\n  "net": {"hidden": [2,\n}')
    assert err.value.line == 3 and err.value.column == 1


@pytest.mark.parametrize(
    "text",
    [
        '{"net": {"hidden": "2,2"}}',
        '{"net": {"max_iters": 1.5}}',
        '{"generator": {"kind": 3}}',
        '{"suite": {"checks": ["C99"]}}',
        '{"net": {"mode": "sgd"}}',
        '{"solver": {"learning_rate": 0}}',
        '{"generator": {"n_features": 9}}',
        '[]',
    ],
)
def test_invalid_values(text):
    with pytest.raises(ValidationError):
        parse_config(text)


def test_integral_floats_accepted_for_ints():
    assert parse_config('{"net": {"max_iters": 10.0}}').net.max_iters == 10


def test_hash_is_stable_under_key_order():
    a = {"b": 1, "a": {"y": 2, "x": [1, 2]}}
    b = {"a": {"x": [1, 2], "y": 2}, "b": 1}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({"b": 2, "a": {"y": 2, "x": [1, 2]}})
    c1 = parse_config('{"net": {"seed": 3, "beta": 0.5}}')
    c2 = parse_config('{"net": {"beta": 0.5, "seed": 3}}')
    assert c1.config_hash() == c2.config_hash()


@st.composite
def valid_configs(draw):
    """Random partial configs inside the documented ranges."""
    obj = {}
    if draw(st.booleans()):
        obj["generator"] = {
            "seed": draw(st.integers(0, 2**63 - 1)),
            "n_features": draw(st.integers(1, 6)),
            "y_size": draw(st.integers(1, 4)),
            "kind": draw(st.sampled_from(["equiv", "violate_c1", "violate_c2", "xor"])),
        }
    if draw(st.booleans()):
        obj["solver"] = {
            "learning_rate": draw(st.floats(1e-3, 10)),
            "grad_tol": draw(st.floats(1e-12, 1e-2)),
            "l2": draw(st.floats(0, 1)),
        }
    if draw(st.booleans()):
        net = {
            "hidden": draw(st.lists(st.integers(1, 16), max_size=4)),
            "mode": draw(st.sampled_from(["backprop", "coordinate"])),
            "beta": draw(st.floats(0, 2)),
            "sweeps": draw(st.integers(1, 50)),
            "inner_iters": draw(st.integers(0, 500)),
        }
        if draw(st.booleans()):
            net["beta_per_layer"] = draw(st.lists(st.floats(0, 1), max_size=4))
        obj["net"] = net
    if draw(st.booleans()):
        obj["estimator"] = {"bins": draw(st.integers(2, 100)), "n_samples": draw(st.integers(1, 10**6))}
    if draw(st.booleans()):
        obj["suite"] = {
            "seed": draw(st.integers(0, 2**32)),
            "checks": draw(st.lists(st.sampled_from(CHECK_IDS), unique=True)),
            "theorem_tv_tol": draw(st.floats(0, 1)),
        }
    if draw(st.booleans()):
        obj["output"] = {"dir": draw(st.text("abc/_-", min_size=1, max_size=10))}
    return obj


@given(valid_configs())
@settings(max_examples=100)
def test_round_trip(obj):
    cfg = from_dict(obj)
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()
    assert again.config_hash() == cfg.config_hash()


def test_round_trip_through_files(tmp_path):
    cfg = parse_config('{"net": {"hidden": [3], "beta": 0.25}}')
    path = save_config(cfg, tmp_path / "c.json")
    assert load_config(path) == cfg
    assert json.loads(open(path).read())["net"]["hidden"] == [3]


def test_missing_file():
    with pytest.raises(OSError):
        load_config("/nonexistent/config.json")
