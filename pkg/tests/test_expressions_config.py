import math

import numpy as np
import pytest

from monoperiodic.config import ConfigError, load_config, parse_config
from monoperiodic.expressions import (ExpressionError, compile_expression, evaluate_number,
                                      pointwise_rhs, profile)


def test_numbers():
    assert evaluate_number("2*pi") == pytest.approx(2 * math.pi)
    assert evaluate_number(3) == 3.0
    with pytest.raises(ExpressionError):
        evaluate_number(True)


@pytest.mark.parametrize("src", ["__import__('os')", "x.real", "[1, 2]", "lambda: 1",
                                 "sin(x, out=x)", "open('f')", "1 if x else 2"])
def test_rejects_unsafe(src):
    with pytest.raises(ExpressionError):
        compile_expression(src, ("x",))


def test_pointwise_rhs_broadcasts():
    f = pointwise_rhs("1 + v/2")
    out = f(np.zeros(3), np.zeros((2, 1)), np.zeros((2, 3)), np.ones((2, 3)))
    assert out.shape == (2, 3) and np.all(out == 1.5)
    g = profile("sin(t)")
    assert g(np.array([0.0, math.pi / 2])).tolist() == pytest.approx([0.0, 1.0])


def minimal(**extra):
    data = {"problem": {"kind": "scalar_delay"}}
    for k, v in extra.items():
        data.setdefault(k, {}).update(v)
    return data


def test_defaults():
    cfg = parse_config(minimal())
    assert cfg.recipe.nodes == 256 and cfg.tolerance == 1e-8 and cfg.max_iter == 500


@pytest.mark.parametrize("data, fragment", [
    ({"problem": {"kind": "scalar_delay", "speed": 1}}, "speed"),
    ({"problem": {"kind": "scalar_delay"}, "constants": {"L3": 1}}, "L3"),
    ({"problem": {"kind": "scalar_delay"}, "grid": {"nodes": 1}}, "nodes"),
    ({"problem": {"kind": "scalar_delay"}, "grid": {"tolerance": 0}}, "tolerance"),
    ({"problem": {"kind": "scalar_delay"}, "grid": {"max_iter": 0}}, "max_iter"),
    ({"problem": {"kind": "heat"}}, "kind"),
    ({"problem": {"kind": "scalar_delay"}, "checks": {"enabled": ["h2"]}}, "enabled"),
    ({"problem": {"kind": "scalar_delay"}, "plots": {}}, "plots"),
    ({"grid": {}}, "problem"),
    ({"problem": {"kind": "scalar_delay", "rhs": "import os"}}, "rhs"),
    ({"problem": {"kind": "scalar_delay"}, "constants": {"C": -1}}, "constants"),
])
def test_strict_parsing(data, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(data)


def test_toml_syntax_error_has_line(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[problem]\nkind = \"scalar_delay\"\nnodes 3\n")
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_output_relative_to_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[problem]\nkind = \"scalar_delay\"\n[output]\ndirectory = \"res\"\n")
    assert load_config(path).output == tmp_path / "res"
