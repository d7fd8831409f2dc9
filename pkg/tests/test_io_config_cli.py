import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from hypothesis import given
from hypothesis import strategies as st

from holowave.cli import main
from holowave.config import OUTPUT_ENV, load_config, parse_text, validate
from holowave.errors import ConfigParse, ValidationFailed
from holowave.io import dumps_json, read_csv, read_json, write_csv, write_json

EXAMPLES = Path(__file__).resolve().parent.parent / "examples_configs"
MINIMAL = """schema = 1
[problem]
n = 4
mu = 0.0
a = 0.5
[checks]
suites = ["hardy"]
"""


@given(st.lists(st.floats(allow_nan=False), min_size=1, max_size=20))
def test_csv_round_trip_is_exact(values):
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        path = write_csv(Path(tmp) / "v.csv", ["i", "value"], enumerate(values))
        header, rows = read_csv(path)
    assert header == ["i", "value"]
    back = [r[1] for r in rows]
    assert all(a == b or (math.isinf(a) and a == b) for a, b in zip(values, back))


def test_json_is_sorted_and_round_trips(tmp_path):
    data = {"b": [1.0, 0.1, float("inf")], "a": {"z": True, "y": None}}
    text = dumps_json(data)
    assert text.index('"a"') < text.index('"b"')
    assert dumps_json(data) == text
    write_json(tmp_path / "d.json", {"b": [1.0, 0.1], "a": 2})
    assert read_json(tmp_path / "d.json") == {"a": 2, "b": [1.0, 0.1]}


def test_config_validation():
    cfg = validate(parse_text(MINIMAL))
    assert cfg.suites == ["hardy"] and cfg.params().alpha == pytest.approx(1.5)
    with pytest.raises(ValidationFailed) as info:
        validate(parse_text(MINIMAL.replace("mu = 0.0", "mu = -3.0")))
    assert info.value.details["invariant"] == "BelowThreshold"
    with pytest.raises(ValidationFailed):
        validate(parse_text(MINIMAL.replace("schema = 1", "schema = 2")))
    with pytest.raises(ValidationFailed):
        validate(parse_text(MINIMAL.replace('"hardy"', '"nope"')))
    with pytest.raises(ConfigParse) as info:
        parse_text("schema = 1\n[problem\nn = 4\n")
    assert info.value.details["line"] == 2
    with pytest.raises(ConfigParse):
        load_config("/nonexistent/config.toml")


def _run(args, env=None):
    return CliRunner().invoke(main, args, env=env, catch_exceptions=False)


def test_minimal_run(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL)
    res = _run(["run", str(cfg), "-o", str(tmp_path / "out")])
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["status"] == "passed" and summary["exit_code"] == 0
    assert summary["error"] is None and summary["suites"]["hardy"]["pass"]
    assert (tmp_path / "out" / "hardy.csv").exists()


def test_runs_are_byte_identical(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL)
    for d in ("r1", "r2"):
        assert _run(["run", str(cfg), "-o", str(tmp_path / d)]).exit_code == 0
    for name in ("hardy.csv", "summary.json"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_output_env_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL)
    res = _run(["run", str(cfg)], env={OUTPUT_ENV: str(tmp_path / "env_out")})
    assert res.exit_code == 0
    assert (tmp_path / "env_out" / "summary.json").exists()


def test_config_errors_exit_2(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(MINIMAL.replace("mu = 0.0", "mu = -3.0"))
    res = _run(["run", str(cfg), "-o", str(tmp_path / "o")])
    assert res.exit_code == 2
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["status"] == "config_error"
    assert summary["error"]["code"] == "HW702"
    assert summary["error"]["details"]["invariant"] == "BelowThreshold"
    cfg.write_text("schema = 1\n[problem\n")
    res = _run(["run", str(cfg), "-o", str(tmp_path / "p")])
    assert res.exit_code == 2
    assert json.loads((tmp_path / "p" / "summary.json").read_text())["error"]["code"] == "HW701"
    assert _run(["validate", str(cfg)]).exit_code == 2
    assert _run(["validate", str(EXAMPLES / "minimal_hardy.toml")]).exit_code == 0


def test_linear_example_passes(tmp_path):
    res = _run(["run", str(EXAMPLES / "holo_linear.toml"), "-o", str(tmp_path)])
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["suites"]["causality"]["pass"]
    header, rows = read_csv(tmp_path / "causality.csv")
    assert rows


def test_render(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(MINIMAL)
    _run(["run", str(cfg), "-o", str(tmp_path / "out")])
    res = _run(["render", str(tmp_path / "out")])
    assert res.exit_code == 0
    svg = (tmp_path / "out" / "hardy.svg").read_text()
    assert svg.startswith("<svg") or "<svg" in svg[:200]
    empty = tmp_path / "empty"
    empty.mkdir()
    assert _run(["render", str(empty)]).exit_code == 3
