import json
import math

import pytest

from dynhomog.config import ConfigError, load_config, parse_config

BASE = """\
cell:
  layers:
    - {density: 1.0, compliance: 1.0, thickness: 0.5}
    - {density: 4.0, modulus: 16.0, thickness: 0.5}
reference: layer-average
discretization: [3, 3]
"""


def test_parse_minimal_with_defaults():
    cfg = parse_config(BASE)
    cell = cfg.unit_cell()
    assert cell.period == 1.0
    assert cell.layers[1].material.compliance == pytest.approx(1 / 16)
    ref = cfg.reference_medium()
    assert ref.compliance == pytest.approx(0.53125) and ref.density == pytest.approx(2.5)
    d = cfg.discretized()
    assert d.n_subregions == 6
    assert cfg.basis(d).n_max == 10
    assert cfg.output.format == "csv" and cfg.scan.n_branches == 3


def test_layer_reference_is_one_based():
    cfg = parse_config(BASE.replace("layer-average", "'layer:2'"))
    ref = cfg.reference_medium()
    assert (ref.density, ref.compliance) == (4.0, pytest.approx(1 / 16))


def test_explicit_reference():
    cfg = parse_config(BASE.replace("layer-average", "{rho0: 3.0, D0: 0.2}"))
    ref = cfg.reference_medium()
    assert (ref.density, ref.compliance) == (3.0, 0.2)


def test_q_values_span_half_open_interval():
    cfg = parse_config(BASE + "scan: {q_points: 4}\n")
    qs = cfg.q_values()
    assert qs[0] == pytest.approx(math.pi / 4) and qs[-1] == pytest.approx(math.pi)
    cfg = parse_config(BASE + "scan: {q_points: 2, q_range: [0.5, 1.0]}\n")
    assert cfg.q_values() == pytest.approx([0.75 * math.pi, math.pi])


@pytest.mark.parametrize(
    "text,fragment",
    [
        (BASE.replace("modulus: 16.0", "compliance: 0.1, modulus: 16.0"),
         "line 4: cell.layers.1: give exactly one of 'compliance' or 'modulus'"),
        (BASE.replace("density: 1.0", "density: -1.0"), "line 3: cell.layers.0.density"),
        (BASE.replace("[3, 3]", "[3]"), "line 6: discretization: has 1 entries but cell.layers has 2"),
        (BASE.replace("[3, 3]", "[3, 0]"), "discretization: subregion counts must be positive"),
        (BASE.replace("layer-average", "'layer:3'"), "line 5: reference: 'layer:3' exceeds the 2 layers"),
        (BASE.replace("layer-average", "'layer:0'"), "line 5: reference: reference must be"),
        (BASE + "colour: red\n", "line 7: colour: Extra inputs are not permitted"),
        (BASE + "scan: {q_range: [0.5, 0.2]}\n", "scan.q_range: q_range must satisfy"),
        (BASE + "output: {format: xml}\n", "output.format"),
    ],
)
def test_errors_name_field_and_line(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_unparseable_and_non_mapping():
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_config("cell: [unclosed")
    with pytest.raises(ConfigError, match="mapping"):
        parse_config("- 1\n- 2\n")


def test_json_config_and_hash(tmp_path):
    data = {
        "cell": {"layers": [{"density": 2.0, "compliance": 0.5, "thickness": 1.0}]},
        "discretization": [2],
        "seed": 5,
    }
    p = tmp_path / "c.json"
    p.write_text(json.dumps(data))
    cfg, sha = load_config(p)
    assert cfg.seed == 5 and len(sha) == 64
    _, sha2 = load_config(p)
    assert sha == sha2


def test_seed_env_override(monkeypatch):
    cfg = parse_config(BASE + "seed: 7\n")
    monkeypatch.delenv("DYNHOMOG_SEED", raising=False)
    assert cfg.effective_seed() == 7
    monkeypatch.setenv("DYNHOMOG_SEED", "123")
    assert cfg.effective_seed() == 123
    monkeypatch.setenv("DYNHOMOG_SEED", "abc")
    with pytest.raises(ConfigError):
        cfg.effective_seed()


@pytest.mark.parametrize("name", ["bilayer", "symmetric", "asymmetric", "homogeneous"])
def test_shipped_configs_load(name):
    from pathlib import Path

    cfg, _ = load_config(Path(__file__).parents[1] / "configs" / f"{name}.yaml")
    assert cfg.discretized().n_subregions == sum(cfg.discretization)
