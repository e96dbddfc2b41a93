import json
import math

import pytest

from src.config import ScenarioConfig, load_config, parse_config
from src.errors import ConfigError
from src.measurement import DetectorKind
from src.scheduler import DEFAULT_EFFECT_ORDER, Effect


def test_empty_file_gives_appendix_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    config = load_config(path)
    assert config.atoms.number == 1e6
    assert config.atoms.temperature == pytest.approx(30e-6)
    assert config.beam.photon_flux == 1e14
    assert config.beam.detuning_hz == 1e9
    assert config.beam.cross_section == pytest.approx(4 * math.pi * 1e-10)
    assert tuple(config.effect_order) == DEFAULT_EFFECT_ORDER
    assert config.detector.kind is DetectorKind.IDEAL


def test_beam_params_in_angular_units():
    beam = ScenarioConfig().beam_params()
    assert beam.detuning == pytest.approx(2 * math.pi * 1e9)


def test_light_fractions_must_sum_to_one():
    text = json.dumps({"layout": {"channels": 2, "light_fractions": [1.0, 0.5]}})
    with pytest.raises(ConfigError, match="light_fractions"):
        parse_config(text)


def test_fraction_length_must_match_channels():
    with pytest.raises(ConfigError, match="atom_fractions"):
        parse_config(json.dumps({"layout": {"channels": 2, "atom_fractions": [1.0]}}))


def test_syntax_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "tau": 1e-8,\n  oops\n}')
    with pytest.raises(ConfigError, match=r"broken.json:3:"):
        load_config(path)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="frobnicate"):
        parse_config('{"frobnicate": 1}')


def test_total_time_must_be_positive():
    with pytest.raises(ConfigError, match="total_time"):
        parse_config('{"total_time": 0}')


def test_effects_may_not_repeat():
    with pytest.raises(ConfigError, match="effect_order"):
        parse_config('{"effect_order": ["interaction", "interaction"]}')


def test_explicit_tau_and_order():
    config = parse_config('{"tau": 2.5e-8, "auto_tau": true, "effect_order": ["loss", "interaction"]}')
    assert config.tau == 2.5e-8
    assert config.effect_order == [Effect.LOSS, Effect.INTERACTION]


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_atoms_per_segment_marks_empty_channel():
    config = ScenarioConfig.model_validate(
        {"layout": {"channels": 2, "atom_segments_per_channel": 2, "atom_fractions": [1.0, 0.0]}}
    )
    assert config.atoms_per_segment() == [5e5, 5e5, None, None]


def test_segment_layout_uses_area_fractions():
    config = ScenarioConfig.model_validate({"layout": {"channels": 2, "area_fractions": [0.25, 0.75]}})
    layout = config.segment_layout()
    assert layout.cross_sections[0] == pytest.approx(0.25 * config.beam.cross_section)


def test_updated_merges_sections():
    config = ScenarioConfig().updated(layout={"channels": 2}, tau=1e-8)
    assert config.layout.channels == 2
    assert config.layout.atom_segments_per_channel == 1
    assert config.tau == 1e-8


def test_magnetic_field_length_checked():
    with pytest.raises(ConfigError, match="field_tesla"):
        parse_config(json.dumps({"layout": {"channels": 2}, "magnetic": {"field_tesla": [1e-9] * 3}}))


def test_example_configs_load():
    from pathlib import Path

    for path in sorted(Path(__file__).resolve().parent.parent.joinpath("configs").glob("*.json")):
        load_config(path)
