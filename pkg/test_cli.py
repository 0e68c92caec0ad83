from dataclasses import fields

import pytest

from channel import SystemParams
from cli import (
    ExperimentConfig,
    LayoutSettings,
    OracleSettings,
    RunSettings,
    SweepSettings,
    build_parser,
    config_from_mapping,
    config_to_text,
    experiment_names,
    parse_kv_text,
    resolve_config,
)
from utils import ConfigError


def test_parse_kv_text_skips_comments_and_blanks():
    text = "# estudo\n\nsystem.eta = 3.0  # expoente\nsweep.bits=1,2,3\n"
    assert parse_kv_text(text) == {"system.eta": "3.0", "sweep.bits": "1,2,3"}


def test_parse_kv_text_reports_the_line():
    with pytest.raises(ConfigError) as excinfo:
        parse_kv_text("system.eta=3\nsem igual\n", source="study.txt")
    assert excinfo.value.field == "study.txt:2"


def test_mapping_values_are_typed():
    config = config_from_mapping({
        "system.eta": "3.0",
        "system.bits_ul": "inf",
        "system.bits_dl": "4",
        "layout.intensity": "auto",
        "sweep.bits": "2, 4",
        "sweep.power_scaling": "off",
        "sweep.duplex_modes": "fd",
    }, "se_vs_bits")
    assert config.system.eta == 3.0
    assert config.system.bits_ul is None
    assert config.system.bits_dl == 4
    assert config.layout.intensity is None
    assert config.sweep.bits == (2, 4)
    assert config.sweep.power_scaling is False
    assert config.sweep.duplex_modes == ("fd",)


@pytest.mark.parametrize("key, value, field", [
    ("system.nope", "1", "system.nope"),
    ("radio.eta", "3", "radio.eta"),
    ("system.eta", "1.5", "system.eta"),
    ("run.scenarios", "abc", "run.scenarios"),
    ("run.trials", "1", "run.trials"),
    ("layout.kind", "grid", "layout.kind"),
    ("sweep.reuse_factors", "1,4", "sweep.reuse_factors"),
    ("sweep.power_scaling", "maybe", "sweep.power_scaling"),
])
def test_bad_keys_and_values_name_the_key(key, value, field):
    with pytest.raises(ConfigError) as excinfo:
        config_from_mapping({key: value}, "se_vs_bits")
    assert excinfo.value.field == field


def test_experiment_must_be_known():
    with pytest.raises(ConfigError):
        config_from_mapping({}, None)
    with pytest.raises(ConfigError):
        config_from_mapping({}, "fig9")
    assert config_from_mapping({"experiment": "lemma_check"}).experiment == "lemma_check"
    assert "oracle_check" in experiment_names()


def test_manifest_round_trip():
    config = config_from_mapping({
        "system.eta": "3.7",
        "system.noise_power_w": "1e-13",
        "layout.region_side": "2500",
        "sweep.si_powers": "0,0.5",
        "run.seed": "11",
    }, "se_vs_antennas")
    text = config_to_text(config)
    assert config_from_mapping(parse_kv_text(text)) == config
    keys = [line.split("=", 1)[0] for line in text.splitlines()]
    assert keys == sorted(keys)


def test_manifest_of_defaults():
    text = config_to_text(ExperimentConfig("se_vs_bits"))
    lines = set(text.splitlines())
    for expected in ("experiment=se_vs_bits", "system.eta=3.5", "system.bits_ul=inf",
                     "layout.intensity=auto", "run.trials=100000", "sweep.power_scaling=true"):
        assert expected in lines
    sections = (SystemParams, LayoutSettings, RunSettings, SweepSettings, OracleSettings)
    assert len(lines) == 1 + sum(len(fields(cls)) for cls in sections)


def test_precedence_file_then_flags_then_seed(tmp_path, monkeypatch):
    monkeypatch.delenv("FDMIMO_WORKERS", raising=False)
    path = tmp_path / "study.txt"
    path.write_text("experiment=se_vs_bits\nsystem.eta=3.2\nrun.seed=4\nrun.scenarios=9\n", encoding="utf-8")
    args, extra = build_parser().parse_known_args(
        ["--config", str(path), "--system.eta=3.9", "--seed", "7"]
    )
    config = resolve_config(args, extra)
    assert config.experiment == "se_vs_bits"
    assert config.system.eta == 3.9
    assert config.run.seed == 7
    assert config.run.scenarios == 9
    assert config.run.workers == 1


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("FDMIMO_WORKERS", "3")
    args, extra = build_parser().parse_known_args(["lemma_check"])
    assert resolve_config(args, extra).run.workers == 3

    monkeypatch.setenv("FDMIMO_WORKERS", "many")
    with pytest.raises(ConfigError):
        resolve_config(args, extra)


def test_missing_config_file(tmp_path):
    args, extra = build_parser().parse_known_args(["lemma_check", "--config", str(tmp_path / "none.txt")])
    with pytest.raises(ConfigError) as excinfo:
        resolve_config(args, extra)
    assert excinfo.value.field == "config"


def test_settings_defaults():
    assert LayoutSettings().kind == "ppp"
    assert RunSettings().block_size == 256
    assert SweepSettings().antennas[-1] == 4096
    assert SweepSettings().cdf_level == 0.9
