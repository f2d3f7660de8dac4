"""Config schema: strict keys, dotted overrides, backend construction."""

import json

import pytest

from cocktaileval.backend import (
    CorruptingOracle,
    EchoOracle,
    EmptyOracle,
    FileExchangeBackend,
    SubprocessBackend,
)
from cocktaileval.config import CORPUS_ROOT_ENV, RunConfig
from cocktaileval.errors import ConfigError


class TestFromDict:
    def test_defaults(self):
        config = RunConfig.from_dict({})
        assert config.seed == 0
        assert config.workers == 1
        assert config.include_sa is True
        assert config.write_audio is True
        assert config.featurize is False
        assert config.voice.sets_per_cell == 33
        assert config.phoneme.mixings_per_pair == 2000
        assert config.backend.mode == "echo"
        assert config.features.mel_filters == 26

    def test_nested_values(self):
        config = RunConfig.from_dict(
            {
                "seed": 9,
                "voice": {"combos": ["f-m"], "tir_grid": [0.0, 9.0], "sets_per_cell": 2},
                "phoneme": {"phonemes": ["s", "t"], "mixings_per_pair": 5},
                "backend": {"mode": "corrupt", "substitution": 0.2},
                "features": {"pre_emphasis": 0.95},
            }
        )
        assert config.voice.combos == ["f-m"]
        assert config.phoneme.mixings_per_pair == 5
        assert config.backend.substitution == 0.2
        assert config.features.pre_emphasis == 0.95

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown key.*'sets'"):
            RunConfig.from_dict({"sets": 3})

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError, match="config.voice"):
            RunConfig.from_dict({"voice": {"tirs": [0.0]}})

    def test_section_must_be_object(self):
        with pytest.raises(ConfigError, match="expected an object"):
            RunConfig.from_dict({"voice": 3})

    def test_bad_backend_mode(self):
        with pytest.raises(ConfigError, match="backend.mode"):
            RunConfig.from_dict({"backend": {"mode": "quantum"}})

    def test_bad_feature_value(self):
        with pytest.raises(ConfigError, match="bad config value"):
            RunConfig.from_dict({"features": {"log_floor": 0.0}})

    def test_round_trip_through_dict(self):
        config = RunConfig.from_dict({"seed": 4, "voice": {"sets_per_cell": 7}})
        assert RunConfig.from_dict(config.to_dict()).to_dict() == config.to_dict()


class TestFromFile:
    def test_reads_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 11, "output_root": "out"}))
        config = RunConfig.from_file(path)
        assert config.seed == 11
        assert config.output_root == "out"

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="not valid JSON"):
            RunConfig.from_file(path)

    def test_non_object_top_level(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="object"):
            RunConfig.from_file(path)


class TestApplyOverride:
    def test_scalar_types(self):
        config = RunConfig()
        config.apply_override("seed", "42")
        config.apply_override("write_audio", "false")
        config.apply_override("output_root", "somewhere/else")
        assert config.seed == 42
        assert config.write_audio is False
        assert config.output_root == "somewhere/else"

    def test_nested_list(self):
        config = RunConfig()
        config.apply_override("voice.combos", '["f-m", "m-f"]')
        config.apply_override("voice.tir_grid", "[0, 15, 30]")
        assert config.voice.combos == ["f-m", "m-f"]
        assert config.voice.tir_grid == [0, 15, 30]

    def test_frozen_features_section_is_replaced(self):
        config = RunConfig()
        config.apply_override("features.pre_emphasis", "0.9")
        assert config.features.pre_emphasis == 0.9
        assert config.features.mel_filters == 26  # the rest survives

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            RunConfig().apply_override("voice.tirs", "[0]")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown config section"):
            RunConfig().apply_override("audio.rate", "8000")

    def test_section_is_not_a_value(self):
        with pytest.raises(ConfigError, match="section, not a value"):
            RunConfig().apply_override("voice", "{}")

    def test_bad_frozen_value(self):
        with pytest.raises(ConfigError, match="bad value"):
            RunConfig().apply_override("features.log_floor", "0")

    def test_unparseable_json_is_a_string(self):
        config = RunConfig()
        config.apply_override("backend.mode", "empty")  # bare word, not JSON
        assert config.backend.mode == "empty"


class TestCorpusRoot:
    def test_explicit_config_wins(self, monkeypatch):
        monkeypatch.setenv(CORPUS_ROOT_ENV, "/from/env")
        config = RunConfig(corpus_root="/from/config")
        assert str(config.resolve_corpus_root()) == "/from/config"

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv(CORPUS_ROOT_ENV, "/from/env")
        assert str(RunConfig().resolve_corpus_root()) == "/from/env"

    def test_neither_is_an_error(self, monkeypatch):
        monkeypatch.delenv(CORPUS_ROOT_ENV, raising=False)
        with pytest.raises(ConfigError, match=CORPUS_ROOT_ENV):
            RunConfig().resolve_corpus_root()


class TestPlans:
    def test_plans_carry_the_run_seed(self):
        config = RunConfig.from_dict(
            {
                "seed": 17,
                "voice": {"combos": ["f-m"], "tir_grid": [0.0], "sets_per_cell": 1},
                "phoneme": {"phonemes": ["s"], "mixings_per_pair": 1},
            }
        )
        assert config.voice_plan().master_seed == 17
        assert config.phoneme_plan().master_seed == 17
        assert config.voice_plan().combos == ("f-m",)
        assert config.phoneme_plan().phonemes == ("s",)


class TestBuildBackend:
    def test_echo_and_empty(self):
        assert isinstance(RunConfig().build_backend(), EchoOracle)
        config = RunConfig()
        config.backend.mode = "empty"
        assert isinstance(config.build_backend(), EmptyOracle)

    def test_corrupt_inherits_the_run_seed(self):
        config = RunConfig.from_dict(
            {"seed": 5, "backend": {"mode": "corrupt", "substitution": 0.1}}
        )
        oracle = config.build_backend()
        assert isinstance(oracle, CorruptingOracle)
        assert oracle.seed == 5
        assert oracle.rates.substitution == 0.1

    def test_corrupt_explicit_seed_wins(self):
        config = RunConfig.from_dict({"seed": 5, "backend": {"mode": "corrupt", "seed": 99}})
        assert config.build_backend().seed == 99

    def test_subprocess_needs_command(self):
        config = RunConfig.from_dict({"backend": {"mode": "subprocess"}})
        with pytest.raises(ConfigError, match="command"):
            config.build_backend()
        config = RunConfig.from_dict(
            {"backend": {"mode": "subprocess", "command": ["run.sh"], "timeout": 60.0}}
        )
        backend = config.build_backend()
        assert isinstance(backend, SubprocessBackend)
        assert backend.command == ("run.sh",)
        assert backend.timeout == 60.0

    def test_exchange_needs_dir(self):
        config = RunConfig.from_dict({"backend": {"mode": "exchange"}})
        with pytest.raises(ConfigError, match="exchange_dir"):
            config.build_backend()
        config = RunConfig.from_dict(
            {"backend": {"mode": "exchange", "exchange_dir": "/tmp/x"}}
        )
        assert isinstance(config.build_backend(), FileExchangeBackend)
