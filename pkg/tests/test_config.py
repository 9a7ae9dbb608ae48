"""Configuration defaults, overrides, and YAML loading."""

import pytest
import yaml

from dppselect import InvalidInput
from dppselect.config import (AlignSettings, Config, SelectionSettings,
                              config_from_mapping, load_config)


class TestDefaults:
    def test_top_level(self):
        cfg = Config()
        assert cfg.pool_cap == 5
        assert cfg.relevance_threshold == 0.25
        assert cfg.selection.rule == "topk"
        assert cfg.selection.budget == 3
        assert cfg.align.tau == 1.0

    def test_teacher_and_train_defaults(self):
        cfg = Config()
        assert (cfg.teacher.gamma, cfg.teacher.sigma, cfg.teacher.mu) == (2.0, 0.8, 3.0)
        assert cfg.train.epochs == 100
        assert cfg.train.optimizer == "adam"


class TestFromMapping:
    def test_none_and_empty_give_defaults(self):
        assert config_from_mapping(None) == Config()
        assert config_from_mapping({}) == Config()

    def test_nested_overrides(self):
        cfg = config_from_mapping({
            "teacher": {"mu": 1.0, "gamma": 3.0},
            "train": {"epochs": 7, "optimizer": "sgd"},
            "selection": {"rule": "threshold", "threshold": 0.4},
            "pool_cap": 9,
        })
        assert cfg.teacher.mu == 1.0
        assert cfg.teacher.gamma == 3.0
        assert cfg.teacher.sigma == 0.8  # untouched default
        assert cfg.train.epochs == 7
        assert cfg.train.optimizer == "sgd"
        assert cfg.selection.rule == "threshold"
        assert cfg.pool_cap == 9

    def test_unknown_root_key_rejected(self):
        with pytest.raises(InvalidInput) as exc:
            config_from_mapping({"teachers": {}})
        assert "teachers" in str(exc.value)

    def test_unknown_section_key_rejected(self):
        with pytest.raises(InvalidInput) as exc:
            config_from_mapping({"teacher": {"gama": 1.0}})
        assert "gama" in str(exc.value)

    def test_non_mapping_inputs_rejected(self):
        with pytest.raises(InvalidInput):
            config_from_mapping([1, 2])
        with pytest.raises(InvalidInput):
            config_from_mapping({"teacher": [1]})

    def test_section_values_validated(self):
        with pytest.raises(InvalidInput):
            config_from_mapping({"train": {"epochs": 0}})
        with pytest.raises(InvalidInput):
            config_from_mapping({"teacher": {"sigma": -1.0}})
        with pytest.raises(InvalidInput):
            config_from_mapping({"pool_cap": 0})
        with pytest.raises(InvalidInput):
            config_from_mapping({"selection": {"rule": "random"}})

    def test_align_settings_validated(self):
        with pytest.raises(InvalidInput):
            AlignSettings(tau=0.0)
        with pytest.raises(InvalidInput):
            AlignSettings(lambda_align=-1.0)
        with pytest.raises(InvalidInput):
            SelectionSettings(budget=0)


class TestLoadConfig:
    def test_none_path_gives_defaults(self):
        assert load_config(None) == Config()

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(str(path)) == Config()

    def test_yaml_file_parsed(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump({"teacher": {"mu": 2.5},
                                        "relevance_threshold": 0.1}))
        cfg = load_config(str(path))
        assert cfg.teacher.mu == 2.5
        assert cfg.relevance_threshold == 0.1

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(InvalidInput):
            load_config(str(tmp_path / "nope.yaml"))

    def test_invalid_yaml_rejected(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("teacher: [unclosed\n")
        with pytest.raises(InvalidInput):
            load_config(str(path))
