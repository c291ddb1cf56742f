# -*- coding: utf-8 -*-

import json

import pytest

from src.config import RunConfigFile, SegConfig, SynthConfig, TscConfig, config
from src.dtw_core import BandConstraint
from src.errors import DataError, NumericError, UsageError, exit_code_for
from src.logger_config import format_record, setup_logger
from utils.validators import (
    parse_range, validate_batch_fraction, validate_encoder_spec, validate_learning_rate,
    validate_positive_int, validate_range, validate_table_file,
)


class TestTrainingConfigs:

    @pytest.mark.parametrize("overrides", [{"lam": -0.1}, {"temperature": 0.0}, {"batch_fraction": 0.0},
                                           {"batch_fraction": 1.5}, {"learning_rate": 0.0}])
    def test_invalid_tsc(self, overrides):
        with pytest.raises(DataError):
            config.tsc_config(**overrides)

    @pytest.mark.parametrize("overrides", [{"delta": -1.0}, {"q": 0}, {"tau_p": 0}, {"batch_size": 0}])
    def test_invalid_seg(self, overrides):
        with pytest.raises(DataError):
            config.seg_config(**overrides)

    def test_none_means_default(self):
        assert config.tsc_config(lam=None, epochs=5) == TscConfig(epochs=5)

    def test_tsc_dict_round_trip(self):
        cfg = TscConfig(lam=0.3, band=BandConstraint.sakoe_chiba(4))
        assert TscConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_fields_ignored(self):
        assert SegConfig.from_dict({"q": 7, "momentum": 0.9}) == SegConfig(q=7)

    def test_synth_ranges(self):
        with pytest.raises(DataError):
            SynthConfig(segments=(4, 2)).validate()
        with pytest.raises(DataError):
            SynthConfig(warp=1.2).validate()
        assert SynthConfig.from_dict(SynthConfig().to_dict()) == SynthConfig()


class TestRunConfigFile:

    def test_sections_and_seed(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 3, "seg": {"q": 9}, "extra": 1}), encoding="utf-8")
        run = RunConfigFile(str(path))
        assert run.get("seed") == 3
        assert run.section("seg") == {"q": 9}
        assert run.section("tsc") == {}
        assert "extra" not in run.config

    def test_section_is_copy(self, tmp_path):
        run = RunConfigFile()
        run.section("tsc")["lam"] = 1.0
        assert run.section("tsc") == {}

    def test_export_then_reload(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"tsc": {"epochs": 4}}), encoding="utf-8")
        exported = tmp_path / "exported.json"
        assert RunConfigFile(str(path)).export_config(str(exported))
        assert RunConfigFile(str(exported)).section("tsc") == {"epochs": 4}

    @pytest.mark.parametrize("text", ["{broken", "[1, 2]"])
    def test_invalid_file(self, tmp_path, text):
        path = tmp_path / "run.json"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(DataError):
            RunConfigFile(str(path))


class TestExitCodes:

    @pytest.mark.parametrize("exc,code", [(UsageError("x"), 1), (DataError("x"), 2), (NumericError("x"), 3),
                                          (FileNotFoundError("x"), 2), (ZeroDivisionError(), 3),
                                          (RuntimeError("x"), 1)])
    def test_mapping(self, exc, code):
        assert exit_code_for(exc) == code


class TestValidators:

    def test_positive_int(self):
        assert validate_positive_int("3")[0]
        assert not validate_positive_int("0")[0]
        assert not validate_positive_int("x")[0]

    def test_batch_fraction(self):
        assert validate_batch_fraction("1")[0]
        assert not validate_batch_fraction("0")[0]

    def test_learning_rate_accepts_cv(self):
        assert validate_learning_rate("CV")[0]
        assert not validate_learning_rate("-0.1")[0]

    def test_encoder_spec(self):
        assert validate_encoder_spec("window:3")[0]
        assert not validate_encoder_spec("lstm")[0]

    def test_range(self):
        assert validate_range("3:6")[0] and parse_range(" 3 : 6 ") == (3, 6)
        assert not validate_range("6:3")[0]
        assert not validate_range("0:2")[0]
        assert not validate_range("3-6")[0]

    def test_table_file(self, tmp_path):
        csv = tmp_path / "t.csv"
        csv.write_text("dataset,A\n", encoding="utf-8")
        assert validate_table_file(str(csv))[0]
        assert not validate_table_file(str(tmp_path / "missing.csv"))[0]
        other = tmp_path / "t.json"
        other.write_text("{}", encoding="utf-8")
        assert not validate_table_file(str(other))[0]


class TestLogging:

    def test_training_record_line(self):
        line = format_record({"epoch": 3, "loss": 0.5, "ce": 0.25, "dist": 1.0}, "epoch")
        assert line == "epoch=3 loss=0.500000 ce=0.250000 dist=1.000000"

    def test_unknown_level(self):
        with pytest.raises(UsageError):
            setup_logger("LOUD")

    def test_file_sink(self, tmp_path):
        log_file = tmp_path / "logs" / "run.log"
        logger = setup_logger("DEBUG", str(log_file))
        logger.bind(name="test").info("写入文件")
        logger.remove()
        setup_logger()
        assert "写入文件" in log_file.read_text(encoding="utf-8")
