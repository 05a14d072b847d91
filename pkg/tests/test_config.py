"""Strict config schema: defaults, round-trips, and loud rejection of typos."""
import json

import pytest

from sslse_eeg.config import (SCHEMA_VERSION, config_json, effective_config,
                              load_config, parse_config)
from sslse_eeg.errors import ConfigParse, SchemaVersionMismatch


def minimal() -> dict:
    return {"version": SCHEMA_VERSION}


class TestVersionGate:
    def test_missing_version_rejected(self):
        with pytest.raises(SchemaVersionMismatch):
            parse_config({"seed": 3})

    def test_wrong_version_rejected(self):
        with pytest.raises(SchemaVersionMismatch, match="2"):
            parse_config({"version": 2})

    def test_current_version_accepted(self):
        assert parse_config(minimal()).version == SCHEMA_VERSION

    def test_non_object_root_rejected(self):
        with pytest.raises(ConfigParse):
            parse_config([1, 2])


class TestDefaults:
    def test_seed_default_zero(self):
        assert parse_config(minimal()).seed == 0

    def test_seed_propagates_to_stages(self):
        cfg = parse_config({"version": 1, "seed": 7})
        assert cfg.seed == 7
        assert cfg.ssl.seed == 7
        assert cfg.eval.seed == 7

    def test_model_defaults(self):
        m = parse_config(minimal()).model
        assert m.stage_channels == (16, 32, 64, 128)
        assert m.se_enabled is True
        assert m.input_hw == 224

    def test_ssl_encoder_is_the_model_config(self):
        cfg = parse_config(minimal())
        assert cfg.ssl.encoder is cfg.model

    def test_default_augmentations(self):
        cfg = parse_config(minimal())
        kinds = [op.kind for op in cfg.ssl.augment.ops]
        assert kinds == ["crop_resize", "gaussian_noise"]


class TestUnknownKeys:
    def test_window_typo_names_the_key(self):
        with pytest.raises(ConfigParse, match=r"window\.windw_s"):
            parse_config({"version": 1, "window": {"windw_s": 5.0}})

    def test_top_level_typo(self):
        with pytest.raises(ConfigParse, match="sseed"):
            parse_config({"version": 1, "sseed": 4})

    def test_model_typo(self):
        with pytest.raises(ConfigParse, match=r"model\.se_enable\b"):
            parse_config({"version": 1, "model": {"se_enable": True}})

    def test_augment_typo(self):
        with pytest.raises(ConfigParse, match="probabilty"):
            parse_config({"version": 1, "ssl": {"augment": [
                {"kind": "cutout", "probabilty": 0.5}]}})


class TestTypeChecks:
    def test_string_epochs_rejected(self):
        with pytest.raises(ConfigParse, match=r"ssl\.epochs"):
            parse_config({"version": 1, "ssl": {"epochs": "ten"}})

    def test_bool_is_not_a_number(self):
        with pytest.raises(ConfigParse, match=r"ssl\.epochs"):
            parse_config({"version": 1, "ssl": {"epochs": True}})

    def test_fractional_integer_rejected(self):
        with pytest.raises(ConfigParse, match=r"ssl\.epochs"):
            parse_config({"version": 1, "ssl": {"epochs": 2.5}})

    def test_flag_must_be_bool(self):
        with pytest.raises(ConfigParse, match=r"model\.se_enabled"):
            parse_config({"version": 1, "model": {"se_enabled": "yes"}})

    def test_stage_channels_must_be_int_list(self):
        with pytest.raises(ConfigParse, match="stage_channels"):
            parse_config({"version": 1, "model": {"stage_channels": [16, "x"]}})

    def test_section_must_be_object(self):
        with pytest.raises(ConfigParse, match="ssl"):
            parse_config({"version": 1, "ssl": [1]})

    def test_out_of_range_wrapped_with_section(self):
        with pytest.raises(ConfigParse, match="eval"):
            parse_config({"version": 1, "eval": {"test_fraction": 1.5}})

    def test_bad_resize_mode(self):
        with pytest.raises(ConfigParse, match="resize_mode"):
            parse_config({"version": 1, "imaging": {"resize_mode": "cubic"}})


class TestIngestSources:
    def test_default_is_synth(self):
        assert parse_config(minimal()).ingest.kind == "synth"

    def test_synth_fields(self):
        cfg = parse_config({"version": 1, "ingest": {"synth": {
            "classes": 3, "windows_per_class": 4, "noise_sigma": 9.0}}})
        assert cfg.ingest.synth.classes == 3
        assert cfg.ingest.synth.windows_per_class == 4
        assert cfg.ingest.synth.noise_sigma == 9.0

    def test_edf_source(self):
        cfg = parse_config({"version": 1, "ingest": {"edf_path": "rec.edf"}})
        assert cfg.ingest.kind == "edf"
        assert cfg.ingest.path == "rec.edf"

    def test_csv_needs_rate(self):
        with pytest.raises(ConfigParse, match="csv_rate_hz"):
            parse_config({"version": 1, "ingest": {"csv_path": "a.csv"}})

    def test_rate_needs_csv(self):
        with pytest.raises(ConfigParse, match="csv_rate_hz"):
            parse_config({"version": 1, "ingest": {"csv_rate_hz": 250.0}})

    def test_csv_source(self):
        cfg = parse_config({"version": 1, "ingest": {
            "csv_path": "a.csv", "csv_rate_hz": 250.0}})
        assert cfg.ingest.kind == "csv"
        assert cfg.ingest.csv_rate_hz == 250.0

    def test_images_source(self):
        cfg = parse_config({"version": 1, "ingest": {"images_dir": "imgs"}})
        assert cfg.ingest.kind == "images"

    def test_two_sources_rejected(self):
        with pytest.raises(ConfigParse, match="multiple sources"):
            parse_config({"version": 1, "ingest": {
                "edf_path": "a.edf", "images_dir": "imgs"}})

    def test_synth_validation_wrapped(self):
        with pytest.raises(ConfigParse, match=r"ingest\.synth"):
            parse_config({"version": 1, "ingest": {"synth": {"classes": 1}}})


class TestAugmentParsing:
    def test_custom_chain(self):
        cfg = parse_config({"version": 1, "ssl": {"augment": [
            {"kind": "cutout", "probability": 0.5, "lo": 0.1, "hi": 0.3},
            {"kind": "gaussian_blur", "lo": 0.2, "hi": 1.0},
        ]}})
        assert [op.kind for op in cfg.ssl.augment.ops] == [
            "cutout", "gaussian_blur"]
        assert cfg.ssl.augment.ops[0].probability == 0.5

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigParse, match="solarize"):
            parse_config({"version": 1, "ssl": {"augment": [
                {"kind": "solarize"}]}})

    def test_empty_chain_rejected(self):
        with pytest.raises(ConfigParse):
            parse_config({"version": 1, "ssl": {"augment": []}})

    def test_missing_kind_rejected(self):
        with pytest.raises(ConfigParse, match="kind"):
            parse_config({"version": 1, "ssl": {"augment": [{"lo": 0.1}]}})


class TestRoundTrip:
    def test_effective_config_reparses_identically(self):
        raw = {
            "version": 1, "seed": 11,
            "ingest": {"synth": {"classes": 3, "noise_sigma": 6.5}},
            "window": {"window_s": 2.0, "segment_ms": 20.0},
            "imaging": {"out_h": 64, "out_w": 64, "png_export": True},
            "model": {"stage_channels": [4, 8], "se_enabled": False,
                      "input_hw": 64, "embedding_dim": 16},
            "ssl": {"epochs": 3, "batch_size": 8, "temperature": 0.25},
            "eval": {"labeled_fraction": 0.25, "epochs": 5},
        }
        cfg = parse_config(raw)
        text = config_json(cfg)
        again = parse_config(json.loads(text))
        assert config_json(again) == text

    def test_effective_config_materializes_defaults(self):
        eff = effective_config(parse_config(minimal()))
        assert eff["ssl"]["temperature"] == 0.5
        assert eff["eval"]["test_fraction"] == 0.2
        assert eff["window"]["stride_s"] == eff["window"]["window_s"]

    def test_config_json_sorted_with_trailing_newline(self):
        text = config_json(parse_config(minimal()))
        assert text.endswith("\n")
        assert json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n" == text

    def test_non_synth_sources_round_trip(self):
        for raw_ingest in ({"edf_path": "r.edf"},
                           {"csv_path": "r.csv", "csv_rate_hz": 128.0},
                           {"images_dir": "imgs"}):
            cfg = parse_config({"version": 1, "ingest": raw_ingest})
            again = parse_config(json.loads(config_json(cfg)))
            assert again.ingest.kind == cfg.ingest.kind
            assert again.ingest.path == cfg.ingest.path


class TestLoadConfig:
    def test_loads_from_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"version": 1, "seed": 5}))
        assert load_config(path).seed == 5

    def test_missing_file_is_config_parse(self, tmp_path):
        with pytest.raises(ConfigParse, match="cannot read"):
            load_config(tmp_path / "absent.json")

    def test_invalid_json_is_config_parse(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{not json")
        with pytest.raises(ConfigParse, match="not valid JSON"):
            load_config(path)
