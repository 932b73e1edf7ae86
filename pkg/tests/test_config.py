import pytest

from anpr import config
from anpr.config import PipelineConfig
from anpr.errors import ConfigError


def test_defaults_are_valid():
    cfg = PipelineConfig().validate()
    assert cfg.bilateral_diameter == 9
    assert (cfg.bilateral_sigma_color, cfg.bilateral_sigma_space) == (70.0, 70.0)
    assert (cfg.canny_low, cfg.canny_high) == (30.0, 130.0)
    assert cfg.h_line_kernel == (10, 1)
    assert cfg.v_line_kernel == (1, 20)
    assert cfg.h_line_iterations == 8
    assert cfg.blob_min_size == 50
    assert cfg.binarization == "otsu"
    assert cfg.min_perimeter_frac is None and cfg.max_perimeter_frac is None


def test_dump_parse_round_trip():
    cfg = PipelineConfig()
    text = config.dump_config(cfg)
    back = config.parse_config_text(text)
    assert back == cfg
    assert config.dump_config(back) == text


def test_round_trip_survives_overrides():
    cfg = config.parse_config_text(
        """
        # tweaked for a squat two-row plate
        canny = 20,90
        binarization = adaptive
        h_line_kernel = 14,1
        min_height_frac = 0.2
        max_aspect = none
        """
    )
    assert cfg.canny_low == 20.0 and cfg.canny_high == 90.0
    assert cfg.binarization == "adaptive"
    assert cfg.h_line_kernel == (14, 1)
    assert cfg.min_height_frac == 0.2
    assert cfg.max_aspect is None
    assert config.parse_config_text(config.dump_config(cfg)) == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        config.parse_config_text("blur = 3\n")


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        config.parse_config_text("canny = fast,130\n")
    with pytest.raises(ConfigError):
        config.parse_config_text("bilateral = 9,70\n")


def test_validation_rules():
    with pytest.raises(ConfigError):
        PipelineConfig(canny_low=200.0).validate()
    with pytest.raises(ConfigError):
        PipelineConfig(bilateral_diameter=8).validate()
    with pytest.raises(ConfigError):
        PipelineConfig(binarization="sauvola").validate()
    with pytest.raises(ConfigError):
        PipelineConfig(min_height_frac=0.9, max_height_frac=0.5).validate()
    with pytest.raises(ConfigError):
        PipelineConfig(conf_thresh=1.5).validate()
    with pytest.raises(ConfigError):
        PipelineConfig(h_line_kernel=(0, 1)).validate()


def test_set_key_single_override():
    cfg = config.set_key(PipelineConfig(), "blob_min_size", "75")
    assert cfg.blob_min_size == 75
    cfg = config.set_key(cfg, "v_line_kernel", "1,24")
    assert cfg.v_line_kernel == (1, 24)
    with pytest.raises(ConfigError):
        config.set_key(cfg, "nope", "1")
