# test_config.py
from pathlib import Path

import pytest

from leaklab.attack.filtering import transfer_bias_class
from leaklab.config import (
    build_attack_config,
    env_defaults,
    load_attack_config,
    output_dir,
    save_attack_config,
)
from leaklab.device.profiles import PRESETS
from leaklab.errors import ConfigError
from leaklab.schemas import Backend, Scheme, Source

EXPERIMENT = """
scheme: ecschnorr
profile: intel-system
assumed_lzb: 8
lattice_dim: 35
bias_class:
  assumed_lzb: 8
  lower_cycles: 4.70e+8
  upper_cycles: 4.76e+8
reduction:
  algorithm: bkz
  bkz_block: 20
"""


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("LEAKLAB_SEED", "LEAKLAB_FREQ_HZ", "LEAKLAB_REDUCTION_BACKEND", "LEAKLAB_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)


def test_load_yaml(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(EXPERIMENT)
    config = load_attack_config(path)
    assert config.scheme == Scheme.ECSCHNORR
    assert config.profile == PRESETS["intel-system"]
    assert config.bias_class.upper_cycles == 4.76e8
    assert config.reduction.bkz_block == 20
    assert config.source == Source.LOCAL


def test_save_and_reload(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(EXPERIMENT)
    config = load_attack_config(path, overrides={"seed": 9})
    save_attack_config(config, tmp_path / "out" / "config.yaml")
    assert load_attack_config(tmp_path / "out" / "config.yaml") == config


def test_precedence(monkeypatch, tmp_path):
    monkeypatch.setenv("LEAKLAB_SEED", "4")
    monkeypatch.setenv("LEAKLAB_REDUCTION_BACKEND", "native")
    config = build_attack_config({"profile": "st-system"})
    assert config.seed == 4
    assert config.reduction.backend == Backend.NATIVE

    # file values beat the environment, explicit overrides beat both
    config = build_attack_config({"profile": "st-system", "seed": 5, "reduction": {"bkz_block": 10}})
    assert config.seed == 5
    assert config.reduction.backend == Backend.NATIVE
    assert config.reduction.bkz_block == 10
    config = build_attack_config({"profile": "st-system", "seed": 5}, overrides={"seed": 6, "retries": None})
    assert config.seed == 6
    assert config.retries == 10


def test_bad_environment(monkeypatch):
    monkeypatch.setenv("LEAKLAB_SEED", "many")
    with pytest.raises(ConfigError):
        env_defaults()


@pytest.mark.parametrize("text", [
    "profile: [unclosed",
    "- just\n- a list\n",
    "assumed_lzb: 8\n",
    "profile: intel-system\nlattice_dim: 1\n",
    "profile: intel-system\nsource: remote\n",
    "profile: nowhere-device\n",
    "profile: intel-system\ntransfer_thresholds: true\nbias_class: {assumed_lzb: 8, lower_cycles: 1, upper_cycles: 2}\n",
    "profile: intel-system\nprofiling_profile: nowhere-device\n",
])
def test_bad_files(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_attack_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_attack_config(tmp_path / "absent.yaml")


def test_output_dir(monkeypatch):
    assert str(output_dir()) == "runs"
    monkeypatch.setenv("LEAKLAB_OUTPUT_DIR", "/tmp/leaklab-runs")
    assert str(output_dir()) == "/tmp/leaklab-runs"
    assert str(output_dir("here")) == "here"


CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    config = load_attack_config(path)
    assert config.lattice_dim <= max(config.samples_total, config.fastest_count or 0)


def test_user_level_window_moves_to_the_user_peak():
    config = load_attack_config(CONFIG_DIR / "intel-user-8bit.yaml")
    assert config.transfer_thresholds
    user_peak = PRESETS["intel-user"].base_cycles + PRESETS["intel-user"].offset
    moved = transfer_bias_class(config.bias_class, config.reference_peak_cycles, user_peak)
    assert moved.upper_cycles == pytest.approx(4.835e8, rel=1e-3)
