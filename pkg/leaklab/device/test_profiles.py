# test_profiles.py
import pytest

from leaklab.device.profiles import PRESETS, get_profile, load_profile, save_profile
from leaklab.errors import ConfigError
from leaklab.schemas import LeakModel


def test_presets():
    assert PRESETS["intel-system"].base_cycles == 4.82e8
    assert PRESETS["intel-user"].offset == 1.5e7
    assert PRESETS["st-system"].model == LeakModel.ST_LINEAR
    assert get_profile("constant-time").model == LeakModel.CONSTANT_TIME


def test_profile_file_roundtrip(tmp_path):
    path = tmp_path / "device.profile"
    save_profile(PRESETS["intel-user"], path)
    text = path.read_text()
    assert "base_cycles = 482000000" in text
    assert load_profile(path) == PRESETS["intel-user"]
    assert get_profile(str(path)) == PRESETS["intel-user"]


def test_bad_profile_files(tmp_path):
    path = tmp_path / "bad.profile"
    path.write_text("model = intel_window\nbase_cycles = 100\ncolour = blue\n")
    with pytest.raises(ConfigError):
        load_profile(path)
    path.write_text("model = intel_window\nbase_cycles = -1\n")
    with pytest.raises(ConfigError):
        load_profile(path)
    with pytest.raises(ConfigError):
        get_profile("no-such-profile")
