import json
import logging
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from darcy_waves import io
from darcy_waves.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from darcy_waves.config import ConfigError, forcing_profile, load_config, parse_config
from darcy_waves.spectral import Finite, GridFunction

BASE = """
[fluid]
sigma = 1.0
gravity = 1.0
speed = 1.0
depth = "infinite"

[forcing]
profile = "cos"
kappa = 0.01

[grid]
n = 32
nz = 24
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_valid_config(tmp_path):
    cfg = load_config(write(tmp_path, 'mode = "small-wave"\n' + BASE))
    assert cfg.mode == "small-wave"
    assert cfg.params.sigma == 1.0 and cfg.n == 32 and cfg.nz == 24


def test_finite_depth_and_mode_override(tmp_path):
    cfg = load_config(write(tmp_path, 'mode = "small-wave"\n' + BASE.replace('"infinite"', "0.5")), "continue")
    assert cfg.mode == "continue"
    assert cfg.params.depth == Finite(0.5)
    assert any("overrides" in n for n in cfg.notices)


def test_zero_speed_rejected(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, BASE.replace("speed = 1.0", "speed = 0.0")), "small-wave")
    assert "speed must be nonzero" in info.value.problems


def test_unknown_keys_named(tmp_path):
    text = BASE.replace("kappa = 0.01", "kappa = 0.01\namplitude = 2") + "\n[extras]\nx = 1\n"
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text), "small-wave")
    msg = str(info.value)
    assert "forcing.amplitude" in msg and "extras" in msg


def test_all_violations_listed(tmp_path):
    text = BASE.replace("n = 32", "n = 30").replace("sigma = 1.0", "sigma = -1.0").replace("nz = 24", "nz = 2")
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text), "small-wave")
    assert len(info.value.problems) >= 3


def test_parse_error_has_position(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, BASE + "\n[grid\n"), "small-wave")
    assert "line" in str(info.value) and "column" in str(info.value)


def test_nonzero_mean_forcing_projected(tmp_path, caplog):
    text = BASE.replace('profile = "cos"', "coefficients = [[0, 0.7, 0.0], [1, 1.0, 0.0]]")
    with caplog.at_level(logging.INFO):
        cfg = load_config(write(tmp_path, text), "small-wave")
    assert any("mean" in n for n in cfg.notices)
    phi = forcing_profile(cfg)
    assert abs(phi.mean()) < 1e-15
    assert np.allclose(phi.values, np.cos(phi.x), atol=1e-14)


def test_presets():
    for name in ("cos", "sin", "two-mode"):
        cfg = parse_config({"forcing": {"profile": name}}, "small-wave")
        assert forcing_profile(cfg).sup() > 0


@settings(max_examples=25, deadline=None)
@given(arrays(float, 16, elements=st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=False)))
def test_profile_round_trip_is_exact(tmp_path_factory, v):
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    io.write_profile(path, GridFunction(v))
    back = io.read_profile(path)
    assert np.array_equal(back.values, v)
    io.write_profile(path.with_name("q.csv"), back)
    assert path.read_text() == path.with_name("q.csv").read_text()


def test_small_wave_run(tmp_path):
    cfg = write(tmp_path, BASE)
    out = tmp_path / "out"
    assert main(["small-wave", "--config", str(cfg), "--out", str(out), "-q"]) == EXIT_OK
    for name in ("profile.csv", "bulk.csv", "manifest.json", "plot.gp", "profiles.png", "config.toml"):
        assert (out / name).exists(), name
    man = io.read_manifest(out / "manifest.json")
    assert man["status"] == "ok" and man["termination"] == "completed"
    assert man["grid"] == {"n": 32, "nz": 24}
    assert man["config"]["params"]["speed"] == 1.0
    cols, data = io.read_table(out / "bulk.csv")
    assert cols == ["x", "y", "q", "u_x", "u_y", "p"] and data.shape == (32 * 24, 6)


def test_continue_run_writes_branch(tmp_path):
    text = BASE.replace('"infinite"', "0.5") + "\n[continuation]\nmax_points = 3\n"
    out = tmp_path / "out"
    assert main(["continue", "--config", str(write(tmp_path, text)), "--out", str(out), "-q", "--no-render"]) == 0
    cols, data = io.read_table(out / "branch.csv")
    assert cols == ["kappa", "arclength", "residual_sup", "c1_norm", "holder_seminorm", "clearance"]
    assert data.shape[0] == 4 and data[0, 0] == 0
    man = io.read_manifest(out / "manifest.json")
    assert man["termination"] == "MaxPoints"
    assert not (out / "branch.png").exists() and (out / "plot.gp").exists()


def test_evolve_run_writes_trajectory(tmp_path):
    text = BASE + "\n[evolve]\ndt = 0.01\nT = 0.1\nsample_every = 5\nnoise = 1e-4\n"
    out = tmp_path / "out"
    assert main(["evolve", "--config", str(write(tmp_path, text)), "--out", str(out), "--seed", "5", "-q"]) == 0
    cols, data = io.read_table(out / "trajectory" / "timeseries.csv")
    assert cols == list(io.TIMESERIES_COLUMNS) and data.shape[0] == 3
    assert np.abs(data[:, 4]).max() < 1e-12
    assert io.read_manifest(out / "manifest.json")["seed"] == 5


def test_solver_error_reported_in_manifest(tmp_path):
    text = BASE.replace('"infinite"', "0.5") + \
        "\n[solver]\nmax_iter = 2\ntol = 1e-15\n"
    out = tmp_path / "out"
    assert main(["small-wave", "--config", str(write(tmp_path, text)), "--out", str(out), "-q"]) == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "error" and man["diagnostics"]["error"] == "SolverError"


def test_config_errors_exit_code(tmp_path, capsys):
    assert main(["small-wave", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    bad = write(tmp_path, BASE.replace("speed = 1.0", "speed = 0"))
    assert main(["small-wave", "--config", str(bad)]) == EXIT_CONFIG
    assert "speed must be nonzero" in capsys.readouterr().err


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_output(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    assert main(["small-wave", "--config", str(write(tmp_path, BASE)), "--out", str(locked / "x")]) == EXIT_IO


def test_output_path_is_a_file(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["small-wave", "--config", str(write(tmp_path, BASE)), "--out", str(blocker / "x"), "-q"]) == EXIT_IO


def test_verify_mode(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--config", str(write(tmp_path, "")), "--out", str(out), "-q"]) == EXIT_OK
    assert (out / "verify.csv").read_text().count("True") >= 10
