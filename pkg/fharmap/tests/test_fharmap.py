#!/usr/bin/env python3
#
# fharmap: numerical laboratory for F-harmonic sphere-valued maps
# Copyright 2026 fharmap developers
# All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
#
#



import os
import json
import pytest

from ..fharmap import config_digest, resolve_config, run, to_json
from ..functional.errors import ConfigError


def small_config(**overrides):
    config = {
        "model": {"kind": "dirichlet", "B": 5.5},
        "grid": {"n": 3, "dims": [16, 16, 16], "spacing": 0.125},
        "boundary": {"kind": "hedgehog", "perturbation": 0.2},
        "solve": {"max_iters": 3},
        "analysis": {
            "centers": [[0.0, 0.0, 0.0]], "r_min": 0.5, "r_max": 0.75, "n_radii": 16, "flux_directions": 64,
        },
        "seed": 7,
        "stages": ["solve", "analyze"],
    }
    config.update(overrides)
    return config


def write_config(tmp_path, config, name="config.json"):
    config_file = tmp_path / name
    config_file.write_text(json.dumps(config))
    return str(config_file)


def read(path):
    with open(path) as read_file:
        return read_file.read()


class TestCommandLine(object):
    def test_negative_spacing(self, tmp_path):
        config = small_config(grid={"n": 3, "dims": [16, 16, 16], "spacing": -0.125})
        config_file = write_config(tmp_path, config)
        assert run(["analyze", "-c", config_file, "-o", str(tmp_path / "out")]) == 2
        assert not os.path.exists(str(tmp_path / "out" / "manifest.json"))

    def test_unknown_key(self, tmp_path):
        config_file = write_config(tmp_path, small_config(colour="blue"))
        assert run(["analyze", "-c", config_file]) == 2

    def test_missing_config(self, tmp_path):
        assert run(["analyze", "-c", str(tmp_path / "absent.json")]) == 2

    def test_threads(self, tmp_path):
        config_file = write_config(tmp_path, small_config())
        assert run(["analyze", "-c", config_file, "-t", "0"]) == 2

    def test_run_writes_manifest(self, tmp_path):
        config_file = write_config(tmp_path, small_config())
        out = tmp_path / "run"
        assert run(["run", "-c", config_file, "-o", str(out)]) == 0
        manifest = json.loads(read(str(out / "manifest.json")))
        assert manifest["command"] == "run"
        assert manifest["seed"] == 7
        assert manifest["outputs"] == [
            "map.fhm", "solve_report.json", "profile_0.csv", "monotonicity.json"
        ]
        assert set(manifest["versions"]) == {"fharmap", "numpy", "scipy", "statsmodels"}
        assert len(manifest["config_sha256"]) == 64
        for name in manifest["outputs"]:
            assert os.path.exists(str(out / name))
        header = read(str(out / "profile_0.csv")).splitlines()[0]
        assert header == "r,theta,h,theta_bar,theta_smooth,pinch,flux"

    def test_same_seed_same_output(self, tmp_path):
        config_file = write_config(tmp_path, small_config())
        first = tmp_path / "first"
        second = tmp_path / "second"
        assert run(["run", "-c", config_file, "-o", str(first)]) == 0
        assert run(["run", "-c", config_file, "-o", str(second)]) == 0
        assert read(str(first / "profile_0.csv")) == read(str(second / "profile_0.csv"))
        assert read(str(first / "monotonicity.json")) == read(str(second / "monotonicity.json"))

    def test_saved_map_reproduces_profile(self, tmp_path):
        config_file = write_config(tmp_path, small_config())
        solved = tmp_path / "solved"
        loaded = tmp_path / "loaded"
        assert run(["run", "-c", config_file, "-o", str(solved)]) == 0
        map_file = str(solved / "map.fhm")
        assert run(["analyze", "-c", config_file, "-m", map_file, "-o", str(loaded)]) == 0
        assert read(str(solved / "profile_0.csv")) == read(str(loaded / "profile_0.csv"))

    def test_bad_map_fails_stage(self, tmp_path):
        config_file = write_config(tmp_path, small_config())
        bad_map = tmp_path / "bad.fhm"
        bad_map.write_bytes(b"FHM0")
        assert run(["analyze", "-c", config_file, "-m", str(bad_map), "-o", str(tmp_path / "out")]) == 1

    def test_verify_integrand(self, tmp_path):
        config = small_config(model={"preset": "saturating-3d"})
        config_file = write_config(tmp_path, config)
        out = tmp_path / "verify"
        assert run(["verify-integrand", "-c", config_file, "-o", str(out)]) == 0
        report = json.loads(read(str(out / "assumptions.json")))
        assert report["passed"] is True
        assert report["model"]["kind"] == "saturating"


class TestConfig(object):
    def test_presets(self):
        for name in ["hedgehog-dirichlet", "hedgehog-f1", "cylinder", "two-hedgehogs"]:
            config = resolve_config(name)
            assert config["grid"]["n"] == 3

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            resolve_config("no-such-preset")

    def test_digest(self):
        config = resolve_config("cylinder")
        assert config_digest(config) == config_digest(dict(config))
        changed = dict(config, seed=config["seed"] + 1)
        assert config_digest(changed) != config_digest(config)

    def test_to_json(self):
        assert to_json({"a": float("nan"), "b": [1, 2.5]}) == {"a": None, "b": [1, 2.5]}
