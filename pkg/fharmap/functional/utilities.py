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
from collections import namedtuple
import numpy as np
import statsmodels.api as sm
from .errors import ConfigError, FormatError

STAGES = ["solve", "analyze", "stratify", "beta", "cover"]
MODEL_KINDS = ["dirichlet", "saturating", "tabulated"]
BOUNDARY_KINDS = ["hedgehog", "cylinder", "two-hedgehogs", "constant", "circle", "trace"]

# block -> field -> (type, default). A default of None marks an optional field.
CONFIG_SCHEMA = {
    "model": {
        "preset": (str, None),
        "kind": (str, "dirichlet"),
        "beta": (float, 0.5),
        "B": (float, None),
        "vartheta": (float, 0.0),
        "n": (int, None),
        "q": (int, None),
        "table_path": (str, None),
        "modulation": (float, 0.0),
    },
    "grid": {
        "n": (int, 3),
        "dims": (list, None),
        "spacing": (float, None),
        "shape": (str, "ball"),
        "radius": (float, None),
    },
    "boundary": {
        "kind": (str, "hedgehog"),
        "perturbation": (float, 0.0),
        "separation": (float, 0.4),
        "wavenumber": (float, 1.0),
        "map_path": (str, None),
    },
    "solve": {
        "max_iters": (int, 500),
        "step0": (float, None),
        "backtrack_factor": (float, 0.5),
        "energy_tol": (float, 1e-8),
        "residual_tol": (float, 1e-2),
        "trials": (int, 16),
    },
    "analysis": {
        "centers": (list, None),
        "n_centers": (int, 4),
        "center_radius": (float, 0.3),
        "r_min": (float, None),
        "r_max": (float, None),
        "n_radii": (int, 24),
        "eps_mollifier": (float, 0.1),
        "flux_directions": (int, 1024),
        "core_cells": (float, 0.0),
    },
    "strata": {
        "eps0": (float, None),
        "eps_strat": (float, 0.05),
        "delta_pinch": (float, 0.5),
        "rho": (float, 0.25),
        "r0": (float, None),
        "reifenberg_delta": (float, 0.1),
        "alpha": (float, 0.5),
        "k": (int, 0),
        "defect_radii": (list, None),
        "n_directions": (int, 512),
        "max_points": (int, 32),
    },
}
TOP_LEVEL = {
    "seed": (int, 0),
    "output_dir": (str, "fharmap_out"),
    "stages": (list, None),
}


def parse_model_file(model_file):
    """Return the integrand parameters stored in input file."""
    dpar_tmp = {}
    with open(model_file) as read_model:
        for line in read_model:
            if line.strip() == "" or line[0] == "#":
                continue
            split_line = line.strip().split()
            dpar_tmp.setdefault(split_line[0], {})
            list_value = [a.split(":")[-1] for a in split_line[2:]]
            dpar_tmp[split_line[0]].setdefault(split_line[1], list_value)
    return dpar_tmp


def parse_table_file(table_file):
    """Return sorted (p, F) samples of a tabulated integrand."""
    if os.path.exists(table_file) == 0:
        raise FormatError("File %s not found." % table_file)
    p_values = []
    f_values = []
    with open(table_file) as read_table:
        for line in read_table:
            if line.strip() == "" or line[0] == "#":
                continue
            split_line = line.strip().split()
            if len(split_line) != 2:
                raise FormatError("Table line %s does not have two columns." % line.strip())
            p_values.append(float(split_line[0]))
            f_values.append(float(split_line[1]))
    p_values = np.array(p_values)
    f_values = np.array(f_values)
    order = np.argsort(p_values)
    p_values = p_values[order]
    f_values = f_values[order]
    if len(p_values) < 4:
        raise FormatError("Table %s needs at least four samples." % table_file)
    if np.any(np.diff(p_values) <= 0) or p_values[0] < 0:
        raise FormatError("Table %s has repeated or negative p values." % table_file)
    return p_values, f_values


def partition(lst, n):
    """Partion a list"""
    return [lst[i::n] for i in range(n)]


def fibonacci_sphere(count, n_dim=3, hemisphere=False):
    """
    Return count nearly uniform unit vectors. In 2-D these are equally
    spaced angles; hemisphere keeps one representative of each +/- pair.
    """
    if n_dim == 2:
        span = np.pi if hemisphere else 2 * np.pi
        angles = span * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if n_dim != 3:
        raise ValueError("Fibonacci lattice is only defined for n_dim 2 or 3.")
    i = np.arange(count) + 0.5
    if hemisphere:
        z_coord = 1 - i / count
    else:
        z_coord = 1 - 2 * i / count
    golden = np.pi * (3 - np.sqrt(5))
    radius = np.sqrt(np.clip(1 - z_coord ** 2, 0, None))
    phi = golden * i
    return np.stack([radius * np.cos(phi), radius * np.sin(phi), z_coord], axis=1)


def loglog_slope(x_values, y_values):
    """Return slope and intercept of an OLS fit of log(y) on log(x)."""
    log_x = np.log(np.asarray(x_values, dtype=float))
    log_y = np.log(np.asarray(y_values, dtype=float))
    ols_fit = sm.OLS(log_y, sm.add_constant(log_x)).fit()
    fit_result = namedtuple("fit_result", "slope intercept rsquared")
    return fit_result(
        float(ols_fit.params[1]), float(ols_fit.params[0]), float(ols_fit.rsquared)
    )


def _check_type(field, value, expected):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(field, "expected a number, got %r" % (value,))
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(field, "expected an integer, got %r" % (value,))
        return value
    if not isinstance(value, expected):
        raise ConfigError(field, "expected %s, got %r" % (expected.__name__, value))
    return value


def _fill_block(name, raw_block, schema):
    if not isinstance(raw_block, dict):
        raise ConfigError(name, "expected an object")
    for key in raw_block:
        if key not in schema:
            raise ConfigError("%s.%s" % (name, key), "unknown key")
    block = {}
    for key, (expected, default) in schema.items():
        if key in raw_block and raw_block[key] is not None:
            block[key] = _check_type("%s.%s" % (name, key), raw_block[key], expected)
        else:
            block[key] = default
    return block


def _require(condition, field, message):
    if not condition:
        raise ConfigError(field, message)


def validate_config(raw_config, base_dir="."):
    """
    Return a validated experiment configuration with defaults filled in.
    Unknown keys, wrong types and out-of-range values raise ConfigError
    naming the offending field.
    """
    if not isinstance(raw_config, dict):
        raise ConfigError("config", "expected an object at top level")
    for key in raw_config:
        if key not in CONFIG_SCHEMA and key not in TOP_LEVEL:
            raise ConfigError(key, "unknown key")
    config = _fill_block("config", {a: raw_config[a] for a in TOP_LEVEL if a in raw_config}, TOP_LEVEL)
    for name, schema in CONFIG_SCHEMA.items():
        config[name] = _fill_block(name, raw_config.get(name, {}), schema)

    grid = config["grid"]
    _require(grid["n"] in [2, 3], "grid.n", "must be 2 or 3")
    _require(grid["dims"] is not None, "grid.dims", "is required")
    _require(grid["spacing"] is not None, "grid.spacing", "is required")
    dims = grid["dims"]
    _require(len(dims) == grid["n"], "grid.dims", "needs one entry per axis")
    for value in dims:
        _require(isinstance(value, int) and not isinstance(value, bool) and value >= 8,
                 "grid.dims", "entries must be integers >= 8")
    _require(grid["spacing"] > 0, "grid.spacing", "must be > 0")
    _require(grid["shape"] in ["ball", "box"], "grid.shape", "must be ball or box")
    half_width = min(dims) * grid["spacing"] / 2
    if grid["shape"] == "ball":
        if grid["radius"] is None:
            grid["radius"] = half_width
        _require(0 < grid["radius"] <= half_width + 1e-12, "grid.radius",
                 "must be positive and fit inside the box")

    model = config["model"]
    if model["n"] is None:
        model["n"] = grid["n"]
    if model["q"] is None:
        model["q"] = grid["n"]
    _require(model["n"] == grid["n"], "model.n", "must equal grid.n")
    _require(model["q"] >= 2, "model.q", "must be >= 2")
    _require(model["kind"] in MODEL_KINDS, "model.kind", "must be one of %s" % ", ".join(MODEL_KINDS))
    if model["preset"] is None:
        _require(model["B"] is not None, "model.B", "is required")
        _require(model["B"] > 1, "model.B", "must be > 1")
    _require(model["vartheta"] >= 0, "model.vartheta", "must be >= 0")
    _require(model["beta"] > 0, "model.beta", "must be > 0")
    if model["kind"] == "tabulated" and model["preset"] is None:
        _require(model["table_path"] is not None, "model.table_path", "is required for tabulated models")
        model["table_path"] = os.path.join(base_dir, model["table_path"])
        _require(os.path.exists(model["table_path"]), "model.table_path", "file not found")

    boundary = config["boundary"]
    _require(boundary["kind"] in BOUNDARY_KINDS, "boundary.kind",
             "must be one of %s" % ", ".join(BOUNDARY_KINDS))
    _require(boundary["perturbation"] >= 0, "boundary.perturbation", "must be >= 0")
    if boundary["kind"] in ["hedgehog", "cylinder", "two-hedgehogs"]:
        _require(model["q"] == grid["n"], "model.q", "must equal grid.n for %s data" % boundary["kind"])
    if boundary["kind"] == "cylinder":
        _require(grid["n"] == 3, "grid.n", "cylinder data needs n = 3")
    if boundary["kind"] == "circle":
        _require(model["q"] == 2, "model.q", "circle data needs q = 2")
    if boundary["kind"] == "trace":
        _require(boundary["map_path"] is not None, "boundary.map_path", "is required for trace data")
        boundary["map_path"] = os.path.join(base_dir, boundary["map_path"])
        _require(os.path.exists(boundary["map_path"]), "boundary.map_path", "file not found")

    solve = config["solve"]
    _require(solve["max_iters"] >= 0, "solve.max_iters", "must be >= 0")
    _require(solve["step0"] is None or solve["step0"] > 0, "solve.step0", "must be > 0")
    _require(0 < solve["backtrack_factor"] < 1, "solve.backtrack_factor", "must lie in (0, 1)")
    _require(solve["energy_tol"] > 0, "solve.energy_tol", "must be > 0")
    _require(solve["trials"] >= 1, "solve.trials", "must be >= 1")

    analysis = config["analysis"]
    spacing = grid["spacing"]
    if analysis["r_min"] is None:
        analysis["r_min"] = 4 * spacing
    if analysis["r_max"] is None:
        analysis["r_max"] = 0.5 * half_width
    _require(analysis["r_min"] >= 4 * spacing - 1e-12, "analysis.r_min", "must be >= 4 * grid.spacing")
    _require(analysis["r_max"] > analysis["r_min"], "analysis.r_max", "must exceed analysis.r_min")
    _require(analysis["n_radii"] >= 2, "analysis.n_radii", "must be >= 2")
    _require(0 < analysis["eps_mollifier"] < 0.5, "analysis.eps_mollifier", "must lie in (0, 0.5)")
    if analysis["centers"] is not None:
        for center in analysis["centers"]:
            _require(isinstance(center, list) and len(center) == grid["n"], "analysis.centers",
                     "each center needs %i coordinates" % grid["n"])

    strata = config["strata"]
    if strata["r0"] is None:
        strata["r0"] = 4 * spacing
    _require(strata["r0"] >= 4 * spacing - 1e-12, "strata.r0", "must be >= 4 * grid.spacing")
    for key in ["eps_strat", "delta_pinch", "rho", "reifenberg_delta", "alpha"]:
        _require(strata[key] > 0, "strata.%s" % key, "must be > 0")
    _require(strata["eps0"] is None or strata["eps0"] > 0, "strata.eps0", "must be > 0")
    _require(strata["rho"] < 1, "strata.rho", "must be < 1")
    _require(0 <= strata["k"] < grid["n"], "strata.k", "must lie in [0, n)")

    if config["stages"] is None:
        config["stages"] = list(STAGES)
    for stage in config["stages"]:
        _require(stage in STAGES, "stages", "unknown stage %s" % stage)
    return config


def load_config_file(config_file):
    """Parse a JSON experiment configuration, reporting the failing line."""
    if os.path.exists(config_file) == 0:
        raise ConfigError("config", "file %s not found" % config_file)
    with open(config_file) as read_config:
        try:
            raw_config = json.load(read_config)
        except ValueError as error:
            raise ConfigError("config", "line %s column %s: %s" % (
                getattr(error, "lineno", "?"), getattr(error, "colno", "?"), error
            ))
    return validate_config(raw_config, os.path.dirname(os.path.abspath(config_file)))
