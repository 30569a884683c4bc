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
import sys
import argparse
import hashlib
import json
import logging
import datetime
import numpy as np
import scipy
import statsmodels
from . import __version__
from .analysis.map_analyzer import MapAnalyzer
from .analysis.symmetry import stratum_membership_all_scales
from .functional import map_io
from .functional.errors import ConfigError, FharmapError
from .functional.fields import GridDomain, make_map
from .functional.integrand import IntegrandModel, verify_assumptions
from .functional.solver import SolveConfig, minimize
from .functional.utilities import (
    load_config_file,
    parse_model_file,
    parse_table_file,
)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
MODEL_FILE = "integrand_models.txt"
COMMANDS = ["solve", "analyze", "stratify", "beta", "cover", "verify-integrand", "run"]
FLOAT_FORMAT = "%.10e"


def load_parameters(argv=None):
    """Return parameters."""
    parser = argparse.ArgumentParser(
        description="Numerical laboratory for F-harmonic sphere-valued maps."
    )
    parser.add_argument("command", choices=COMMANDS, help="Stage to run")
    parser.add_argument(
        "-c", "--config",
        help="Experiment configuration (JSON file or preset name)",
        required=True,
    )
    parser.add_argument("-s", "--seed", help="Override the configured seed", type=int, required=False)
    parser.add_argument(
        "-t", "--threads",
        help="Number of processes to use. Default is 1",
        type=int,
        default=1,
        required=False,
    )
    parser.add_argument("-o", "--out", help="Output directory", required=False)
    parser.add_argument("-m", "--map", help="Input map file (FHM1) to analyze", required=False)
    parser.add_argument("-v", "--verbose", help="Log debug messages", action="store_true")
    args = parser.parse_args(argv)
    if args.threads < 1:
        raise ConfigError("threads", "must be >= 1")
    return args


def resolve_config(config_arg):
    """Load a configuration file, or a shipped preset by name."""
    if os.path.exists(config_arg):
        return load_config_file(config_arg)
    preset_file = os.path.join(DATA_DIR, "%s.json" % config_arg)
    if os.path.exists(preset_file) == 0:
        raise ConfigError("config", "%s is neither a file nor a preset" % config_arg)
    return load_config_file(preset_file)


def build_model(model_config):
    """Return the IntegrandModel of a validated model block."""
    if model_config["preset"] is not None:
        model = IntegrandModel()
        dpar_tmp = parse_model_file(os.path.join(DATA_DIR, MODEL_FILE))
        model.set_model_par(dpar_tmp, model_config["preset"], DATA_DIR)
        return model
    table = None
    if model_config["kind"] == "tabulated":
        table = parse_table_file(model_config["table_path"])
    return IntegrandModel(
        model_config["kind"],
        model_config["n"],
        model_config["q"],
        model_config["B"],
        model_config["vartheta"],
        model_config["beta"],
        table,
        model_config["modulation"],
    )


def build_domain(grid_config):
    return GridDomain(
        grid_config["n"],
        grid_config["dims"],
        grid_config["spacing"],
        shape=grid_config["shape"],
        radius=grid_config["radius"],
    )


def initial_map(config, map_path=None):
    """Load the given map, or build the boundary data of the configuration."""
    boundary = config["boundary"]
    if map_path is None and boundary["kind"] == "trace":
        map_path = boundary["map_path"]
    if map_path is not None:
        return map_io.load(map_path, expected_n=config["grid"]["n"])
    return make_map(
        build_domain(config["grid"]),
        boundary["kind"],
        q_dim=config["model"]["q"],
        perturbation=boundary["perturbation"],
        separation=boundary["separation"],
        wavenumber=boundary["wavenumber"],
        seed=config["seed"],
    )


def to_json(value):
    """Convert numpy values for json; non-finite numbers become null."""
    if isinstance(value, dict):
        return {str(a): to_json(b) for a, b in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_json(a) for a in value]
    if isinstance(value, np.ndarray):
        return to_json(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def write_json(content, out_json):
    with open(out_json, "w") as json_output:
        json.dump(to_json(content), json_output, indent=2, sort_keys=True)


def write_csv(header, rows, out_csv):
    """Write rows with floats in a fixed format."""
    with open(out_csv, "w") as csv_output:
        csv_output.write(",".join(header) + "\n")
        for row in rows:
            fields = []
            for a in row:
                if isinstance(a, (float, np.floating)):
                    fields.append(FLOAT_FORMAT % a)
                else:
                    fields.append(str(a))
            csv_output.write(",".join(fields) + "\n")


def config_digest(config):
    canonical = json.dumps(to_json(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_solve(u, report, outdir):
    map_io.save(u, os.path.join(outdir, "map.fhm"))
    write_json(report._asdict(), os.path.join(outdir, "solve_report.json"))
    return ["map.fhm", "solve_report.json"]


def write_monotonicity(call, outdir):
    outputs = []
    header = ["r", "theta", "h", "theta_bar", "theta_smooth", "pinch", "flux"]
    for i, profile in enumerate(call.monotonicity.profiles):
        rows = zip(
            profile.radii, profile.theta, profile.h_vals, profile.theta_bar,
            profile.theta_smooth, profile.pinch, profile.flux,
        )
        out_csv = "profile_%i.csv" % i
        write_csv(header, rows, os.path.join(outdir, out_csv))
        outputs.append(out_csv)
    report = call.monotonicity
    write_json(
        {
            "A": call.A_constant,
            "tol": report.tol,
            "lambda_max": report.lambda_max,
            "violations": report.violations,
            "max_violation": report.max_violation,
            "flux_violations": report.flux_violations,
            "max_flux_gap": report.max_flux_gap,
            "mollifier_mass": report.profiles[0].mollifier_mass if report.profiles else None,
            "centers": report.per_center,
        },
        os.path.join(outdir, "monotonicity.json"),
    )
    return outputs + ["monotonicity.json"]


def write_strata(call, outdir):
    report = call.strata
    n_dim = report.points.shape[1]
    points = []
    for p, x in enumerate(report.points):
        points.append({
            "point": x,
            "singular": report.singular[p] if report.singular is not None else None,
            "regularity_scale": report.regularity[p] if report.regularity is not None else None,
            "membership": {str(k): report.membership[p, k] for k in range(n_dim)},
            "all_scales": {
                str(k): stratum_membership_all_scales(report.defects[p], report.radii, k, report.eps)
                for k in range(n_dim)
            },
        })
    consistency = call.consistency
    write_json(
        {
            "eps0": call.eps0,
            "eps_strat": report.eps,
            "radii": report.radii,
            "singular_cells": int(np.sum(call.singular.mask)),
            "raw_order_violations": report.violations,
            "points": points,
            "regularity_consistency": {
                "applicable": consistency.applicable,
                "holds": consistency.holds,
                "violations": consistency.violations,
            },
        },
        os.path.join(outdir, "strata.json"),
    )
    rows = []
    for p in range(len(report.points)):
        for k in range(n_dim + 1):
            for j, r in enumerate(report.radii):
                rows.append([
                    p, r, k, report.raw[p, k, j], report.defects[p, k, j], report.projected[p, k, j]
                ])
    write_csv(["point", "r", "k", "raw", "defect", "projected"], rows, os.path.join(outdir, "defects.csv"))
    return ["strata.json", "defects.csv"]


def write_beta(call, outdir):
    header = list(MapAnalyzer.beta_row._fields)
    rows = []
    for row in call.beta:
        rows.append([" ".join(FLOAT_FORMAT % a for a in row.center)] + list(row[1:]))
    write_csv(header, rows, os.path.join(outdir, "beta.csv"))
    write_json([row._asdict() for row in call.beta], os.path.join(outdir, "beta.json"))
    return ["beta.csv", "beta.json"]


def write_cover(call, outdir):
    cover = call.cover
    write_json(
        {
            "balls": [ball._asdict() for ball in cover.balls],
            "sum_rk": cover.sum_rk,
            "stages": cover.stages,
            "E": cover.E,
            "levels": [
                {"radius": radius, "drop_E": drop_level, "pinch_E": pinch_level}
                for radius, drop_level, pinch_level in cover.levels
            ],
            "minkowski_dimension": call.dimension,
        },
        os.path.join(outdir, "cover.json"),
    )
    table = cover.minkowski
    write_csv(
        ["r", "volume", "normalized"],
        zip(table.radii, table.volumes, table.normalized),
        os.path.join(outdir, "minkowski.csv"),
    )
    return ["cover.json", "minkowski.csv"]


def write_manifest(command, config, outputs, outdir):
    write_json(
        {
            "command": command,
            "config_sha256": config_digest(config),
            "seed": config["seed"],
            "outputs": outputs,
            "versions": {
                "fharmap": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "statsmodels": statsmodels.__version__,
            },
        },
        os.path.join(outdir, "manifest.json"),
    )


def run_stages(command, config, threads, map_path=None):
    """Run the stages of a command and write their outputs; return the output names."""
    outdir = config["output_dir"]
    if os.path.exists(outdir) == 0:
        os.makedirs(outdir)
    stages = config["stages"] if command == "run" else [command]
    model = build_model(config["model"])
    outputs = []
    if command == "verify-integrand":
        logging.info("Verifying integrand assumptions at %s", datetime.datetime.now())
        report = verify_assumptions(model)
        if not report.passed:
            logging.warning("Integrand %s fails its assumptions", model.kind)
        content = report._asdict()
        content["model"] = model.describe()
        write_json(content, os.path.join(outdir, "assumptions.json"))
        return ["assumptions.json"]

    u = initial_map(config, map_path)
    if "solve" in stages:
        logging.info("Solving at %s", datetime.datetime.now())
        solve = config["solve"]
        solve_config = SolveConfig(
            solve["max_iters"],
            solve["step0"],
            solve["backtrack_factor"],
            solve["energy_tol"],
            solve["residual_tol"],
            solve["trials"],
        )
        u, report = minimize(u, model, solve_config)
        outputs += write_solve(u, report, outdir)
    analysis_stages = [a for a in stages if a != "solve"]
    if analysis_stages:
        map_analyzer = MapAnalyzer()
        map_analyzer.set_par(u, model, config, threads, config["seed"])
        call = map_analyzer.call(analysis_stages)
        if call.monotonicity is not None:
            outputs += write_monotonicity(call, outdir)
        if call.strata is not None:
            outputs += write_strata(call, outdir)
        if call.beta is not None:
            outputs += write_beta(call, outdir)
        if call.cover is not None:
            outputs += write_cover(call, outdir)
    return outputs


def run(argv=None):
    """Run a command; return 0 on success, 2 on a configuration error, 1 on a stage failure."""
    try:
        parameters = load_parameters(argv)
        logging.basicConfig(level=logging.DEBUG if parameters.verbose else logging.INFO)
        config = resolve_config(parameters.config)
        if parameters.seed is not None:
            config["seed"] = parameters.seed
        if parameters.out is not None:
            config["output_dir"] = parameters.out
    except ConfigError as error:
        logging.error("Configuration error in %s", error)
        return 2
    try:
        logging.info("Running %s at %s", parameters.command, datetime.datetime.now())
        outputs = run_stages(parameters.command, config, parameters.threads, parameters.map)
        write_manifest(parameters.command, config, outputs, config["output_dir"])
    except ConfigError as error:
        logging.error("Configuration error in %s", error)
        return 2
    except FharmapError as error:
        logging.error("Stage failed: %s", error)
        return 1
    logging.info("Finished %s at %s", parameters.command, datetime.datetime.now())
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
