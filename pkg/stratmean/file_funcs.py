# -*- coding: utf-8 -*-
"""Functions for reading configs and writing sample tables and run reports."""

import json
from copy import deepcopy
from dataclasses import dataclass, field
from os import makedirs
from os.path import isfile, join
from typing import List

import numpy as np
from pandas import DataFrame, read_csv

from stratmean.spaces import tangent

CONFIG_DEFAULTS = {
    "n_values": [100, 400, 1600],
    "trials": 2000,
    "master_seed": 0,
    "tolerances": {"escape": 1e-8, "solver": 1e-10},
    "comparison": {
        "permutations": 200,
        "alpha": 0.01,
        "probe_directions": 8,
        "energy_subsample": 1000,
    },
    "delta": None,
    "derivative": {"t_values": [1e-2, 1e-3], "directions": 16},
    "conjecture": {"draws": 1000, "t_values": [1e-2, 1e-3]},
    "limit_path": "section",
}
REQUIRED_KEYS = ("space", "measure")
MIN_SAMPLE_SIZE = 16


@dataclass
class SampleTable:
    """
    Rows of tangent vectors from one run.

    Attributes
    ----------
        - tag (str): provenance, e.g. "empirical_n1600" or "limit".
        - trials (list): trial index of each row.
        - rows (list): TangentVector per trial.
        - seed (int): master seed of the run.
        - failed (int): trials excluded after a solver failure.
    """

    tag: str
    trials: List[int] = field(default_factory=list)
    rows: list = field(default_factory=list)
    seed: int = 0
    failed: int = 0

    def apex_fraction(self):
        """Fraction of rows at the apex."""
        if not self.rows:
            return float("nan")
        return float(np.mean([vec.is_apex for vec in self.rows]))


def validate_table(table):
    """Make sure a sample table is well formed.

    Parameters
    ----------
        - table (SampleTable): the table to check.

    Raises
    ------
        Throws ValueError if the trial indices and rows do not line up.
    """
    if len(table.trials) != len(table.rows):
        raise ValueError(
            f"table {table.tag} has {len(table.trials)} trials "
            f"but {len(table.rows)} rows"
        )
    if len(set(table.trials)) != len(table.trials):
        raise ValueError(f"table {table.tag} repeats trial indices")


def direction_width(cone):
    """Number of direction coordinates the cone's charts carry."""
    if cone.kind == "linear":
        return cone.dim
    if cone.kind == "book":
        return 1 + cone.spine_dim
    return 1


def write_table(table, cone, filename):
    """Write a sample table as CSV.

    Parameters
    ----------
        - table (SampleTable): the rows to write.
        - cone: the tangent cone they live on.
        - filename (str): the csv file to write.

    Columns are trial, isApex, stratum, dir0..dir{k-1}, radius. Floats are
    written with 17 significant digits so a read gives back identical values.
    """
    validate_table(table)
    width = direction_width(cone)
    coords = np.zeros((len(table.rows), width))
    for i, vec in enumerate(table.rows):
        if not vec.is_apex:
            coords[i, : len(vec.coords)] = vec.coords
    frame = DataFrame(
        {
            "trial": np.asarray(table.trials, dtype=int),
            "isApex": [int(vec.is_apex) for vec in table.rows],
            "stratum": [vec.chart for vec in table.rows],
        }
    )
    for j in range(width):
        frame[f"dir{j}"] = coords[:, j]
    frame["radius"] = [vec.radius for vec in table.rows]
    frame.to_csv(filename, index=False, float_format="%.17g")


def read_table(filename, tag=None, seed=0):
    """Open a sample table CSV written by write_table.

    Parameters
    ----------
        - filename (str): the csv file.
        - tag (str): provenance tag, default the file name.
        - seed (int): seed metadata to attach.

    Returns
    -------
        - table (SampleTable)
    """
    frame = read_csv(filename, float_precision="round_trip", dtype={"stratum": str})
    expected = {"trial", "isApex", "stratum", "radius"}
    if not expected.issubset(frame.columns):
        missing = sorted(expected - set(frame.columns))
        raise ValueError(f"{filename} is missing columns {missing}")
    dir_cols = [col for col in frame.columns if col.startswith("dir")]
    rows = []
    for record in frame.itertuples(index=False):
        values = record._asdict()
        if int(values["isApex"]):
            rows.append(tangent("apex", (), 0.0))
        else:
            coords = [values[col] for col in dir_cols]
            rows.append(tangent(values["stratum"], coords, float(values["radius"])))
    table = SampleTable(
        tag or filename, [int(t) for t in frame["trial"]], rows, seed=seed
    )
    validate_table(table)
    return table


def _merge(defaults, given, where):
    merged = deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ValueError(f"unknown key {key} in {where}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ValueError(f"{where}.{key} must be an object")
            merged[key] = _merge(defaults[key], value, f"{where}.{key}")
        else:
            merged[key] = value
    return merged


def validate_config(config):
    """Make sure a merged config meets our requirements.

    Raises
    ------
        Throws ValueError naming the first offending entry.
    """
    n_values = config["n_values"]
    if not n_values or any(int(n) != n for n in n_values):
        raise ValueError(f"n_values must be a list of integers, not {n_values}")
    if min(n_values) < MIN_SAMPLE_SIZE:
        raise ValueError(f"every sample size must be at least {MIN_SAMPLE_SIZE}")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError(f"n_values must be increasing, not {n_values}")
    if int(config["trials"]) < 1:
        raise ValueError(f"trials must be positive, not {config['trials']}")
    if config["limit_path"] not in ("section", "distortion"):
        raise ValueError(
            f"limit_path must be 'section' or 'distortion', not {config['limit_path']}"
        )
    if not 0 < config["comparison"]["alpha"] < 1:
        raise ValueError("comparison.alpha must lie in (0, 1)")
    if int(config["comparison"]["permutations"]) < 1:
        raise ValueError("comparison.permutations must be positive")
    for section_name in ("derivative", "conjecture"):
        t_values = config[section_name]["t_values"]
        if not t_values or min(t_values) <= 0:
            raise ValueError(f"{section_name}.t_values must be positive")
    for key, value in config["tolerances"].items():
        if not value > 0:
            raise ValueError(f"tolerances.{key} must be positive, not {value}")


def load_config(filename):
    """Read a JSON experiment config, fill in defaults and validate it.

    Parameters
    ----------
        - filename (str): the JSON file.

    Returns
    -------
        - config (dict): every key of CONFIG_DEFAULTS plus space and measure.
    """
    with open(filename, "r", encoding="utf-8") as file:
        raw = json.load(file)
    if not isinstance(raw, dict):
        raise ValueError(f"{filename} must hold a JSON object")
    missing = [key for key in REQUIRED_KEYS if key not in raw]
    if missing:
        raise ValueError(f"{filename} is missing {missing[0]}")
    defaults = dict(CONFIG_DEFAULTS, space=None, measure=None)
    config = _merge(defaults, raw, "config")
    validate_config(config)
    return config


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value)} is not JSON serializable")


def write_report(report, out_dir, name="report.json"):
    """Write a run report as JSON in out_dir and return its path."""
    path = join(out_dir, name)
    with open(path, "w", encoding="utf-8") as file:
        json.dump(report, file, indent=2, default=_jsonable)
    return path


def make_output_dir(out_dir):
    """Create the run's output directory, parents included, and return it.

    Raises a ValueError when out_dir names an existing file.
    """
    if isfile(out_dir):
        raise ValueError(f"output path {out_dir} is a file, not a directory")
    makedirs(out_dir, exist_ok=True)
    return out_dir
