# -*- coding: utf-8 -*-
"""
Monte Carlo harness for the Fréchet mean central limit theorem.

Runs rescaled empirical means, limit-law draws, two-sample comparisons,
derivative checks and the conjecture probe, and exposes them through the
stratmean command line tool.
"""

import argparse
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from os.path import join

import numpy as np
import pandas
import scipy
from pandas import DataFrame

from stratmean import __version__
from stratmean.collapse import collapsed_model, limit_draw, sample_gaussian_mass
from stratmean.compare import compare
from stratmean.escape import escape_approx, escape_fd_oracle, escape_vector
from stratmean.file_funcs import (
    SampleTable,
    load_config,
    make_output_dir,
    read_table,
    write_report,
    write_table,
)
from stratmean.frechet import ConeRepr, diagnose_measure, frechet_mean, mean_context
from stratmean.measures import (
    Measure,
    RngStream,
    TangentMeasure,
    measure_from_spec,
    sample,
    tangent_measure_from_spec,
    vector_to_spec,
)
from stratmean.spaces import space_from_spec

LIMIT_STREAM = 1 << 32
COMPARE_STREAM = LIMIT_STREAM + 1
PROBE_STREAM = LIMIT_STREAM + 2
FAILURE_BUDGET = 1e-3
MIN_COMPARE_TRIALS = 100
GATE_DRAWS = 200
MODES = (
    "simulate",
    "limit",
    "compare",
    "derivative-check",
    "conjecture-probe",
    "diagnose",
    "escape",
)


@dataclass
class ExperimentConfig:
    """
    A validated experiment configuration.

    Attributes
    ----------
        - space (SpaceModel), measure (Measure): the population.
        - n_values (list): increasing sample sizes, each at least 16.
        - trials (int): Monte Carlo repetitions per sample size.
        - master_seed (int): root of every random stream.
        - tolerances, comparison, derivative, conjecture (dict): options.
        - limit_path (str): "section" or "distortion".
        - delta (TangentMeasure): escape mode input, may be None.
        - raw (dict): the config as read, echoed into report.json.
    """

    space: object
    measure: Measure
    n_values: list
    trials: int
    master_seed: int
    tolerances: dict
    comparison: dict
    derivative: dict
    conjecture: dict
    limit_path: str = "section"
    delta: TangentMeasure = None
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, config):
        """Build from a merged and validated config dict."""
        delta = config.get("delta")
        return cls(
            space=space_from_spec(config["space"]),
            measure=measure_from_spec(config["measure"]),
            n_values=[int(n) for n in config["n_values"]],
            trials=int(config["trials"]),
            master_seed=int(config["master_seed"]),
            tolerances=dict(config["tolerances"]),
            comparison=dict(config["comparison"]),
            derivative=dict(config["derivative"]),
            conjecture=dict(config["conjecture"]),
            limit_path=config["limit_path"],
            delta=None if delta is None else tangent_measure_from_spec(delta),
            raw=config,
        )

    @classmethod
    def from_file(cls, filename, seed=None):
        """Read a JSON config; seed overrides master_seed when given."""
        config = load_config(filename)
        if seed is not None:
            config["master_seed"] = int(seed)
        return cls.from_dict(config)

    def context(self):
        """Mean context of the population measure."""
        return mean_context(
            self.space,
            self.measure,
            self.tolerances["escape"],
            self.tolerances["solver"],
        )


def versions():
    """Versions of stratmean and its numeric stack."""
    return {
        "stratmean": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pandas.__version__,
    }


def _run_tasks(task, count, threads):
    """Run task(i) for i < count on a thread pool, keeping ValueErrors per task."""

    def guarded(index):
        try:
            return index, task(index), None
        except ValueError as err:
            return index, None, str(err)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        return list(pool.map(guarded, range(count)))


def _collect(outcomes, tag, seed, where):
    failures = [(index, message) for index, _, message in outcomes if message]
    if len(failures) > FAILURE_BUDGET * len(outcomes):
        index, message = failures[0]
        raise ValueError(
            f"{len(failures)} of {len(outcomes)} trials failed {where}, "
            f"trial {index}: {message}"
        )
    if failures:
        warnings.warn(f"Excluded {len(failures)} failed trials {where}.")
    kept = [(index, row) for index, row, message in outcomes if not message]
    return SampleTable(
        tag,
        trials=[index for index, _ in kept],
        rows=[row for _, row in kept],
        seed=seed,
        failed=len(failures),
    )


def check_hypotheses(config):
    """
    Diagnose the population measure and refuse to run on a failed check.

    Returns
    -------
        - report (FrechetReport): the diagnosis.

    Raises
    ------
        - ValueError naming every failed localization flag, and immured when
            finite-sample means escape the hull.
    """
    report = diagnose_measure(
        config.space,
        config.measure,
        RngStream(config.master_seed, PROBE_STREAM + 3),
        probes=GATE_DRAWS,
        escape_tol=config.tolerances["escape"],
        solver_tol=config.tolerances["solver"],
    )
    failed = [
        name
        for name, value in report.localized.items()
        if isinstance(value, bool) and not value
    ]
    if report.immured is False:
        failed.append("immured")
    if failed:
        raise ValueError(
            f"the measure fails the {', '.join(failed)} check, "
            "run the diagnose mode for details"
        )
    return report


def _simulate_trial(config, ctx, n, trial):
    stream = RngStream(config.master_seed, trial, (n,))
    points = sample(config.space, config.measure, stream, n)
    report = frechet_mean(
        config.space, Measure.from_points(points), config.tolerances["solver"]
    )
    return config.space.log(ctx.mean, report.mean).scaled(np.sqrt(n))


def run_simulation(config, n, ctx=None, threads=1, checked=False):
    """
    Rescaled empirical Fréchet means.

    Parameters
    ----------
        - config (ExperimentConfig): the experiment.
        - n (int): sample size.
        - ctx (MeanContext): population mean context, built when None.
        - threads (int): worker threads.
        - checked (bool): skip check_hypotheses, already run by the caller.

    Returns
    -------
        - table (SampleTable): sqrt(n) log of the empirical mean per trial.
            Trial i draws from the stream (master_seed, i, n), so the table
            does not depend on the thread count.
    """
    if not checked:
        check_hypotheses(config)
    ctx = config.context() if ctx is None else ctx
    task = partial(_simulate_trial, config, ctx, n)
    outcomes = _run_tasks(task, config.trials, threads)
    return _collect(outcomes, f"empirical_n{n}", config.master_seed, f"at n={n}")


def run_limit(config, ctx=None, model=None, threads=1):
    """
    Draws of the limit law, the escape vector of a Gaussian mass.

    Returns
    -------
        - table (SampleTable): one row per trial, tagged "limit".
    """
    ctx = config.context() if ctx is None else ctx
    if model is None:
        model = collapsed_model(config.space, config.measure, ctx)
    stream = RngStream(config.master_seed, LIMIT_STREAM)

    def task(index):
        return limit_draw(model, stream.child(index), config.limit_path)

    outcomes = _run_tasks(task, config.trials, threads)
    return _collect(outcomes, "limit", config.master_seed, "in the limit sampler")


def summarize_table(table, cone):
    """Apex fraction, radius moments and stratum frequencies of a table."""
    frame = DataFrame(
        {
            "stratum": [vec.chart for vec in table.rows],
            "radius": [vec.radius for vec in table.rows],
            "apex": [vec.is_apex for vec in table.rows],
        }
    )
    summary = {"tag": table.tag, "rows": len(frame), "failed": table.failed}
    if len(frame) == 0:
        return summary
    off_apex = frame.loc[~frame["apex"], "radius"]
    summary.update({
        "apex_fraction": float(frame["apex"].mean()),
        "mean_radius_off_apex": float(off_apex.mean()) if len(off_apex) else 0.0,
        "radius_second_moment": float((frame["radius"] ** 2).mean()),
        "strata": {
            str(key): float(val)
            for key, val in frame["stratum"].value_counts(normalize=True).items()
        },
    })
    if cone.kind == "linear" and len(frame) > 1:
        encoded = cone.encode_many(table.rows)
        summary["covariance"] = np.atleast_2d(np.cov(encoded, rowvar=False)).tolist()
    return summary


def _probe_directions(ctx, count, gen):
    if ctx.fluctuating.is_apex_only():
        return [ctx.cone.random_direction(gen) for _ in range(count)]
    return [ctx.fluctuating.sample_direction(gen) for _ in range(count)]


def run_compare(config, ctx=None, threads=1):
    """
    Simulate at every n, draw the limit law and compare each against it.

    Returns
    -------
        - report (dict): limit summary, per-n summaries and TestReports, and
            passed, the verdict at the largest n (smaller n are a trend).
        - tables (list): every SampleTable produced.
    """
    if config.trials < MIN_COMPARE_TRIALS:
        raise ValueError(f"compare needs at least {MIN_COMPARE_TRIALS} trials")
    check_hypotheses(config)
    ctx = config.context() if ctx is None else ctx
    limit = run_limit(config, ctx, threads=threads)
    gen = RngStream(config.master_seed, PROBE_STREAM).generator()
    directions = _probe_directions(ctx, int(config.comparison["probe_directions"]), gen)
    by_n, tables = {}, [limit]
    for n in config.n_values:
        table = run_simulation(config, n, ctx, threads, checked=True)
        tables.append(table)
        stream = RngStream(config.master_seed, COMPARE_STREAM, (n,))
        test = compare(table, limit, ctx.cone, config.comparison, stream, directions)
        by_n[str(n)] = {
            "table": summarize_table(table, ctx.cone),
            "test": test.as_dict(),
        }
    gate = by_n[str(max(config.n_values))]["test"]["passed"]
    report = {
        "limit": summarize_table(limit, ctx.cone),
        "by_n": by_n,
        "passed": gate,
    }
    return report, tables


def compare_files(config, file_a, file_b, ctx=None):
    """Compare two existing sample table CSVs on the config's tangent cone."""
    ctx = config.context() if ctx is None else ctx
    table_a = read_table(file_a, seed=config.master_seed)
    table_b = read_table(file_b, seed=config.master_seed)
    gen = RngStream(config.master_seed, PROBE_STREAM).generator()
    directions = _probe_directions(ctx, int(config.comparison["probe_directions"]), gen)
    stream = RngStream(config.master_seed, COMPARE_STREAM)
    test = compare(table_a, table_b, ctx.cone, config.comparison, stream, directions)
    return {
        "tables": [summarize_table(table, ctx.cone) for table in (table_a, table_b)],
        "test": test.as_dict(),
        "passed": test.passed,
    }


def _slopes(t_values, errors):
    slopes = []
    pairs = list(zip(t_values, errors))
    for (t_1, e_1), (t_2, e_2) in zip(pairs, pairs[1:]):
        if e_1 > 0 and e_2 > 0:
            slopes.append(float(np.log(e_1 / e_2) / np.log(t_1 / t_2)))
        else:
            slopes.append(None)
    return slopes


def derivative_check(config, ctx=None):
    """
    Compare escape vectors with finite differences of the barycenter map.

    For random unit directions theta the escape vector of the unit mass at
    theta is set against (1/s)(1/t) log b(mu + t delta_exp(s theta)) with
    s a tenth of the reach (1 when the reach is infinite).

    Returns
    -------
        - report (dict): step s, the t grid, the largest relative error per t,
            the log-log slopes between successive t and the s versus s/2
            residual at the smallest t.
    """
    check_hypotheses(config)
    ctx = config.context() if ctx is None else ctx
    space, cone = config.space, ctx.cone
    reach = space.reach(ctx.mean)
    step = 0.1 * reach if np.isfinite(reach) else 1.0
    t_values = sorted((float(t) for t in config.derivative["t_values"]), reverse=True)
    gen = RngStream(config.master_seed, PROBE_STREAM + 1).generator()
    full = ConeRepr.full(cone)
    solver_tol = config.tolerances["solver"]

    def oracle(theta, size, t):
        delta = TangentMeasure([(theta.scaled(size), 1.0)])
        vec = escape_fd_oracle(space, ctx.measure, delta, t, ctx, solver_tol)
        return vec.scaled(1.0 / size)

    errors = {t: [] for t in t_values}
    s_residual = 0.0
    for _ in range(int(config.derivative["directions"])):
        theta = full.sample_direction(gen)
        escape = escape_vector(space, ctx.measure, ctx, TangentMeasure([(theta, 1.0)]))
        for t in t_values:
            fd_vec = oracle(theta, step, t)
            gap = cone.distance(escape.vector, fd_vec)
            errors[t].append(gap / (1 + escape.vector.radius))
        halved = oracle(theta, step / 2, t_values[-1])
        s_residual = max(s_residual, cone.distance(fd_vec, halved))
    worst = [max(errors[t], default=0.0) for t in t_values]
    return {
        "step": step,
        "t_values": t_values,
        "max_relative_error": worst,
        "slopes": _slopes(t_values, worst),
        "s_residual": s_residual,
    }


def conjecture_probe(config, ctx=None, model=None):
    """
    Minimize F(exp X) - t pair(G, X) over the whole cone and over the closed
    fluctuating cone for Gaussian masses G, and report how far apart the
    rescaled minimizers land. Report only, nothing is asserted.
    """
    ctx = config.context() if ctx is None else ctx
    if model is None:
        model = collapsed_model(config.space, config.measure, ctx)
    full = ConeRepr.full(ctx.cone)
    t_values = [float(t) for t in config.conjecture["t_values"]]
    stream = RngStream(config.master_seed, PROBE_STREAM + 2)
    worst = {t: 0.0 for t in t_values}
    draws = int(config.conjecture["draws"])
    for index in range(draws):
        mass = sample_gaussian_mass(model, stream.child(index)).mass
        for t in t_values:
            whole = escape_approx(
                config.space, ctx.measure, mass, t, "b", ctx, region=full
            )
            confined = escape_approx(
                config.space, ctx.measure, mass, t, "b", ctx, region=ctx.fluctuating
            )
            worst[t] = max(worst[t], ctx.cone.distance(whole, confined))
    return {
        "draws": draws,
        "discrepancy": {str(t): worst[t] for t in t_values},
        "flagged": any(value > 1e-2 for value in worst.values()),
    }


def diagnose(config):
    """Mean report with localization flags and the three tangent subcones."""
    stream = RngStream(config.master_seed, PROBE_STREAM + 3)
    report = diagnose_measure(
        config.space,
        config.measure,
        stream,
        escape_tol=config.tolerances["escape"],
        solver_tol=config.tolerances["solver"],
    )
    out = report.as_dict()
    if report.mean is not None and report.localized.get("log_unique", False):
        ctx = config.context()
        out["escape_cone"] = ctx.escape.describe()
        out["hull"] = ctx.hull.describe()
        out["fluctuating_cone"] = ctx.fluctuating.describe()
    return out


def escape_report(config, delta, check_fd=(), ctx=None):
    """Escape vector of delta, optionally checked against finite differences."""
    if delta is None:
        raise ValueError("escape mode needs a delta in the config or via --delta")
    ctx = config.context() if ctx is None else ctx
    result = escape_vector(config.space, ctx.measure, ctx, delta)
    direction = result.direction
    out = {
        "vector": vector_to_spec(result.vector),
        "direction": None if direction is None else vector_to_spec(direction),
        "objective": result.objective,
        "clipped": result.clipped,
    }
    checks = []
    for t in check_fd:
        oracle = escape_fd_oracle(
            config.space, ctx.measure, delta, t, ctx, config.tolerances["solver"]
        )
        gap = ctx.cone.distance(result.vector, oracle)
        checks.append(
            {
                "t": t,
                "oracle": vector_to_spec(oracle),
                "relative_error": gap / (1 + result.vector.radius),
            }
        )
    out["finite_difference"] = checks
    return out


def _write_samples(table, cone, out_dir):
    path = join(out_dir, f"samples_{table.tag}.csv")
    write_table(table, cone, path)
    print(f"Wrote samples to {path}")
    return path


def _mode_simulate(config, args, out_dir):
    check_hypotheses(config)
    ctx = config.context()
    summaries = []
    for n in config.n_values:
        print(f"Running simulate for n={n} with {config.trials} trials.")
        table = run_simulation(config, n, ctx, args.threads, checked=True)
        _write_samples(table, ctx.cone, out_dir)
        summaries.append(summarize_table(table, ctx.cone))
    return {"tables": summaries}


def _mode_limit(config, args, out_dir):
    ctx = config.context()
    model = collapsed_model(config.space, config.measure, ctx)
    print(f"Drawing {config.trials} limit samples along the {config.limit_path} path.")
    table = run_limit(config, ctx, model, args.threads)
    _write_samples(table, ctx.cone, out_dir)
    return {
        "collapse": model.collapse_map.describe(),
        "sigma": model.sigma,
        "table": summarize_table(table, ctx.cone),
    }


def _mode_compare(config, args, out_dir):
    if args.tables:
        print(f"Comparing {args.tables[0]} with {args.tables[1]}.")
        return compare_files(config, args.tables[0], args.tables[1])
    ctx = config.context()
    print(
        f"Comparing n={config.n_values} against the limit with "
        f"{config.trials} trials."
    )
    report, tables = run_compare(config, ctx, args.threads)
    for table in tables:
        _write_samples(table, ctx.cone, out_dir)
    return report


def _mode_escape(config, args, out_dir):
    delta = config.delta
    if args.delta:
        with open(args.delta, "r", encoding="utf-8") as file:
            delta = tangent_measure_from_spec(json.load(file))
    check_fd = [float(t) for t in args.check_fd.split(",")] if args.check_fd else []
    return escape_report(config, delta, check_fd)


MODE_RUNNERS = {
    "simulate": _mode_simulate,
    "limit": _mode_limit,
    "compare": _mode_compare,
    "derivative-check": lambda config, args, out_dir: derivative_check(config),
    "conjecture-probe": lambda config, args, out_dir: conjecture_probe(config),
    "diagnose": lambda config, args, out_dir: diagnose(config),
    "escape": _mode_escape,
}


def parse_args_stratmean(args):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description="Monte Carlo checks of the central limit theorem for\
                                        Fréchet means on stratified spaces.\
                                        Writes sample tables and a\
                                        report.json to the output directory."
    )
    parser.add_argument(
        "mode",
        choices=MODES,
        help="mode: which experiment to run.",
    )
    parser.add_argument(
        "--config",
        required=True,
        help="config (string): JSON file describing the space, the measure\
                                        and the experiment options.",
    )
    parser.add_argument(
        "--out",
        required=True,
        help="out (string): directory for samples_<tag>.csv and\
                                        report.json. Created if missing.",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed (integer): overrides master_seed from the config.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="threads (integer): worker threads for the trials. Results do\
                                        not depend on it. Defaults to 1.",
    )
    parser.add_argument(
        "--tables",
        nargs=2,
        default=None,
        help="tables (two csv files): compare these instead of simulating.",
    )
    parser.add_argument(
        "--delta",
        default=None,
        help="delta (string): JSON file with the tangent measure for escape\
                                        mode, overriding the config's delta.",
    )
    parser.add_argument(
        "--check-fd",
        default=None,
        help="check-fd (comma separated floats): perturbation sizes t at\
                                        which escape mode checks the finite\
                                        difference oracle.",
    )
    return parser.parse_args(args)


def main_stratmean():
    """Run one stratmean experiment.

    Effect: Writes messages to standard out, sample tables and report.json
    to the --out directory.
    """
    args = parse_args_stratmean(sys.argv[1:])
    config = ExperimentConfig.from_file(args.config, args.seed)
    out_dir = make_output_dir(args.out)
    print(f"Running {args.mode} on {config.space!r} with seed {config.master_seed}.")

    report = {
        "mode": args.mode,
        "config": config.raw,
        "versions": versions(),
        "result": MODE_RUNNERS[args.mode](config, args, out_dir),
    }
    path = write_report(report, out_dir)
    print(f"Wrote report to {path}")
    print(
        "\n".join(
            [
                "Ran stratmean with the following settings:",
                f"mode: {args.mode}, config: {args.config},",
                f"seed: {config.master_seed}, threads: {args.threads}",
            ]
        )
    )


if __name__ == "__main__":
    main_stratmean()
