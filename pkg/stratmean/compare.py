# -*- coding: utf-8 -*-
"""Two-sample comparison of tangent vector tables on a shared tangent cone."""

from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np
from scipy.stats import ks_2samp, norm

from stratmean.measures import RngStream
from stratmean.spaces import ChartMismatch

DEFAULT_OPTIONS = {
    "permutations": 200,
    "alpha": 0.01,
    "probe_directions": 8,
    "energy_subsample": 1000,
}


@dataclass
class TestReport:
    """
    Outcome of a two-sample comparison.

    Attributes
    ----------
        - energy_statistic (float): V-statistic energy distance under the
            conical metric.
        - energy_pvalue (float): permutation p-value, (count + 1) / (B + 1).
        - ks (list): per probe direction, the KS statistic and p-value of the
            pairings with that direction.
        - apex_fractions (list): fraction of apex rows in each table.
        - apex_z, apex_pvalue (float): two-proportion z-test on the apex mass.
        - alpha (float): significance level; passed is energy_pvalue > alpha.
    """

    __test__ = False

    energy_statistic: float
    energy_pvalue: float
    ks: List[dict] = field(default_factory=list)
    apex_fractions: List[float] = field(default_factory=list)
    apex_z: float = 0.0
    apex_pvalue: float = 1.0
    alpha: float = 0.01
    passed: bool = True

    def as_dict(self):
        """JSON-ready copy."""
        return asdict(self)


def _encode(cone, rows):
    try:
        return cone.encode_many(rows)
    except ChartMismatch as err:
        raise ValueError(f"tables do not share the tangent cone: {err}") from err


def _subsample(encoded, limit, gen):
    if limit is None or len(encoded) <= limit:
        return encoded
    keep = np.sort(gen.choice(len(encoded), size=limit, replace=False))
    return encoded[keep]


def _energy_from_blocks(dist, first, second):
    between = dist[np.ix_(first, second)].mean()
    within_a = dist[np.ix_(first, first)].mean()
    within_b = dist[np.ix_(second, second)].mean()
    return float(2.0 * between - within_a - within_b)


def energy_test(cone, encoded_a, encoded_b, permutations, gen):
    """
    Energy distance with a label permutation p-value.

    Parameters
    ----------
        - cone: tangent cone providing distance_matrix.
        - encoded_a, encoded_b (arrays): encoded rows of the two samples.
        - permutations (int): number of label shuffles B.
        - gen (numpy Generator): permutation randomness.

    Returns
    -------
        - statistic (float)
        - pvalue (float): (#{permuted >= observed} + 1) / (B + 1).
    """
    pooled = np.vstack([encoded_a, encoded_b])
    dist = cone.distance_matrix(pooled, pooled)
    size_a = len(encoded_a)
    labels = np.arange(len(pooled))
    observed = _energy_from_blocks(dist, labels[:size_a], labels[size_a:])
    slack = 1e-12 * max(1.0, abs(observed))
    count = 0
    for _ in range(permutations):
        gen.shuffle(labels)
        stat = _energy_from_blocks(dist, labels[:size_a], labels[size_a:])
        count += stat >= observed - slack
    return observed, (count + 1) / (permutations + 1)


def apex_test(apex_a, apex_b):
    """Two-proportion z-test on apex indicators; returns (z, two-sided p)."""
    size_a, size_b = len(apex_a), len(apex_b)
    pooled = (np.sum(apex_a) + np.sum(apex_b)) / (size_a + size_b)
    spread = np.sqrt(pooled * (1 - pooled) * (1 / size_a + 1 / size_b))
    if spread == 0:
        return 0.0, 1.0
    z_stat = (np.mean(apex_a) - np.mean(apex_b)) / spread
    return float(z_stat), float(2 * norm.sf(abs(z_stat)))


def compare(table_a, table_b, cone, options=None, rng=None, directions=None):
    """
    Compare two SampleTables drawn on the same tangent cone.

    Parameters
    ----------
        - table_a, table_b (SampleTable): the samples.
        - cone: their tangent cone.
        - options (dict): permutations, alpha, probe_directions and
            energy_subsample; missing keys use DEFAULT_OPTIONS.
        - rng (RngStream): randomness for subsampling, permutations and
            probe directions.
        - directions (list): unit probe directions, drawn uniformly from the
            cone when None.

    Returns
    -------
        - report (TestReport)
    """
    opts = dict(DEFAULT_OPTIONS, **(options or {}))
    if len(table_a.rows) == 0 or len(table_b.rows) == 0:
        raise ValueError("cannot compare an empty table")
    rng = RngStream(0, 0) if rng is None else rng
    encoded_a = _encode(cone, table_a.rows)
    encoded_b = _encode(cone, table_b.rows)

    gen = rng.child(0).generator()
    small_a = _subsample(encoded_a, opts["energy_subsample"], gen)
    small_b = _subsample(encoded_b, opts["energy_subsample"], gen)
    statistic, pvalue = energy_test(
        cone, small_a, small_b, int(opts["permutations"]), rng.child(1).generator()
    )

    if directions is None:
        gen = rng.child(2).generator()
        count = int(opts["probe_directions"])
        directions = [cone.random_direction(gen) for _ in range(count)]
    ks = []
    if directions:
        probes = cone.encode_many(directions)
        pair_a = cone.inner_matrix(encoded_a, probes)
        pair_b = cone.inner_matrix(encoded_b, probes)
        for j in range(len(directions)):
            result = ks_2samp(pair_a[:, j], pair_b[:, j])
            ks.append(
                {"statistic": float(result.statistic), "pvalue": float(result.pvalue)}
            )

    apex_a = np.array([vec.is_apex for vec in table_a.rows], dtype=float)
    apex_b = np.array([vec.is_apex for vec in table_b.rows], dtype=float)
    z_stat, apex_pvalue = apex_test(apex_a, apex_b)
    return TestReport(
        energy_statistic=statistic,
        energy_pvalue=float(pvalue),
        ks=ks,
        apex_fractions=[float(apex_a.mean()), float(apex_b.mean())],
        apex_z=z_stat,
        apex_pvalue=apex_pvalue,
        alpha=float(opts["alpha"]),
        passed=bool(pvalue > opts["alpha"]),
    )
