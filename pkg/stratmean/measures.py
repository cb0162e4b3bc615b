# -*- coding: utf-8 -*-
"""Discrete measures, tangent measures, pairings and seeded sampling."""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from stratmean.spaces import Point, tangent

QUADRATURE_POINTS = 512


@dataclass(frozen=True)
class Segment:
    """
    A uniform piece of mass along a ray coordinate of one chart.

    Attributes
    ----------
        - stratum (str): chart id, e.g. "leg2" or "page1".
        - lo, hi (float): interval of the ray coordinate, lo < hi.
        - density (float): constant mass per unit length.
        - anchor (tuple): the chart coordinates held fixed along the ray (spine
            coordinates on a book page, the angle on a cone ray).
    """

    stratum: str
    lo: float
    hi: float
    density: float
    anchor: Tuple[float, ...] = ()

    @property
    def mass(self):
        """Total mass of the segment."""
        return self.density * (self.hi - self.lo)

    def point(self, space, coord):
        """The point of the segment at ray coordinate coord."""
        coords = (float(coord),) + tuple(self.anchor)
        return space.validate_point(Point(self.stratum, coords))


class Measure:
    """
    A finite measure made of weighted atoms and uniform ray segments.

    Attributes
    ----------
        - atoms (tuple): (Point, weight) pairs with weight > 0.
        - segments (tuple): Segment pieces.
        - total_mass (float): sum of atom weights and segment masses.

    Methods
    -------
        - discretize(space): atom-only copy with segments replaced by a
            Gauss-Legendre rule.
        - from_points(points, weights): empirical measure of draws.
        - add(other, t): the measure self + t * other.
    """

    def __init__(self, atoms=(), segments=()):
        """Construct and validate the measure."""
        self.atoms = tuple((point, float(weight)) for point, weight in atoms)
        self.segments = tuple(segments)
        for point, weight in self.atoms:
            if not weight > 0:
                raise ValueError(f"atom weights must be positive, {point} has {weight}")
        for seg in self.segments:
            if not seg.hi > seg.lo:
                raise ValueError(f"segment on {seg.stratum} has empty interval")
            if not seg.density > 0:
                raise ValueError(f"segment on {seg.stratum} needs positive density")
        self.total_mass = float(sum(w for _, w in self.atoms)
                                + sum(seg.mass for seg in self.segments))

    def __len__(self):
        """Number of atoms and segments."""
        return len(self.atoms) + len(self.segments)

    def __repr__(self):
        """Readable form."""
        return f"Measure(atoms={list(self.atoms)}, segments={list(self.segments)})"

    def discretize(self, space):
        """
        Replace segments by a Gauss-Legendre atom set.

        Parameters
        ----------
            - space (SpaceModel): the space the measure lives on; atoms are
                brought into canonical form.

        Returns
        -------
            - measure (Measure): atoms only, same total mass.
        """
        atoms = [(space.validate_point(point), weight) for point, weight in self.atoms]
        if self.segments:
            nodes, weights = leggauss(QUADRATURE_POINTS)
            for seg in self.segments:
                half, mid = 0.5 * (seg.hi - seg.lo), 0.5 * (seg.hi + seg.lo)
                for node, weight in zip(nodes, weights):
                    atoms.append((seg.point(space, mid + half * node),
                                  seg.density * half * weight))
        return Measure(atoms)

    @classmethod
    def from_points(cls, points, weights=None):
        """
        Empirical measure of a list of points, merging repeats.

        Parameters
        ----------
            - points (list): canonical Points.
            - weights (array): per-point weights, default 1/len(points).
        """
        if len(points) == 0:
            raise ValueError("an empirical measure needs at least one point")
        if weights is None:
            weights = np.full(len(points), 1.0 / len(points))
        merged = OrderedDict()
        for point, weight in zip(points, weights):
            merged[point] = merged.get(point, 0.0) + float(weight)
        return cls(list(merged.items()))

    def add(self, other, t=1.0):
        """Return self + t * other for t >= 0."""
        if t < 0:
            raise ValueError(f"perturbation weight must be nonnegative, not {t}")
        if t == 0:
            return self
        segments = [Segment(s.stratum, s.lo, s.hi, t * s.density, s.anchor)
                    for s in other.segments]
        return Measure(list(self.atoms) + [(p, t * w) for p, w in other.atoms],
                       list(self.segments) + segments)


class TangentMeasure:
    """
    Finitely supported measure on a tangent cone.

    Attributes
    ----------
        - atoms (tuple): (TangentVector, weight) pairs with weight > 0.
    """

    def __init__(self, atoms=()):
        """Construct and validate the tangent measure."""
        self.atoms = tuple((vec, float(weight)) for vec, weight in atoms)
        for vec, weight in self.atoms:
            if not weight > 0:
                raise ValueError(
                    f"tangent atom weights must be positive, {vec} has {weight}"
                )

    def __len__(self):
        """Number of atoms."""
        return len(self.atoms)

    def __repr__(self):
        """Readable form."""
        return f"TangentMeasure({list(self.atoms)})"

    @property
    def total_mass(self):
        """Sum of the weights."""
        return float(sum(w for _, w in self.atoms))

    def vectors(self):
        """The support vectors."""
        return [vec for vec, _ in self.atoms]

    def weights(self):
        """The weights as an array."""
        return np.array([w for _, w in self.atoms], dtype=float)


@dataclass(frozen=True)
class RngStream:
    """
    A reproducible random stream keyed by (master_seed, stream_index).

    Every call to generator() restarts the stream, so a given key yields the
    same draws no matter which thread or in which order it is consumed.
    """

    master_seed: int
    stream_index: int
    sub_key: Tuple[int, ...] = field(default=())

    def generator(self):
        """A fresh counter-based generator for this stream."""
        seq = np.random.SeedSequence(int(self.master_seed),
                                     spawn_key=(int(self.stream_index),) + self.sub_key)
        return np.random.Generator(np.random.Philox(seq))

    def child(self, index):
        """An independent sub-stream."""
        sub_key = self.sub_key + (int(index),)
        return RngStream(self.master_seed, self.stream_index, sub_key)


def _as_generator(rng):
    return rng.generator() if isinstance(rng, RngStream) else rng


def pair(space, base, delta, vec):
    """
    Pair a tangent measure with a tangent vector.

    Parameters
    ----------
        - space (SpaceModel): the model space.
        - base (Point): base point of the tangent cone.
        - delta (TangentMeasure): the measure.
        - vec (TangentVector): the vector.

    Returns
    -------
        - value: sum of weight * inner(Y, vec) over the atoms (Y, weight).
    """
    cone = space.tangent_cone(base)
    return float(sum(w * cone.inner(vec_y, vec) for vec_y, w in delta.atoms))


def scale_vectors(delta, radius):
    """Scale every support vector by radius >= 0, keeping the weights."""
    if radius < 0:
        raise ValueError(f"vector scale must be nonnegative, not {radius}")
    return TangentMeasure([(vec.scaled(radius), w) for vec, w in delta.atoms])


def scale_mass(delta, t):
    """Scale every weight by t >= 0, keeping the vectors."""
    if t < 0:
        raise ValueError(f"mass scale must be nonnegative, not {t}")
    if t == 0:
        return TangentMeasure()
    return TangentMeasure([(vec, t * w) for vec, w in delta.atoms])


def pushforward_log(space, base, measure, tie_break=False):
    """
    Push a measure forward to the tangent cone at base by the log map.

    Segments are discretized first; CutLocus from log propagates.
    """
    return TangentMeasure([(space.log(base, point, tie_break), w)
                           for point, w in measure.discretize(space).atoms])


def sample(space, measure, rng, n):
    """
    Draw n i.i.d. points from a normalized measure.

    Parameters
    ----------
        - space (SpaceModel): the space.
        - measure (Measure): the population measure.
        - rng (RngStream or numpy Generator): the random source.
        - n (int): number of draws.

    Returns
    -------
        - points: list of n canonical Points.
    """
    if len(measure) == 0 or measure.total_mass <= 0:
        raise ValueError("cannot sample from an empty measure")
    if n < 0:
        raise ValueError(f"sample size must be nonnegative, not {n}")
    gen = _as_generator(rng)
    masses = np.array(
        [w for _, w in measure.atoms] + [s.mass for s in measure.segments]
    )
    picks = gen.choice(len(masses), size=n, p=masses / masses.sum())
    atoms = [space.validate_point(point) for point, _ in measure.atoms]
    points = []
    for pick in picks:
        if pick < len(atoms):
            points.append(atoms[pick])
        else:
            seg = measure.segments[pick - len(atoms)]
            points.append(seg.point(space, gen.uniform(seg.lo, seg.hi)))
    return points


_ATOM_KEYS = {"stratum", "coords", "weight"}
_SEGMENT_KEYS = {"stratum", "interval", "density", "anchor"}
_DELTA_KEYS = {"chart", "coords", "radius", "weight"}


def _check_keys(entry, allowed, where):
    extra = sorted(set(entry) - allowed)
    if extra:
        raise ValueError(f"unknown key {extra[0]} in {where}")


def measure_from_spec(spec):
    """Build a Measure from its JSON description."""
    _check_keys(spec, {"atoms", "segments"}, "measure")
    atoms, segments = [], []
    for entry in spec.get("atoms", []):
        _check_keys(entry, _ATOM_KEYS, "measure atom")
        coords = tuple(float(c) for c in entry.get("coords", []))
        atoms.append((Point(entry["stratum"], coords), float(entry["weight"])))
    for entry in spec.get("segments", []):
        _check_keys(entry, _SEGMENT_KEYS, "measure segment")
        lo, hi = entry["interval"]
        anchor = tuple(float(c) for c in entry.get("anchor", []))
        density = float(entry["density"])
        segment = Segment(entry["stratum"], float(lo), float(hi), density, anchor)
        segments.append(segment)
    return Measure(atoms, segments)


def tangent_measure_from_spec(spec):
    """Build a TangentMeasure from its JSON description."""
    _check_keys(spec, {"atoms"}, "delta")
    atoms = []
    for entry in spec.get("atoms", []):
        _check_keys(entry, _DELTA_KEYS, "delta atom")
        vec = tangent(entry.get("chart", "apex"), entry.get("coords", []),
                      float(entry.get("radius", 0.0)))
        atoms.append((vec, float(entry["weight"])))
    return TangentMeasure(atoms)


def vector_to_spec(vec):
    """JSON description of a tangent vector."""
    return {"chart": vec.chart, "coords": list(vec.coords), "radius": vec.radius}
