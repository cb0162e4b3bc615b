# -*- coding: utf-8 -*-
"""Tangential collapse maps, sections, distortion and Gaussian masses."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import nnls

from stratmean.escape import escape_vector
from stratmean.frechet import ConeRepr, mean_context
from stratmean.measures import RngStream, TangentMeasure, pushforward_log
from stratmean.utility_funcs import orthonormal_basis, wrap_offset

SECTION_TOL = 1e-10
EIGEN_CLAMP = -1e-12
PIVOT_KEY = 1
LIPSCHITZ_BOUND = 1.0 + 1e-9
AXIOM_NAMES = {1: "mean", 2: "isometry", 3: "inner", 4: "homogeneity", 5: "continuity"}


class AxiomViolation(ValueError):
    """A collapse map fails one of its five axioms."""

    def __init__(self, axiom, residual):
        """Record the failing axiom id and its residual."""
        self.axiom = axiom
        self.residual = residual
        super().__init__(
            f"collapse axiom {axiom} ({AXIOM_NAMES[axiom]}) fails "
            f"with residual {residual:.3g}"
        )


class Infeasible(ValueError):
    """No nonnegative combination of generators maps to the requested vector."""


class CollapseUnavailable(ValueError):
    """No built-in collapse map is isometric on this fluctuating cone."""


@dataclass(frozen=True, eq=False)
class CollapseMap:
    """
    A homogeneous continuous map from a tangent cone into R^dim.

    Attributes
    ----------
        - cone: the tangent cone it is defined on.
        - variant (str): one of identity, page_fold, spine, sector_fold,
            inclusion, zero.
        - dim (int): target dimension.
        - page (int): distinguished page of a page_fold.
        - base_angle (float): direction sent to (1, 0) by a sector_fold.
    """

    cone: object
    variant: str
    dim: int
    page: int = 0
    base_angle: float = 0.0

    def __call__(self, vec):
        """Image of a tangent vector."""
        if vec.is_apex or self.variant == "zero":
            return np.zeros(self.dim)
        if self.variant == "identity":
            return self.cone.vector(vec)
        if self.variant in ("page_fold", "spine"):
            page, normal, spine = self.cone.parts(vec)
            if self.variant == "spine":
                return spine
            sign = 1.0 if page in (0, self.page) else -1.0
            return np.concatenate([[sign * normal], spine])
        radius, phi = self.cone.polar(vec)
        if self.variant == "inclusion":
            return radius * np.array([np.sin(phi), -np.cos(phi)])
        offset = float(wrap_offset(phi, self.base_angle, self.cone.total_angle,
                                   self.cone.periodic))
        if abs(offset) > np.pi:
            return np.array([-radius, 0.0])
        return radius * np.array([np.cos(offset), np.sin(offset)])

    def describe(self):
        """JSON-ready summary."""
        return {"variant": self.variant, "dim": self.dim, "page": self.page,
                "base_angle": self.base_angle}


def collapse(collapse_map, vec):
    """L(V)."""
    return collapse_map(vec)


def collapse_measure_vector(collapse_map, delta):
    """L(delta): the weighted sum of the images of the support."""
    out = np.zeros(collapse_map.dim)
    for vec, weight in delta.atoms:
        out += weight * collapse_map(vec)
    return out


def build_collapse(space, measure, ctx=None, distinguished=None):
    """
    Choose the collapse map for the tangent cone at the mean.

    Parameters
    ----------
        - distinguished (int): force the page sent to the positive axis of a
            page fold.

    Raises
    ------
        - CollapseUnavailable when the fluctuating cone meets three or more
            pages, or is a union of several separate arcs.
    """
    ctx = mean_context(space, measure) if ctx is None else ctx
    cone, fluct = ctx.cone, ctx.fluctuating
    if cone.kind == "linear":
        return CollapseMap(cone, "identity", cone.dim)
    if cone.kind == "book" and distinguished is not None:
        return CollapseMap(
            cone, "page_fold", 1 + cone.spine_dim, page=int(distinguished)
        )
    if fluct.is_apex_only():
        return CollapseMap(cone, "zero", 0)
    if cone.kind == "book":
        if not fluct.pages:
            return CollapseMap(cone, "spine", cone.spine_dim)
        if len(fluct.pages) > 2:
            raise CollapseUnavailable(
                f"the fluctuating cone meets pages {list(fluct.pages)}, "
                "no fold is isometric"
            )
        return CollapseMap(cone, "page_fold", 1 + cone.spine_dim, page=fluct.pages[0])
    if not cone.periodic:
        return CollapseMap(cone, "inclusion", 2)
    if len(fluct.intervals) > 1:
        raise CollapseUnavailable("the fluctuating cone has several separate arcs")
    lo, hi = fluct.intervals[0]
    return CollapseMap(cone, "sector_fold", 2,
                       base_angle=float(np.mod(0.5 * (lo + hi), cone.total_angle)))


def _random_vectors(region, gen, count, scale):
    if region.is_apex_only():
        return []
    return [region.sample_direction(gen).scaled(scale * gen.uniform(0.0, 2.0))
            for _ in range(count)]


def verify_collapse_axioms(
    collapse_map, space, measure, ctx=None, budget=1000, rng=None, raise_on_failure=True
):
    """
    Check the five collapse axioms numerically.

    Parameters
    ----------
        - collapse_map (CollapseMap): the map under test.
        - space, measure: the measure and its space.
        - ctx (MeanContext): built when None.
        - budget (int): probe pairs per axiom.
        - rng (RngStream or Generator): probe randomness.
        - raise_on_failure (bool): raise AxiomViolation for the first failing
            axiom instead of reporting it.

    Returns
    -------
        - report (dict): residual per axiom name and a "passed" dict keyed by
            axiom id.
    """
    ctx = mean_context(space, measure) if ctx is None else ctx
    rng = RngStream(0, 0) if rng is None else rng
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    cone = ctx.cone
    scale = max([1.0] + [vec.radius for vec in ctx.logged.vectors()])
    full = ConeRepr.full(cone)

    def gap(u, v):
        return float(np.linalg.norm(collapse_map(u) - collapse_map(v)))

    residuals = {
        1: float(np.linalg.norm(collapse_measure_vector(collapse_map, ctx.logged)))
    }
    pairs_u = _random_vectors(ctx.fluctuating, gen, budget, scale)
    pairs_v = _random_vectors(ctx.fluctuating, gen, budget, scale)
    residuals[2] = max(
        [abs(gap(u, v) - cone.distance(u, v)) for u, v in zip(pairs_u, pairs_v)],
        default=0.0,
    )
    hull_v = _random_vectors(ctx.hull, gen, max(1, budget // 10), scale)
    hull_v += [vec for vec in ctx.logged.vectors() if not vec.is_apex]
    residuals[3] = max(
        [
            abs(float(collapse_map(u) @ collapse_map(v)) - cone.inner(u, v))
            for u in pairs_u[: max(1, budget // 10)]
            for v in hull_v
        ],
        default=0.0,
    )
    probes = _random_vectors(full, gen, budget, scale)
    stretches = gen.uniform(0.0, 10.0, len(probes))
    residuals[4] = max(
        [
            float(np.linalg.norm(collapse_map(vec.scaled(t)) - t * collapse_map(vec)))
            for vec, t in zip(probes, stretches)
        ],
        default=0.0,
    )
    others = _random_vectors(full, gen, budget, scale)
    distances = [cone.distance(u, v) for u, v in zip(probes, others)]
    residuals[5] = max(
        [gap(u, v) / d for u, v, d in zip(probes, others, distances) if d > 1e-12],
        default=0.0,
    )

    limits = {
        1: 1e-9 * scale * ctx.mass,
        2: 1e-9 * scale,
        3: 1e-6 * scale**2,
        4: 1e-11 * scale,
        5: LIPSCHITZ_BOUND,
    }
    passed = {axiom: residuals[axiom] <= limits[axiom] for axiom in residuals}
    if raise_on_failure:
        for axiom in sorted(passed):
            if not passed[axiom]:
                raise AxiomViolation(axiom, residuals[axiom])
    report = {AXIOM_NAMES[axiom]: residuals[axiom] for axiom in residuals}
    report["passed"] = passed
    return report


@dataclass(frozen=True, eq=False)
class CollapsedModel:
    """
    The collapsed measure and everything the limit sampler needs.

    Attributes
    ----------
        - collapse_map (CollapseMap): L.
        - sigma (array): covariance of the collapsed measure about 0.
        - root (array): factor with root @ root.T = sigma (clamped).
        - hull_basis (array): orthonormal basis of the span of the collapsed
            support.
        - generators (list): (unit TangentVector, image) pairs of the
            distinct support directions.
        - ctx (MeanContext): the mean context it was built from.
    """

    collapse_map: CollapseMap
    sigma: np.ndarray
    root: np.ndarray
    hull_basis: np.ndarray
    generators: list
    ctx: object

    @property
    def dim(self):
        """Target dimension m."""
        return self.collapse_map.dim


@dataclass(frozen=True, eq=False)
class GaussianMassSample:
    """A Gaussian vector in R^m and a section of it."""

    linear_draw: np.ndarray
    mass: TangentMeasure

    @property
    def atom_count(self):
        """Number of atoms in the section."""
        return len(self.mass)


def collapsed_covariance(collapse_map, logged):
    """Sigma = sum w L(W) L(W)^T / total mass."""
    sigma = np.zeros((collapse_map.dim, collapse_map.dim))
    for vec, weight in logged.atoms:
        image = collapse_map(vec)
        sigma += weight * np.outer(image, image)
    return sigma / logged.total_mass


def _generators(collapse_map, logged):
    seen, out = [], []
    for vec in logged.vectors():
        if vec.is_apex:
            continue
        unit = vec.direction()
        row = collapse_map.cone.encode(unit)
        if any(np.allclose(row, other, atol=1e-12, rtol=0) for other in seen):
            continue
        seen.append(row)
        out.append((unit, collapse_map(unit)))
    return out


def collapsed_model(space, measure, ctx=None, collapse_map=None, verify=True, rng=None):
    """
    Build and verify the collapsed model of a measure.

    Parameters
    ----------
        - ctx (MeanContext): built when None.
        - collapse_map (CollapseMap): chosen by build_collapse when None.
        - verify (bool): run verify_collapse_axioms and raise on failure.

    Returns
    -------
        - model (CollapsedModel)
    """
    ctx = mean_context(space, measure) if ctx is None else ctx
    if collapse_map is None:
        collapse_map = build_collapse(space, measure, ctx)
    if verify:
        verify_collapse_axioms(collapse_map, space, measure, ctx, rng=rng)
    sigma = collapsed_covariance(collapse_map, ctx.logged)
    vals, vecs = np.linalg.eigh(sigma)
    if np.any(vals < EIGEN_CLAMP * max(1.0, float(np.max(vals, initial=0.0)))):
        raise ValueError(f"collapsed covariance is not positive semidefinite: {vals}")
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    generators = _generators(collapse_map, ctx.logged)
    hull_basis = orthonormal_basis([image for _, image in generators], collapse_map.dim)
    return CollapsedModel(collapse_map, sigma, root, hull_basis, generators, ctx)


def _prune(matrix, weights):
    """Carathéodory reduction to an affinely independent support."""
    support = np.flatnonzero(weights > 0)
    while support.size:
        kernel = null_space(matrix[:, support])
        if kernel.shape[1] == 0:
            break
        direction = kernel[:, 0]
        if not np.any(direction > 1e-14):
            direction = -direction
        positive = direction > 1e-14
        ratios = np.full(support.size, np.inf)
        ratios[positive] = weights[support][positive] / direction[positive]
        drop = int(np.argmin(ratios))
        if np.sum(ratios <= ratios[drop] * (1 + 1e-12)) > 1:
            warnings.warn("Section pivot is tied, dropping the lowest generator index.")
        weights[support] -= ratios[drop] * direction
        weights[support[drop]] = 0.0
        weights[weights < 1e-15] = 0.0
        support = np.flatnonzero(weights > 0)
    return weights


def section(model, vec, rng=None):
    """
    A nonnegative combination of support directions with the given image.

    Parameters
    ----------
        - model (CollapsedModel): the collapsed model.
        - vec (array): target vector in R^m, inside the collapsed hull.
        - rng (RngStream or Generator): randomize generator order and column
            scaling to reach a different feasible section.

    Returns
    -------
        - delta (TangentMeasure): at most m atoms with L(delta) = vec.

    Raises
    ------
        - Infeasible when no such combination exists.
    """
    vec = np.asarray(vec, dtype=float).reshape(model.dim)
    size = max(1.0, float(np.linalg.norm(vec)))
    if float(np.linalg.norm(vec)) <= 1e-15:
        return TangentMeasure()
    if not model.generators:
        raise Infeasible(f"{vec} is not in the collapsed hull, there are no generators")
    count = len(model.generators)
    order, scales = np.arange(count), np.ones(count)
    if rng is not None:
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        order = gen.permutation(count)
        scales = gen.uniform(0.5, 2.0, count)
    matrix = np.column_stack([model.generators[i][1] for i in order]) * scales
    weights, residual = nnls(matrix, vec)
    if residual > SECTION_TOL * size:
        raise Infeasible(
            f"{vec} lies outside the collapsed hull (residual {residual:.3g})"
        )
    weights = _prune(matrix, weights)
    atoms = [(model.generators[order[i]][0], weights[i] * scales[i])
             for i in np.flatnonzero(weights > 0)]
    delta = TangentMeasure(atoms)
    image = collapse_measure_vector(model.collapse_map, delta)
    gap = float(np.linalg.norm(image - vec))
    if gap > SECTION_TOL * size:
        raise Infeasible(f"section of {vec} misses by {gap:.3g}")
    return delta


def distortion(model, vec, rng=None):
    """H(v): the escape vector of a section of v."""
    ctx = model.ctx
    return escape_vector(ctx.space, ctx.measure, ctx, section(model, vec, rng)).vector


def gaussian_vector(model, rng):
    """Draw N ~ N(0, Sigma) in R^m."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return model.root @ gen.standard_normal(model.dim)


def sample_gaussian_mass(model, rng):
    """Draw N ~ N(0, Sigma) and a section of it."""
    draw = gaussian_vector(model, rng)
    return GaussianMassSample(draw, section(model, draw))


def limit_draw(model, rng, path="section"):
    """
    One draw of the limit law.

    Parameters
    ----------
        - path (str): "section" applies the escape map to the Gaussian mass,
            "distortion" applies H to the raw Gaussian vector through a
            section with randomized pivots from rng.child(PIVOT_KEY). Both
            paths see the same Gaussian vector.
    """
    if path == "section":
        ctx = model.ctx
        mass = sample_gaussian_mass(model, rng).mass
        return escape_vector(ctx.space, ctx.measure, ctx, mass).vector
    if path == "distortion":
        draw = gaussian_vector(model, rng)
        pivots = rng.child(PIVOT_KEY) if isinstance(rng, RngStream) else rng
        return distortion(model, draw, pivots)
    raise ValueError(f"unknown limit path {path}, use 'section' or 'distortion'")


def limit_sample(model, rng, n, path="section"):
    """n limit draws, the i-th from the sub-stream rng.child(i)."""
    return [limit_draw(model, rng.child(i), path) for i in range(n)]


def tangent_field_cov(space, measure, mean, vec_v, vec_w):
    """
    Covariance of the Gaussian tangent field at (V, W).

    Returns
    -------
        - value: weighted covariance of inner(log x, V) and inner(log x, W).
    """
    logged = pushforward_log(space, mean, measure)
    cone = space.tangent_cone(mean)
    probs = logged.weights() / logged.total_mass
    first = np.array([cone.inner(y, vec_v) for y in logged.vectors()])
    second = np.array([cone.inner(y, vec_w) for y in logged.vectors()])
    return float(probs @ ((first - probs @ first) * (second - probs @ second)))


def dual_vector(model, points):
    """Section of the collapsed empirical tangent average of the points."""
    ctx = model.ctx
    images = [model.collapse_map(ctx.space.log(ctx.mean, x)) for x in points]
    return section(model, np.mean(images, axis=0) if images else np.zeros(model.dim))
