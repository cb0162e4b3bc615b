# -*- coding: utf-8 -*-
"""Fréchet functions, Fréchet means and the tangent subcones at a mean."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from stratmean.measures import Measure, RngStream, pushforward_log, sample
from stratmean.spaces import (
    TOL,
    CutLocus,
    Euclidean,
    OpenBook,
    Point,
    PlanarCone,
    QuadrantComplement,
    SphereCap,
)
from stratmean.utility_funcs import (
    arcs_argmax,
    close_arcs,
    cosine_pieces,
    orthonormal_basis,
    piece_superlevel,
    project,
    richardson_second_difference,
    split_arcs,
    subspace_intersection,
    wrap_offset,
)

SOLVER_TOL = 1e-10
SPHERE_TOL = 1e-9
ESCAPE_TOL = 1e-8


class NonUniqueMean(ValueError):
    """The Fréchet function has several global minimizers."""


class NonPositiveLambda(ValueError):
    """The second order coefficient is not positive in some direction."""


@dataclass
class FrechetReport:
    """
    Outcome of a Fréchet mean solve, optionally with measure diagnostics.

    Attributes
    ----------
        - mean (Point): the minimizer, None when it is not unique.
        - value (float): the Fréchet function at the mean.
        - iterations (int): solver iterations (0 for closed forms).
        - gradient_residual (float): positive part of the steepest descent
            slope at the mean.
        - localized (dict): named boolean flags and numeric evidence.
        - amenable_probe (float): max |lambda_w| over probed directions.
        - immured (bool): confinement of finite-sample means to the hull.
    """

    mean: object = None
    value: float = float("nan")
    iterations: int = 0
    gradient_residual: float = float("nan")
    localized: dict = field(default_factory=dict)
    amenable_probe: float = None
    immured: bool = None

    @property
    def is_localized(self):
        """Whether every boolean localization flag holds."""
        return self.mean is not None and all(
            val for val in self.localized.values() if isinstance(val, bool)
        )

    def as_dict(self):
        """JSON-ready form of the report."""
        mean = None
        if self.mean is not None:
            mean = {"stratum": self.mean.stratum, "coords": list(self.mean.coords)}
        return {
            "mean": mean,
            "value": self.value,
            "iterations": self.iterations,
            "gradient_residual": self.gradient_residual,
            "localized": dict(self.localized),
            "is_localized": self.is_localized,
            "amenable_probe": self.amenable_probe,
            "immured": self.immured,
        }


def _atoms(space, measure):
    atoms = measure.discretize(space).atoms
    if not atoms:
        raise ValueError("the Fréchet function of an empty measure is undefined")
    return atoms


def frechet_value(space, measure, point):
    """Half the weighted sum of squared distances from point to the measure."""
    atoms = _atoms(space, measure)
    return 0.5 * float(sum(w * space.distance(point, x) ** 2 for x, w in atoms))


def _euclidean_mean(space, atoms):
    weights = np.array([w for _, w in atoms])
    coords = np.array([x.coords for x, _ in atoms], dtype=float)
    return space.validate_point(Point("R", tuple(weights @ coords / weights.sum())))


def _book_mean(space, atoms):
    """Fold each page against the others and average; the spine part is linear."""
    weights = np.array([w for _, w in atoms])
    mass = weights.sum()
    parts = [space.split_point(x) for x, _ in atoms]
    pages = np.array([page for page, _, _ in parts])
    normals = np.array([u for _, u, _ in parts])
    spine = np.array([v for _, _, v in parts]).reshape(len(atoms), space.p)
    spine_mean = weights @ spine / mass
    total = weights @ normals
    best_page, best_s = 0, 0.0
    for page in range(1, space.k + 1):
        on_page = weights[pages == page] @ normals[pages == page]
        s = (2 * on_page - total) / mass
        if s > best_s:
            best_page, best_s = page, s
    return space.make_point(best_page, best_s, spine_mean)


def _sector_profile(space, atoms):
    """Cosine pieces of g(phi) = sum w r cos(min(sep, pi)) and the scale."""
    polars = np.array([space.polar(x) for x, _ in atoms], dtype=float).reshape(-1, 2)
    weights = np.array([w for _, w in atoms])
    live = polars[:, 0] > 0
    pieces = cosine_pieces(polars[live, 1], weights[live] * polars[live, 0],
                           space.total_angle, space.periodic)
    scale = float(np.sqrt(weights.sum() * (weights @ polars[:, 0] ** 2)))
    return pieces, scale


def _distinct_angles(angles, total_angle, periodic, tol=1e-9):
    distinct = []
    for phi in angles:
        offsets = [wrap_offset(phi, psi, total_angle, periodic) for psi in distinct]
        if all(abs(offset) > tol for offset in offsets):
            distinct.append(phi)
    return distinct


def _sector_mean(space, atoms, tol):
    """Maximize g over the chart; the radius is g+ / mass."""
    pieces, scale = _sector_profile(space, atoms)
    mass = sum(w for _, w in atoms)
    candidates = arcs_argmax(pieces, [(0.0, space.total_angle)], space.total_angle)
    best_phi, best = candidates[0]
    if best <= tol * max(scale, TOL):
        return space.origin()
    tied = [phi for phi, val in candidates if val >= best - tol * scale]
    if len(_distinct_angles(tied, space.total_angle, space.periodic)) > 1:
        raise NonUniqueMean(
            f"the Fréchet function on {space.kind} has tied minimizers"
        )
    return space.make_point(best / mass, best_phi)


def _sphere_descent(coords, weights, start, tol, max_iter=500):
    """Riemannian gradient descent with Armijo backtracking."""
    mass = weights.sum()

    def value(x):
        dist = np.arctan2(np.linalg.norm(np.cross(coords, x), axis=1), coords @ x)
        return 0.5 * float(weights @ dist ** 2)

    def step_direction(x):
        dots = coords @ x
        perp = coords - dots[:, None] * x
        norms = np.linalg.norm(perp, axis=1)
        dist = np.arctan2(norms, dots)
        factor = np.divide(dist, norms, out=np.zeros_like(norms), where=norms > 1e-15)
        return (weights * factor) @ perp / mass

    x = start / np.linalg.norm(start)
    for iteration in range(max_iter):
        grad = step_direction(x)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return x, iteration
        current, step = value(x), 1.0
        while True:
            trial = np.cos(step * gnorm) * x + np.sin(step * gnorm) * grad / gnorm
            if value(trial) <= current - 1e-4 * step * mass * gnorm ** 2:
                break
            step /= 2
            if step < 1e-12:
                return x, iteration
        x = trial / np.linalg.norm(trial)
    return x, max_iter


def _sphere_mean(space, atoms, tol):
    coords = np.array([space.validate_point(x).coords for x, _ in atoms])
    weights = np.array([w for _, w in atoms])
    extrinsic = weights @ coords
    north = np.array([0.0, 0.0, 1.0])
    starts = [extrinsic if np.linalg.norm(extrinsic) > 1e-12 else north]
    starts += [np.asarray(space.from_polar(0.3, lon).coords)
               for lon in (0.0, np.pi / 2, np.pi, 1.5 * np.pi)]
    found = []
    for start in starts:
        x, iterations = _sphere_descent(coords, weights, start, tol)
        point = space.validate_point(Point("S2", tuple(x)))
        found.append((frechet_value(space, Measure(atoms), point), point, iterations))
    found.sort(key=lambda item: item[0])
    best_value, best, iterations = found[0]
    for val, point, _ in found[1:]:
        if (val - best_value <= 1e-9 * max(1.0, best_value)
                and space.distance(point, best) > 1e-6):
            raise NonUniqueMean(
                f"distinct minimizers {best} and {point} with equal value"
            )
    return best, iterations


def frechet_mean(space, measure, tol=None):
    """
    Compute the Fréchet mean of a measure.

    Parameters
    ----------
        - space (SpaceModel): the model space.
        - measure (Measure): the population or empirical measure.
        - tol (float): solver tolerance, default 1e-10 (1e-9 on SphereCap).

    Returns
    -------
        - report (FrechetReport): mean, value, iterations, gradient residual.

    Raises
    ------
        - NonUniqueMean when distinct minimizers tie.
    """
    atoms = _atoms(space, measure)
    iterations = 0
    if isinstance(space, Euclidean):
        mean = _euclidean_mean(space, atoms)
    elif isinstance(space, OpenBook):
        mean = _book_mean(space, atoms)
    elif isinstance(space, (PlanarCone, QuadrantComplement)):
        mean = _sector_mean(space, atoms, SOLVER_TOL if tol is None else tol)
    elif isinstance(space, SphereCap):
        tol = SPHERE_TOL if tol is None else tol
        mean, iterations = _sphere_mean(space, atoms, tol)
    else:
        raise ValueError(f"no Fréchet mean solver for {space!r}")
    discrete = Measure(atoms)
    residual, _, _ = max_pairing(space.tangent_cone(mean),
                                 pushforward_log(space, mean, discrete))
    return FrechetReport(mean=mean, value=frechet_value(space, discrete, mean),
                         iterations=iterations, gradient_residual=residual)


def sturm_mean(space, measure, steps, rng=None):
    """
    Inductive mean: walk the fraction w / cumulative weight toward each atom.

    Without rng the atoms are visited in order, cycling, and the walk stops
    at the end of a full cycle (steps rounds up). With rng (RngStream or
    Generator) atoms are drawn i.i.d. by weight and the k-th step walks 1/k.
    """
    atoms = _atoms(space, measure)
    if rng is None:
        cycles = max(1, int(np.ceil(steps / len(atoms))))
        base, cumulative = atoms[0]
        for cycle in range(cycles):
            for index, (point, weight) in enumerate(atoms):
                if cycle == 0 and index == 0:
                    continue
                cumulative += weight
                base = space.geodesic(base, point, tie_break=True)(weight / cumulative)
        return base
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    weights = np.array([w for _, w in atoms])
    picks = gen.choice(len(atoms), size=max(steps, 1), p=weights / weights.sum())
    base = atoms[picks[0]][0]
    for count, pick in enumerate(picks[1:], start=2):
        base = space.geodesic(base, atoms[pick][0], tie_break=True)(1.0 / count)
    return base


def _in_arcs(phi, intervals, total_angle, periodic, tol):
    shifts = (-total_angle, 0.0, total_angle) if periodic else (0.0,)
    return any(lo - tol <= phi + shift <= hi + tol
               for lo, hi in intervals for shift in shifts)


def _intersect_arcs(first, second, total_angle, periodic):
    shifts = (-total_angle, 0.0, total_angle) if periodic else (0.0,)
    out = []
    for a, b in first:
        for c, d in second:
            for shift in shifts:
                lo, hi = max(a, c + shift), min(b, d + shift)
                if lo <= hi + 1e-12:
                    hi = max(lo, hi)
                    if periodic and lo >= total_angle:
                        lo, hi = lo - total_angle, hi - total_angle
                    out.append((lo, hi))
    return tuple(close_arcs(split_arcs(out, total_angle), total_angle, periodic))


@dataclass(eq=False)
class ConeRepr:
    """
    A closed subcone of a tangent cone (always containing the apex).

    Attributes
    ----------
        - cone: the ambient LinearCone, BookCone or SectorCone.
        - basis (array): dim x k orthonormal basis of a linear subcone.
        - pages (tuple): page indices of a book subcone.
        - spine_basis (array): orthonormal basis of the spine directions a
            book subcone allows (on its pages and on the spine).
        - intervals (tuple): closed arcs of a sector subcone.
    """

    cone: object
    basis: np.ndarray = None
    pages: tuple = ()
    spine_basis: np.ndarray = None
    intervals: tuple = ()

    @property
    def kind(self):
        """Kind of the ambient cone."""
        return self.cone.kind

    @classmethod
    def full(cls, cone):
        """The whole tangent cone."""
        if cone.kind == "linear":
            return cls(cone, basis=np.eye(cone.dim))
        if cone.kind == "book":
            return cls(cone, pages=tuple(range(1, cone.pages + 1)),
                       spine_basis=np.eye(cone.spine_dim))
        return cls(cone, intervals=((0.0, cone.total_angle),))

    @classmethod
    def apex(cls, cone):
        """The cone consisting of the apex only."""
        if cone.kind == "linear":
            return cls(cone, basis=np.zeros((cone.dim, 0)))
        if cone.kind == "book":
            return cls(cone, spine_basis=np.zeros((cone.spine_dim, 0)))
        return cls(cone)

    def is_apex_only(self):
        """Whether the subcone is just the apex."""
        if self.kind == "linear":
            return self.basis.shape[1] == 0
        if self.kind == "book":
            return not self.pages and self.spine_basis.shape[1] == 0
        return not self.intervals

    def contains(self, vec, tol=1e-9):
        """Membership of a tangent vector, up to tol in direction."""
        if vec.is_apex:
            return True
        unit = vec.direction()
        if self.kind == "linear":
            arr = self.cone.vector(unit)
            return float(np.linalg.norm(arr - project(self.basis, arr))) <= tol
        if self.kind == "book":
            page, _, spine = self.cone.parts(unit)
            off_spine = spine - project(self.spine_basis, spine)
            spine_ok = float(np.linalg.norm(off_spine)) <= tol
            return spine_ok and (page == 0 or page in self.pages)
        return _in_arcs(self.cone.polar(unit)[1], self.intervals,
                        self.cone.total_angle, self.cone.periodic, tol)

    def intersect(self, other):
        """Intersection with another subcone of the same tangent cone."""
        if self.kind == "linear":
            basis = subspace_intersection(self.basis, other.basis)
            return ConeRepr(self.cone, basis=basis)
        if self.kind == "book":
            pages = tuple(sorted(set(self.pages) & set(other.pages)))
            spine = subspace_intersection(self.spine_basis, other.spine_basis)
            return ConeRepr(self.cone, pages=pages, spine_basis=spine)
        return ConeRepr(self.cone, intervals=_intersect_arcs(
            self.intervals, other.intervals, self.cone.total_angle, self.cone.periodic))

    def sample_direction(self, rng):
        """A random unit direction of the subcone."""
        if self.is_apex_only():
            raise ValueError("the subcone has no directions besides the apex")
        if self.kind == "linear":
            coeffs = rng.standard_normal(self.basis.shape[1])
            return self.cone.from_vector(self.basis @ coeffs).direction()
        if self.kind == "book":
            spine_dim = self.spine_basis.shape[1]
            options = list(self.pages) + ([0] if spine_dim > 0 else [])
            page = options[int(rng.integers(len(options)))]
            spine = self.spine_basis @ rng.standard_normal(spine_dim)
            normal = abs(rng.standard_normal()) if page else 0.0
            vec = self.cone.from_parts(page, normal, spine)
            return vec.direction()
        lengths = np.array([hi - lo for lo, hi in self.intervals])
        probs = lengths / lengths.sum() if lengths.sum() > 0 else None
        lo, hi = self.intervals[int(rng.choice(len(self.intervals), p=probs))]
        return self.cone.from_polar(1.0, rng.uniform(lo, hi) if hi > lo else lo)

    def describe(self):
        """JSON-ready summary."""
        if self.kind == "linear":
            return {"kind": "linear", "dimension": int(self.basis.shape[1])}
        if self.kind == "book":
            return {"kind": "book", "pages": list(self.pages),
                    "spine_dimension": int(self.spine_basis.shape[1])}
        return {"kind": "sector", "intervals": [list(arc) for arc in self.intervals]}


def _book_terms(cone, delta):
    """Per-page signed normal resultants alpha_g and the spine resultant beta."""
    alpha = np.zeros(cone.pages + 1)
    beta = np.zeros(cone.spine_dim)
    for vec, weight in delta.atoms:
        page, normal, spine = cone.parts(vec)
        alpha -= weight * normal
        if page:
            alpha[page] += 2 * weight * normal
        beta += weight * spine
    return alpha, beta


def _sector_terms(cone, delta):
    rows = [cone.polar(vec) + (w,) for vec, w in delta.atoms if not vec.is_apex]
    rows = np.array(rows, dtype=float).reshape(-1, 3)
    amplitudes = rows[:, 2] * rows[:, 0]
    return cosine_pieces(rows[:, 1], amplitudes, cone.total_angle, cone.periodic)


def resultant(cone, delta):
    """Sum of weight * vector on a linear cone."""
    out = np.zeros(cone.dim)
    for vec, weight in delta.atoms:
        out += weight * cone.vector(vec)
    return out


def max_pairing(cone, delta, region=None):
    """
    Maximize the pairing of a tangent measure over unit directions.

    Parameters
    ----------
        - cone: the tangent cone model.
        - delta (TangentMeasure): the tangent measure.
        - region (ConeRepr): closed subcone to search, default the whole cone.

    Returns
    -------
        - value (float): positive part of the supremum of pair(delta, theta).
        - direction (TangentVector): a maximizing unit direction, None when
            value is 0. Ties go to the lowest chart, then the smallest angle.
        - tied (bool): whether distinct directions attain the maximum.
    """
    region = ConeRepr.full(cone) if region is None else region
    if region.is_apex_only() or len(delta) == 0:
        return 0.0, None, False
    if cone.kind == "linear":
        proj = project(region.basis, resultant(cone, delta))
        norm = float(np.linalg.norm(proj))
        if norm <= TOL * max(1.0, delta.total_mass):
            return 0.0, None, False
        return norm, cone.from_vector(proj / norm), False
    if cone.kind == "book":
        alpha, beta = _book_terms(cone, delta)
        beta = project(region.spine_basis, beta)
        spine_norm = float(np.linalg.norm(beta))
        candidates = [(spine_norm, 0, 0.0)] if region.spine_basis.shape[1] else []
        for page in region.pages:
            normal = max(alpha[page], 0.0)
            candidates.append((float(np.hypot(normal, spine_norm)), page, normal))
        best = max(val for val, _, _ in candidates)
        if best <= TOL * max(1.0, delta.total_mass):
            return 0.0, None, False
        winners = [(page, normal) for val, page, normal in candidates
                   if val >= best - 1e-12 * best and normal > 0]
        page, normal = winners[0] if winners else (0, 0.0)
        return best, cone.from_parts(page, normal, beta).direction(), len(winners) > 1
    pieces = _sector_terms(cone, delta)
    candidates = arcs_argmax(pieces, region.intervals, cone.total_angle)
    best_phi, best = candidates[0]
    if best <= TOL * max(1.0, delta.total_mass):
        return 0.0, None, False
    tied = [phi for phi, val in candidates if val >= best - 1e-12 * best]
    distinct = _distinct_angles(tied, cone.total_angle, cone.periodic)
    return best, cone.from_polar(1.0, best_phi), len(distinct) > 1


def _escape_subcone(cone, logged, tau):
    """Directions along which the directional derivative is at most tau."""
    if cone.kind == "linear":
        grad = resultant(cone, logged)
        if np.linalg.norm(grad) <= tau:
            return ConeRepr.full(cone)
        return ConeRepr(cone, basis=null_space(grad[None, :]))
    if cone.kind == "book":
        alpha, beta = _book_terms(cone, logged)
        pages = tuple(page for page in range(1, cone.pages + 1) if -alpha[page] <= tau)
        if np.linalg.norm(beta) <= tau:
            spine_basis = np.eye(cone.spine_dim)
        else:
            spine_basis = null_space(beta[None, :])
        return ConeRepr(cone, pages=pages, spine_basis=spine_basis)
    arcs = []
    for piece in _sector_terms(cone, logged):
        arcs.extend(piece_superlevel(piece, -tau))
    arcs = close_arcs(arcs, cone.total_angle, cone.periodic)
    return ConeRepr(cone, intervals=tuple(arcs))


def _hull_subcone(cone, logged):
    """Smallest geodesically convex cone holding the logged support."""
    live = [vec for vec in logged.vectors() if not vec.is_apex]
    if cone.kind == "linear":
        basis = orthonormal_basis([cone.vector(v) for v in live], cone.dim)
        return ConeRepr(cone, basis=basis)
    if cone.kind == "book":
        parts = [cone.parts(vec) for vec in live]
        pages = tuple(sorted({page for page, a, _ in parts if page and a > 0}))
        spine = orthonormal_basis([s for _, _, s in parts], cone.spine_dim)
        return ConeRepr(cone, pages=pages, spine_basis=spine)
    total, periodic = cone.total_angle, cone.periodic
    angles = sorted(_distinct_angles(sorted(cone.polar(v)[1] for v in live),
                                     total, periodic, tol=1e-12))
    if not angles:
        return ConeRepr.apex(cone)
    chains = [[angles[0], angles[0]]]
    for phi in angles[1:]:
        if phi - chains[-1][1] < np.pi - 1e-12:
            chains[-1][1] = phi
        else:
            chains.append([phi, phi])
    if periodic and angles[0] + total - angles[-1] < np.pi - 1e-12:
        if len(chains) == 1:
            return ConeRepr.full(cone)
        first = chains.pop(0)
        chains[-1][1] = first[1] + total
    return ConeRepr(cone, intervals=tuple((lo, hi) for lo, hi in chains))


@dataclass(eq=False)
class MeanContext:
    """
    Everything escape and collapse need about a measure at its mean.

    Attributes
    ----------
        - space, measure: the space and the discretized measure.
        - mean (Point), report (FrechetReport): the solved mean.
        - cone: the tangent cone at the mean.
        - logged (TangentMeasure): the measure pushed forward by log.
        - mass (float): total mass.
        - tau (float): escape tolerance scaled by the root second moment.
        - lambda_matrix (array): quadratic form of the second order
            coefficient on a linear cone, None on singular cones.
        - flat (bool): whether the second order coefficient is exactly
            half the mass in every direction.
        - escape, hull, fluctuating (ConeRepr): E, the hull and their
            intersection.
    """

    space: object
    measure: Measure
    mean: object
    report: FrechetReport
    cone: object
    logged: object
    mass: float
    tau: float
    lambda_matrix: np.ndarray
    flat: bool
    escape: ConeRepr
    hull: ConeRepr
    fluctuating: ConeRepr

    def lambda_value(self, theta):
        """Second order coefficient in the direction of theta."""
        if self.flat:
            value = 0.5 * self.mass
        else:
            arr = self.cone.vector(theta.direction())
            value = float(arr @ self.lambda_matrix @ arr)
        if value <= 0:
            raise NonPositiveLambda(f"second order coefficient {value} along {theta}")
        return value


def _lambda_matrix(space, measure, mean, cone):
    """A = 1/2 sum w [kappa I + (1 - kappa) u u^T]; flat when every kappa is 1."""
    matrix = np.zeros((cone.dim, cone.dim))
    flat = True
    for point, weight in measure.atoms:
        direction, kappa = space.lambda_terms(mean, point)
        flat = flat and kappa == 1.0
        matrix += 0.5 * weight * (kappa * np.eye(cone.dim)
                                  + (1 - kappa) * np.outer(direction, direction))
    return matrix, flat


def mean_context(space, measure, escape_tol=ESCAPE_TOL, solver_tol=None, mean=None):
    """
    Solve the mean and assemble the tangent data at it.

    Parameters
    ----------
        - space (SpaceModel): the model space.
        - measure (Measure): the population measure.
        - escape_tol (float): factor of the root second moment giving tau.
        - solver_tol (float): passed to frechet_mean.
        - mean (Point): skip the solve and use this mean.

    Returns
    -------
        - ctx (MeanContext)
    """
    discrete = measure.discretize(space)
    if mean is None:
        report = frechet_mean(space, discrete, solver_tol)
    else:
        mean = space.validate_point(mean)
        report = FrechetReport(mean=mean, value=frechet_value(space, discrete, mean))
    mean = report.mean
    cone = space.tangent_cone(mean)
    logged = pushforward_log(space, mean, discrete)
    mass = discrete.total_mass
    second = float(sum(w * vec.radius ** 2 for vec, w in logged.atoms))
    tau = escape_tol * float(np.sqrt(mass * second))
    matrix, flat = (None, True)
    if cone.kind == "linear":
        matrix, flat = _lambda_matrix(space, discrete, mean, cone)
    escape = _escape_subcone(cone, logged, tau)
    hull = _hull_subcone(cone, logged)
    return MeanContext(
        space=space,
        measure=discrete,
        mean=mean,
        report=report,
        cone=cone,
        logged=logged,
        mass=mass,
        tau=tau,
        lambda_matrix=matrix,
        flat=flat,
        escape=escape,
        hull=hull,
        fluctuating=escape.intersect(hull),
    )


def directional_derivative(space, measure, mean, theta):
    """Directional derivative of the Fréchet function at mean along theta."""
    return -tangent_mean(space, measure, mean, theta)


def tangent_mean(space, measure, mean, vec):
    """m(measure, vec): the weighted sum of inner(log x, vec)."""
    cone = space.tangent_cone(mean)
    return float(sum(w * cone.inner(y, vec)
                     for y, w in pushforward_log(space, mean, measure).atoms))


def empirical_tangent_field(space, measure, points, mean, vec):
    """Centred empirical tangent field: average of inner(log x_j, vec) minus m."""
    empirical = Measure.from_points(points)
    return (tangent_mean(space, empirical, mean, vec)
            - tangent_mean(space, measure, mean, vec) / measure.total_mass)


def lambda_coeff(space, measure, mean, theta, ctx=None):
    """
    Second order coefficient of the Fréchet function along theta.

    Exactly half the mass on flat configurations, the quadratic form
    theta^T A theta on smooth curved ones.

    Raises
    ------
        - NonPositiveLambda when the coefficient is not positive.
    """
    ctx = mean_context(space, measure, mean=mean) if ctx is None else ctx
    return ctx.lambda_value(theta)


def lambda_numeric(space, measure, mean, theta, step=1e-3):
    """Richardson-extrapolated second difference of F along exp(t theta)."""
    unit = theta.direction()
    discrete = measure.discretize(space)

    def along(t):
        return frechet_value(space, discrete, space.exp(mean, unit.scaled(t)))

    return float(richardson_second_difference(along, step))


def frechet_hessian(space, measure, mean, step=1e-4):
    """
    Central difference Hessian of F in the normal chart at a smooth mean.

    Raises
    ------
        - ValueError when the tangent cone at mean is not linear.
    """
    cone = space.tangent_cone(mean)
    if cone.kind != "linear":
        raise ValueError(f"the Hessian needs a smooth mean, found a {cone.kind} cone")
    discrete = measure.discretize(space)
    eye = np.eye(cone.dim) * step

    def f(arr):
        return frechet_value(space, discrete, space.exp(mean, cone.from_vector(arr)))

    centre = f(np.zeros(cone.dim))
    hess = np.zeros((cone.dim, cone.dim))
    for i in range(cone.dim):
        hess[i, i] = (f(eye[i]) - 2 * centre + f(-eye[i])) / step ** 2
        for j in range(i):
            cross = (
                f(eye[i] + eye[j])
                - f(eye[i] - eye[j])
                - f(eye[j] - eye[i])
                + f(-eye[i] - eye[j])
            )
            hess[i, j] = hess[j, i] = cross / (4 * step**2)
    return hess


def escape_cone(space, measure, mean, tau=None):
    """Escape cone E at mean; tau defaults to the scaled escape tolerance."""
    ctx = mean_context(space, measure, mean=mean)
    if tau is None:
        return ctx.escape
    return _escape_subcone(ctx.cone, ctx.logged, tau)


def hull_cone(space, measure, mean):
    """Hull of the logged support at mean."""
    return mean_context(space, measure, mean=mean).hull


def fluctuating_cone(space, measure, mean, tau=None):
    """Closed fluctuating cone: the escape cone intersected with the hull."""
    hull = hull_cone(space, measure, mean)
    return escape_cone(space, measure, mean, tau).intersect(hull)


def _convexity_constant(space, ctx, gen, probes):
    """Smallest ratio (F(x) - F(mean)) / d(x, mean)^2 over a small ball."""
    scale = np.sqrt(sum(w * v.radius ** 2 for v, w in ctx.logged.atoms) / ctx.mass)
    radius = 0.1 * min(space.reach(ctx.mean), scale if scale > 0 else 1.0)
    constants = []
    for _ in range(probes):
        step = ctx.cone.random_direction(gen).scaled(radius * gen.uniform(0.1, 1.0))
        point = space.exp(ctx.mean, step)
        dist = space.distance(point, ctx.mean)
        if dist > 0:
            excess = frechet_value(space, ctx.measure, point) - ctx.report.value
            constants.append(excess / dist**2)
    return float(min(constants)) if constants else float("nan")


def _amenable_probe(space, ctx, gen, directions=32):
    """Max |kappa + (1 - kappa)(theta . u)^2| over atoms and probe directions."""
    if ctx.cone.kind != "linear":
        return 1.0
    largest = 0.0
    terms = [space.lambda_terms(ctx.mean, x) for x, _ in ctx.measure.atoms]
    for _ in range(directions):
        theta = ctx.cone.vector(ctx.cone.random_direction(gen))
        for direction, kappa in terms:
            curvature = kappa + (1 - kappa) * float(theta @ direction) ** 2
            largest = max(largest, abs(curvature))
    return largest


def _immured_probe(space, ctx, gen, draws=20, size=5):
    for _ in range(draws):
        points = sample(space, ctx.measure, gen, size)
        try:
            local = frechet_mean(space, Measure.from_points(points)).mean
            vec = space.log(ctx.mean, local)
        except ValueError:
            continue
        if not ctx.hull.contains(vec, tol=1e-6):
            return False
    return True


def diagnose_measure(space, measure, rng=None, probes=1000, escape_tol=ESCAPE_TOL,
                     solver_tol=None):
    """
    Check the hypotheses the limit theorems need.

    Parameters
    ----------
        - space (SpaceModel), measure (Measure): the input.
        - rng (RngStream or Generator): probe randomness, default stream 0.
        - probes (int): convexity probe count.

    Returns
    -------
        - report (FrechetReport): the mean solve plus flags. A NonUniqueMean
            is recorded as unique_mean = False rather than raised.
    """
    rng = RngStream(0, 0) if rng is None else rng
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    try:
        ctx = mean_context(space, measure, escape_tol, solver_tol)
    except NonUniqueMean:
        return FrechetReport(localized={"unique_mean": False})
    except CutLocus:
        report = frechet_mean(space, measure, solver_tol)
        report.localized = {"unique_mean": True, "log_unique": False}
        return report
    report = ctx.report
    constant = _convexity_constant(space, ctx, gen, probes)
    report.localized = {
        "unique_mean": True,
        "log_unique": True,
        "convex": bool(constant > 0),
        "convexity_constant": constant,
    }
    if isinstance(space, SphereCap):
        report.localized["support_in_cap"] = all(
            space.colatitude(x) <= space.support_radius + 1e-12
            for x, _ in ctx.measure.atoms
        )
    report.amenable_probe = _amenable_probe(space, ctx, gen)
    report.immured = True if space.cat0 else _immured_probe(space, ctx, gen)
    return report
