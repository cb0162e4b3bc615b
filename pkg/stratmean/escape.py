# -*- coding: utf-8 -*-
"""Escape vectors of tangent measures, their approximation schemes and oracle."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from stratmean.frechet import (
    frechet_mean,
    frechet_value,
    max_pairing,
    mean_context,
    resultant,
)
from stratmean.measures import Measure, TangentMeasure
from stratmean.spaces import APEX, NotExponentiable, TangentVector
from stratmean.utility_funcs import arcs_argmax, cosine_pieces, project


@dataclass(frozen=True)
class EscapeResult:
    """
    The escape vector of a tangent measure with its polar witness.

    Attributes
    ----------
        - vector (TangentVector): the escape vector.
        - direction (TangentVector): unit maximizer of pair / sqrt(Lambda),
            None when clipped.
        - objective (float): pair(delta, direction) / sqrt(Lambda(direction)).
        - clipped (bool): true when every pairing is nonpositive and the
            escape vector is the apex.
    """

    vector: TangentVector
    direction: TangentVector = None
    objective: float = 0.0
    clipped: bool = True


CLIPPED = EscapeResult(APEX)


def _linear_escape(ctx, delta, region):
    """Minimize X^T A X - <d, X> over the subspace spanned by the region."""
    basis = region.basis
    target = basis.T @ resultant(ctx.cone, delta)
    if not np.any(target):
        return CLIPPED
    if ctx.flat:
        coeffs = target / ctx.mass
    else:
        coeffs = 0.5 * np.linalg.solve(basis.T @ ctx.lambda_matrix @ basis, target)
    vector = ctx.cone.from_vector(basis @ coeffs)
    if vector.is_apex:
        return CLIPPED
    direction = vector.direction()
    lam = ctx.lambda_value(direction)
    pairing = float(target @ coeffs) / vector.radius
    return EscapeResult(vector, direction, pairing / np.sqrt(lam), False)


def escape_vector(space, measure, ctx, delta, cone=None):
    """
    Escape vector of a tangent measure at the mean.

    Parameters
    ----------
        - space (SpaceModel): the model space.
        - measure (Measure): the population measure.
        - ctx (MeanContext): its mean context, built when None.
        - delta (TangentMeasure): the tangent perturbation.
        - cone (ConeRepr): subcone to maximize over, default the escape cone.

    Returns
    -------
        - result (EscapeResult): radius <pair>+ / (2 Lambda) along the
            maximizer of pair / sqrt(Lambda).
    """
    ctx = mean_context(space, measure) if ctx is None else ctx
    region = ctx.escape if cone is None else cone
    if len(delta) == 0 or region.is_apex_only():
        return CLIPPED
    if ctx.cone.kind == "linear":
        return _linear_escape(ctx, delta, region)
    value, direction, tied = max_pairing(ctx.cone, delta, region)
    if direction is None:
        return CLIPPED
    if tied:
        warnings.warn(
            f"Escape maximizer is tied, keeping the witness on {direction.chart}."
        )
    lam = ctx.lambda_value(direction)
    return EscapeResult(direction.scaled(value / (2 * lam)), direction,
                        value / np.sqrt(lam), False)


def escape_of_point(space, measure, ctx, point):
    """Escape vector of the unit mass at log(mean, point)."""
    ctx = mean_context(space, measure) if ctx is None else ctx
    return escape_vector(space, measure, ctx,
                         TangentMeasure([(space.log(ctx.mean, point), 1.0)]))


def escape_fd_oracle(space, measure, delta, t, ctx=None, solver_tol=None):
    """
    Finite difference escape: (1/t) log of the mean of measure + t exp(delta).

    Vectors longer than a tenth of the reach at the mean are shrunk before
    exponentiating and the result is stretched back by the same factor.
    """
    ctx = mean_context(space, measure) if ctx is None else ctx
    if len(delta) == 0:
        return APEX
    longest = max(vec.radius for vec, _ in delta.atoms)
    reach = space.reach(ctx.mean)
    shrink = 1.0
    if longest > 0 and np.isfinite(reach) and longest > 0.1 * reach:
        shrink = 0.1 * reach / longest
    pushed = Measure(
        [(space.exp(ctx.mean, vec.scaled(shrink)), w) for vec, w in delta.atoms]
    )
    perturbed = frechet_mean(space, ctx.measure.add(pushed, t), solver_tol).mean
    return space.log(ctx.mean, perturbed).scaled(1.0 / (t * shrink))


def _book_scheme_b(ctx, delta, t, region):
    """Per-page closed form of the perturbed minimization over the region."""
    cone = ctx.cone
    base_alpha = np.zeros(cone.pages + 1)
    for vec, weight in ctx.logged.atoms:
        page, normal, _ = cone.parts(vec)
        base_alpha -= weight * normal
        if page:
            base_alpha[page] += 2 * weight * normal
    pert_alpha = np.zeros(cone.pages + 1)
    pert_beta = np.zeros(cone.spine_dim)
    for vec, weight in delta.atoms:
        page, normal, spine = cone.parts(vec)
        pert_alpha -= weight * normal
        if page:
            pert_alpha[page] += 2 * weight * normal
        pert_beta += weight * spine
    spine = project(region.spine_basis, t * pert_beta) / ctx.mass
    best_page, best_s = 0, 0.0
    for page in region.pages:
        s = max(0.0, (base_alpha[page] + t * pert_alpha[page]) / ctx.mass)
        if s > best_s:
            best_page, best_s = page, s
    return cone.from_parts(best_page, best_s, spine)


def _sector_scheme_b(ctx, delta, t, region):
    """Maximize g_mu + t g_delta over the region arcs; the radius is h+ / mass."""
    cone = ctx.cone
    rows = [cone.polar(vec) + (w,) for vec, w in ctx.logged.atoms if not vec.is_apex]
    rows += [cone.polar(vec) + (t * w,) for vec, w in delta.atoms if not vec.is_apex]
    rows = np.array(rows, dtype=float).reshape(-1, 3)
    pieces = cosine_pieces(
        rows[:, 1], rows[:, 2] * rows[:, 0], cone.total_angle, cone.periodic
    )
    candidates = arcs_argmax(pieces, region.intervals, cone.total_angle)
    if not candidates or candidates[0][1] <= 0:
        return APEX
    phi, value = candidates[0]
    return cone.from_polar(value / ctx.mass, phi)


def _linear_scheme_b(space, ctx, delta, t, region):
    """Scaled minimization of F(exp(t X)) - t^2 <delta, X> over the region."""
    cone, basis = ctx.cone, region.basis
    drift = resultant(cone, delta)
    if ctx.flat:
        shifted = t * drift + resultant(cone, ctx.logged)
        return cone.from_vector(project(basis, shifted) / ctx.mass)
    if basis.shape[1] == 0:
        return APEX
    start = escape_vector(space, ctx.measure, ctx, delta, region).vector
    centre = ctx.report.value

    def objective(coeffs):
        arr = basis @ coeffs
        try:
            point = space.exp(ctx.mean, cone.from_vector(t * arr))
        except NotExponentiable:
            return np.inf
        excess = frechet_value(space, ctx.measure, point) - centre
        return excess / t**2 - drift @ arr

    fit = minimize(
        objective,
        basis.T @ cone.vector(start),
        method="BFGS",
        jac="3-point",
        options={"gtol": 1e-10, "finite_diff_rel_step": 1e-3},
    )
    return cone.from_vector(t * (basis @ fit.x))


def escape_approx(space, measure, delta, t, scheme="c", ctx=None, region=None):
    """
    Approximate escape vector by one of the perturbed minimization schemes.

    Parameters
    ----------
        - scheme (str): "c" minimizes r^2 Lambda - t <delta, r theta>, which is
            the escape formula itself; "b" minimizes F(exp X) - t <delta, X>.
        - t (float): perturbation size > 0.
        - region (ConeRepr): closed subcone to minimize over, default the
            escape cone.

    Returns
    -------
        - vector (TangentVector): the minimizer divided by t.
    """
    if t <= 0:
        raise ValueError(f"perturbation size must be positive, not {t}")
    ctx = mean_context(space, measure) if ctx is None else ctx
    region = ctx.escape if region is None else region
    if scheme == "c":
        return escape_vector(space, measure, ctx, delta, region).vector
    if scheme != "b":
        raise ValueError(f"unknown escape scheme {scheme}, use 'b' or 'c'")
    if ctx.cone.kind == "book":
        minimizer = _book_scheme_b(ctx, delta, t, region)
    elif ctx.cone.kind == "sector":
        minimizer = _sector_scheme_b(ctx, delta, t, region)
    else:
        minimizer = _linear_scheme_b(space, ctx, delta, t, region)
    return minimizer.scaled(1.0 / t)
