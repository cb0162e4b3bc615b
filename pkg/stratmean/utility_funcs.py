# -*- coding: utf-8 -*-
"""Provide general numeric helpers shared by the stratmean modules."""

import numpy as np
from scipy.linalg import null_space, orth


def wrap_offset(phi, psi, total_angle, periodic):
    """
    Signed angular offset phi - psi on an angular chart.

    Parameters
    ----------
        - phi, psi (float or array): angle coordinates on the chart.
        - total_angle (float): the chart's total angle.
        - periodic (bool): whether the chart closes up (cone) or has two
            boundary rays (sector).

    Returns
    -------
        - offset: the offset, wrapped into (-total_angle/2, total_angle/2] when
            periodic.
    """
    offset = np.asarray(phi, dtype=float) - np.asarray(psi, dtype=float)
    if periodic:
        half = total_angle / 2
        offset = half - np.mod(half - offset, total_angle)
    return offset


def cosine_pieces(angles, amplitudes, total_angle, periodic):
    """
    Split g(phi) = sum a_i cos(min(sep_i(phi), pi)) into shifted cosines.

    On every piece between consecutive breakpoints the function reads
    A cos(phi) + B sin(phi) - C, which keeps argmax and superlevel sets exact.

    Parameters
    ----------
        - angles (array): angle coordinate of each atom.
        - amplitudes (array): signed amplitude a_i of each atom (weight times
            radius).
        - total_angle (float): total angle of the chart.
        - periodic (bool): whether the chart is periodic.

    Returns
    -------
        - pieces: list of tuples (lo, hi, A, B, C) covering [0, total_angle].
    """
    angles = np.asarray(angles, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    breaks = [0.0, total_angle]
    for phi in angles:
        for cut in (phi - np.pi, phi + np.pi):
            if periodic:
                cut = np.mod(cut, total_angle)
            if 0.0 < cut < total_angle:
                breaks.append(float(cut))
    breaks = np.unique(np.asarray(breaks))
    pieces = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= 1e-15:
            continue
        mid = 0.5 * (lo + hi)
        offsets = wrap_offset(mid, angles, total_angle, periodic)
        near = np.abs(offsets) < np.pi
        unfolded = mid - offsets[near]
        coef_a = float(np.sum(amplitudes[near] * np.cos(unfolded)))
        coef_b = float(np.sum(amplitudes[near] * np.sin(unfolded)))
        coef_c = float(np.sum(amplitudes[~near]))
        pieces.append((float(lo), float(hi), coef_a, coef_b, coef_c))
    return pieces


def piece_value(piece, phi):
    """Evaluate a cosine piece at phi."""
    _, _, coef_a, coef_b, coef_c = piece
    return coef_a * np.cos(phi) + coef_b * np.sin(phi) - coef_c


def piece_argmax(piece, lo=None, hi=None):
    """
    Maximize a cosine piece over [lo, hi] (defaults to the piece's bounds).

    Returns
    -------
        - phi: the maximizer, the smallest angle among exact ties.
        - value: the maximum.
    """
    lo = piece[0] if lo is None else lo
    hi = piece[1] if hi is None else hi
    candidates = [lo, hi]
    peak = np.arctan2(piece[3], piece[2])
    for turn in range(-2, 3):
        phi = peak + 2 * np.pi * turn
        if lo < phi < hi:
            candidates.append(float(phi))
    candidates.sort()
    values = [piece_value(piece, phi) for phi in candidates]
    best = int(np.argmax(values))
    return candidates[best], float(values[best])


def piece_superlevel(piece, level):
    """
    Return the sub-intervals of a piece on which it is at least level.

    Parameters
    ----------
        - piece (tuple): (lo, hi, A, B, C) from cosine_pieces.
        - level (float): threshold.

    Returns
    -------
        - intervals: list of closed (lo, hi) intervals, possibly degenerate.
    """
    lo, hi, coef_a, coef_b, coef_c = piece
    amp = np.hypot(coef_a, coef_b)
    if amp <= 1e-300:
        return [(lo, hi)] if -coef_c >= level else []
    ratio = (level + coef_c) / amp
    if ratio <= -1.0:
        return [(lo, hi)]
    if ratio > 1.0:
        return []
    half = float(np.arccos(ratio))
    peak = float(np.arctan2(coef_b, coef_a))
    intervals = []
    for turn in range(-2, 3):
        centre = peak + 2 * np.pi * turn
        left, right = max(lo, centre - half), min(hi, centre + half)
        if left <= right:
            intervals.append((left, right))
    return intervals


def merge_intervals(intervals, tol=1e-12):
    """Merge overlapping or touching closed intervals."""
    merged = []
    for left, right in sorted(intervals):
        if merged and left <= merged[-1][1] + tol:
            merged[-1] = (merged[-1][0], max(merged[-1][1], right))
        else:
            merged.append((left, right))
    return merged


def orthonormal_basis(vectors, dim, rcond=1e-10):
    """
    Orthonormal basis (dim x k) of the span of the given vectors.

    Parameters
    ----------
        - vectors: iterable of length-dim arrays.
        - dim (int): ambient dimension.
        - rcond (float): relative singular value cutoff.

    Returns
    -------
        - basis: array of shape (dim, k); k = 0 when the span is trivial.
    """
    vectors = list(vectors)
    if dim == 0 or not vectors:
        return np.zeros((dim, 0))
    mat = np.asarray(vectors, dtype=float).reshape(-1, dim)
    if np.max(np.abs(mat)) == 0.0:
        return np.zeros((dim, 0))
    return orth(mat.T, rcond=rcond)


def subspace_intersection(first, second, rcond=1e-10):
    """Orthonormal basis of the intersection of two column-spanned subspaces."""
    dim = first.shape[0]
    if first.shape[1] == 0 or second.shape[1] == 0:
        return np.zeros((dim, 0))
    kernel = null_space(np.hstack([first, -second]), rcond=rcond)
    if kernel.shape[1] == 0:
        return np.zeros((dim, 0))
    return orthonormal_basis((first @ kernel[: first.shape[1]]).T, dim, rcond)


def project(basis, vec):
    """Orthogonal projection of vec onto the column span of basis."""
    vec = np.asarray(vec, dtype=float)
    if basis.shape[1] == 0:
        return np.zeros_like(vec)
    return basis @ (basis.T @ vec)


def richardson_second_difference(func, step):
    """
    One-sided second-order coefficient of func at 0, Richardson extrapolated.

    For f(h) = f(0) + a h + c h^2 + O(h^3) this returns c with O(h^2) error,
    using forward points only so it is valid at a cone apex.
    """
    f0 = func(0.0)

    def coeff(h):
        return (func(2 * h) - 2 * func(h) + f0) / (2 * h * h)

    return 2 * coeff(step / 2) - coeff(step)


def close_arcs(intervals, total_angle, periodic, tol=1e-12):
    """
    Merge arcs on an angular chart into canonical form.

    On a periodic chart an arc running through angle 0 is stored as
    (lo, hi) with hi > total_angle; the full circle is (0, total_angle).
    """
    merged = merge_intervals(intervals, tol)
    if periodic and len(merged) > 1:
        first, last = merged[0], merged[-1]
        if first[0] <= tol and last[1] >= total_angle - tol:
            merged = merged[1:-1] + [(last[0], first[1] + total_angle)]
    return merged


def split_arcs(intervals, total_angle):
    """Cut arcs that run past total_angle into pieces inside [0, total_angle]."""
    pieces = []
    for lo, hi in intervals:
        if hi > total_angle:
            pieces.extend([(lo, total_angle), (0.0, hi - total_angle)])
        else:
            pieces.append((lo, hi))
    return pieces


def arcs_argmax(pieces, intervals, total_angle):
    """
    Maximize a piecewise cosine function over a union of arcs.

    Parameters
    ----------
        - pieces (list): output of cosine_pieces.
        - intervals (list): arcs in the form produced by close_arcs.
        - total_angle (float): total angle of the chart.

    Returns
    -------
        - candidates: list of (phi, value) local maxima, one per piece and
            arc overlap, sorted by decreasing value then increasing phi.
    """
    candidates = []
    for lo, hi in split_arcs(intervals, total_angle):
        for piece in pieces:
            left, right = max(lo, piece[0]), min(hi, piece[1])
            if left <= right:
                candidates.append(piece_argmax(piece, left, right))
    candidates.sort(key=lambda item: (-item[1], item[0]))
    return candidates
