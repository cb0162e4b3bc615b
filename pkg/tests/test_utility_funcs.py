# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy import array, pi
from numpy.testing import assert_array_almost_equal

from stratmean.utility_funcs import (
    arcs_argmax,
    close_arcs,
    cosine_pieces,
    merge_intervals,
    orthonormal_basis,
    piece_argmax,
    piece_superlevel,
    piece_value,
    project,
    richardson_second_difference,
    split_arcs,
    subspace_intersection,
    wrap_offset,
)


class TestWrapOffset:
    def test_periodic_wraps(self):
        """offsets across angle zero wrap around"""
        assert wrap_offset(0.1, 2 * pi - 0.1, 2 * pi, True) == pytest.approx(0.2)

    def test_not_periodic(self):
        """sector charts do not wrap"""
        assert wrap_offset(1.0, 0.5, 1.5 * pi, False) == pytest.approx(0.5)

    def test_half_turn(self):
        """the wrapped offset lies in (-total / 2, total / 2]"""
        assert wrap_offset(0.0, 2 * pi, 3 * pi, True) == pytest.approx(pi)


class TestCosinePieces:
    def test_plane(self):
        """one atom on the plane is a single cosine split at the antipode"""
        pieces = cosine_pieces([0.0], [1.0], 2 * pi, True)
        assert len(pieces) == 2
        assert_array_almost_equal(pieces[0], [0, pi, 1, 0, 0])
        assert_array_almost_equal(pieces[1], [pi, 2 * pi, 1, 0, 0])

    def test_wide_cone(self):
        """far from the atom the function is the constant -amplitude"""
        pieces = cosine_pieces([0.0], [2.0], 3 * pi, True)
        far = [p for p in pieces if p[0] >= pi - 1e-12 and p[1] <= 2 * pi]
        assert len(far) == 1
        assert piece_value(far[0], 1.5 * pi) == pytest.approx(-2.0)

    def test_matches_direct_sum(self):
        """piece values agree with the defining sum"""
        angles, amps = array([0.3, 2.0, 4.0]), array([1.0, 0.5, 2.0])
        total = 3 * pi
        for piece in cosine_pieces(angles, amps, total, True):
            phi = 0.5 * (piece[0] + piece[1])
            sep = np.abs(wrap_offset(phi, angles, total, True))
            direct = np.sum(amps * np.cos(np.minimum(sep, pi)))
            assert piece_value(piece, phi) == pytest.approx(direct)


class TestPieceArgmax:
    def test_peak_at_edge(self):
        """the maximum sits on the boundary"""
        phi, value = piece_argmax((0.0, pi, 1.0, 0.0, 0.0))
        assert phi == 0.0
        assert value == pytest.approx(1.0)

    def test_interior_peak(self):
        """the maximum sits at the cosine peak"""
        phi, value = piece_argmax((0.0, pi, 0.0, 1.0, 0.5))
        assert phi == pytest.approx(pi / 2)
        assert value == pytest.approx(0.5)


class TestPieceSuperlevel:
    def test_cosine(self):
        """cos is nonnegative on two quarter arcs"""
        arcs = piece_superlevel((0.0, 2 * pi, 1.0, 0.0, 0.0), 0.0)
        assert_array_almost_equal(arcs, [(0, pi / 2), (1.5 * pi, 2 * pi)])

    def test_everything(self):
        """a low level keeps the whole piece"""
        assert piece_superlevel((0.0, 1.0, 1.0, 0.0, 0.0), -5.0) == [(0.0, 1.0)]

    def test_nothing(self):
        """a high level keeps nothing"""
        assert piece_superlevel((0.0, 1.0, 1.0, 0.0, 0.0), 5.0) == []


class TestArcs:
    def test_merge(self):
        """overlapping intervals merge"""
        merged = merge_intervals([(0.5, 2.0), (0.0, 1.0), (3.0, 4.0)])
        assert merged == [(0.0, 2.0), (3.0, 4.0)]

    def test_close_through_zero(self):
        """arcs touching both ends of a periodic chart join"""
        assert_array_almost_equal(
            close_arcs([(0.0, 1.0), (5.0, 2 * pi)], 2 * pi, True), [(5.0, 1.0 + 2 * pi)]
        )

    def test_close_sector(self):
        """sector charts keep their end arcs apart"""
        arcs = close_arcs([(0.0, 1.0), (4.0, 1.5 * pi)], 1.5 * pi, False)
        assert len(arcs) == 2

    def test_split(self):
        """arcs past the chart end are cut in two"""
        assert_array_almost_equal(
            split_arcs([(5.0, 1.0 + 2 * pi)], 2 * pi), [(5.0, 2 * pi), (0.0, 1.0)]
        )

    def test_argmax_restricted(self):
        """the maximum over an arc sits on its edge"""
        pieces = cosine_pieces([0.0], [1.0], 2 * pi, True)
        phi, value = arcs_argmax(pieces, [(pi / 2, pi)], 2 * pi)[0]
        assert phi == pytest.approx(pi / 2)
        assert value == pytest.approx(0.0)


class TestLinearAlgebra:
    def test_basis_rank(self):
        """parallel vectors span a line"""
        assert orthonormal_basis([[1, 0, 0], [2, 0, 0]], 3).shape == (3, 1)

    def test_basis_empty(self):
        """no vectors span the zero space"""
        assert orthonormal_basis([], 3).shape == (3, 0)

    def test_basis_zero_dimension(self):
        """a zero dimensional space has the empty basis"""
        assert orthonormal_basis([], 0).shape == (0, 0)
        assert orthonormal_basis([np.zeros(0), np.zeros(0)], 0).shape == (0, 0)

    def test_basis_zero_vectors(self):
        """zero vectors span nothing"""
        assert orthonormal_basis([np.zeros(2)], 2).shape == (2, 0)

    def test_intersection(self):
        """two coordinate planes meet in an axis"""
        first = array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        second = array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        basis = subspace_intersection(first, second)
        assert basis.shape == (3, 1)
        assert_array_almost_equal(np.abs(basis[:, 0]), [1, 0, 0])

    def test_project(self):
        """projection onto the first axis"""
        assert_array_almost_equal(project(np.eye(2)[:, :1], [3.0, 4.0]), [3.0, 0.0])

    def test_project_trivial(self):
        """projection onto the zero space"""
        assert_array_almost_equal(project(np.zeros((2, 0)), [3.0, 4.0]), [0.0, 0.0])


def test_richardson_quadratic():
    """second order coefficient of a quadratic is exact"""
    value = richardson_second_difference(lambda h: 1 + 2 * h + 3 * h * h, 0.1)
    assert value == pytest.approx(3.0)
