# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_array_almost_equal

from stratmean.escape import (
    CLIPPED,
    escape_approx,
    escape_fd_oracle,
    escape_of_point,
    escape_vector,
)
from stratmean.frechet import directional_derivative, mean_context
from stratmean.measures import Measure, RngStream, TangentMeasure, scale_vectors
from stratmean.spaces import (
    APEX,
    Euclidean,
    OpenBook,
    PlanarCone,
    Point,
    SphereCap,
    Spider,
    cone_distance,
    tangent,
)


def leg(index, radius=1.0):
    """Tangent vector along a spider leg"""
    return tangent(f"leg{index}", (1.0,), radius)


@pytest.fixture
def two_mass():
    """Equal atoms on two legs of the spider, with the mean context"""
    spider = Spider(3)
    measure = Measure([(spider.point(1, 1.0), 0.5), (spider.point(2, 1.0), 0.5)])
    return spider, measure, mean_context(spider, measure)


@pytest.fixture
def corners():
    """Equal atoms at (+-1, +-1), with the mean context"""
    plane = Euclidean(2)
    atoms = [(Point("R", (x, y)), 0.25) for x in (1, -1) for y in (1, -1)]
    measure = Measure(atoms)
    return plane, measure, mean_context(plane, measure)


@pytest.fixture
def balanced_book():
    """A book whose first page balances the other two at the spine origin"""
    book = OpenBook(3, 1)
    measure = Measure([
        (book.make_point(1, 1.0, [0.0]), 0.5),
        (book.make_point(2, 1.0, [1.0]), 0.25),
        (book.make_point(3, 1.0, [-1.0]), 0.25),
    ])
    return book, measure, mean_context(book, measure)


@pytest.fixture
def wide_apex():
    """Opposite atoms on the cone of angle 3 pi, mean at the apex"""
    cone = PlanarCone(3 * np.pi)
    points = [cone.make_point(1.0, 0.0), cone.make_point(1.0, np.pi)]
    measure = Measure.from_points(points)
    return cone, measure, mean_context(cone, measure)


@pytest.fixture
def wide_off_apex():
    """A heavy atom and an apex-routed light one on the cone of angle 3 pi"""
    cone = PlanarCone(3 * np.pi)
    measure = Measure([
        (cone.make_point(2.0, 0.0), 0.8),
        (cone.make_point(1.0, 1.5 * np.pi), 0.2),
    ])
    return cone, measure, mean_context(cone, measure)


@pytest.fixture
def small_cap():
    """Three atoms in a ball of radius 0.2 about the north pole"""
    cap = SphereCap(0.2)
    measure = Measure([
        (cap.from_polar(0.15, 0.0), 0.5),
        (cap.from_polar(0.1, 2.0), 0.3),
        (cap.from_polar(0.12, 4.0), 0.2),
    ])
    return cap, measure, mean_context(cap, measure, escape_tol=1e-6)


@pytest.fixture
def contexts(two_mass, corners, balanced_book, wide_apex, wide_off_apex, small_cap):
    """Every configuration the escape properties are checked on"""
    return [two_mass, corners, balanced_book, wide_apex, wide_off_apex, small_cap]


def random_delta(ctx, gen):
    """One to three atoms with random directions, radii and weights."""
    atoms = []
    for _ in range(int(gen.integers(1, 4))):
        vec = ctx.cone.random_direction(gen).scaled(gen.uniform(0.2, 2.0))
        atoms.append((vec, gen.uniform(0.2, 1.0)))
    return TangentMeasure(atoms)


def support_delta(ctx, gen):
    """Random positive weights on the logged support of the measure."""
    return TangentMeasure(
        [(vec, gen.uniform(0.2, 1.0)) for vec, _ in ctx.logged.atoms if not vec.is_apex]
    )


def oracle_error(space, measure, ctx, delta, t):
    """Conical gap between the escape vector and the finite difference."""
    vec = escape_vector(space, measure, ctx, delta).vector
    oracle = escape_fd_oracle(space, measure, delta, t, ctx)
    return cone_distance(space, ctx.mean, vec, oracle) / (1 + vec.radius)


class TestEscapeVector:
    @pytest.mark.parametrize("radius", [0.5, 1.0, 3.0])
    def test_escaping_leg(self, two_mass, radius):
        """a point mass on an escape leg escapes by its own radius"""
        spider, measure, ctx = two_mass
        delta = TangentMeasure([(leg(1, radius), 1.0)])
        result = escape_vector(spider, measure, ctx, delta)
        assert result.vector.chart == "leg1"
        assert result.vector.radius == pytest.approx(radius)
        assert result.objective == pytest.approx(radius * np.sqrt(2))
        assert not result.clipped

    def test_sticky_leg(self, two_mass):
        """pushing along the empty leg does not move the mean"""
        spider, measure, ctx = two_mass
        result = escape_vector(spider, measure, ctx, TangentMeasure([(leg(3), 1.0)]))
        assert result is CLIPPED
        assert result.vector is APEX
        assert result.clipped

    def test_empty_delta(self, two_mass):
        """the zero tangent measure escapes nowhere"""
        spider, measure, ctx = two_mass
        assert escape_vector(spider, measure, ctx, TangentMeasure()) is CLIPPED

    def test_builds_context(self, two_mass):
        """a missing context is solved for"""
        spider, measure, _ = two_mass
        result = escape_vector(spider, measure, None, TangentMeasure([(leg(2), 1.0)]))
        assert result.vector == leg(2)

    def test_euclidean(self, corners):
        """on the plane the escape vector is the resultant over the mass"""
        plane, measure, ctx = corners
        delta = TangentMeasure([(tangent("lin", (1.0, 0.0), 2.0), 1.0)])
        result = escape_vector(plane, measure, ctx, delta)
        assert_array_almost_equal(ctx.cone.vector(result.vector), [2.0, 0.0])
        assert result.objective == pytest.approx(2 * np.sqrt(2))

    def test_sphere(self):
        """curvature shortens the escape on a symmetric cap"""
        cap = SphereCap(0.5)
        atoms = [(cap.from_polar(0.3, lon), 0.25) for lon in np.arange(4) * np.pi / 2]
        measure = Measure(atoms)
        ctx = mean_context(cap, measure, mean=cap.origin())
        delta = TangentMeasure([(tangent("lin", (1.0, 0.0), 1.0), 1.0)])
        kappa = 0.3 / np.tan(0.3)
        result = escape_vector(cap, measure, ctx, delta)
        assert result.vector.radius == pytest.approx(2 / (1 + kappa))
        assert_array_almost_equal(result.vector.coords, [1.0, 0.0])

    def test_of_point(self, two_mass):
        """the escape of a point is the escape of its log"""
        spider, measure, ctx = two_mass
        result = escape_of_point(spider, measure, ctx, spider.point(1, 2.0))
        assert result.vector.radius == pytest.approx(2.0)
        assert result.direction == leg(1)


class TestFiniteDifference:
    @pytest.mark.parametrize("t", [0.1, 0.01, 0.001])
    def test_spider(self, two_mass, t):
        """the perturbed mean moves t / (1 + t) along the leg"""
        spider, measure, ctx = two_mass
        delta = TangentMeasure([(leg(1), 1.0)])
        vec = escape_fd_oracle(spider, measure, delta, t, ctx)
        assert vec.chart == "leg1"
        assert vec.radius == pytest.approx(1 / (1 + t))

    def test_sticky_spider(self, two_mass):
        """the empty leg stays put"""
        spider, measure, ctx = two_mass
        delta = TangentMeasure([(leg(3), 1.0)])
        assert escape_fd_oracle(spider, measure, delta, 0.01, ctx) is APEX

    def test_euclidean(self, corners):
        """the perturbed centroid"""
        plane, measure, ctx = corners
        delta = TangentMeasure([(tangent("lin", (1.0, 0.0), 2.0), 1.0)])
        vec = escape_fd_oracle(plane, measure, delta, 0.01, ctx)
        assert_array_almost_equal(ctx.cone.vector(vec), [2.0 / 1.01, 0.0])

    def test_empty(self, two_mass):
        """no perturbation, no escape"""
        spider, measure, ctx = two_mass
        assert escape_fd_oracle(spider, measure, TangentMeasure(), 0.1, ctx) is APEX


class TestApproximation:
    def test_scheme_b_book(self, two_mass):
        """the per-page closed form recovers the escape vector"""
        spider, measure, ctx = two_mass
        delta = TangentMeasure([(leg(1), 1.0)])
        vec = escape_approx(spider, measure, delta, 0.01, scheme="b", ctx=ctx)
        assert vec.chart == "leg1"
        assert vec.radius == pytest.approx(1.0)

    def test_scheme_c(self, two_mass):
        """the exact scheme is the escape vector"""
        spider, measure, ctx = two_mass
        delta = TangentMeasure([(leg(2, 0.4), 1.0)])
        vec = escape_approx(spider, measure, delta, 0.5, ctx=ctx)
        assert vec == escape_vector(spider, measure, ctx, delta).vector

    def test_scheme_b_sector(self):
        """a push into the flat arc of a wide cone"""
        cone = PlanarCone(3 * np.pi)
        measure = Measure.from_points(
            [cone.make_point(1.0, 0.0), cone.make_point(1.0, np.pi)]
        )
        ctx = mean_context(cone, measure)
        assert ctx.mean == cone.origin()
        delta = TangentMeasure([(ctx.cone.from_polar(1.0, np.pi / 2), 1.0)])
        vec = escape_approx(cone, measure, delta, 0.01, scheme="b", ctx=ctx)
        radius, phi = ctx.cone.polar(vec)
        assert radius == pytest.approx(1.0)
        assert phi == pytest.approx(np.pi / 2)
        exact = escape_vector(cone, measure, ctx, delta).vector
        assert ctx.cone.polar(exact)[0] == pytest.approx(1.0)

    def test_scheme_b_euclidean(self, corners):
        """the flat scheme b is exact"""
        plane, measure, ctx = corners
        delta = TangentMeasure([(tangent("lin", (0.0, 1.0), 1.0), 0.5)])
        vec = escape_approx(plane, measure, delta, 0.1, scheme="b", ctx=ctx)
        assert_array_almost_equal(ctx.cone.vector(vec), [0.0, 0.5])

    def test_bad_t(self, two_mass):
        """t must be positive"""
        spider, measure, ctx = two_mass
        with pytest.raises(ValueError) as e_info:
            escape_approx(spider, measure, TangentMeasure(), 0, ctx=ctx)

        assert e_info.value.args[0] == "perturbation size must be positive, not 0"

    def test_bad_scheme(self, two_mass):
        """only schemes b and c exist"""
        spider, measure, ctx = two_mass
        with pytest.raises(ValueError) as e_info:
            escape_approx(spider, measure, TangentMeasure(), 0.1, scheme="a", ctx=ctx)

        assert e_info.value.args[0] == "unknown escape scheme a, use 'b' or 'c'"


class TestOracleAgreement:
    def test_means(self, balanced_book, wide_apex, wide_off_apex):
        """the configurations sit where the oracle checks expect"""
        book, _, ctx = balanced_book
        assert ctx.mean == book.origin()
        cone, _, ctx = wide_apex
        assert ctx.mean == cone.origin()
        cone, _, ctx = wide_off_apex
        radius, phi = cone.polar(ctx.mean)
        assert radius == pytest.approx(1.4)
        assert phi == pytest.approx(0.0)
        assert not ctx.flat

    def test_random_deltas(self, contexts):
        """escape vectors match the finite difference at t = 1e-3"""
        gen = RngStream(11, 0).generator()
        for space, measure, ctx in contexts:
            for _ in range(8):
                delta = random_delta(ctx, gen)
                assert oracle_error(space, measure, ctx, delta, 1e-3) <= 1e-2

    @pytest.mark.parametrize(
        "name, make_delta",
        [
            ("two_mass", lambda ctx: TangentMeasure([(leg(1), 1.0)])),
            ("balanced_book", lambda ctx: TangentMeasure(
                [(ctx.cone.from_parts(1, 0.6, [0.8]), 1.0)])),
            ("wide_apex", lambda ctx: TangentMeasure(
                [(ctx.cone.from_polar(1.0, np.pi / 2), 1.0)])),
            ("wide_off_apex", lambda ctx: TangentMeasure(
                [(tangent("lin", (0.6, 0.8), 1.0), 1.0)])),
        ],
    )
    def test_first_order(self, request, name, make_delta):
        """the finite difference error shrinks linearly in t"""
        space, measure, ctx = request.getfixturevalue(name)
        delta = make_delta(ctx)
        steps = [1e-1, 1e-2, 1e-3]
        errors = [oracle_error(space, measure, ctx, delta, t) for t in steps]
        assert errors[-1] <= 1e-2
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert slope >= 0.9


class TestHomogeneity:
    def test_scaling(self, contexts):
        """scaling the tangent vectors scales the escape vector"""
        gen = RngStream(12, 0).generator()
        for space, measure, ctx in contexts:
            for _ in range(5):
                delta = random_delta(ctx, gen)
                base = escape_vector(space, measure, ctx, delta).vector
                for radius in (0.0, 0.5, 2.0, 10.0):
                    scaled = escape_vector(
                        space, measure, ctx, scale_vectors(delta, radius)
                    ).vector
                    gap = cone_distance(space, ctx.mean, scaled, base.scaled(radius))
                    assert gap <= 1e-9 * (1 + radius)


class TestConfinement:
    def test_support_deltas(self, contexts):
        """support-sampled escapes stay in the fluctuating cone with flat slope"""
        gen = RngStream(13, 0).generator()
        for space, measure, ctx in contexts:
            for _ in range(5):
                result = escape_vector(space, measure, ctx, support_delta(ctx, gen))
                if result.clipped:
                    continue
                assert ctx.fluctuating.contains(result.direction, 1e-8)
                slope = directional_derivative(space, measure, ctx.mean,
                                               result.direction)
                assert slope <= ctx.tau

    def test_sticky_leg_is_outside(self, two_mass):
        """the empty leg is outside the fluctuating cone"""
        _, _, ctx = two_mass
        assert ctx.fluctuating.contains(leg(1))
        assert not ctx.fluctuating.contains(leg(3))
