# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_array_almost_equal

from stratmean.measures import RngStream
from stratmean.spaces import (
    APEX,
    ApexVector,
    BookCone,
    ChartMismatch,
    Euclidean,
    LinearCone,
    NotExponentiable,
    OpenBook,
    PlanarCone,
    Point,
    QuadrantComplement,
    SectorCone,
    SphereCap,
    Spider,
    angle,
    cone_distance,
    inner,
    is_cat0,
    space_from_spec,
    tangent,
)


@pytest.fixture
def spider():
    """The spider with three legs"""
    return Spider(3)


@pytest.fixture
def built_ins():
    """One instance of every built-in space"""
    return [
        Euclidean(2),
        SphereCap(0.5),
        OpenBook(3, 1),
        Spider(3),
        PlanarCone(3 * np.pi),
        QuadrantComplement(),
    ]


def random_points(space, seed, count):
    """Reproducible random points of a space."""
    gen = RngStream(seed, 0).generator()
    return [space.random_point(gen) for _ in range(count)]


class TestDistance:
    def test_spider_through_apex(self, spider):
        """points on different legs are joined through the apex"""
        assert spider.distance(spider.point(1, 1.0), spider.point(2, 2.0)) == 3.0

    def test_spider_same_leg(self, spider):
        """points on one leg are joined along it"""
        assert spider.distance(spider.point(1, 1.0), spider.point(1, 2.5)) == 1.5

    def test_euclidean(self):
        """the 3-4-5 triangle"""
        assert Euclidean(2).distance(Point("R", (0, 0)), Point("R", (3, 4))) == 5.0

    def test_planar_cone_apex_routing(self):
        """a separation of at least pi routes through the apex"""
        cone = PlanarCone(3 * np.pi)
        dist = cone.distance(cone.make_point(1, 0), cone.make_point(1, 1.5 * np.pi))
        assert dist == pytest.approx(2.0)

    def test_planar_cone_law_of_cosines(self):
        """a quarter turn on a cone of angle 3 pi"""
        cone = PlanarCone(3 * np.pi)
        dist = cone.distance(cone.make_point(1, 0), cone.make_point(1, 0.5 * np.pi))
        assert dist == pytest.approx(np.sqrt(2))

    def test_open_book_unfolds(self):
        """two pages unfold into a plane"""
        book = OpenBook(3, 1)
        p, q = book.make_point(1, 1.0, [0.0]), book.make_point(2, 2.0, [0.0])
        assert book.distance(p, q) == 3.0

    def test_quadrant_complement_corner(self):
        """the two boundary rays are 3 pi / 2 apart"""
        region = QuadrantComplement()
        west, south = region.from_cartesian(-1, 0), region.from_cartesian(0, -1)
        assert region.distance(west, south) == pytest.approx(2.0)

    def test_chart_mismatch(self, spider):
        """a Euclidean point does not belong to the spider"""
        with pytest.raises(ChartMismatch):
            spider.distance(Point("R", (1.0,)), spider.origin())


class TestGeodesic:
    def test_spider_midpoint(self, spider):
        """the midpoint between two unit leg points is the apex"""
        path = spider.geodesic(spider.point(1, 1.0), spider.point(2, 1.0))
        assert path(0.5) == Point("apex", ())

    def test_euclidean_quarter(self):
        """straight segments are linear in t"""
        path = Euclidean(2).geodesic(Point("R", (0, 0)), Point("R", (2, 2)))
        assert_array_almost_equal(path(0.25).coords, [0.5, 0.5])

    def test_open_book_crosses_spine(self):
        """the unfolded segment crosses the spine at v = 1"""
        book = OpenBook(3, 1)
        p, q = book.make_point(1, 1.0, [0.0]), book.make_point(2, 1.0, [2.0])
        path = book.geodesic(p, q)
        mid = path(0.5)
        assert mid.stratum == "spine"
        assert_array_almost_equal(mid.coords, [0.0, 1.0])

    def test_endpoints(self, spider):
        """t outside (0, 1) returns the endpoints"""
        p, q = spider.point(1, 1.0), spider.point(3, 2.0)
        path = spider.geodesic(p, q)
        assert path(0) == p and path(1) == q


class TestLogExp:
    def test_spider_log_at_apex(self, spider):
        """log at the apex is the leg direction with the leg radius"""
        vec = spider.log(spider.origin(), spider.point(2, 1.5))
        assert vec == tangent("leg2", (1.0,), 1.5)

    def test_spider_log_towards_apex(self, spider):
        """log from a leg point to the apex points down the leg"""
        vec = spider.log(spider.point(1, 1.0), spider.origin())
        assert vec == tangent("lin", (-1.0,), 1.0)

    def test_spider_exp(self, spider):
        """exp at the apex walks out along the leg"""
        point = spider.exp(spider.origin(), tangent("leg3", (1.0,), 2.0))
        assert point == spider.point(3, 2.0)

    def test_exp_zero(self, spider):
        """exp of the apex vector is the base"""
        base = spider.point(2, 0.7)
        assert spider.exp(base, APEX) == base

    def test_exp_crosses_spine(self, spider):
        """a page point cannot be pushed through the spine"""
        with pytest.raises(NotExponentiable):
            spider.exp(spider.point(1, 1.0), tangent("lin", (-1.0,), 2.0))

    def test_sphere_log(self):
        """log at the north pole is spherical polar"""
        cap = SphereCap(0.5)
        vec = cap.log(cap.origin(), cap.from_polar(0.3, np.pi / 2))
        assert vec.radius == pytest.approx(0.3)
        assert_array_almost_equal(vec.coords, [0.0, 1.0])

    def test_sphere_exp(self):
        """exp at the north pole lands on meridian 0"""
        cap = SphereCap(0.5)
        point = cap.exp(cap.origin(), tangent("lin", (1.0, 0.0), 0.4))
        assert_array_almost_equal(point.coords, cap.from_polar(0.4, 0.0).coords)

    def test_sphere_exp_leaves_hemisphere(self):
        """vectors reaching the equator are not exponentiable"""
        cap = SphereCap(0.5)
        with pytest.raises(NotExponentiable):
            cap.exp(cap.origin(), tangent("lin", (1.0, 0.0), 2.0))

    def test_planar_cone_round_trip(self):
        """exp undoes log away from the apex"""
        cone = PlanarCone(3 * np.pi)
        base, point = cone.make_point(1.0, 0.3), cone.make_point(2.0, 1.1)
        back = cone.exp(base, cone.log(base, point))
        assert cone.distance(back, point) < 1e-10

    def test_quadrant_round_trip(self):
        """exp undoes log in the quadrant complement"""
        region = QuadrantComplement()
        base, point = region.from_cartesian(1.0, 0.5), region.from_cartesian(2.0, -1.0)
        back = region.exp(base, region.log(base, point))
        assert region.distance(back, point) < 1e-10

    def test_reach(self):
        """reach is infinite at cone points and finite on a page"""
        book = OpenBook(3, 1)
        assert book.reach(book.origin()) == np.inf
        assert book.reach(book.make_point(2, 0.4, [1.0])) == 0.4
        assert SphereCap(0.5).reach(SphereCap(0.5).origin()) == pytest.approx(np.pi / 2)


class TestConeGeometry:
    def test_spider_angle(self, spider):
        """distinct legs meet at angle pi"""
        e_1, e_2 = tangent("leg1", (1.0,), 1.0), tangent("leg2", (1.0,), 1.0)
        assert angle(spider, spider.origin(), e_1, e_2) == pytest.approx(np.pi)

    def test_book_spine_orthogonal(self):
        """spine directions are orthogonal to page normals"""
        cone = BookCone(3, 1, "page")
        spine = cone.from_parts(0, 0.0, [1.0])
        page = cone.from_parts(2, 1.0, [0.0])
        assert cone.angle(spine, page) == pytest.approx(np.pi / 2)

    def test_quadrant_corner_angle(self):
        """the two boundary rays meet at angle pi"""
        cone = SectorCone(1.5 * np.pi, False)
        west, south = cone.from_polar(1.0, 1.5 * np.pi), cone.from_polar(1.0, 0.0)
        assert cone.angle(west, south) == pytest.approx(np.pi)

    def test_inner_opposite_legs(self, spider):
        """legs are opposite"""
        vec_v, vec_w = tangent("leg1", (1.0,), 2.0), tangent("leg2", (1.0,), 5.0)
        assert inner(spider, spider.origin(), vec_v, vec_w) == pytest.approx(-10.0)

    def test_inner_apex(self, spider):
        """the apex pairs to zero"""
        assert inner(spider, spider.origin(), APEX, tangent("leg1", (1.0,), 3.0)) == 0.0

    def test_angle_apex(self, spider):
        """the angle against the apex is undefined"""
        with pytest.raises(ApexVector) as e_info:
            angle(spider, spider.origin(), APEX, tangent("leg1", (1.0,), 1.0))

        assert e_info.value.args[0] == "angle is undefined against the apex"

    def test_cone_distance(self):
        """law of cosines on the tangent plane"""
        plane = Euclidean(2)
        vec_v = tangent("lin", (1.0, 0.0), 2.0)
        vec_w = tangent("lin", (0.5, np.sqrt(3) / 2), 3.0)
        assert inner(plane, plane.origin(), vec_v, vec_w) == pytest.approx(3.0)
        dist = cone_distance(plane, plane.origin(), vec_v, vec_w)
        assert dist == pytest.approx(np.sqrt(7))
        assert cone_distance(plane, plane.origin(), vec_v, vec_v) == 0.0

    def test_sector_distance_matrix(self):
        """opposite rays on the plane are two apart"""
        cone = SectorCone(2 * np.pi, True)
        rows = cone.encode_many([cone.from_polar(1, 0), cone.from_polar(1, np.pi)])
        assert_array_almost_equal(cone.distance_matrix(rows, rows), [[0, 2], [2, 0]])

    def test_encode_decode(self):
        """encoded rows decode to the same vectors"""
        cone = BookCone(3, 1, "page")
        vecs = [cone.from_parts(2, 0.6, [0.8]), APEX, cone.from_parts(0, 0, [-1.0])]
        back = cone.decode_many(cone.encode_many(vecs))
        for vec, other in zip(vecs, back):
            assert cone.distance(vec, other) < 1e-12

    def test_linear_chart_check(self):
        """a leg direction is not a vector of the plane"""
        with pytest.raises(ChartMismatch) as e_info:
            LinearCone(2).vector(tangent("leg1", (1.0,), 1.0))

        assert e_info.value.args[0] == "leg1 is not a direction of R^2"

    def test_sector_outside_chart(self):
        """a non-periodic sector rejects angles past its boundary"""
        with pytest.raises(ChartMismatch):
            SectorCone(1.5 * np.pi, False).normalize(2 * np.pi)


class TestTangentVector:
    def test_zero_radius_is_apex(self):
        """zero radius gives the canonical apex"""
        assert tangent("leg1", (1.0,), 0.0) is APEX

    def test_negative_scale(self):
        """scaling by a negative factor is rejected"""
        with pytest.raises(ValueError) as e_info:
            tangent("leg1", (1.0,), 1.0).scaled(-1)

        assert e_info.value.args[0] == "scale factor must be nonnegative, not -1"

    def test_direction_of_apex(self):
        """the apex has no direction"""
        with pytest.raises(ApexVector):
            APEX.direction()

    def test_non_unit_direction(self):
        """directions off the sector chart must be unit vectors"""
        with pytest.raises(ValueError) as e_info:
            tangent("page2", (1.0, 1.0), 2.0)

        message = "direction [1.0, 1.0] on chart page2 is not a unit vector"
        assert e_info.value.args[0] == message

    def test_sector_angle_exempt(self):
        """a sector direction is an angle, not a unit vector"""
        assert tangent("sector", (2.5,), 1.0).coords == (2.5,)


class TestSpaceFromSpec:
    def test_spider(self):
        """spider spec"""
        assert space_from_spec({"kind": "spider", "k": 3}) == Spider(3)

    def test_unknown_kind(self):
        """unknown space kinds are rejected"""
        with pytest.raises(ValueError) as e_info:
            space_from_spec({"kind": "torus"})

        assert e_info.value.args[0] == "unknown space kind torus"

    def test_unknown_key(self):
        """extra keys are rejected"""
        with pytest.raises(ValueError) as e_info:
            space_from_spec({"kind": "spider", "k": 3, "p": 1})

        assert e_info.value.args[0] == "unknown key p in space spec"

    def test_missing_key(self):
        """missing keys are named"""
        with pytest.raises(ValueError) as e_info:
            space_from_spec({"kind": "open_book", "k": 3})

        assert e_info.value.args[0] == "space spec for open_book needs p"

    def test_small_spider(self):
        """spiders need three legs"""
        with pytest.raises(ValueError) as e_info:
            Spider(2)

        assert e_info.value.args[0] == "leg count must be at least 3, not 2"

    def test_cat0(self):
        """the sphere cap and quadrant complement are not CAT(0)"""
        assert is_cat0(Spider(3)) and is_cat0(PlanarCone(3 * np.pi))
        assert not is_cat0(SphereCap(0.5)) and not is_cat0(QuadrantComplement())


class TestMetricProperties:
    def test_symmetry_and_zero(self, built_ins):
        """distances are symmetric, non-negative and vanish on the diagonal"""
        for seed, space in enumerate(built_ins):
            points = random_points(space, seed, 12)
            for p in points:
                assert space.distance(p, p) == pytest.approx(0.0, abs=1e-12)
                for q in points:
                    d_pq = space.distance(p, q)
                    assert d_pq >= 0.0
                    assert d_pq == pytest.approx(space.distance(q, p), abs=1e-12)

    def test_triangle_inequality(self, built_ins):
        """random triples satisfy the triangle inequality"""
        for seed, space in enumerate(built_ins):
            points = random_points(space, 10 + seed, 30)
            for x, y, z in zip(points[0::3], points[1::3], points[2::3]):
                d_xz = space.distance(x, z)
                assert d_xz <= space.distance(x, y) + space.distance(y, z) + 1e-12

    def test_log_exp_round_trip(self, built_ins):
        """exp inverts log within the reach and from the distinguished point"""
        for seed, space in enumerate(built_ins):
            points = random_points(space, 20 + seed, 40)
            checked = 0
            for base, point in zip(points[0::2], points[1::2]):
                for start in (base, space.origin()):
                    vec = space.log(start, point)
                    if vec.radius > space.reach(start):
                        continue
                    assert space.distance(space.exp(start, vec), point) <= 1e-10
                    checked += 1
            assert checked >= 20

    def test_log_radius_is_distance(self, built_ins):
        """the logarithm at the distinguished point has the distance as radius"""
        for seed, space in enumerate(built_ins):
            origin = space.origin()
            for point in random_points(space, 30 + seed, 10):
                expected = space.distance(origin, point)
                assert space.log(origin, point).radius == pytest.approx(expected)

    def test_constant_speed(self, built_ins):
        """geodesics are traversed at constant speed"""
        times = np.linspace(0.0, 1.0, 6)
        for seed, space in enumerate(built_ins):
            points = random_points(space, 40 + seed, 10)
            for p, q in zip(points[0::2], points[1::2]):
                path = space.geodesic(p, q)
                assert path.length == pytest.approx(space.distance(p, q))
                for s in times:
                    for t in times:
                        gap = space.distance(path(s), path(t))
                        assert gap == pytest.approx(abs(t - s) * path.length, abs=1e-9)


class TestFullTurnCone:
    @staticmethod
    def cartesian(cone, point):
        """Cartesian image of a point of the cone of angle 2 pi."""
        radius, phi = cone.polar(point)
        return Point("R", (radius * np.cos(phi), radius * np.sin(phi)))

    def test_distance_matches_plane(self):
        """the cone of angle 2 pi is the Euclidean plane"""
        cone, plane = PlanarCone(2 * np.pi), Euclidean(2)
        points = random_points(cone, 50, 20)
        for p in points:
            for q in points:
                expected = plane.distance(self.cartesian(cone, p),
                                          self.cartesian(cone, q))
                dist = cone.distance(p, q)
                assert dist == pytest.approx(expected, abs=1e-12 * (1 + expected))

    def test_midpoint_matches_plane(self):
        """geodesic midpoints agree with Euclidean midpoints"""
        cone, plane = PlanarCone(2 * np.pi), Euclidean(2)
        points = random_points(cone, 51, 20)
        for p, q in zip(points[0::2], points[1::2]):
            mid = self.cartesian(cone, cone.geodesic(p, q)(0.5))
            expected = plane.geodesic(self.cartesian(cone, p),
                                      self.cartesian(cone, q))(0.5)
            assert_array_almost_equal(mid.coords, expected.coords, decimal=10)

    def test_apex_separation(self):
        """opposite points are joined through the apex like a diameter"""
        cone = PlanarCone(2 * np.pi)
        p, q = cone.make_point(1.0, 0.0), cone.make_point(2.0, np.pi)
        assert cone.distance(p, q) == pytest.approx(3.0, abs=1e-12)


class TestCat0:
    def test_midpoint_inequality(self, built_ins):
        """midpoints of CAT(0) spaces satisfy the midpoint inequality"""
        spaces = [space for space in built_ins if is_cat0(space)]
        spaces.append(PlanarCone(2 * np.pi))
        assert len(spaces) == 5
        for seed, space in enumerate(spaces):
            points = random_points(space, 60 + seed, 60)
            for x, y, z in zip(points[0::3], points[1::3], points[2::3]):
                mid = space.geodesic(x, y)(0.5)
                left = space.distance(mid, z) ** 2
                right = (
                    0.5 * space.distance(x, z) ** 2
                    + 0.5 * space.distance(y, z) ** 2
                    - 0.25 * space.distance(x, y) ** 2
                )
                assert left <= right + 1e-9

    def test_sphere_violates_midpoint_inequality(self):
        """positive curvature breaks the midpoint inequality"""
        cap = SphereCap(0.5)
        x, y = cap.from_polar(0.5, np.pi / 2), cap.from_polar(0.5, -np.pi / 2)
        z = cap.from_polar(0.5, 0.0)
        mid = cap.geodesic(x, y)(0.5)
        left = cap.distance(mid, z) ** 2
        right = cap.distance(x, z) ** 2 - 0.25 * cap.distance(x, y) ** 2
        assert left > right
