# -*- coding: utf-8 -*-
"""
Model stratified spaces with exact distances, geodesics and log/exp maps.

Classes:

    Point, TangentVector, Geodesic
    LinearCone, BookCone, SectorCone
    Euclidean, SphereCap, OpenBook, Spider, PlanarCone, QuadrantComplement

Functions:
    distance, geodesic, log, exp, angle, inner, cone_distance, reach,
    tangent_cone, is_cat0, space_from_spec
"""

from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

from stratmean.utility_funcs import wrap_offset

TOL = 1e-12


class ChartMismatch(ValueError):
    """A point or tangent vector does not belong to the space's charts."""


class NonUniqueGeodesic(ValueError):
    """Two shortest paths of equal length join the endpoints."""


class CutLocus(ValueError):
    """The logarithm has no unique direction at this base."""


class NotExponentiable(ValueError):
    """The tangent vector leaves the chart before reaching its radius."""


class ApexVector(ValueError):
    """An angle was requested against the cone point."""


@dataclass(frozen=True)
class Point:
    """A location in a model space: chart identifier and chart coordinates."""

    stratum: str
    coords: Tuple[float, ...] = ()


@dataclass(frozen=True)
class TangentVector:
    """
    A tangent vector in polar form.

    Attributes
    ----------
        - is_apex (bool): true for the cone point (radius 0).
        - chart (str): direction chart id, "apex" for the cone point.
        - coords (tuple): unit direction coordinates (a single angle on sector
            charts).
        - radius (float): nonnegative length.
    """

    is_apex: bool
    chart: str = "apex"
    coords: Tuple[float, ...] = ()
    radius: float = 0.0

    def scaled(self, factor):
        """Return the vector with its radius multiplied by factor >= 0."""
        if factor < 0:
            raise ValueError(f"scale factor must be nonnegative, not {factor}")
        return tangent(self.chart, self.coords, self.radius * factor)

    def direction(self):
        """Return the unit vector in the same direction."""
        if self.is_apex:
            raise ApexVector("the apex has no direction")
        return TangentVector(False, self.chart, self.coords, 1.0)


APEX = TangentVector(True)


def tangent(chart, coords, radius):
    """
    Build a tangent vector, sending zero radius to the canonical apex.

    Raises a ValueError when a direction off a sector chart is not a unit
    vector to within TOL.
    """
    if radius <= 0.0 or chart == "apex":
        return APEX
    coords = tuple(float(c) for c in coords)
    if chart != "sector" and abs(float(np.linalg.norm(coords)) - 1.0) > TOL:
        raise ValueError(
            f"direction {list(coords)} on chart {chart} is not a unit vector"
        )
    return TangentVector(False, chart, coords, float(radius))


@dataclass(frozen=True)
class Geodesic:
    """A constant speed shortest path; call it with t in [0, 1]."""

    p: Point
    q: Point
    length: float
    evaluator: Callable = field(compare=False, repr=False)

    def __call__(self, t):
        """Evaluate the geodesic at parameter t."""
        if t <= 0.0:
            return self.p
        if t >= 1.0:
            return self.q
        return self.evaluator(t)


class _Cone:
    """Shared behaviour of the tangent cone models."""

    kind = None

    def inner(self, vec_v, vec_w):
        """Inner product of two tangent vectors."""
        if vec_v.is_apex or vec_w.is_apex:
            return 0.0
        return vec_v.radius * vec_w.radius * self.cos_angle(vec_v, vec_w)

    def angle(self, vec_v, vec_w):
        """Angle in [0, pi] between two non-apex vectors."""
        if vec_v.is_apex or vec_w.is_apex:
            raise ApexVector("angle is undefined against the apex")
        return float(np.arccos(np.clip(self.cos_angle(vec_v, vec_w), -1.0, 1.0)))

    def distance(self, vec_v, vec_w):
        """Conical distance between two tangent vectors."""
        return float(self.distance_matrix(self.encode_many([vec_v]),
                                          self.encode_many([vec_w]))[0, 0])

    def encode_many(self, vectors):
        """Encode a list of tangent vectors as rows of a float array."""
        rows = np.zeros((len(vectors), self.width))
        for i, vec in enumerate(vectors):
            rows[i] = self.encode(vec)
        return rows

    def decode_many(self, rows):
        """Decode rows back into tangent vectors."""
        return [self.decode(row) for row in np.atleast_2d(rows)]

    def pairing(self, weighted, vec_x):
        """Sum of weight * inner(Y, X) over (Y, weight) pairs."""
        return float(sum(w * self.inner(vec_y, vec_x) for vec_y, w in weighted))


class LinearCone(_Cone):
    """
    The linear tangent space R^dim at a smooth point.

    Directions use the chart "lin" with unit coordinates.
    """

    kind = "linear"

    def __init__(self, dim):
        """Construct the cone."""
        self.dim = dim
        self.width = dim

    def validate(self, vec):
        """Check a vector's chart."""
        if not vec.is_apex and (vec.chart != "lin" or len(vec.coords) != self.dim):
            raise ChartMismatch(f"{vec.chart} is not a direction of R^{self.dim}")

    def vector(self, vec):
        """Cartesian coordinates r*u of a tangent vector."""
        if vec.is_apex:
            return np.zeros(self.dim)
        self.validate(vec)
        return vec.radius * np.asarray(vec.coords, dtype=float)

    def from_vector(self, arr):
        """Tangent vector with Cartesian coordinates arr."""
        arr = np.asarray(arr, dtype=float)
        norm = float(np.linalg.norm(arr))
        if norm <= TOL * max(1.0, float(np.max(np.abs(arr), initial=0.0))):
            return APEX
        return tangent("lin", arr / norm, norm)

    def cos_angle(self, vec_v, vec_w):
        """Cosine of the angle between two directions."""
        self.validate(vec_v)
        self.validate(vec_w)
        return float(np.dot(vec_v.coords, vec_w.coords))

    def encode(self, vec):
        """Row encoding used for tables and distance matrices."""
        return self.vector(vec)

    def decode(self, row):
        """Inverse of encode."""
        return self.from_vector(row)

    def norms(self, rows):
        """Radii of encoded rows."""
        return np.linalg.norm(rows, axis=1)

    def inner_matrix(self, rows_a, rows_b):
        """Pairwise inner products of encoded rows."""
        return rows_a @ rows_b.T

    def distance_matrix(self, rows_a, rows_b):
        """Pairwise conical (here Euclidean) distances of encoded rows."""
        diff = rows_a[:, None, :] - rows_b[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))

    def random_direction(self, rng):
        """Uniform random unit direction."""
        vec = rng.standard_normal(self.dim)
        return tangent("lin", vec / np.linalg.norm(vec), 1.0)


class BookCone(_Cone):
    """
    Tangent cone at a spine point of an open book, or at a spider's apex.

    Directions on page j use the chart f"{prefix}{j}" with coordinates
    (a, b) where a > 0 is the normal component and b the spine part;
    pure spine directions use the chart "spine" with a = 0.
    """

    kind = "book"

    def __init__(self, pages, spine_dim, prefix):
        """Construct the cone."""
        self.pages = pages
        self.spine_dim = spine_dim
        self.prefix = prefix
        self.width = 2 + spine_dim

    def page_chart(self, page):
        """Chart id of a page index (0 is the spine)."""
        return "spine" if page == 0 else f"{self.prefix}{page}"

    def page_of(self, chart):
        """Page index of a chart id."""
        if chart == "spine" and self.spine_dim > 0:
            return 0
        if chart.startswith(self.prefix):
            try:
                page = int(chart[len(self.prefix):])
            except ValueError:
                page = -1
            if 1 <= page <= self.pages:
                return page
        raise ChartMismatch(f"{chart} is not a chart of this cone")

    def parts(self, vec):
        """Return (page, normal part, spine part) of r*direction."""
        if vec.is_apex:
            return 0, 0.0, np.zeros(self.spine_dim)
        page = self.page_of(vec.chart)
        coords = np.asarray(vec.coords, dtype=float)
        if len(coords) != 1 + self.spine_dim:
            raise ChartMismatch(f"{vec.chart} needs {1 + self.spine_dim} coordinates")
        return page, vec.radius * coords[0], vec.radius * coords[1:]

    def from_parts(self, page, normal, spine):
        """Tangent vector on page (0 for spine) with the given components."""
        spine = np.asarray(spine, dtype=float).reshape(self.spine_dim)
        normal = max(float(normal), 0.0)
        radius = float(np.hypot(normal, np.linalg.norm(spine)))
        if radius <= TOL:
            return APEX
        if page == 0 or normal <= TOL * radius:
            if self.spine_dim == 0:
                return APEX
            return tangent("spine", np.concatenate([[0.0], spine / radius]), radius)
        return tangent(self.page_chart(page),
                       np.concatenate([[normal / radius], spine / radius]), radius)

    def cos_angle(self, vec_v, vec_w):
        """Cosine of the angle, unfolding two distinct pages into a plane."""
        page_v, a_v, b_v = self.parts(vec_v.direction())
        page_w, a_w, b_w = self.parts(vec_w.direction())
        sign = 1.0 if page_v == page_w or page_v == 0 or page_w == 0 else -1.0
        return float(sign * a_v * a_w + np.dot(b_v, b_w))

    def encode(self, vec):
        """Row encoding (page, r*a, r*b)."""
        page, normal, spine = self.parts(vec)
        return np.concatenate([[page, normal], spine])

    def decode(self, row):
        """Inverse of encode."""
        return self.from_parts(int(round(row[0])), row[1], row[2:])

    def norms(self, rows):
        """Radii of encoded rows."""
        return np.sqrt(rows[:, 1] ** 2 + np.sum(rows[:, 2:] ** 2, axis=1))

    def _signs(self, rows_a, rows_b):
        page_a = rows_a[:, 0][:, None]
        page_b = rows_b[:, 0][None, :]
        same = (page_a == page_b) | (page_a == 0) | (page_b == 0)
        return np.where(same, 1.0, -1.0)

    def inner_matrix(self, rows_a, rows_b):
        """Pairwise inner products of encoded rows."""
        signs = self._signs(rows_a, rows_b)
        spine = rows_a[:, 2:] @ rows_b[:, 2:].T
        return signs * np.outer(rows_a[:, 1], rows_b[:, 1]) + spine

    def distance_matrix(self, rows_a, rows_b):
        """Pairwise distances, computed in the unfolded plane for stability."""
        signs = self._signs(rows_a, rows_b)
        normal = rows_a[:, 1][:, None] - signs * rows_b[:, 1][None, :]
        spine = rows_a[:, None, 2:] - rows_b[None, :, 2:]
        return np.sqrt(normal * normal + np.sum(spine * spine, axis=2))

    def random_direction(self, rng):
        """Random unit direction on a uniformly chosen page."""
        page = int(rng.integers(1, self.pages + 1))
        vec = rng.standard_normal(1 + self.spine_dim)
        vec[0] = abs(vec[0])
        vec /= np.linalg.norm(vec)
        return self.from_parts(page, vec[0], vec[1:])


class SectorCone(_Cone):
    """
    Tangent cone at the apex of a flat cone or sector.

    Directions use the chart "sector" with a single angle coordinate.
    """

    kind = "sector"

    def __init__(self, total_angle, periodic):
        """Construct the cone."""
        self.total_angle = total_angle
        self.periodic = periodic
        self.width = 2

    def normalize(self, phi):
        """Bring an angle into the chart's domain."""
        if self.periodic:
            return float(np.mod(phi, self.total_angle))
        if phi < -1e-9 or phi > self.total_angle + 1e-9:
            raise ChartMismatch(f"angle {phi} outside [0, {self.total_angle}]")
        return float(min(max(phi, 0.0), self.total_angle))

    def separation(self, phi, psi):
        """Angular separation along the chart (not capped)."""
        return np.abs(wrap_offset(phi, psi, self.total_angle, self.periodic))

    def polar(self, vec):
        """Return (radius, angle) of a vector, (0, 0) at the apex."""
        if vec.is_apex:
            return 0.0, 0.0
        if vec.chart != "sector" or len(vec.coords) != 1:
            raise ChartMismatch(f"{vec.chart} is not a sector direction")
        return vec.radius, vec.coords[0]

    def from_polar(self, radius, phi):
        """Tangent vector with the given polar coordinates."""
        return tangent("sector", (self.normalize(phi),), radius)

    def cos_angle(self, vec_v, vec_w):
        """Cosine of the capped angular separation."""
        return float(np.cos(self.angle(vec_v, vec_w)))

    def angle(self, vec_v, vec_w):
        """Angular separation capped at pi."""
        if vec_v.is_apex or vec_w.is_apex:
            raise ApexVector("angle is undefined against the apex")
        return float(min(self.separation(self.polar(vec_v)[1], self.polar(vec_w)[1]),
                         np.pi))

    def encode(self, vec):
        """Row encoding (r, phi)."""
        return np.asarray(self.polar(vec), dtype=float)

    def decode(self, row):
        """Inverse of encode."""
        return self.from_polar(row[0], row[1])

    def norms(self, rows):
        """Radii of encoded rows."""
        return rows[:, 0]

    def _capped(self, rows_a, rows_b):
        sep = self.separation(rows_a[:, 1][:, None], rows_b[:, 1][None, :])
        return np.minimum(sep, np.pi)

    def inner_matrix(self, rows_a, rows_b):
        """Pairwise inner products of encoded rows."""
        cosines = np.cos(self._capped(rows_a, rows_b))
        return np.outer(rows_a[:, 0], rows_b[:, 0]) * cosines

    def distance_matrix(self, rows_a, rows_b):
        """Pairwise conical distances (stable half-angle form)."""
        r_a, r_b = rows_a[:, 0][:, None], rows_b[:, 0][None, :]
        half = np.sin(self._capped(rows_a, rows_b) / 2)
        return np.sqrt(np.maximum((r_a - r_b) ** 2 + 4 * r_a * r_b * half * half, 0.0))

    def random_direction(self, rng):
        """Uniform random direction."""
        return self.from_polar(1.0, rng.uniform(0.0, self.total_angle))


class SpaceModel:
    """
    Base class of the built-in model spaces.

    Methods
    -------
        - validate_point(p): canonical form of p, or ChartMismatch.
        - distance(p, q), geodesic(p, q, tie_break), log(base, p, tie_break),
            exp(base, vec): the metric and its exponential charts.
        - tangent_cone(base): LinearCone, BookCone or SectorCone at base.
        - reach(base): radius within which every vector is exponentiable.
        - lambda_terms(base, x): (u, kappa) with second derivative of
            half squared distance to x along theta equal to
            kappa + (1 - kappa) (theta . u)^2, for linear cones.
        - origin(): the distinguished point (apex, origin or north pole).
        - spec(): JSON description.
    """

    kind = None
    cat0 = True

    def origin(self):
        """Return the distinguished point of the space."""
        raise NotImplementedError

    def spec(self):
        """Return the JSON description of the space."""
        return {"kind": self.kind}

    def __eq__(self, other):
        """Spaces compare by their kind and parameters."""
        return isinstance(other, SpaceModel) and self.spec() == other.spec()

    def __hash__(self):
        """Hash consistent with __eq__."""
        return hash(tuple(sorted(self.spec().items())))

    def __repr__(self):
        """Readable form."""
        return f"{type(self).__name__}({self.spec()})"

    def lambda_terms(self, base, point):
        """Flat default: the half squared distance has identity Hessian."""
        return np.zeros(self.tangent_cone(base).dim), 1.0


class Euclidean(SpaceModel):
    """Euclidean space R^d with the chart "R"."""

    kind = "euclidean"

    def __init__(self, d):
        """Construct R^d."""
        if int(d) < 1:
            raise ValueError(f"dimension must be at least 1, not {d}")
        self.d = int(d)
        self._cone = LinearCone(self.d)

    def spec(self):
        """Return the JSON description of the space."""
        return {"kind": self.kind, "d": self.d}

    def origin(self):
        """Return the origin."""
        return Point("R", (0.0,) * self.d)

    def validate_point(self, point):
        """Check the chart and return the canonical point."""
        if point.stratum != "R" or len(point.coords) != self.d:
            raise ChartMismatch(f"{point} is not a point of R^{self.d}")
        return Point("R", tuple(float(c) for c in point.coords))

    def _arr(self, point):
        return np.asarray(self.validate_point(point).coords, dtype=float)

    def distance(self, p, q):
        """Euclidean distance."""
        return float(np.linalg.norm(self._arr(p) - self._arr(q)))

    def geodesic(self, p, q, tie_break=False):
        """Straight segment."""
        a, b = self._arr(p), self._arr(q)
        return Geodesic(self.validate_point(p), self.validate_point(q),
                        float(np.linalg.norm(b - a)),
                        lambda t: Point("R", tuple((1 - t) * a + t * b)))

    def log(self, base, point, tie_break=False):
        """Difference vector."""
        return self._cone.from_vector(self._arr(point) - self._arr(base))

    def exp(self, base, vec):
        """Translate by the vector."""
        return Point("R", tuple(self._arr(base) + self._cone.vector(vec)))

    def tangent_cone(self, base):
        """The tangent space R^d."""
        return self._cone

    def reach(self, base):
        """Every vector is exponentiable."""
        return np.inf

    def random_point(self, rng, scale=1.0):
        """Gaussian random point."""
        return Point("R", tuple(scale * rng.standard_normal(self.d)))


class SphereCap(SpaceModel):
    """
    The unit 2-sphere with measure support in a cap about the north pole.

    Points are unit vectors in the chart "S2". Exponentials must stay in the
    open upper hemisphere.
    """

    kind = "sphere_cap"
    cat0 = False

    def __init__(self, support_radius):
        """Construct the cap model."""
        if not 0.0 < support_radius < np.pi / 2:
            raise ValueError(
                f"support radius must lie in (0, pi/2), not {support_radius}"
            )
        self.support_radius = float(support_radius)
        self._cone = LinearCone(2)

    def spec(self):
        """Return the JSON description of the space."""
        return {"kind": self.kind, "support_radius": self.support_radius}

    def origin(self):
        """Return the north pole."""
        return Point("S2", (0.0, 0.0, 1.0))

    @staticmethod
    def from_polar(colatitude, longitude):
        """Point at the given colatitude and longitude."""
        return Point("S2", (float(np.sin(colatitude) * np.cos(longitude)),
                            float(np.sin(colatitude) * np.sin(longitude)),
                            float(np.cos(colatitude))))

    def validate_point(self, point):
        """Check the chart and return the normalized point."""
        if point.stratum != "S2" or len(point.coords) != 3:
            raise ChartMismatch(f"{point} is not a point of the sphere")
        arr = np.asarray(point.coords, dtype=float)
        norm = np.linalg.norm(arr)
        if abs(norm - 1.0) > 1e-9:
            raise ChartMismatch(f"{point} is not on the unit sphere")
        return Point("S2", tuple(arr / norm))

    def _arr(self, point):
        return np.asarray(self.validate_point(point).coords, dtype=float)

    def colatitude(self, point):
        """Angular distance from the north pole."""
        return float(np.arccos(np.clip(self._arr(point)[2], -1.0, 1.0)))

    @staticmethod
    def frame(base):
        """Tangent frame at base: minimal rotation of the north pole frame."""
        e_1, e_2 = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
        axis = np.cross([0.0, 0.0, 1.0], base)
        sin_a, cos_a = np.linalg.norm(axis), base[2]
        if sin_a < 1e-15:
            return (e_1, e_2) if cos_a > 0 else (e_1, -e_2)
        k = axis / sin_a

        def rotate(vec):
            along = k * np.dot(k, vec) * (1 - cos_a)
            return vec * cos_a + np.cross(k, vec) * sin_a + along

        return rotate(e_1), rotate(e_2)

    def distance(self, p, q):
        """Great circle distance."""
        a, b = self._arr(p), self._arr(q)
        return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))

    def _log_arr(self, base, point, tie_break):
        dot = float(np.dot(base, point))
        perp = point - dot * base
        norm = float(np.linalg.norm(perp))
        dist = float(np.arctan2(norm, dot))
        e_1, e_2 = self.frame(base)
        if norm <= 1e-15:
            if dot > 0:
                return APEX
            if not tie_break:
                raise CutLocus("antipodal points have no unique logarithm")
            return tangent("lin", (1.0, 0.0), np.pi)
        coords = np.array([np.dot(perp, e_1), np.dot(perp, e_2)])
        return tangent("lin", coords / np.linalg.norm(coords), dist)

    def _exp_arr(self, base, vec):
        if vec.is_apex:
            return base
        e_1, e_2 = self.frame(base)
        unit = vec.coords[0] * e_1 + vec.coords[1] * e_2
        out = np.cos(vec.radius) * base + np.sin(vec.radius) * unit
        return out / np.linalg.norm(out)

    def geodesic(self, p, q, tie_break=False):
        """Great circle arc; antipodes are non-unique unless tie-broken."""
        a, b = self._arr(p), self._arr(q)
        try:
            vec = self._log_arr(a, b, tie_break)
        except CutLocus:
            raise NonUniqueGeodesic("antipodal points are joined by many arcs")
        return Geodesic(Point("S2", tuple(a)), Point("S2", tuple(b)), vec.radius,
                        lambda t: Point("S2", tuple(self._exp_arr(a, vec.scaled(t)))))

    def log(self, base, point, tie_break=False):
        """Spherical logarithm in the frame at base."""
        return self._log_arr(self._arr(base), self._arr(point), tie_break)

    def exp(self, base, vec):
        """Spherical exponential; must stay in the open upper hemisphere."""
        self._cone.validate(vec)
        out = self._exp_arr(self._arr(base), vec)
        if out[2] <= 1e-12 or vec.radius >= np.pi:
            raise NotExponentiable(f"exp of radius {vec.radius} leaves the hemisphere")
        return Point("S2", tuple(out))

    def tangent_cone(self, base):
        """The tangent plane with the minimal-rotation frame."""
        return self._cone

    def reach(self, base):
        """Distance from base to the equator."""
        return max(np.pi / 2 - self.colatitude(base), 0.0)

    def lambda_terms(self, base, point):
        """Radial direction and d cot d for the spherical Hessian."""
        vec = self.log(base, point)
        if vec.is_apex:
            return np.zeros(2), 1.0
        dist = vec.radius
        kappa = 1.0 - dist * dist / 3 if dist < 1e-6 else dist / np.tan(dist)
        return np.asarray(vec.coords, dtype=float), float(kappa)

    def random_point(self, rng, scale=None):
        """Uniform-in-angle point within the support cap."""
        scale = self.support_radius if scale is None else scale
        return self.from_polar(rng.uniform(0.0, scale), rng.uniform(0.0, 2 * np.pi))


class OpenBook(SpaceModel):
    """
    The open book: k half-spaces R_+ x R^p glued along the spine R^p.

    Points are ("spine", (0, v...)) or (f"page{j}", (u, v...)) with u > 0.
    """

    kind = "open_book"
    prefix = "page"
    spine_label = "spine"

    def __init__(self, k, p):
        """Construct the book."""
        if int(k) < 3:
            raise ValueError(f"page count must be at least 3, not {k}")
        if int(p) < 1:
            raise ValueError(f"spine dimension must be at least 1, not {p}")
        self._setup(int(k), int(p))

    def _setup(self, k, p):
        self.k, self.p = k, p
        self._spine_cone = BookCone(k, p, self.prefix)
        self._page_cone = LinearCone(1 + p)

    def spec(self):
        """Return the JSON description of the space."""
        return {"kind": self.kind, "k": self.k, "p": self.p}

    def origin(self):
        """Return the spine origin."""
        return self.make_point(0, 0.0, np.zeros(self.p))

    def split_point(self, point):
        """Return (page, u, v) of a point, page 0 for the spine."""
        coords = np.asarray(point.coords, dtype=float)
        if point.stratum == self.spine_label:
            if self.p == 0 and len(coords) == 0:
                return 0, 0.0, np.zeros(0)
            if len(coords) == 1 + self.p and abs(coords[0]) <= TOL:
                return 0, 0.0, coords[1:]
            raise ChartMismatch(f"{point} has malformed spine coordinates")
        page = -1
        if point.stratum != "spine":
            page = self._spine_cone.page_of(point.stratum)
        if page < 1 or len(coords) != 1 + self.p or coords[0] < 0:
            raise ChartMismatch(f"{point} is not a point of this {self.kind}")
        return page, float(coords[0]), coords[1:]

    def make_point(self, page, u, v):
        """Canonical point on page (0 for the spine) at height u, spine v."""
        if page == 0 or u <= TOL:
            if self.p == 0:
                return Point(self.spine_label, ())
            return Point(self.spine_label, (0.0,) + tuple(float(c) for c in v))
        return Point(f"{self.prefix}{page}", (float(u),) + tuple(float(c) for c in v))

    def validate_point(self, point):
        """Check the chart and return the canonical point."""
        return self.make_point(*self.split_point(point))

    def distance(self, p, q):
        """Distance, unfolding two distinct pages into a plane."""
        page_p, u_p, v_p = self.split_point(p)
        page_q, u_q, v_q = self.split_point(q)
        same = page_p == page_q or page_p == 0 or page_q == 0
        normal = u_p - u_q if same else u_p + u_q
        return float(np.hypot(normal, np.linalg.norm(v_p - v_q)))

    def geodesic(self, p, q, tie_break=False):
        """Straight segment in the page, or in the two unfolded pages."""
        page_p, u_p, v_p = self.split_point(p)
        page_q, u_q, v_q = self.split_point(q)
        length = self.distance(p, q)
        if page_p == page_q or page_p == 0 or page_q == 0:
            page = max(page_p, page_q)

            def evaluator(t):
                u_t, v_t = (1 - t) * u_p + t * u_q, (1 - t) * v_p + t * v_q
                return self.make_point(page, u_t, v_t)

        else:

            def evaluator(t):
                x = -(1 - t) * u_p + t * u_q
                return self.make_point(page_p if x < 0 else page_q, abs(x),
                                  (1 - t) * v_p + t * v_q)

        start = self.make_point(page_p, u_p, v_p)
        return Geodesic(start, self.make_point(page_q, u_q, v_q), length, evaluator)

    def log(self, base, point, tie_break=False):
        """Initial velocity of the geodesic from base to point."""
        page_b, u_b, v_b = self.split_point(base)
        page_x, u_x, v_x = self.split_point(point)
        if page_b == 0:
            return self._spine_cone.from_parts(page_x, u_x, v_x - v_b)
        normal = u_x - u_b if page_x in (0, page_b) else -u_x - u_b
        return self._page_cone.from_vector(np.concatenate([[normal], v_x - v_b]))

    def exp(self, base, vec):
        """Exponential; a page point cannot cross the spine."""
        page_b, u_b, v_b = self.split_point(base)
        if page_b == 0:
            page, normal, spine = self._spine_cone.parts(vec)
            return self.make_point(page, normal, v_b + spine)
        arr = self._page_cone.vector(vec)
        u_new = u_b + arr[0]
        if u_new < -TOL * max(1.0, vec.radius):
            raise NotExponentiable(f"exp of radius {vec.radius} crosses the spine")
        return self.make_point(page_b, max(u_new, 0.0), v_b + arr[1:])

    def tangent_cone(self, base):
        """Book cone on the spine, linear cone on a page."""
        page, _, _ = self.split_point(base)
        return self._spine_cone if page == 0 else self._page_cone

    def reach(self, base):
        """Infinite on the spine, the distance to it on a page."""
        page, u_b, _ = self.split_point(base)
        return np.inf if page == 0 else u_b

    def random_point(self, rng, scale=1.0):
        """Random point on a random page, or on the spine."""
        page = int(rng.integers(0, self.k + 1))
        spine = scale * rng.standard_normal(self.p)
        return self.make_point(page, scale * rng.exponential(), spine)


class Spider(OpenBook):
    """The spider: k rays ("leg1".."legk") glued at the "apex"."""

    kind = "spider"
    prefix = "leg"
    spine_label = "apex"

    def __init__(self, k):
        """Construct the spider."""
        if int(k) < 3:
            raise ValueError(f"leg count must be at least 3, not {k}")
        self._setup(int(k), 0)

    def spec(self):
        """Return the JSON description of the space."""
        return {"kind": self.kind, "k": self.k}

    def point(self, leg, radius):
        """Point at distance radius along leg."""
        return self.make_point(leg, radius, ())

    def random_point(self, rng, scale=1.0):
        """Random point on a random leg."""
        leg = int(rng.integers(1, self.k + 1))
        return self.make_point(leg, scale * rng.exponential(), ())


class _FlatSector(SpaceModel):
    """Shared geometry of flat cones and sectors in polar charts (r, phi)."""

    total_angle = None
    periodic = None
    apex_label = "apex"
    chart_label = "cone"

    def origin(self):
        """Return the apex."""
        return Point(self.apex_label, ())

    def polar(self, point):
        """Return (radius, angle) of a point, (0, 0) at the apex."""
        if point.stratum == self.apex_label and len(point.coords) == 0:
            return 0.0, 0.0
        coords = point.coords
        if point.stratum != self.chart_label or len(coords) != 2 or coords[0] < 0:
            raise ChartMismatch(f"{point} is not a point of {self.kind}")
        return float(coords[0]), self._sector.normalize(coords[1])

    def make_point(self, radius, phi):
        """Canonical point with the given polar coordinates."""
        if radius <= TOL:
            return Point(self.apex_label, ())
        return Point(self.chart_label, (float(radius), self._sector.normalize(phi)))

    def polar_point(self, radius, phi):
        """Point with polar coordinates (radius, phi)."""
        return self.make_point(radius, phi)

    def validate_point(self, point):
        """Check the chart and return the canonical point."""
        return self.make_point(*self.polar(point))

    def distance(self, p, q):
        """Law of cosines with the separation capped at pi."""
        r_p, phi_p = self.polar(p)
        r_q, phi_q = self.polar(q)
        sep = min(float(self._sector.separation(phi_p, phi_q)), np.pi)
        half = np.sin(sep / 2)
        return float(np.sqrt(max((r_p - r_q) ** 2 + 4 * r_p * r_q * half * half, 0.0)))

    def _through_apex(self, r_p, phi_p, r_q, phi_q):
        if r_p <= TOL or r_q <= TOL:
            return True
        return self._sector.separation(phi_p, phi_q) >= np.pi

    def geodesic(self, p, q, tie_break=False):
        """Straight unfolded segment, or the broken path through the apex."""
        r_p, phi_p = self.polar(p)
        r_q, phi_q = self.polar(q)
        length = self.distance(p, q)
        if self._through_apex(r_p, phi_p, r_q, phi_q):

            def evaluator(t):
                travelled = t * (r_p + r_q)
                if travelled < r_p:
                    return self.make_point(r_p - travelled, phi_p)
                return self.make_point(travelled - r_p, phi_q)

        else:
            offset = float(wrap_offset(phi_q, phi_p, self.total_angle, self.periodic))
            end = r_q * np.array([np.cos(offset), np.sin(offset)])

            def evaluator(t):
                pos = (1 - t) * np.array([r_p, 0.0]) + t * end
                turn = np.arctan2(pos[1], pos[0])
                return self.make_point(np.linalg.norm(pos), phi_p + turn)

        start = self.make_point(r_p, phi_p)
        return Geodesic(start, self.make_point(r_q, phi_q), length, evaluator)

    def tangent_cone(self, base):
        """Sector cone at the apex, linear cone elsewhere."""
        return self._sector if self.polar(base)[0] <= TOL else self._plane

    def reach(self, base):
        """Infinite at the apex, the apex distance elsewhere."""
        radius = self.polar(base)[0]
        return np.inf if radius <= TOL else radius


class PlanarCone(_FlatSector):
    """
    The flat cone of total angle Theta >= 2 pi, charts "apex" and "cone".

    Away from the apex, tangent vectors use the local frame (radial,
    angular).
    """

    kind = "planar_cone"
    periodic = True

    def __init__(self, angle):
        """Construct the cone."""
        if angle < 2 * np.pi - 1e-12:
            raise ValueError(f"cone angle must be at least 2 pi, not {angle}")
        self.total_angle = float(angle)
        self._sector = SectorCone(self.total_angle, True)
        self._plane = LinearCone(2)

    def spec(self):
        """Return the JSON description of the space."""
        return {"kind": self.kind, "angle": self.total_angle}

    def log(self, base, point, tie_break=False):
        """Logarithm in the sector chart or the local (radial, angular) frame."""
        r_b, phi_b = self.polar(base)
        r_x, phi_x = self.polar(point)
        if r_b <= TOL:
            return self._sector.from_polar(r_x, phi_x)
        if r_x <= TOL or self._sector.separation(phi_x, phi_b) >= np.pi:
            return tangent("lin", (-1.0, 0.0), r_b + r_x)
        offset = float(wrap_offset(phi_x, phi_b, self.total_angle, True))
        arr = [r_x * np.cos(offset) - r_b, r_x * np.sin(offset)]
        return self._plane.from_vector(arr)

    def exp(self, base, vec):
        """Exponential; straight lines may not pass through the apex."""
        r_b, phi_b = self.polar(base)
        if r_b <= TOL:
            radius, phi = self._sector.polar(vec)
            return self.make_point(radius, phi)
        end = np.array([r_b, 0.0]) + self._plane.vector(vec)
        if vec.radius > r_b + TOL and abs(vec.coords[1]) <= TOL and vec.coords[0] < 0:
            raise NotExponentiable("the straight line runs through the apex")
        return self.make_point(np.linalg.norm(end), phi_b + np.arctan2(end[1], end[0]))

    def lambda_terms(self, base, point):
        """Apex-routed atoms bend the half squared distance radially."""
        r_b, phi_b = self.polar(base)
        r_x, phi_x = self.polar(point)
        if r_x > TOL and self._sector.separation(phi_x, phi_b) >= np.pi:
            return np.array([1.0, 0.0]), (r_b + r_x) / r_b
        return np.zeros(2), 1.0

    def random_point(self, rng, scale=1.0):
        """Random point with exponential radius and uniform angle."""
        phi = rng.uniform(0.0, self.total_angle)
        return self.make_point(scale * rng.exponential(), phi)


class QuadrantComplement(_FlatSector):
    """
    The plane minus the open quadrant {x < 0, y < 0}, with its path metric.

    The chart "sector" measures phi in [0, 3 pi/2] counterclockwise from the
    ray (0, -1); Cartesian (x, y) = r (sin phi, -cos phi). Away from the
    "corner", tangent vectors use Cartesian coordinates.
    """

    kind = "quadrant_complement"
    cat0 = False
    periodic = False
    apex_label = "corner"
    chart_label = "sector"

    def __init__(self):
        """Construct the region."""
        self.total_angle = 1.5 * np.pi
        self._sector = SectorCone(self.total_angle, False)
        self._plane = LinearCone(2)

    @staticmethod
    def cartesian(radius, phi):
        """Cartesian coordinates of polar (radius, phi)."""
        return radius * np.array([np.sin(phi), -np.cos(phi)])

    def from_cartesian(self, x, y):
        """Point with Cartesian coordinates (x, y)."""
        radius = float(np.hypot(x, y))
        if radius <= TOL:
            return Point(self.apex_label, ())
        phi = float(np.mod(np.arctan2(y, x) + np.pi / 2, 2 * np.pi))
        if phi > self.total_angle + 1e-12:
            raise ChartMismatch(f"({x}, {y}) lies in the removed quadrant")
        return self.make_point(radius, min(phi, self.total_angle))

    def _xy(self, point):
        return self.cartesian(*self.polar(point))

    def log(self, base, point, tie_break=False):
        """Logarithm in the sector chart or the Cartesian chart."""
        r_b, phi_b = self.polar(base)
        r_x, phi_x = self.polar(point)
        if r_b <= TOL:
            return self._sector.from_polar(r_x, phi_x)
        xy_b = self.cartesian(r_b, phi_b)
        if r_x > TOL and self._sector.separation(phi_x, phi_b) > np.pi:
            return tangent("lin", -xy_b / r_b, r_b + r_x)
        return self._plane.from_vector(self.cartesian(r_x, phi_x) - xy_b)

    def exp(self, base, vec):
        """Exponential; the segment must avoid the removed quadrant."""
        r_b, phi_b = self.polar(base)
        if r_b <= TOL:
            radius, phi = self._sector.polar(vec)
            return self.make_point(radius, phi)
        start = self.cartesian(r_b, phi_b)
        step = self._plane.vector(vec)
        if self._enters_hole(start, step):
            raise NotExponentiable("the segment enters the removed quadrant")
        end = start + step
        # snap round-off on the boundary rays
        end = np.where(np.abs(end) <= 1e-12 * max(1.0, r_b + vec.radius), 0.0, end)
        return self.from_cartesian(end[0], end[1])

    @staticmethod
    def _enters_hole(start, step):
        """Whether start + t step, t in [0, 1], meets the open quadrant."""
        low, high = 0.0, 1.0
        for pos, vel in zip(start, step):
            if abs(vel) <= TOL:
                if pos >= -TOL:
                    return False
                continue
            root = -pos / vel
            if vel > 0:
                high = min(high, root)
            else:
                low = max(low, root)
        return high - low > 1e-12

    def lambda_terms(self, base, point):
        """Corner-routed atoms bend the half squared distance radially."""
        r_b, phi_b = self.polar(base)
        r_x, phi_x = self.polar(point)
        if r_x > TOL and self._sector.separation(phi_x, phi_b) > np.pi:
            return self.cartesian(1.0, phi_b), (r_b + r_x) / r_b
        return np.zeros(2), 1.0

    def reach(self, base):
        """Distance from base to the removed quadrant."""
        r_b, phi_b = self.polar(base)
        if r_b <= TOL:
            return np.inf
        x, y = self.cartesian(r_b, phi_b)
        return float(np.hypot(max(x, 0.0), max(y, 0.0)))

    def random_point(self, rng, scale=1.0):
        """Random point with exponential radius and uniform angle."""
        phi = rng.uniform(0.0, self.total_angle)
        return self.make_point(scale * rng.exponential(), phi)


def distance(space, p, q):
    """Distance between two points of a space."""
    return space.distance(p, q)


def geodesic(space, p, q, tie_break=False):
    """Shortest path from p to q; tie_break picks a canonical path on ties."""
    return space.geodesic(p, q, tie_break)


def log(space, base, p, tie_break=False):
    """Logarithm of p at base."""
    return space.log(base, p, tie_break)


def exp(space, base, vec):
    """Exponential of vec at base."""
    return space.exp(base, vec)


def tangent_cone(space, base):
    """Tangent cone model of space at base."""
    return space.tangent_cone(base)


def reach(space, base):
    """Radius within which every tangent vector at base is exponentiable."""
    return space.reach(base)


def is_cat0(space):
    """Whether the space is CAT(0)."""
    return space.cat0


def angle(space, base, vec_v, vec_w):
    """
    Angle between two tangent vectors at base.

    Parameters
    ----------
        - space (SpaceModel): the model space.
        - base (Point): base point.
        - vec_v, vec_w (TangentVector): non-apex vectors at base.

    Returns
    -------
        - angle: link distance capped at pi.

    Raises
    ------
        - ApexVector if either vector is the apex.
    """
    return space.tangent_cone(base).angle(vec_v, vec_w)


def inner(space, base, vec_v, vec_w):
    """Inner product |V||W| cos(angle); zero against the apex."""
    return space.tangent_cone(base).inner(vec_v, vec_w)


def cone_distance(space, base, vec_v, vec_w):
    """Conical distance sqrt(|V|^2 + |W|^2 - 2 <V, W>)."""
    return space.tangent_cone(base).distance(vec_v, vec_w)


_SPACE_KEYS = {
    "euclidean": (Euclidean, ["d"]),
    "sphere_cap": (SphereCap, ["support_radius"]),
    "spider": (Spider, ["k"]),
    "open_book": (OpenBook, ["k", "p"]),
    "planar_cone": (PlanarCone, ["angle"]),
    "quadrant_complement": (QuadrantComplement, []),
}


def space_from_spec(spec):
    """
    Build a space from its JSON description.

    Parameters
    ----------
        - spec (dict): e.g. {"kind": "spider", "k": 3}.

    Returns
    -------
        - space (SpaceModel)

    Raises
    ------
        - ValueError on unknown kinds, unknown keys or missing keys.
    """
    kind = spec.get("kind")
    if kind not in _SPACE_KEYS:
        raise ValueError(f"unknown space kind {kind}")
    cls, keys = _SPACE_KEYS[kind]
    extra = sorted(set(spec) - set(keys) - {"kind"})
    if extra:
        raise ValueError(f"unknown key {extra[0]} in space spec")
    missing = [key for key in keys if key not in spec]
    if missing:
        raise ValueError(f"space spec for {kind} needs {missing[0]}")
    return cls(*[spec[key] for key in keys])
