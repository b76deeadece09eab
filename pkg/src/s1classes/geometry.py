"""Planar domains, the boundary-collapsed semi-metric and uniform node grids."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridError, ParameterError, ResolutionError


class _BoundaryToken:
    """The boundary collapsed to a single point."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BOUNDARY"

    def __reduce__(self):
        return (_BoundaryToken, ())


BOUNDARY = _BoundaryToken()

_TOL = 1e-12


def is_boundary(x) -> bool:
    return x is BOUNDARY


def _pts(x):
    P = np.asarray(x, dtype=float)
    if P.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of size 2")
    return P


def _seg_dist(P, A, B):
    """Distance from points P (...,2) to segments A[k]-B[k]; returns min over k."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    d = B - A
    L2 = np.maximum((d**2).sum(-1), 1e-300)
    rel = P[..., None, :] - A
    t = np.clip((rel * d).sum(-1) / L2, 0.0, 1.0)
    proj = A + t[..., None] * d
    return np.sqrt(((P[..., None, :] - proj) ** 2).sum(-1)).min(-1)


def _arc_dist(P, c, r, a0, a1):
    """Distance from P to the circle arc of centre c, radius r, angles [a0, a1] (ccw)."""
    rel = P - np.asarray(c, float)
    rho = np.hypot(rel[..., 0], rel[..., 1])
    psi = np.mod(np.arctan2(rel[..., 1], rel[..., 0]) - a0, 2 * np.pi)
    inside = psi <= (a1 - a0)
    e0 = np.asarray(c) + r * np.array([math.cos(a0), math.sin(a0)])
    e1 = np.asarray(c) + r * np.array([math.cos(a1), math.sin(a1)])
    dend = np.minimum(np.sqrt(((P - e0) ** 2).sum(-1)), np.sqrt(((P - e1) ** 2).sum(-1)))
    return np.where(inside, np.abs(rho - r), dend)


@dataclass(frozen=True)
class Domain:
    """A bounded open planar region.

    kind is one of 'disc', 'rectangle', 'polygon', 'dumbbell'; params holds the
    shape data as plain tuples so the object is hashable and immutable.
    """

    kind: str
    params: tuple = field(default=())

    # constructors -------------------------------------------------------
    @staticmethod
    def disc(center=(0.0, 0.0), radius=1.0) -> "Domain":
        if not radius > 0:
            raise ParameterError("disc radius must be positive")
        return Domain("disc", (tuple(map(float, center)), float(radius)))

    @staticmethod
    def rectangle(x_range=(0.0, 1.0), y_range=(0.0, 1.0)) -> "Domain":
        x0, x1 = map(float, x_range)
        y0, y1 = map(float, y_range)
        if not (x1 > x0 and y1 > y0):
            raise ParameterError("rectangle ranges must be increasing")
        return Domain("rectangle", ((x0, x1), (y0, y1)))

    @staticmethod
    def polygon(vertices) -> "Domain":
        V = np.asarray(vertices, float)
        if V.ndim != 2 or V.shape[0] < 3 or V.shape[1] != 2:
            raise ParameterError("polygon needs at least three 2-d vertices")
        area = 0.5 * np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1])
        if area <= _TOL:
            raise ParameterError("polygon must be non-degenerate and counterclockwise")
        if not _is_simple(V):
            raise ParameterError("polygon must be simple")
        return Domain("polygon", tuple(map(tuple, V.tolist())))

    @staticmethod
    def dumbbell(eps: float) -> "Domain":
        if not 0 < eps < 0.25:
            raise ParameterError("dumbbell neck half-width must lie in (0, 1/4)")
        return Domain("dumbbell", (float(eps),))

    # serialisation ------------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "disc":
            return {"shape": "disc", "params": {"center": list(self.params[0]), "radius": self.params[1]}}
        if self.kind == "rectangle":
            return {"shape": "rectangle", "params": {"x_range": list(self.params[0]), "y_range": list(self.params[1])}}
        if self.kind == "polygon":
            return {"shape": "polygon", "params": {"vertices": [list(v) for v in self.params]}}
        return {"shape": "dumbbell", "params": {"eps": self.params[0]}}

    @staticmethod
    def from_json(obj: dict) -> "Domain":
        try:
            shape = obj["shape"]
            p = obj.get("params", {})
            if shape == "disc":
                return Domain.disc(p.get("center", (0.0, 0.0)), p.get("radius", 1.0))
            if shape == "rectangle":
                return Domain.rectangle(p["x_range"], p["y_range"])
            if shape == "polygon":
                return Domain.polygon(p["vertices"])
            if shape == "dumbbell":
                return Domain.dumbbell(p["eps"])
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed domain specification: {exc}") from exc
        raise ParameterError(f"unknown shape {obj.get('shape')!r}")

    # queries ------------------------------------------------------------
    @property
    def bbox(self):
        """((xmin, xmax), (ymin, ymax))"""
        if self.kind == "disc":
            (cx, cy), r = self.params
            return (cx - r, cx + r), (cy - r, cy + r)
        if self.kind == "rectangle":
            return self.params
        if self.kind == "polygon":
            V = np.asarray(self.params)
            return (V[:, 0].min(), V[:, 0].max()), (V[:, 1].min(), V[:, 1].max())
        return (-4.0, 4.0), (-1.0, 1.0)

    @property
    def area(self) -> float:
        if self.kind == "disc":
            return math.pi * self.params[1] ** 2
        if self.kind == "rectangle":
            (x0, x1), (y0, y1) = self.params
            return (x1 - x0) * (y1 - y0)
        if self.kind == "polygon":
            V = np.asarray(self.params)
            return 0.5 * float(np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1]))
        e = self.params[0]
        gap = 6 * e - 2 * (e * math.sqrt(1 - e * e) + math.asin(e))
        return 3 * math.pi + 2 * gap

    def contains(self, x):
        """Membership in the open region; vectorised over a trailing axis of size 2."""
        P = _pts(x)
        X, Y = P[..., 0], P[..., 1]
        if self.kind == "disc":
            (cx, cy), r = self.params
            out = (X - cx) ** 2 + (Y - cy) ** 2 < r * r
        elif self.kind == "rectangle":
            (x0, x1), (y0, y1) = self.params
            out = (X > x0) & (X < x1) & (Y > y0) & (Y < y1)
        elif self.kind == "polygon":
            V = np.asarray(self.params)
            out = _point_in_polygon(X, Y, V) & (_seg_dist(P, V, np.roll(V, -1, axis=0)) > _TOL)
        else:
            e = self.params[0]
            out = (np.abs(Y) < e) & (np.abs(X) < 3)
            for c in (-3.0, 0.0, 3.0):
                out |= (X - c) ** 2 + Y**2 < 1
        return bool(out) if out.ndim == 0 else out

    def _raw_boundary_distance(self, P):
        X, Y = P[..., 0], P[..., 1]
        if self.kind == "disc":
            (cx, cy), r = self.params
            return np.abs(r - np.hypot(X - cx, Y - cy))
        if self.kind == "rectangle":
            (x0, x1), (y0, y1) = self.params
            A = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            B = A[1:] + A[:1]
            return _seg_dist(P, A, B)
        if self.kind == "polygon":
            V = np.asarray(self.params)
            return _seg_dist(P, V, np.roll(V, -1, axis=0))
        e = self.params[0]
        s = math.asin(e)
        w = math.sqrt(1 - e * e)
        d = np.minimum.reduce([
            _arc_dist(P, (0.0, 0.0), 1.0, s, math.pi - s),
            _arc_dist(P, (0.0, 0.0), 1.0, math.pi + s, 2 * math.pi - s),
            _arc_dist(P, (-3.0, 0.0), 1.0, s, 2 * math.pi - s),
            _arc_dist(P, (3.0, 0.0), 1.0, -math.pi + s, math.pi - s),
        ])
        A = [(-3 + w, e), (w, e), (-3 + w, -e), (w, -e)]
        B = [(-w, e), (3 - w, e), (-w, -e), (3 - w, -e)]
        return np.minimum(d, _seg_dist(P, A, B))

    def boundary_distance(self, x):
        """Euclidean distance to the boundary for points in the closure."""
        P = _pts(x)
        d = self._raw_boundary_distance(P)
        inside = np.asarray(self.contains(P))
        scale = max(1.0, float(np.abs(np.asarray(self.bbox)).max()))
        if np.any(~inside & (d > _TOL * scale * 1e3)):
            raise DomainError("point outside the closure of the domain")
        d = np.where(inside, d, 0.0)
        return float(d) if d.ndim == 0 else d

    def semi_metric(self, a, b) -> float:
        return semi_metric(self, a, b)


def _point_in_polygon(X, Y, V):
    inside = np.zeros(np.shape(X), dtype=bool)
    n = len(V)
    for k in range(n):
        (xa, ya), (xb, yb) = V[k], V[(k + 1) % n]
        crosses = (ya > Y) != (yb > Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xa + (Y - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (X < xint)
    return inside


def _is_simple(V) -> bool:
    n = len(V)

    def orient(p, q, r):
        return np.sign((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))

    for i in range(n):
        a, b = V[i], V[(i + 1) % n]
        if np.allclose(a, b):
            return False
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = V[j], V[(j + 1) % n]
            o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
            if o1 != o2 and o3 != o4:
                return False
            if o1 == 0 == o2 and o3 == 0 == o4:
                # collinear overlap
                lo = lambda u, v: (min(u[0], v[0]), max(u[0], v[0]), min(u[1], v[1]), max(u[1], v[1]))
                A, B = lo(a, b), lo(c, d)
                if A[0] <= B[1] and B[0] <= A[1] and A[2] <= B[3] and B[2] <= A[3]:
                    return False
    return True


def boundary_distance(domain: Domain, x):
    return domain.boundary_distance(x)


def contains(domain: Domain, x):
    return domain.contains(x)


def semi_metric(domain: Domain, a, b) -> float:
    """min(|a-b|, d(a, bdry) + d(b, bdry)), with BOUNDARY at distance zero from the boundary."""
    if a is BOUNDARY and b is BOUNDARY:
        return 0.0
    da = 0.0 if a is BOUNDARY else float(domain.boundary_distance(a))
    db = 0.0 if b is BOUNDARY else float(domain.boundary_distance(b))
    if a is BOUNDARY or b is BOUNDARY:
        return da + db
    direct = math.hypot(a[0] - b[0], a[1] - b[1])
    return min(direct, da + db)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform node lattice with spacing h; node (i, j) sits at origin + (j*h, i*h)."""

    h: float
    origin: tuple
    shape: tuple  # (ny, nx)
    mask: np.ndarray
    domain: Domain | None = None

    @property
    def xs(self):
        return self.origin[0] + self.h * np.arange(self.shape[1])

    @property
    def ys(self):
        return self.origin[1] + self.h * np.arange(self.shape[0])

    @property
    def XY(self):
        return np.meshgrid(self.xs, self.ys)

    @property
    def n_interior(self) -> int:
        return int(self.mask.sum())

    @property
    def edge_x(self):
        """Valid x-edges (i, j)->(i, j+1): both endpoints interior."""
        return self.mask[:, :-1] & self.mask[:, 1:]

    @property
    def edge_y(self):
        return self.mask[:-1, :] & self.mask[1:, :]

    def same_as(self, other: "Grid") -> bool:
        return (
            self is other
            or (
                self.h == other.h
                and tuple(self.origin) == tuple(other.origin)
                and tuple(self.shape) == tuple(other.shape)
                and np.array_equal(self.mask, other.mask)
            )
        )

    def to_json(self) -> dict:
        return {"h": self.h, "origin": list(self.origin), "shape": list(self.shape), "n_interior": self.n_interior}


def build_grid(domain: Domain, h: float, offset=(0.0, 0.0)) -> Grid:
    """Lattice origin = bounding-box corner + offset; nodes on the boundary are exterior."""
    if not h > 0:
        raise ParameterError("grid spacing must be positive")
    (x0, x1), (y0, y1) = domain.bbox
    ox, oy = x0 + offset[0], y0 + offset[1]
    nx = int(math.floor((x1 - ox) / h + 1e-9)) + 1
    ny = int(math.floor((y1 - oy) / h + 1e-9)) + 1
    if nx < 1 or ny < 1:
        raise ResolutionError("grid has no nodes")
    xs = ox + h * np.arange(nx)
    ys = oy + h * np.arange(ny)
    X, Y = np.meshgrid(xs, ys)
    mask = np.asarray(domain.contains(np.stack([X, Y], -1)))
    if not mask.any():
        raise ResolutionError(f"no interior node at spacing h={h}")
    mask.setflags(write=False)
    return Grid(float(h), (float(ox), float(oy)), (ny, nx), mask, domain)


def centred_grid(domain: Domain, h: float) -> Grid:
    """Lattice shifted by h/2 so that points on the h-lattice of the bbox corner are cell centres."""
    return build_grid(domain, h, offset=(h / 2, h / 2))


_OFFSETS = ((0.5, 0.5), (0.5 + 1 / 7, 0.5 + 1 / 11), (0.5 - 1 / 13, 0.5 + 1 / 5), (1 / 3, 2 / 3), (0.29, 0.61))


def grid_avoiding(domain: Domain, h: float, points=(), gap: float = 1e-6) -> Grid:
    """Centred grid, shifted when a point sits within gap*h of a node."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    for fx, fy in _OFFSETS:
        g = build_grid(domain, h, offset=(fx * h, fy * h))
        if not len(P):
            return g
        # distance to the nearest lattice node, per coordinate
        rx = np.abs(np.remainder(P[:, 0] - g.origin[0] + h / 2, h) - h / 2)
        ry = np.abs(np.remainder(P[:, 1] - g.origin[1] + h / 2, h) - h / 2)
        if np.all(np.hypot(rx, ry) > gap * h):
            return g
    raise GridError("every trial origin puts a singular point on a grid node")
