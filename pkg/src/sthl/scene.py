"""Geometric scene model: transforms, regions, collision and support tests.

Conventions (used consistently across the toolchain):

- Left-handed axes: x is width, y is height (up), z is depth. The front of
  an unrotated object faces +z.
- Rotations are degrees applied about x, then z, then y. Rotation triples
  are stored in that application order: ``rot = (rx, rz, ry)``.
- An object's world-space extents are ``dimensions * scale`` componentwise,
  and its position is the center of its box.
- Region polygons live in the (x, z) floor plane, counterclockwise, with
  positive shoelace area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from sthl.errors import DegenerateRegion

Vec = tuple[float, float, float]
Point2 = tuple[float, float]

#: Default snap distance for the gravity/support predicate (meters).
SUPPORT_TOLERANCE = 0.005

#: Minimum footprint overlap for one object to support another.
SUPPORT_OVERLAP = 0.5

#: Default wall thickness eta (meters).
WALL_THICKNESS = 0.03

_EPS = 1e-9
_BOUNDARY_EPS = 1e-7


# ---------------------------------------------------------------------------
# Core data types


@dataclass(frozen=True)
class Transform:
    pos: Vec = (0.0, 0.0, 0.0)
    rot: Vec = (0.0, 0.0, 0.0)  # degrees about x, z, y (application order)
    scale: Vec = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.scale):
            raise ValueError(f"scale components must be positive, got {self.scale}")


@dataclass
class SceneObject:
    id: str
    category: str = ""
    dimensions: Vec = (1.0, 1.0, 1.0)
    color: str = ""
    material: str = ""
    features: str = ""
    transform: Transform = field(default_factory=Transform)
    region: str = ""
    #: True when the source program assigned an explicit position.
    preplaced: bool = False

    def extents(self) -> Vec:
        d, s = self.dimensions, self.transform.scale
        return (d[0] * s[0], d[1] * s[1], d[2] * s[2])

    def copy(self) -> "SceneObject":
        return replace(self)


@dataclass(frozen=True)
class Region:
    id: str
    vertices: tuple[Point2, ...]  # (x, z) floor-plane polygon, CCW
    floor_y: float = 0.0
    height: float = 3.0
    wall_thickness: float = WALL_THICKNESS
    floor_texture: str = ""
    wall_texture: str = ""

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError(f"region {self.id!r} needs at least 3 vertices")
        if self.wall_thickness < 0:
            raise ValueError("wall thickness must be non-negative")

    def validate(self) -> None:
        """Check the polygon is counterclockwise and non-self-intersecting."""
        if signed_area(self.vertices) <= 0:
            raise DegenerateRegion(
                f"region {self.id!r} polygon must be counterclockwise with positive area"
            )
        if not _is_simple(self.vertices):
            raise DegenerateRegion(f"region {self.id!r} polygon self-intersects")

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [v[0] for v in self.vertices]
        zs = [v[1] for v in self.vertices]
        return min(xs), min(zs), max(xs), max(zs)


@dataclass(frozen=True)
class Connection:
    region_a: str
    region_b: str
    category: str = "door"
    dimensions: Vec = (1.0, 2.0, 0.1)


@dataclass
class SceneLayout:
    regions: list[Region] = field(default_factory=list)
    objects: list[SceneObject] = field(default_factory=list)
    connections: list[Connection] = field(default_factory=list)

    def object(self, object_id: str) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    def region(self, region_id: str) -> Region:
        for region in self.regions:
            if region.id == region_id:
                return region
        raise KeyError(region_id)

    def region_of(self, obj: SceneObject) -> Region:
        return self.region(obj.region)

    def copy(self) -> "SceneLayout":
        return SceneLayout(
            regions=list(self.regions),
            objects=[obj.copy() for obj in self.objects],
            connections=list(self.connections),
        )


@dataclass(frozen=True)
class OrientedBox:
    center: Vec
    axes: tuple[Vec, Vec, Vec]  # world directions of local x, y, z
    half_extents: Vec

    def corners(self) -> np.ndarray:
        """The 8 world-space corners, shape (8, 3)."""
        c = np.array(self.center)
        axes = np.array(self.axes)  # rows are local axes in world space
        h = np.array(self.half_extents)
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        return c + (signs * h) @ axes

    def volume(self) -> float:
        hx, hy, hz = self.half_extents
        return 8.0 * hx * hy * hz


# ---------------------------------------------------------------------------
# Rotation


def rotation_matrix(rot: Vec) -> np.ndarray:
    """World-from-local rotation for degrees (rx, rz, ry), applied x -> z -> y."""
    rx, rz, ry = (math.radians(a) for a in rot)
    cx, sx = math.cos(rx), math.sin(rx)
    cz, sz = math.cos(rz), math.sin(rz)
    cy, sy = math.cos(ry), math.sin(ry)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    return my @ mz @ mx


@lru_cache(maxsize=65536)
def _oriented_box(dimensions: Vec, scale: Vec, rot: Vec, pos: Vec) -> OrientedBox:
    m = rotation_matrix(rot)
    axes = (tuple(m[:, 0]), tuple(m[:, 1]), tuple(m[:, 2]))
    half = tuple(d * s / 2.0 for d, s in zip(dimensions, scale))
    return OrientedBox(pos, axes, half)  # type: ignore[arg-type]


def world_box(obj: SceneObject) -> OrientedBox:
    """Oriented bounding box of an object in world space."""
    t = obj.transform
    return _oriented_box(obj.dimensions, t.scale, t.rot, t.pos)


# ---------------------------------------------------------------------------
# Collision (separating axes)


def _box_arrays(box: OrientedBox) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.array(box.center), np.array(box.axes), np.array(box.half_extents)


def collision_margin(a: SceneObject, b: SceneObject) -> float:
    """Signed overlap between two objects' boxes.

    Positive values are the penetration depth along the cheapest separating
    direction; negative values are the clearance along the best separating
    axis. Zero means exact face contact.
    """
    margin, _ = _sat(world_box(a), world_box(b))
    return margin


def collides(a: SceneObject, b: SceneObject) -> bool:
    """True iff the boxes overlap with positive volume; face contact is not a collision."""
    return collision_margin(a, b) > _EPS


def minimum_translation(a: SceneObject, b: SceneObject) -> tuple[float, np.ndarray]:
    """Penetration depth and the world direction that moves `b` off `a` fastest."""
    box_a, box_b = world_box(a), world_box(b)
    margin, axis = _sat(box_a, box_b)
    delta = np.array(box_b.center) - np.array(box_a.center)
    if float(delta @ axis) < 0:
        axis = -axis
    return margin, axis


def _sat(box_a: OrientedBox, box_b: OrientedBox) -> tuple[float, np.ndarray]:
    ca, axes_a, ha = _box_arrays(box_a)
    cb, axes_b, hb = _box_arrays(box_b)
    t = cb - ca

    candidates = [axes_a[i] for i in range(3)] + [axes_b[i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            cross = np.cross(axes_a[i], axes_b[j])
            norm = float(np.linalg.norm(cross))
            if norm > 1e-9:
                candidates.append(cross / norm)

    best_margin = math.inf
    best_axis = candidates[0]
    for axis in candidates:
        ra = float(np.abs(axes_a @ axis) @ ha)
        rb = float(np.abs(axes_b @ axis) @ hb)
        depth = ra + rb - abs(float(t @ axis))
        if depth < best_margin:
            best_margin = depth
            best_axis = axis
            if depth <= -_EPS:
                break  # separated; no smaller margin needed
    return best_margin, np.array(best_axis)


# ---------------------------------------------------------------------------
# Polygon helpers


def signed_area(polygon: tuple[Point2, ...]) -> float:
    total = 0.0
    n = len(polygon)
    for i in range(n):
        x1, z1 = polygon[i]
        x2, z2 = polygon[(i + 1) % n]
        total += x1 * z2 - x2 * z1
    return total / 2.0


def _is_simple(polygon: tuple[Point2, ...]) -> bool:
    n = len(polygon)
    segs = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent segments share a vertex
            if _segments_cross(*segs[i], *segs[j]):
                return False
    return True


def _segments_cross(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool:
    def orient(a: Point2, b: Point2, c: Point2) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def distance_to_boundary(point: Point2, polygon: tuple[Point2, ...]) -> float:
    """Distance from a point to the closest polygon edge."""
    best = math.inf
    n = len(polygon)
    px, pz = point
    for i in range(n):
        ax, az = polygon[i]
        bx, bz = polygon[(i + 1) % n]
        dx, dz = bx - ax, bz - az
        length_sq = dx * dx + dz * dz
        if length_sq == 0:
            d = math.hypot(px - ax, pz - az)
        else:
            u = max(0.0, min(1.0, ((px - ax) * dx + (pz - az) * dz) / length_sq))
            d = math.hypot(px - (ax + u * dx), pz - (az + u * dz))
        best = min(best, d)
    return best


def point_in_polygon(point: Point2, polygon: tuple[Point2, ...], eps: float = _BOUNDARY_EPS) -> bool:
    """Winding-number membership; points within eps of the boundary count inside."""
    if distance_to_boundary(point, polygon) <= eps:
        return True
    winding = 0
    px, pz = point
    n = len(polygon)
    for i in range(n):
        ax, az = polygon[i]
        bx, bz = polygon[(i + 1) % n]
        if az <= pz:
            if bz > pz and (bx - ax) * (pz - az) - (px - ax) * (bz - az) > 0:
                winding += 1
        elif bz <= pz and (bx - ax) * (pz - az) - (px - ax) * (bz - az) < 0:
            winding -= 1
    return winding != 0


def convex_hull(points: np.ndarray) -> list[Point2]:
    """Monotone-chain hull of 2D points, counterclockwise."""
    pts = sorted({(float(x), float(z)) for x, z in points})
    if len(pts) <= 2:
        return list(pts)

    def cross(o: Point2, a: Point2, b: Point2) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Point2] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point2] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def clip_convex(subject: list[Point2], clip: list[Point2]) -> list[Point2]:
    """Sutherland-Hodgman intersection of two convex CCW polygons."""
    output = subject
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        ax, az = clip[i]
        bx, bz = clip[(i + 1) % n]
        new_output: list[Point2] = []
        for j, cur in enumerate(output):
            prev = output[j - 1]
            cur_in = (bx - ax) * (cur[1] - az) - (bz - az) * (cur[0] - ax) >= 0
            prev_in = (bx - ax) * (prev[1] - az) - (bz - az) * (prev[0] - ax) >= 0
            if cur_in:
                if not prev_in:
                    new_output.append(_line_intersect(prev, cur, (ax, az), (bx, bz)))
                new_output.append(cur)
            elif prev_in:
                new_output.append(_line_intersect(prev, cur, (ax, az), (bx, bz)))
        output = new_output
    return output


def _line_intersect(p1: Point2, p2: Point2, a: Point2, b: Point2) -> Point2:
    x1, z1 = p1
    x2, z2 = p2
    x3, z3 = a
    x4, z4 = b
    denom = (x1 - x2) * (z3 - z4) - (z1 - z2) * (x3 - x4)
    if abs(denom) < 1e-15:
        return p2
    t = ((x1 - x3) * (z3 - z4) - (z1 - z3) * (x3 - x4)) / denom
    return (x1 + t * (x2 - x1), z1 + t * (z2 - z1))


def footprint(obj: SceneObject) -> list[Point2]:
    """Convex hull of the object's box projected onto the floor plane."""
    corners = world_box(obj).corners()
    return convex_hull(corners[:, [0, 2]])


def polygon_area(polygon: list[Point2]) -> float:
    return abs(signed_area(tuple(polygon)))


def footprint_overlap(a: SceneObject, b: SceneObject) -> float:
    """Area of overlap between two objects' floor footprints."""
    inter = clip_convex(footprint(a), footprint(b))
    if len(inter) < 3:
        return 0.0
    return polygon_area(inter)


# ---------------------------------------------------------------------------
# Containment and support


def inside(obj: SceneObject, region: Region) -> bool:
    """True iff all 8 box corners lie in the region's floor polygon and height band."""
    corners = world_box(obj).corners()
    lo = region.floor_y - _BOUNDARY_EPS
    hi = region.floor_y + region.height + _BOUNDARY_EPS
    if corners[:, 1].min() < lo or corners[:, 1].max() > hi:
        return False
    return all(
        point_in_polygon((float(x), float(z)), region.vertices) for x, z in corners[:, [0, 2]]
    )


def bottom_y(obj: SceneObject) -> float:
    return float(world_box(obj).corners()[:, 1].min())


def top_y(obj: SceneObject) -> float:
    return float(world_box(obj).corners()[:, 1].max())


def supported(obj: SceneObject, layout: SceneLayout, tolerance: float = SUPPORT_TOLERANCE) -> bool:
    """True iff the object rests on its region floor or on another object.

    Resting on another object requires the supporter's top face within
    `tolerance` of this object's bottom and a footprint overlap of at least
    half this object's own footprint.
    """
    bottom = bottom_y(obj)
    region = layout.region_of(obj)
    if abs(bottom - region.floor_y) <= tolerance:
        return True
    own_area = polygon_area(footprint(obj))
    if own_area <= 0:
        return False
    for other in layout.objects:
        if other.id == obj.id:
            continue
        if abs(bottom - top_y(other)) > tolerance:
            continue
        if footprint_overlap(obj, other) >= SUPPORT_OVERLAP * own_area:
            return True
    return False


def support_surface_y(obj: SceneObject, layout: SceneLayout) -> float:
    """Height of the highest surface below the object that can support it.

    Considers the region floor and the top faces of sufficiently
    overlapping objects whose tops are at or below this object's bottom.
    """
    bottom = bottom_y(obj)
    region = layout.region_of(obj)
    best = region.floor_y
    own_area = polygon_area(footprint(obj))
    if own_area <= 0:
        return best
    for other in layout.objects:
        if other.id == obj.id:
            continue
        top = top_y(other)
        if top > bottom + SUPPORT_TOLERANCE:
            continue
        if top <= best:
            continue
        if footprint_overlap(obj, other) >= SUPPORT_OVERLAP * own_area:
            best = top
    return best


# ---------------------------------------------------------------------------
# Wall geometry


@dataclass(frozen=True)
class WallSlab:
    """One wall extruded outward from a region edge.

    The inner face lies on the polygon edge; the outer face is parallel at
    distance `thickness`. Plan-view corners run inner_start, inner_end,
    outer_end, outer_start (outer ends are mitered with the neighbors).
    """

    inner_start: Point2
    inner_end: Point2
    outer_start: Point2
    outer_end: Point2
    base_y: float
    height: float
    thickness: float


@dataclass(frozen=True)
class RegionMeshSpec:
    region_id: str
    floor_polygon: tuple[Point2, ...]
    floor_y: float
    floor_thickness: float
    walls: tuple[WallSlab, ...]


def thicken_walls(region: Region, eta: float) -> RegionMeshSpec:
    """Extrude each region edge outward by eta into a wall slab.

    Callers separate neighboring regions by exactly 2*eta so that the
    resulting outer faces meet with no overlap and no gap.
    """
    polygon = region.vertices
    if signed_area(polygon) <= 0:
        raise DegenerateRegion(f"region {region.id!r} polygon area must be positive")
    n = len(polygon)
    normals = []
    for i in range(n):
        ax, az = polygon[i]
        bx, bz = polygon[(i + 1) % n]
        dx, dz = bx - ax, bz - az
        length = math.hypot(dx, dz)
        if length < 1e-12:
            raise DegenerateRegion(f"region {region.id!r} has a zero-length edge")
        normals.append((dz / length, -dx / length))  # outward for CCW

    # Miter point at each vertex: intersection of the two adjacent offset lines.
    miters: list[Point2] = []
    for i in range(n):
        prev_edge = (i - 1) % n
        vx, vz = polygon[i]
        pn, cn = normals[prev_edge], normals[i]
        p_start = (polygon[prev_edge][0] + eta * pn[0], polygon[prev_edge][1] + eta * pn[1])
        p_end = (vx + eta * pn[0], vz + eta * pn[1])
        c_start = (vx + eta * cn[0], vz + eta * cn[1])
        c_end = (polygon[(i + 1) % n][0] + eta * cn[0], polygon[(i + 1) % n][1] + eta * cn[1])
        cross = pn[0] * cn[1] - pn[1] * cn[0]
        if abs(cross) < 1e-9:
            miters.append(c_start)  # collinear edges: butt joint
        else:
            miters.append(_line_intersect(p_start, p_end, c_start, c_end))

    walls = []
    for i in range(n):
        j = (i + 1) % n
        walls.append(
            WallSlab(
                inner_start=polygon[i],
                inner_end=polygon[j],
                outer_start=miters[i],
                outer_end=miters[j],
                base_y=region.floor_y,
                height=region.height,
                thickness=eta,
            )
        )
    return RegionMeshSpec(
        region_id=region.id,
        floor_polygon=polygon,
        floor_y=region.floor_y,
        floor_thickness=eta,
        walls=tuple(walls),
    )
