"""Obstacle shapes, boundary meshing, and random scene generation.

Three smooth obstacle families are supported: ellipses, superellipses
(|x/a|^p + |y/b|^p = 1 with even p >= 4, a smooth stand-in for a
rectangle) and the classical kite curve

    (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)

scaled by s.  Boundaries are meshed into closed polygons with nodes
equidistributed in arclength at a points-per-wavelength density, oriented
counter-clockwise with outward unit normals.  Scenes place several shapes
in a box by seeded rejection sampling with a minimum center distance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

logger = logging.getLogger(__name__)

_ARCLENGTH_SAMPLES = 2048
SHAPE_KINDS = ("ellipse", "rounded_rectangle", "kite")

# Extent of the unit kite curve: max_t ||(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)||
_KITE_RADIUS = 2.0657


@dataclass(frozen=True)
class Shape:
    """One obstacle boundary: kind, size parameters, placement.

    ellipse uses semi-axes (a, b); rounded_rectangle uses half-widths
    (a, b) and the even superellipse exponent p >= 4; kite uses the
    scale s only.
    """

    kind: str
    a: float = 1.0
    b: float = 1.0
    p: int = 8
    s: float = 1.0
    rotation: float = 0.0
    center: tuple[float, float] = (0.0, 0.0)

    def validate(self) -> None:
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind in ("ellipse", "rounded_rectangle"):
            if self.a <= 0 or self.b <= 0:
                raise ValueError("semi-axes must be positive")
        if self.kind == "rounded_rectangle":
            if self.p < 4 or self.p % 2 != 0:
                raise ValueError("superellipse exponent must be even and >= 4")
        if self.kind == "kite" and self.s <= 0:
            raise ValueError("kite scale must be positive")

    def bounding_radius(self) -> float:
        """Radius of the circumscribed circle about the shape's center."""
        if self.kind == "ellipse":
            return max(self.a, self.b)
        if self.kind == "rounded_rectangle":
            return math.hypot(self.a, self.b)  # corners approach the vertex
        return _KITE_RADIUS * self.s


def _rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _base_curve(shape: Shape, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unrotated, uncentered curve points and tangents at parameters t."""
    if shape.kind == "ellipse":
        pts = np.stack([shape.a * np.cos(t), shape.b * np.sin(t)], axis=-1)
        tan = np.stack([-shape.a * np.sin(t), shape.b * np.cos(t)], axis=-1)
    elif shape.kind == "rounded_rectangle":
        # polar form r(t)(cos t, sin t); with even p the integrand
        # cos^p, sin^p is smooth, so the speed stays bounded
        p = shape.p
        ct, st = np.cos(t), np.sin(t)
        f = ct**p / shape.a**p + st**p / shape.b**p
        r = f ** (-1.0 / p)
        fp = p * st * ct * (st ** (p - 2) / shape.b**p - ct ** (p - 2) / shape.a**p)
        rp = -(1.0 / p) * f ** (-1.0 / p - 1.0) * fp
        pts = np.stack([r * ct, r * st], axis=-1)
        tan = np.stack([rp * ct - r * st, rp * st + r * ct], axis=-1)
    elif shape.kind == "kite":
        s = shape.s
        pts = s * np.stack(
            [np.cos(t) + 0.65 * np.cos(2 * t) - 0.65, 1.5 * np.sin(t)], axis=-1
        )
        tan = s * np.stack(
            [-np.sin(t) - 1.3 * np.sin(2 * t), 1.5 * np.cos(t)], axis=-1
        )
    else:
        raise ValueError(f"unknown shape kind {shape.kind!r}")
    return pts, tan


def parametrize(shape: Shape, t):
    """Boundary point and outward unit normal at parameter t in [0, 2pi).

    Parameters
    ----------
    shape : Shape
    t : float or array of floats

    Returns
    -------
    point : ndarray, shape t.shape + (2,)
    normal : ndarray, same shape
        Unit normal pointing away from the enclosed region.  All three
        curve families run counter-clockwise, so the normal is the
        tangent rotated by -pi/2.
    """
    shape.validate()
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    pts, tan = _base_curve(shape, t_arr)
    rot = _rotation_matrix(shape.rotation)
    pts = pts @ rot.T + np.asarray(shape.center)
    tan = tan @ rot.T
    speed = np.linalg.norm(tan, axis=-1, keepdims=True)
    normal = np.stack([tan[..., 1], -tan[..., 0]], axis=-1) / speed
    if np.ndim(t) == 0:
        return pts[0], normal[0]
    return pts, normal


@dataclass(frozen=True)
class ObstacleMesh:
    """Closed polygonal boundary: one loop of segments with outward normals."""

    nodes: np.ndarray  # (N, 2)
    segments: np.ndarray  # (N, 2) node index pairs, consecutive loop
    normals: np.ndarray  # (N, 2) per-segment outward unit normal
    lengths: np.ndarray  # (N,)
    perimeter: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def signed_area(self) -> float:
        x, y = self.nodes[:, 0], self.nodes[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        return 0.5 * float(np.sum(x * yn - xn * y))

    def validate(self) -> None:
        n = self.n_nodes
        if n < 3:
            raise ValueError("a closed loop needs at least 3 nodes")
        expected = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
        if not np.array_equal(self.segments, expected):
            raise ValueError("segments must form one consecutive closed loop")
        if not math.isclose(float(np.sum(self.lengths)), self.perimeter, rel_tol=1e-12):
            raise ValueError("segment lengths do not sum to the perimeter")
        if self.signed_area() <= 0:
            raise ValueError("loop must be counter-clockwise (positive area)")


def mesh_boundary(shape: Shape, k: float, ppw: float) -> ObstacleMesh:
    """Mesh one shape at segment length <= lambda/ppw, lambda = 2 pi / k.

    Nodes are equidistributed in smooth arclength via inversion of a
    cumulative-trapezoid arclength table, so all segments have nearly
    equal length.
    """
    shape.validate()
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    if ppw < 4:
        raise ValueError("ppw must be at least 4")

    t_grid = np.linspace(0.0, 2.0 * math.pi, _ARCLENGTH_SAMPLES + 1)
    _, tan = _base_curve(shape, t_grid)
    speed = np.linalg.norm(tan, axis=-1)
    ds = 0.5 * (speed[:-1] + speed[1:]) * np.diff(t_grid)
    s_table = np.concatenate([[0.0], np.cumsum(ds)])
    arc_perimeter = float(s_table[-1])
    if arc_perimeter <= 0:
        raise ValueError("degenerate shape: zero perimeter")

    lam = 2.0 * math.pi / k
    n_seg = max(int(math.ceil(arc_perimeter / (lam / ppw))), 8)
    s_targets = np.arange(n_seg) * (arc_perimeter / n_seg)
    t_nodes = np.interp(s_targets, s_table, t_grid)

    nodes, _ = parametrize(shape, t_nodes)
    edges = np.roll(nodes, -1, axis=0) - nodes
    lengths = np.linalg.norm(edges, axis=1)
    if np.any(lengths <= 0):
        raise ValueError("degenerate shape: coincident mesh nodes")
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1) / lengths[:, None]
    segments = np.stack([np.arange(n_seg), (np.arange(n_seg) + 1) % n_seg], axis=1)

    mesh = ObstacleMesh(
        nodes=nodes,
        segments=segments,
        normals=normals,
        lengths=lengths,
        perimeter=float(np.sum(lengths)),
    )
    mesh.validate()
    logger.debug(
        "meshed %s: %d segments, polygon perimeter %.6f", shape.kind, n_seg, mesh.perimeter
    )
    return mesh


@dataclass(frozen=True)
class Scene:
    """Wavenumber, incident direction, and placed obstacles in a box."""

    k: float
    beta: tuple[float, float]
    obstacles: tuple[Shape, ...]
    box: tuple[float, float, float, float] = (0.0, 0.0, 60.0, 60.0)  # x0 y0 x1 y1
    min_center_distance: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        if self.k <= 0:
            raise ValueError("wavenumber must be positive")
        if not math.isclose(math.hypot(*self.beta), 1.0, rel_tol=1e-9):
            raise ValueError("incident direction must be a unit vector")
        x0, y0, x1, y1 = self.box
        if x1 <= x0 or y1 <= y0:
            raise ValueError("box must have positive extent")
        for shape in self.obstacles:
            shape.validate()
        centers = np.array([s.center for s in self.obstacles])
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                if np.linalg.norm(centers[i] - centers[j]) < self.min_center_distance:
                    raise ValueError(
                        f"obstacles {i} and {j} closer than the minimum center distance"
                    )


@dataclass(frozen=True)
class SceneMesh:
    """All obstacle meshes with contiguous per-obstacle global numbering."""

    meshes: tuple[ObstacleMesh, ...]
    block_offsets: tuple[int, ...]  # length M+1; obstacle p owns [off[p], off[p+1])

    @property
    def n_nodes(self) -> int:
        return self.block_offsets[-1]

    def block_range(self, p: int) -> tuple[int, int]:
        return self.block_offsets[p], self.block_offsets[p + 1]

    @property
    def all_nodes(self) -> np.ndarray:
        return np.concatenate([m.nodes for m in self.meshes], axis=0)

    def node_normals(self) -> np.ndarray:
        """Per-node unit normals: length-weighted segment-normal averages."""
        out = []
        for m in self.meshes:
            weighted = m.normals * m.lengths[:, None]
            acc = weighted + np.roll(weighted, 1, axis=0)  # segments i-1 and i meet node i
            acc /= np.linalg.norm(acc, axis=1, keepdims=True)
            out.append(acc)
        return np.concatenate(out, axis=0)


def mesh_scene(scene: Scene, ppw: float) -> SceneMesh:
    """Mesh every obstacle of a scene at the given density."""
    scene.validate()
    meshes = tuple(mesh_boundary(s, scene.k, ppw) for s in scene.obstacles)
    offsets = [0]
    for m in meshes:
        offsets.append(offsets[-1] + m.n_nodes)
    return SceneMesh(meshes=meshes, block_offsets=tuple(offsets))


def generate_scene(config: Scene, seed: int, size_jitter: float = 0.0) -> Scene:
    """Place the configured shapes randomly in the box, seeded.

    The obstacles of ``config`` act as templates: centers and rotations
    are drawn fresh, and sizes are scaled by a factor drawn uniformly
    from [1 - size_jitter, 1 + size_jitter].  Placement is rejection
    sampling: a center is accepted when it keeps at least
    min_center_distance from all earlier centers and the circumscribed
    circles stay disjoint (the scattering problem needs disjoint
    obstacles, which a pure center-distance rule cannot guarantee).

    Deterministic for fixed (config, seed, size_jitter); raises on
    placement failure after a bounded number of rejection rounds.
    """
    x0, y0, x1, y1 = config.box
    m_count = len(config.obstacles)
    if (x1 - x0) * (y1 - y0) < 4.0 * m_count * config.min_center_distance**2:
        raise ValueError("box too small for rejection sampling (area heuristic)")

    rng = np.random.default_rng(seed)
    placed: list[Shape] = []
    centers: list[np.ndarray] = []
    radii: list[float] = []
    for template in config.obstacles:
        template.validate()
        scale = 1.0 + size_jitter * float(rng.uniform(-1.0, 1.0)) if size_jitter else 1.0
        shape = replace(
            template,
            a=template.a * scale,
            b=template.b * scale,
            s=template.s * scale,
            rotation=float(rng.uniform(0.0, 2.0 * math.pi)),
        )
        radius = shape.bounding_radius()
        lo = np.array([x0 + radius, y0 + radius])
        hi = np.array([x1 - radius, y1 - radius])
        if np.any(hi <= lo):
            raise ValueError("box too small for an obstacle of this size")
        for _ in range(1000):
            center = rng.uniform(lo, hi)
            ok = all(
                np.linalg.norm(center - c)
                >= max(config.min_center_distance, radius + r + 0.1)
                for c, r in zip(centers, radii)
            )
            if ok:
                break
        else:
            raise ValueError(
                f"could not place obstacle {len(placed)} after 1000 rejection rounds"
            )
        placed.append(replace(shape, center=(float(center[0]), float(center[1]))))
        centers.append(center)
        radii.append(radius)

    scene = replace(config, obstacles=tuple(placed), seed=seed)
    scene.validate()
    return scene
