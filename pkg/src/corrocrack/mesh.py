"""Triangular meshes of the specimen cross-section and of verification annuli.

The steel bar is not meshed: the specimen is a rectangle with a circular
hole whose boundary (tag ``REBAR``) carries the rust-layer pressure and the
ferrous-ion influx.  Meshes are produced with Shewchuk's Triangle through
the ``triangle`` package and refined until a local edge-length target is
met everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import triangle

from .errors import ConfigError, MeshError, OutputError


class Tag(IntEnum):
    REBAR = 1
    TOP = 2
    BOTTOM = 3
    LEFT = 4
    RIGHT = 5
    INNER = 6
    OUTER = 7


MIN_HOLE_SEGMENTS = 64
MIN_ANGLE_DEG = 20.0


@dataclass(frozen=True)
class SpecimenGeometry:
    """Rectangular cross-section with one circular bar.

    ``cover`` is measured from the top surface to the bar crown; the bar is
    centred horizontally.
    """

    width: float = 0.15
    height: float = 0.15
    rebar_radius: float = 0.008
    cover: float = 0.02

    def __post_init__(self):
        a, c = self.rebar_radius, self.cover
        if not (a > 0.0):
            raise ConfigError("geometry.rebar_radius must be > 0")
        if not (c > 0.0):
            raise ConfigError("geometry.cover must be > 0")
        if not (c + 2.0 * a < self.height):
            raise ConfigError("geometry: cover + rebar diameter must be below the height")
        if not (self.width > 2.0 * a):
            raise ConfigError("geometry.width must exceed the rebar diameter")

    @property
    def rebar_center(self) -> tuple[float, float]:
        return (0.5 * self.width, self.height - self.cover - self.rebar_radius)

    @property
    def shape_factor(self) -> float:
        """``(a + c) / a``, the outer/inner radius ratio of the isolated cylinder."""
        return (self.rebar_radius + self.cover) / self.rebar_radius


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray          # (N, 2) coordinates [m]
    elements: np.ndarray       # (M, 3) counter-clockwise node triples
    boundary_edges: np.ndarray  # (K, 2) node pairs
    edge_tags: np.ndarray      # (K,) Tag values
    target_h: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self, tag: Tag) -> np.ndarray:
        return self.boundary_edges[self.edge_tags == int(tag)]

    def edge_lengths(self, tag: Optional[Tag] = None) -> np.ndarray:
        e = self.boundary_edges if tag is None else self.edges(tag)
        return np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)

    def boundary_nodes(self, tag: Tag) -> np.ndarray:
        return np.unique(self.edges(tag))

    def edge_element(self, tag: Tag) -> np.ndarray:
        """Index of the (unique) element owning each edge with ``tag``."""
        lookup = _edge_owner_map(self.elements)
        e = np.sort(self.edges(tag), axis=1)
        return np.array([lookup[(int(i), int(j))] for i, j in e], dtype=int)

    def element_edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.elements]
        return np.stack([np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1)
                         for k in range(3)], axis=1)

    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of every element [deg]."""
        L = self.element_edge_lengths()
        a, b, c = L[:, 1], L[:, 2], L[:, 0]  # edge opposite node 0, 1, 2
        cosines = np.stack([
            (b * b + c * c - a * a) / (2 * b * c),
            (a * a + c * c - b * b) / (2 * a * c),
            (a * a + b * b - c * c) / (2 * a * b),
        ], axis=1)
        return np.degrees(np.arccos(np.clip(cosines, -1.0, 1.0))).min(axis=1)

    def validate(self, min_angle: Optional[float] = MIN_ANGLE_DEG) -> None:
        """Check the structural invariants; raise :class:`MeshError` on violation."""
        n = self.n_nodes
        if self.elements.min() < 0 or self.elements.max() >= n:
            raise MeshError("element node index out of range")
        if np.any(self.signed_areas() <= 0.0):
            raise MeshError("element with non-positive signed area")
        counts = _edge_counts(self.elements)
        for i, j in np.sort(self.boundary_edges, axis=1):
            if counts.get((int(i), int(j)), 0) != 1:
                raise MeshError(f"boundary edge ({i}, {j}) is not owned by exactly one element")
        n_topo = sum(1 for v in counts.values() if v == 1)
        if n_topo != self.boundary_edges.shape[0]:
            raise MeshError("boundary edge list does not match the mesh boundary")
        deg = np.bincount(self.boundary_edges.ravel(), minlength=n)
        on_boundary = deg > 0
        if np.any(deg[on_boundary] != 2):
            raise MeshError("boundary is not a union of closed loops")
        if min_angle is not None:
            worst = self.min_angles().min()
            if worst < min_angle - 1e-9:
                raise MeshError(f"minimum element angle {worst:.2f} deg below {min_angle} deg")
        tree_h = self.target_h / 100.0
        q = np.round(self.nodes / tree_h).astype(np.int64)
        if np.unique(q, axis=0).shape[0] < n and _has_close_pair(self.nodes, tree_h):
            raise MeshError("duplicate nodes")


def _has_close_pair(nodes: np.ndarray, tol: float) -> bool:
    from scipy.spatial import cKDTree

    return len(cKDTree(nodes).query_pairs(tol)) > 0


def _sorted_element_edges(elements: np.ndarray) -> np.ndarray:
    e = np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    return np.sort(e, axis=1)


def _edge_counts(elements: np.ndarray) -> dict:
    e = _sorted_element_edges(elements)
    uniq, cnt = np.unique(e, axis=0, return_counts=True)
    return {(int(i), int(j)): int(c) for (i, j), c in zip(uniq, cnt)}


def _edge_owner_map(elements: np.ndarray) -> dict:
    e = _sorted_element_edges(elements)
    owner = np.tile(np.arange(elements.shape[0]), 3)
    return {(int(i), int(j)): int(o) for (i, j), o in zip(e, owner)}


def _topological_boundary(elements: np.ndarray) -> np.ndarray:
    """Boundary edges oriented as they appear in their (CCW) element."""
    e = np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return e[cnt[inv.ravel()] == 1]


def _polyline(p0, p1, h_of: Callable[[np.ndarray], float]) -> np.ndarray:
    """Points from p0 to p1 (p1 excluded) spaced by the local size ``h_of``."""
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    L = np.linalg.norm(p1 - p0)
    s = [0.0]
    while True:
        h = h_of(p0 + (p1 - p0) * s[-1])
        nxt = s[-1] + h / L
        if nxt >= 1.0 - 0.3 * h / L:
            break
        s.append(nxt)
    return p0 + np.outer(np.asarray(s), p1 - p0)


def _circle(center, radius, n) -> np.ndarray:
    t = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def _ring_segments(start: int, n: int) -> np.ndarray:
    idx = np.arange(start, start + n)
    return np.column_stack([idx, np.roll(idx, -1)])


def _tri_geometry(mesh: dict):
    p = mesh["vertices"][mesh["triangles"]]
    L = np.max(np.stack([np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1)
                         for k in range(3)], axis=1), axis=1)
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    return L, area, p.mean(axis=1)


def _refine(pslg: dict, h_of: Callable[[np.ndarray], np.ndarray], quality: float,
            max_passes: int = 16) -> dict:
    """Quality mesh whose longest element edges respect the size field ``h_of``.

    Area targets of an equilateral triangle are imposed first (cheap and
    close to optimal); remaining triangles with an edge longer than the
    local size are then shrunk explicitly.
    """
    opts = f"pq{quality}"
    eq = math.sqrt(3.0) / 4.0
    h_max = float(np.max(h_of(pslg["vertices"])))
    mesh = triangle.triangulate(pslg, opts + f"a{eq * h_max ** 2:.12g}")
    for _ in range(max_passes):
        L, area, centroid = _tri_geometry(mesh)
        h_loc = h_of(centroid)
        too_big = area > 1.05 * eq * h_loc ** 2
        too_long = L > h_loc
        if not np.any(too_long) and not np.any(too_big):
            return mesh
        target = np.where(too_big, eq * h_loc ** 2, -1.0)
        if not np.any(too_big):
            target = np.where(too_long, area * (h_loc / L) ** 2 * 0.9, -1.0)
        mesh = triangle.triangulate(
            {**mesh, "segments": mesh["segments"], "triangle_max_area": target},
            "r" + opts + "a",
        )
    raise MeshError("mesh refinement did not reach the requested element size")


def _to_mesh(tri: dict, classify: Callable[[np.ndarray], np.ndarray], target_h: float) -> Mesh:
    nodes = np.asarray(tri["vertices"], dtype=float)
    elems = np.asarray(tri["triangles"], dtype=np.int64)
    p = nodes[elems]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) < 0.0
    elems[neg] = elems[neg][:, [0, 2, 1]]
    used = np.unique(elems)
    if used.size != nodes.shape[0]:
        remap = -np.ones(nodes.shape[0], dtype=np.int64)
        remap[used] = np.arange(used.size)
        nodes, elems = nodes[used], remap[elems]
    edges = _topological_boundary(elems)
    mid = 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])
    tags = classify(mid)
    return Mesh(nodes, elems, edges, tags.astype(np.int64), float(target_h))


def build_specimen_mesh(geom: SpecimenGeometry, h_fine: float, h_coarse: float,
                        ell: Optional[float] = None, fine_band: float = 0.25,
                        grading: float = 0.3, quality: float = 25.0) -> Mesh:
    """Mesh the specimen cross-section.

    Elements are no longer than ``h_fine`` in the fine zone and grow
    linearly with slope ``grading`` (edge length per unit distance from the
    zone) up to ``h_coarse``.  The fine zone is the ring of thickness
    ``fine_band * c`` around the bar plus the cover strip, i.e. the part of
    the section between the bar and the top surface that is no wider than
    the bar.
    """
    if not (h_fine > 0.0 and h_coarse >= h_fine):
        raise ConfigError("mesh sizes must satisfy 0 < h_fine <= h_coarse")
    if ell is not None and h_fine > ell / 5.0 * (1.0 + 1e-9):
        raise ConfigError(f"h_fine={h_fine:g} exceeds ell/5={ell / 5.0:g}")
    if fine_band < 0.0 or grading <= 0.0:
        raise ConfigError("fine_band must be >= 0 and grading > 0")
    a, c = geom.rebar_radius, geom.cover
    xc, yc = geom.rebar_center
    r_fine = a + fine_band * c

    def h_of(pts):
        pts = np.atleast_2d(pts)
        dx, dy = pts[:, 0] - xc, pts[:, 1] - yc
        d_ring = np.maximum(np.hypot(dx, dy) - r_fine, 0.0)
        d_strip = np.hypot(np.maximum(np.abs(dx) - a, 0.0), np.maximum(-dy, 0.0))
        d = np.minimum(d_ring, d_strip)
        return np.clip(h_fine + grading * d, h_fine, h_coarse)

    def h_scalar(pt):
        return float(h_of(pt)[0])

    n_hole = max(MIN_HOLE_SEGMENTS, int(math.ceil(2.0 * math.pi * a / h_fine)))
    W, H = geom.width, geom.height
    corners = [(0.0, 0.0), (W, 0.0), (W, H), (0.0, H)]
    outer = np.concatenate([_polyline(corners[k], corners[(k + 1) % 4], h_scalar) for k in range(4)])
    hole = _circle((xc, yc), a, n_hole)
    pslg = {
        "vertices": np.vstack([outer, hole]),
        "segments": np.vstack([_ring_segments(0, len(outer)), _ring_segments(len(outer), n_hole)]),
        "holes": np.array([[xc, yc]]),
    }
    try:
        tri = _refine(pslg, h_of, quality)
    except MeshError:
        raise
    except Exception as exc:  # triangle reports failures as generic errors
        raise MeshError(f"mesh generator failed: {exc}") from exc

    tol = 1e-9 * max(W, H)

    def classify(mid):
        tags = np.full(mid.shape[0], int(Tag.REBAR))
        tags[np.abs(mid[:, 1] - H) < tol] = Tag.TOP
        tags[np.abs(mid[:, 1]) < tol] = Tag.BOTTOM
        tags[np.abs(mid[:, 0]) < tol] = Tag.LEFT
        tags[np.abs(mid[:, 0] - W) < tol] = Tag.RIGHT
        return tags

    mesh = _to_mesh(tri, classify, h_fine)
    mesh.validate()
    r = np.hypot(*(0.5 * (mesh.nodes[mesh.edges(Tag.REBAR)[:, 0]]
                          + mesh.nodes[mesh.edges(Tag.REBAR)[:, 1]]) - [xc, yc]).T)
    if np.any(np.abs(r - a) > 0.05 * a):
        raise MeshError("REBAR edges do not lie on the hole boundary")
    return mesh


def build_annulus_mesh(a: float, b: float, h: float, center=(0.0, 0.0),
                       quality: float = 25.0) -> Mesh:
    """Uniform mesh of the annulus ``a <= r <= b`` with tags INNER/OUTER."""
    if not (0.0 < a < b):
        raise ConfigError("annulus requires 0 < a < b")
    if not h > 0.0:
        raise ConfigError("annulus mesh size must be > 0")
    # multiples of four put nodes on both symmetry axes
    n_in = 4 * max(MIN_HOLE_SEGMENTS // 4, int(math.ceil(0.5 * math.pi * a / h)))
    n_out = 4 * max(MIN_HOLE_SEGMENTS // 4, int(math.ceil(0.5 * math.pi * b / h)))
    pslg = {
        "vertices": np.vstack([_circle(center, b, n_out), _circle(center, a, n_in)]),
        "segments": np.vstack([_ring_segments(0, n_out), _ring_segments(n_out, n_in)]),
        "holes": np.array([center], dtype=float),
    }
    tri = _refine(pslg, lambda pts: np.full(np.atleast_2d(pts).shape[0], h), quality)
    rmid = 0.5 * (a + b)

    def classify(mid):
        r = np.hypot(mid[:, 0] - center[0], mid[:, 1] - center[1])
        return np.where(r < rmid, int(Tag.INNER), int(Tag.OUTER))

    mesh = _to_mesh(tri, classify, h)
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# plain-text export
# ---------------------------------------------------------------------------

def save_mesh(mesh: Mesh, path) -> None:
    """Write node, element and boundary tables as whitespace-delimited ASCII."""
    path = Path(path)
    try:
        with path.open("w") as f:
            f.write(f"# target_h {float(mesh.target_h)!r}\n")
            f.write(f"NODES {mesh.n_nodes}\n")
            for i, (x, y) in enumerate(mesh.nodes):
                f.write(f"{i} {float(x)!r} {float(y)!r}\n")
            f.write(f"ELEMENTS {mesh.n_elements}\n")
            for i, (n1, n2, n3) in enumerate(mesh.elements):
                f.write(f"{i} {n1} {n2} {n3}\n")
            f.write(f"BOUNDARY {mesh.boundary_edges.shape[0]}\n")
            for (n1, n2), t in zip(mesh.boundary_edges, mesh.edge_tags):
                f.write(f"{n1} {n2} {Tag(t).name}\n")
    except OSError as exc:
        raise OutputError(f"cannot write mesh to {path}: {exc}") from exc


def load_mesh(path) -> Mesh:
    lines = Path(path).read_text().splitlines()
    target_h = float(lines[0].split()[-1])
    pos = 1

    def table(name):
        nonlocal pos
        head = lines[pos].split()
        if head[0] != name:
            raise ConfigError(f"{path}:{pos + 1}: expected {name} table")
        n = int(head[1])
        rows = [lines[k].split() for k in range(pos + 1, pos + 1 + n)]
        pos += n + 1
        return rows

    nodes = np.array([[float(r[1]), float(r[2])] for r in table("NODES")])
    elems = np.array([[int(r[1]), int(r[2]), int(r[3])] for r in table("ELEMENTS")], dtype=np.int64)
    rows = table("BOUNDARY")
    edges = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2)
    tags = np.array([int(Tag[r[2]]) for r in rows], dtype=np.int64)
    return Mesh(nodes, elems, edges, tags, target_h)
