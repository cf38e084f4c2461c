"""Construction, import and queries of low-order finite element meshes.

Supported element types are two-node lines, three-node triangles and
four-node quadrilaterals.  Structured generators cover the interval,
axis-aligned rectangles (quad cells or triangle subdivisions of them)
and the unit square with a removed central block; unstructured meshes
come in through the MSH 2.2 reader in ``gmsh_io``.

Node and element ordering of all generators is lexicographic by (y, x)
so that repeated runs are byte-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ElementType(Enum):
    LINE2 = "line2"
    TRI3 = "tri3"
    QUAD4 = "quad4"


#: number of nodes per element type
ELEMENT_NODES = {
    ElementType.LINE2: 2,
    ElementType.TRI3: 3,
    ElementType.QUAD4: 4,
}


class TriPattern(Enum):
    """How a structured grid cell is split into triangles.

    RIGHT_DIAGONAL splits along the "/" diagonal (lower-left to
    upper-right), LEFT_DIAGONAL along the "\\" diagonal, and
    CRISS_CROSS adds one centre node per cell producing 4 triangles.
    Cell-centre nodes are numbered after all grid nodes.
    """

    RIGHT_DIAGONAL = "right"
    LEFT_DIAGONAL = "left"
    CRISS_CROSS = "crisscross"


@dataclass
class Mesh:
    """An immutable unstructured mesh.

    Attributes:
        coords: (n_nodes, dim) float array, dim is 1 or 2.
        elements: list of (ElementType, node-index tuple).
        boundary_edges: list of ((node, node), tag) pairs; empty in 1D
            where boundary entities are points carried by node_tags.
        node_tags: map tag -> sorted int array of node indices.
    """

    coords: np.ndarray
    elements: list
    boundary_edges: list = field(default_factory=list)
    node_tags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if self.coords.ndim != 2 or self.coords.shape[1] not in (1, 2):
            raise ValueError("coords must be (n_nodes, 1) or (n_nodes, 2)")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("non-finite node coordinates")
        n = self.n_nodes
        for etype, conn in self.elements:
            if len(conn) != ELEMENT_NODES[etype]:
                raise ValueError(f"{etype.value} element with {len(conn)} nodes")
            if min(conn) < 0 or max(conn) >= n:
                raise ValueError(f"element node index out of range: {conn}")
        for (a, b), tag in self.boundary_edges:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"boundary edge references missing node ({a},{b})")
            if not isinstance(tag, str) or not tag:
                raise ValueError("boundary tags must be non-empty strings")
        cleaned = {}
        for tag, nodes in self.node_tags.items():
            if not isinstance(tag, str) or not tag:
                raise ValueError("node tags must be non-empty strings")
            arr = np.unique(np.asarray(list(nodes), dtype=int))
            if arr.size and (arr[0] < 0 or arr[-1] >= n):
                raise ValueError(f"tag '{tag}' references missing node")
            cleaned[tag] = arr
        self.node_tags = cleaned
        self.coords.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def boundary_nodes(mesh: Mesh, tag: str) -> np.ndarray:
    """Node indices carrying `tag`, in ascending order."""
    try:
        return mesh.node_tags[tag].copy()
    except KeyError:
        raise KeyError(
            f"unknown boundary tag {tag!r}; have {sorted(mesh.node_tags)}"
        ) from None


def _check_jacobians(mesh: Mesh) -> None:
    # Deferred import: elements.py imports this module for types.
    from . import elements

    for e in range(mesh.n_elements):
        rule = elements.quadrature_rule(mesh.elements[e][0], 2)
        for pt in rule.points:
            elements.map_to_physical(mesh, e, pt)  # raises if detJ <= 0


def generate_interval_mesh(n_elem: int, length: float) -> Mesh:
    """Uniform 1D mesh of n_elem two-node elements on [0, length].

    Node tags "left" = {0} and "right" = {n_elem} mark the endpoints.
    """
    if n_elem < 1:
        raise ValueError("n_elem must be >= 1")
    if not length > 0:
        raise ValueError("length must be positive")
    x = np.linspace(0.0, length, n_elem + 1)
    elems = [(ElementType.LINE2, (i, i + 1)) for i in range(n_elem)]
    tags = {"left": np.array([0]), "right": np.array([n_elem])}
    mesh = Mesh(x[:, None], elems, [], tags)
    _check_jacobians(mesh)
    return mesh


def _grid(xseed, yseed, domain):
    if xseed < 2 or yseed < 2:
        raise ValueError("seeds must be >= 2")
    x0, y0, x1, y1 = domain
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {domain}")
    xs = np.linspace(x0, x1, xseed)
    ys = np.linspace(y0, y1, yseed)
    X, Y = np.meshgrid(xs, ys)  # row-major by y: node = j*xseed + i
    coords = np.column_stack([X.ravel(), Y.ravel()])
    return coords


def _rect_boundary(xseed, yseed):
    """Boundary node tags and tagged edges of a structured grid."""
    node = lambda i, j: j * xseed + i
    tags = {
        "left": np.array([node(0, j) for j in range(yseed)]),
        "right": np.array([node(xseed - 1, j) for j in range(yseed)]),
        "bottom": np.array([node(i, 0) for i in range(xseed)]),
        "top": np.array([node(i, yseed - 1) for i in range(xseed)]),
    }
    edges = []
    for i in range(xseed - 1):
        edges.append(((node(i, 0), node(i + 1, 0)), "bottom"))
    for j in range(yseed - 1):
        edges.append(((node(xseed - 1, j), node(xseed - 1, j + 1)), "right"))
    for i in range(xseed - 1):
        edges.append(((node(i, yseed - 1), node(i + 1, yseed - 1)), "top"))
    for j in range(yseed - 1):
        edges.append(((node(0, j), node(0, j + 1)), "left"))
    return tags, edges


def generate_structured_quad_mesh(xseed: int, yseed: int,
                                  domain=(0.0, 0.0, 1.0, 1.0)) -> Mesh:
    """Structured grid of (xseed-1)*(yseed-1) quadrilaterals.

    `domain` is the axis-aligned rectangle (x0, y0, x1, y1). Element
    nodes are ordered counter-clockwise; boundary tags are "left",
    "right", "bottom", "top".
    """
    coords = _grid(xseed, yseed, domain)
    node = lambda i, j: j * xseed + i
    elems = []
    for j in range(yseed - 1):
        for i in range(xseed - 1):
            elems.append((ElementType.QUAD4,
                          (node(i, j), node(i + 1, j),
                           node(i + 1, j + 1), node(i, j + 1))))
    tags, edges = _rect_boundary(xseed, yseed)
    mesh = Mesh(coords, elems, edges, tags)
    _check_jacobians(mesh)
    return mesh


def _split_cell(pattern, a, b, c, d, center=None):
    """Triangles for one grid cell with CCW corners a,b,c,d."""
    if pattern is TriPattern.RIGHT_DIAGONAL:
        return [(a, b, c), (a, c, d)]
    if pattern is TriPattern.LEFT_DIAGONAL:
        return [(a, b, d), (b, c, d)]
    if pattern is TriPattern.CRISS_CROSS:
        e = center
        return [(a, b, e), (b, c, e), (c, d, e), (d, a, e)]
    raise ValueError(f"unknown pattern {pattern}")


def generate_structured_tri_mesh(xseed: int, yseed: int,
                                 domain=(0.0, 0.0, 1.0, 1.0),
                                 pattern: TriPattern = TriPattern.RIGHT_DIAGONAL) -> Mesh:
    """Structured triangular mesh obtained by splitting grid cells."""
    coords = _grid(xseed, yseed, domain)
    node = lambda i, j: j * xseed + i
    centers = []
    elems = []
    next_center = xseed * yseed
    for j in range(yseed - 1):
        for i in range(xseed - 1):
            a, b = node(i, j), node(i + 1, j)
            c, d = node(i + 1, j + 1), node(i, j + 1)
            if pattern is TriPattern.CRISS_CROSS:
                centers.append(coords[[a, b, c, d]].mean(axis=0))
                tris = _split_cell(pattern, a, b, c, d, next_center)
                next_center += 1
            else:
                tris = _split_cell(pattern, a, b, c, d)
            elems.extend((ElementType.TRI3, t) for t in tris)
    if centers:
        coords = np.vstack([coords, np.array(centers)])
    tags, edges = _rect_boundary(xseed, yseed)
    mesh = Mesh(coords, elems, edges, tags)
    _check_jacobians(mesh)
    return mesh


def generate_plate_with_hole_mesh(seed: int, elem: ElementType,
                                  pattern: TriPattern = TriPattern.RIGHT_DIAGONAL) -> Mesh:
    """Unit square with the block [0.45, 0.55]^2 removed.

    `seed` nodes per direction; (seed - 1) must be divisible by 20 so
    that the block boundary falls on grid lines.  Boundary node sets
    are tagged "outer" (perimeter of the square) and "hole" (perimeter
    of the removed block); the block's corner nodes belong to "hole".
    """
    if seed < 2 or (seed - 1) % 20 != 0:
        raise ValueError("seed - 1 must be a positive multiple of 20 "
                         "so the hole aligns with grid lines")
    if elem not in (ElementType.QUAD4, ElementType.TRI3):
        raise ValueError(f"unsupported element type {elem}")
    ncell = seed - 1
    i0, i1 = (9 * ncell) // 20, (11 * ncell) // 20  # hole cell range [i0, i1)
    coords = _grid(seed, seed, (0.0, 0.0, 1.0, 1.0))
    node = lambda i, j: j * seed + i

    in_hole_cell = lambda i, j: i0 <= i < i1 and i0 <= j < i1
    # nodes strictly inside the hole get dropped
    drop = np.zeros(seed * seed, dtype=bool)
    for j in range(i0 + 1, i1):
        for i in range(i0 + 1, i1):
            drop[node(i, j)] = True
    keep = ~drop
    renum = -np.ones(seed * seed, dtype=int)
    renum[keep] = np.arange(keep.sum())

    elems = []
    centers = []
    next_center = int(keep.sum())
    for j in range(ncell):
        for i in range(ncell):
            if in_hole_cell(i, j):
                continue
            quad = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1))
            quad = tuple(int(renum[q]) for q in quad)
            if elem is ElementType.QUAD4:
                elems.append((ElementType.QUAD4, quad))
            elif pattern is TriPattern.CRISS_CROSS:
                centers.append(coords[[node(i, j), node(i + 1, j),
                                       node(i + 1, j + 1), node(i, j + 1)]].mean(axis=0))
                elems.extend((ElementType.TRI3, t)
                             for t in _split_cell(pattern, *quad, next_center))
                next_center += 1
            else:
                elems.extend((ElementType.TRI3, t) for t in _split_cell(pattern, *quad))

    outer, hole = [], []
    for j in range(seed):
        for i in range(seed):
            if drop[node(i, j)]:
                continue
            if i in (0, seed - 1) or j in (0, seed - 1):
                outer.append(int(renum[node(i, j)]))
            on_band = i0 <= i <= i1 and i0 <= j <= i1
            on_rim = i in (i0, i1) or j in (i0, i1)
            if on_band and on_rim:
                hole.append(int(renum[node(i, j)]))

    edges = []
    for i in range(ncell):  # outer perimeter
        edges.append(((int(renum[node(i, 0)]), int(renum[node(i + 1, 0)])), "outer"))
        edges.append(((int(renum[node(i, ncell)]), int(renum[node(i + 1, ncell)])), "outer"))
    for j in range(ncell):
        edges.append(((int(renum[node(0, j)]), int(renum[node(0, j + 1)])), "outer"))
        edges.append(((int(renum[node(ncell, j)]), int(renum[node(ncell, j + 1)])), "outer"))
    for i in range(i0, i1):  # hole perimeter
        edges.append(((int(renum[node(i, i0)]), int(renum[node(i + 1, i0)])), "hole"))
        edges.append(((int(renum[node(i, i1)]), int(renum[node(i + 1, i1)])), "hole"))
        edges.append(((int(renum[node(i0, i)]), int(renum[node(i0, i + 1)])), "hole"))
        edges.append(((int(renum[node(i1, i)]), int(renum[node(i1, i + 1)])), "hole"))

    kept_coords = coords[keep]
    if centers:
        kept_coords = np.vstack([kept_coords, np.array(centers)])
    mesh = Mesh(kept_coords, elems, edges,
                {"outer": np.array(outer), "hole": np.array(hole)})
    _check_jacobians(mesh)
    return mesh
