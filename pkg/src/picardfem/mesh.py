"""Simplicial meshes of intervals and axis-aligned rectangles.

Only product domains are supported: 1D segments ``(a, b)`` and 2D rectangles
split into right triangles along the ``(+1, +1)`` cell diagonal.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from .errors import GeometryError, InvalidArgumentError

# Relative tolerance below which a simplex counts as degenerate.
_DEGENERATE_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable simplicial mesh.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, dim)
    elements : ndarray of int, shape (n_elements, dim + 1)
    boundary_nodes : ndarray of int
        Sorted indices of nodes lying on facets owned by exactly one element.
    element_measures : ndarray
        Lengths (1D) or areas (2D).
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray = field(repr=False)
    element_measures: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, nodes, elements) -> "Mesh":
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        elements = np.array(elements, dtype=np.int64)
        dim = nodes.shape[1]
        if dim not in (1, 2):
            raise InvalidArgumentError(f"only 1D and 2D meshes are supported, got dim={dim}")
        if elements.ndim != 2 or elements.shape[1] != dim + 1:
            raise InvalidArgumentError(f"elements must have {dim + 1} vertices each")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise InvalidArgumentError("element refers to a node index out of range")
        for elem in elements:
            if len(set(elem.tolist())) != len(elem):
                raise InvalidArgumentError(f"element {elem.tolist()} repeats a node")

        _, measures = _simplex_gradients(nodes, elements)
        boundary = _boundary_nodes(elements, dim)
        for arr in (nodes, elements, boundary, measures):
            arr.setflags(write=False)
        return cls(nodes, elements, boundary, measures)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        out = np.flatnonzero(mask)
        out.setflags(write=False)
        return out

    @cached_property
    def gradients(self) -> np.ndarray:
        """P1 basis gradients, shape (n_elements, dim + 1, dim)."""
        grads, _ = _simplex_gradients(self.nodes, self.elements)
        grads.setflags(write=False)
        return grads

    @cached_property
    def centroids(self) -> np.ndarray:
        c = self.nodes[self.elements].mean(axis=1)
        c.setflags(write=False)
        return c

    @property
    def measure(self) -> float:
        """Total measure of the meshed domain."""
        return float(self.element_measures.sum())

    @property
    def bounds(self) -> np.ndarray:
        """Bounding box, shape (dim, 2)."""
        return np.stack([self.nodes.min(axis=0), self.nodes.max(axis=0)], axis=1)

    @property
    def hmax(self) -> float:
        verts = self.nodes[self.elements]
        longest = 0.0
        for i, j in combinations(range(self.dim + 1), 2):
            longest = max(longest, float(np.linalg.norm(verts[:, i] - verts[:, j], axis=1).max()))
        return longest

    def element_centroid_values(self, values) -> np.ndarray:
        """Average of nodal ``values`` over the vertices of each element."""
        return np.asarray(values, dtype=float)[self.elements].mean(axis=1)

    def is_non_obtuse(self, tol=1e-12) -> bool:
        """True when no triangle has an angle above 90 degrees (always true in 1D)."""
        if self.dim == 1:
            return True
        g = self.gradients
        # Interior angles are non-obtuse iff grad(phi_i) . grad(phi_j) <= 0 for i != j.
        dots = np.einsum("eid,ejd->eij", g, g)
        off = dots[:, ~np.eye(3, dtype=bool)]
        scale = np.abs(dots).max()
        return bool((off <= tol * scale).all())


def _simplex_gradients(nodes, elements):
    verts = nodes[elements]  # (m, d+1, d)
    dim = nodes.shape[1]
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))  # columns p_i - p_0
    det = np.linalg.det(jac) if dim > 1 else jac[:, 0, 0]
    edge_scale = np.abs(verts[:, 1:, :] - verts[:, :1, :]).max(axis=(1, 2))
    bad = np.abs(det) <= _DEGENERATE_RTOL * np.maximum(edge_scale, 1e-300) ** dim
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise GeometryError(f"element {idx} is degenerate (measure {abs(det[idx]):.3e})")
    measures = np.abs(det) / (1.0 if dim == 1 else 2.0)
    inv = np.linalg.inv(jac)  # row i = grad of barycentric coordinate i+1
    grads = np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)
    return grads, measures


def _boundary_nodes(elements, dim):
    counts = Counter()
    for elem in elements.tolist():
        for facet in combinations(sorted(elem), dim):
            counts[facet] += 1
    if dim == 2 and any(c > 2 for c in counts.values()):
        raise GeometryError("non-conforming mesh: an edge is shared by more than two triangles")
    boundary = sorted({v for facet, c in counts.items() if c == 1 for v in facet})
    return np.array(boundary, dtype=np.int64)


def element_gradient_data(mesh: Mesh, elem: int):
    """Return ``(gradients, measure)`` of the P1 hat functions on one element.

    ``gradients`` has one row per element vertex, in the element's local
    vertex order.
    """
    if not 0 <= elem < mesh.n_elements:
        raise InvalidArgumentError(f"element index {elem} out of range")
    return mesh.gradients[elem].copy(), float(mesh.element_measures[elem])


def interval_mesh(a: float, b: float, n: int) -> Mesh:
    if n < 1:
        raise InvalidArgumentError("number of elements must be >= 1")
    if not b > a:
        raise InvalidArgumentError("interval must satisfy a < b")
    x = np.linspace(a, b, n + 1)
    elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    return Mesh.from_arrays(x[:, None], elements)


def unit_interval_mesh(n: int) -> Mesh:
    """Uniform mesh of (0, 1) with ``n`` segments."""
    return interval_mesh(0.0, 1.0, n)


def rectangle_mesh(x0: float, x1: float, y0: float, y1: float, nx: int, ny: int | None = None) -> Mesh:
    """Structured right-triangle mesh of ``(x0, x1) x (y0, y1)``.

    Every grid cell is cut along its lower-left to upper-right diagonal.
    """
    ny = nx if ny is None else ny
    if nx < 1 or ny < 1:
        raise InvalidArgumentError("number of cells per side must be >= 1")
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError("rectangle must have positive side lengths")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper
    return Mesh.from_arrays(nodes, elements)


def unit_square_mesh(n: int) -> Mesh:
    return rectangle_mesh(0.0, 1.0, 0.0, 1.0, n)


def write_vtk(path, mesh: Mesh, point_data: dict | None = None, title="picardfem field") -> None:
    """Write ``mesh`` (and optional nodal scalars) as legacy ASCII VTK."""
    cell_type = 3 if mesh.dim == 1 else 5
    npv = mesh.dim + 1
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_nodes} double")
    pad = np.zeros((mesh.n_nodes, 3))
    pad[:, : mesh.dim] = mesh.nodes
    lines.extend(" ".join(f"{c:.17g}" for c in p) for p in pad)
    lines.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (npv + 1)}")
    lines.extend(f"{npv} " + " ".join(str(v) for v in e) for e in mesh.elements.tolist())
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines.extend([str(cell_type)] * mesh.n_elements)
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (mesh.n_nodes,):
                raise InvalidArgumentError(f"point data {name!r} has wrong length")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.17g}" for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
