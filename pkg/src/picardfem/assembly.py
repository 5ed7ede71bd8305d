"""P1 Galerkin assembly with the coefficient frozen at a nodal field."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .coefficients import AdmissibleRange, CoefficientModel
from .errors import InvalidArgumentError, RangeViolationError
from .mesh import Mesh
from .sparse import CsrMatrix

QUADRATURE = "one-point centroid rule, z(x_c) = mean of vertex values"


@dataclass(frozen=True, eq=False)
class AdmissibleField:
    """Nodal P1 field with every value in ``[t_min, t_max]``."""

    mesh: Mesh
    values: np.ndarray
    range: AdmissibleRange

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise InvalidArgumentError(f"field has {v.size} values, mesh has {self.mesh.n_nodes} nodes")
        if not np.isfinite(v).all():
            raise RangeViolationError("field contains non-finite values")
        viol = self.range.violation(v)
        if viol > 0:
            raise RangeViolationError(
                f"field leaves [{self.range.t_min}, {self.range.t_max}] by {viol:.3e}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def clamped(cls, mesh, values, range) -> "AdmissibleField":
        return cls(mesh, range.clamp(values), range)

    @classmethod
    def constant(cls, mesh, value, range) -> "AdmissibleField":
        return cls(mesh, np.full(mesh.n_nodes, float(value)), range)


@dataclass(frozen=True, eq=False)
class DirichletData:
    """Boundary trace of ``u_b`` at ``mesh.boundary_nodes`` (in that order)."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape != (len(self.mesh.boundary_nodes),):
            raise InvalidArgumentError("one boundary value per boundary node is required")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, mesh: Mesh, g) -> "DirichletData":
        pts = mesh.nodes[mesh.boundary_nodes]
        return cls(mesh, np.array([float(g(p)) for p in pts]))

    @classmethod
    def constant(cls, mesh: Mesh, c: float) -> "DirichletData":
        return cls(mesh, np.full(len(mesh.boundary_nodes), float(c)))

    @cached_property
    def extension(self) -> np.ndarray:
        """Discrete lifting of ``u_b``: boundary trace, zero at interior nodes."""
        out = np.zeros(self.mesh.n_nodes)
        out[self.mesh.boundary_nodes] = self.values
        out.setflags(write=False)
        return out

    def check_range(self, range: AdmissibleRange) -> None:
        viol = range.violation(self.values)
        if viol > 0:
            i = int(np.argmax(np.maximum(self.values - range.t_max, range.t_min - self.values)))
            node = int(self.mesh.boundary_nodes[i])
            raise RangeViolationError(
                f"(A3) violated: boundary value {self.values[i]:.6g} at node {node} "
                f"{self.mesh.nodes[node].tolist()} lies outside [{range.t_min}, {range.t_max}]")

    def __add__(self, other):
        if not isinstance(other, DirichletData) or other.mesh is not self.mesh:
            return NotImplemented
        return DirichletData(self.mesh, self.values + other.values)

    def scaled(self, factor: float) -> "DirichletData":
        return DirichletData(self.mesh, factor * self.values)


def _nodal_values(mesh, z):
    if isinstance(z, AdmissibleField):
        if z.mesh is not mesh:
            raise InvalidArgumentError("field lives on a different mesh")
        return z.values
    v = np.asarray(z, dtype=float)
    if v.shape != (mesh.n_nodes,):
        raise InvalidArgumentError(f"field has {v.size} values, mesh has {mesh.n_nodes} nodes")
    return v


def element_matrices(mesh: Mesh, model: CoefficientModel, z) -> np.ndarray:
    """Local stiffness blocks ``|E| * G A(z_c, x_c) G^T``, shape (m, d+1, d+1)."""
    zv = _nodal_values(mesh, z)
    viol = model.range.violation(zv)
    if viol > 0:
        raise RangeViolationError(
            f"coefficient field leaves the certified range [{model.range.t_min}, {model.range.t_max}] by {viol:.3e}")
    zc = mesh.element_centroid_values(zv)
    A = model.evaluate(zc, mesh.centroids)
    G = mesh.gradients
    local = np.einsum("eid,edf,ejf->eij", G, A, G) * mesh.element_measures[:, None, None]
    return 0.5 * (local + np.transpose(local, (0, 2, 1)))


def assemble_stiffness(mesh: Mesh, model: CoefficientModel, z) -> CsrMatrix:
    """Full stiffness matrix (boundary rows included) with ``A`` frozen at ``z``."""
    local = element_matrices(mesh, model, z)
    nv = mesh.dim + 1
    rows = np.repeat(mesh.elements, nv, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, nv)).ravel()
    return CsrMatrix.from_triplets(rows, cols, local.ravel(), (mesh.n_nodes, mesh.n_nodes), symmetric=True)


def apply_dirichlet(S: CsrMatrix, dirichlet: DirichletData, mesh: Mesh):
    """Eliminate boundary rows and columns.

    Returns ``(S_II, rhs)`` where ``rhs = -S_IB @ u_b``; unknowns are ordered
    as ``mesh.interior_nodes``.
    """
    if dirichlet.mesh is not mesh or S.shape != (mesh.n_nodes, mesh.n_nodes):
        raise InvalidArgumentError("matrix, boundary data and mesh do not match")
    interior = mesh.interior_nodes
    S_II = S.submatrix(interior, interior)
    if len(interior) == 0:
        return S_II, np.zeros(0)
    S_IB = S.submatrix(interior, mesh.boundary_nodes)
    rhs = -(S_IB @ dirichlet.values)
    return S_II, rhs


def attach_boundary(mesh: Mesh, interior_values, dirichlet: DirichletData) -> np.ndarray:
    out = dirichlet.extension.copy()
    out[mesh.interior_nodes] = interior_values
    return out


# ---------------------------------------------------------------------------
# norms of P1 fields (exact integration)


def l2_norm(mesh: Mesh, values) -> float:
    """Exact L2 norm of the P1 interpolant of nodal ``values``."""
    u = _nodal_values(mesh, values)[mesh.elements]
    d = mesh.dim
    per_elem = (u * u).sum(axis=1) + u.sum(axis=1) ** 2
    total = np.dot(mesh.element_measures, per_elem) / ((d + 1) * (d + 2))
    return float(np.sqrt(max(total, 0.0)))


def element_gradients(mesh: Mesh, values) -> np.ndarray:
    """Piecewise-constant gradient of the P1 field, shape (m, dim)."""
    u = _nodal_values(mesh, values)[mesh.elements]
    return np.einsum("ei,eid->ed", u, mesh.gradients)


def h1_seminorm(mesh: Mesh, values) -> float:
    g = element_gradients(mesh, values)
    return float(np.sqrt(np.dot(mesh.element_measures, (g * g).sum(axis=1))))


def h1_norm(mesh: Mesh, values) -> float:
    return float(np.hypot(l2_norm(mesh, values), h1_seminorm(mesh, values)))


def max_norm(mesh: Mesh, values) -> float:
    """Nodal max norm; for P1 fields this equals the sup norm."""
    return float(np.abs(_nodal_values(mesh, values)).max())
