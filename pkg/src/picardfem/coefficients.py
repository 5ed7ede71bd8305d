"""Coefficient matrices ``A(z, x)`` and their validation.

A model is evaluated in batches: ``model.evaluate(z, x)`` takes ``z`` of shape
``(m,)`` and points ``x`` of shape ``(m, dim)`` and returns ``(m, dim, dim)``.
User callables must be pure functions; models are immutable and can be
shared between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import EllipticityError, InvalidArgumentError, ModelConstructionError

SYMMETRY_TOL = 1e-14


@dataclass(frozen=True)
class AdmissibleRange:
    t_min: float
    t_max: float

    def __post_init__(self):
        if not (np.isfinite(self.t_min) and np.isfinite(self.t_max)):
            raise InvalidArgumentError("range bounds must be finite")
        if self.t_min > self.t_max:
            raise InvalidArgumentError(f"t_min={self.t_min} exceeds t_max={self.t_max}")

    def contains(self, values, tol=0.0) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all(v >= self.t_min - tol) and np.all(v <= self.t_max + tol))

    def violation(self, values) -> float:
        """Largest distance of ``values`` outside the interval (0 if inside)."""
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return 0.0
        return float(max(0.0, (v - self.t_max).max(), (self.t_min - v).max()))

    def clamp(self, values) -> np.ndarray:
        return np.clip(np.asarray(values, dtype=float), self.t_min, self.t_max)


# ---------------------------------------------------------------------------
# matrix fields K(x), B(x)


class MatrixField:
    """A symmetric matrix-valued function of position, evaluated in batches."""

    dim: int

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def max_abs_entry(self) -> float | None:
        """Bound on ``|entry|`` over the domain, or None when unknown."""
        return None


class ConstantField(MatrixField):
    def __init__(self, matrix, dim: int):
        m = np.asarray(matrix, dtype=float)
        if m.ndim == 0:
            m = float(m) * np.eye(dim)
        if m.shape != (dim, dim):
            raise ModelConstructionError(f"constant matrix must be {dim}x{dim}, got shape {m.shape}")
        self.matrix = m
        self.dim = dim

    def __call__(self, x):
        x = np.atleast_2d(x)
        return np.broadcast_to(self.matrix, (len(x), self.dim, self.dim)).copy()

    def max_abs_entry(self):
        return float(np.abs(self.matrix).max())


class PiecewiseConstantField(MatrixField):
    """Constant on each cell of a uniform grid laid over a bounding box.

    ``values`` has shape ``cells + (dim, dim)`` or ``cells`` (scalar multiples
    of the identity). ``cells`` is ``(nx,)`` in 1D and ``(nx, ny)`` in 2D.
    """

    def __init__(self, values, bounds, dim: int):
        v = np.asarray(values, dtype=float)
        bounds = np.asarray(bounds, dtype=float).reshape(dim, 2)
        if v.ndim == dim:
            v = v[..., None, None] * np.eye(dim)
        if v.ndim != dim + 2 or v.shape[-2:] != (dim, dim):
            raise ModelConstructionError(f"per-cell table has incompatible shape {np.shape(values)}")
        self.values = v
        self.cells = v.shape[:dim]
        self.bounds = bounds
        self.dim = dim

    def __call__(self, x):
        x = np.atleast_2d(x)
        idx = []
        for d in range(self.dim):
            lo, hi = self.bounds[d]
            k = np.floor((x[:, d] - lo) / (hi - lo) * self.cells[d]).astype(int)
            idx.append(np.clip(k, 0, self.cells[d] - 1))
        return self.values[tuple(idx)].copy()

    def max_abs_entry(self):
        return float(np.abs(self.values).max())


class CallableField(MatrixField):
    """Wraps a pointwise ``f(x) -> matrix`` (or scalar times identity)."""

    def __init__(self, func: Callable, dim: int):
        self.func = func
        self.dim = dim

    def __call__(self, x):
        x = np.atleast_2d(x)
        out = np.empty((len(x), self.dim, self.dim))
        for i, p in enumerate(x):
            m = np.asarray(self.func(p), dtype=float)
            out[i] = float(m) * np.eye(self.dim) if m.ndim == 0 else m
        return out


def as_matrix_field(obj, dim: int) -> MatrixField:
    if isinstance(obj, MatrixField):
        if obj.dim != dim:
            raise ModelConstructionError(f"field has dim {obj.dim}, expected {dim}")
        return obj
    if callable(obj):
        return CallableField(obj, dim)
    return ConstantField(obj, dim)


# ---------------------------------------------------------------------------
# models


def _unit_box(dim):
    return np.array([[0.0, 1.0]] * dim)


@dataclass(frozen=True)
class CoefficientModel:
    """Matrix field ``A(z, x)`` certified on ``range``.

    ``batch`` maps ``(z (m,), x (m, dim))`` to ``(m, dim, dim)``. When
    ``z_independent`` is set the model ignores ``z`` (a linear problem).
    """

    dim: int
    batch: Callable[[np.ndarray, np.ndarray], np.ndarray]
    range: AdmissibleRange
    domain: np.ndarray = field(default=None, repr=False)
    holder_exponent: float | None = None
    holder_constant: float | None = None
    z_independent: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ModelConstructionError("only dim 1 and 2 are supported")
        if self.domain is None:
            object.__setattr__(self, "domain", _unit_box(self.dim))
        if self.holder_exponent is not None and not 0 < self.holder_exponent <= 1:
            raise ModelConstructionError("holder_exponent must lie in (0, 1]")
        if self.holder_constant is not None and self.holder_constant < 0:
            raise ModelConstructionError("holder_constant must be nonnegative")

    @classmethod
    def from_pointwise(cls, func, dim, range, **kwargs) -> "CoefficientModel":
        """Build a model from ``func(z, x) -> dim x dim matrix``."""

        def batch(z, x):
            out = np.empty((len(z), dim, dim))
            for i, (zi, xi) in enumerate(zip(z, x)):
                m = np.asarray(func(float(zi), xi), dtype=float)
                out[i] = float(m) * np.eye(dim) if m.ndim == 0 else m
            return out

        return cls(dim, batch, range, **kwargs)

    def evaluate(self, z, x) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        x = np.asarray(x, dtype=float).reshape(len(z), self.dim)
        return self.batch(z, x)

    def eval(self, z: float, x) -> np.ndarray:
        """Single-point evaluation of ``A(z, x)``."""
        return self.evaluate([z], np.reshape(x, (1, self.dim)))[0]

    def shifted(self, eps: float) -> "CoefficientModel":
        """The model ``A + eps * I``."""
        base = self.batch
        eye = np.eye(self.dim)

        def batch(z, x):
            return base(z, x) + eps * eye

        return replace(self, batch=batch, name=f"{self.name}+{eps:g}I")


def rosseland_model(K, B, range: AdmissibleRange, dim: int = 1, domain=None,
                    validation_points: int = 16) -> CoefficientModel:
    """``A(z, x) = K(x) + z**3 * B(x)``.

    ``K`` and ``B`` may be scalars (times the identity), constant matrices,
    :class:`MatrixField` instances, or pointwise callables. Symmetry is checked
    at a grid of validation points.
    """
    domain = _unit_box(dim) if domain is None else np.asarray(domain, dtype=float).reshape(dim, 2)
    Kf = as_matrix_field(K, dim)
    Bf = as_matrix_field(B, dim)
    pts = _sample_points(domain, validation_points)
    for label, f in (("K", Kf), ("B", Bf)):
        vals = f(pts)
        asym = np.abs(vals - np.transpose(vals, (0, 2, 1))).max(axis=(1, 2))
        if (asym > SYMMETRY_TOL * np.maximum(1.0, np.abs(vals).max())).any():
            i = int(np.argmax(asym))
            raise ModelConstructionError(f"{label}(x) is not symmetric at x={pts[i].tolist()}")

    def batch(z, x):
        return Kf(x) + (z**3)[:, None, None] * Bf(x)

    bmax = Bf.max_abs_entry()
    zmax = max(abs(range.t_min), abs(range.t_max))
    holder = None if bmax is None else 3.0 * zmax**2 * bmax
    zero_b = bmax == 0.0
    return CoefficientModel(
        dim, batch, range, domain,
        holder_exponent=1.0 if holder is not None else None,
        holder_constant=holder,
        z_independent=zero_b,
        name="rosseland",
    )


def linear_model(A, range: AdmissibleRange, dim: int = 1, domain=None) -> CoefficientModel:
    """A coefficient independent of the solution: ``A(z, x) = A(x)``."""
    domain = _unit_box(dim) if domain is None else np.asarray(domain, dtype=float).reshape(dim, 2)
    Af = as_matrix_field(A, dim)

    def batch(z, x):
        return Af(x)

    return CoefficientModel(dim, batch, range, domain, holder_exponent=1.0, holder_constant=0.0,
                            z_independent=True, name="linear")


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class EllipticityCertificate:
    lambda_min: float
    lambda_max: float
    samples_z: int
    samples_x: int
    argmin: tuple = ()
    argmax: tuple = ()

    def __post_init__(self):
        if not 0 < self.lambda_min <= self.lambda_max:
            raise InvalidArgumentError("certificate requires 0 < lambda_min <= lambda_max")


def symmetric_eigenvalues(mats: np.ndarray):
    """Closed-form (min, max) eigenvalues of a batch of 1x1 or 2x2 symmetric matrices."""
    mats = np.asarray(mats, dtype=float)
    d = mats.shape[-1]
    if d == 1:
        e = mats[..., 0, 0]
        return e, e.copy()
    if d == 2:
        a, b, c = mats[..., 0, 0], mats[..., 0, 1], mats[..., 1, 1]
        mean = 0.5 * (a + c)
        rad = np.hypot(0.5 * (a - c), b)
        return mean - rad, mean + rad
    eig = np.linalg.eigvalsh(mats)
    return eig[..., 0], eig[..., -1]


def _sample_points(domain, per_axis):
    """Midpoints of a uniform ``per_axis**dim`` grid over the box."""
    axes = [lo + (np.arange(per_axis) + 0.5) * (hi - lo) / per_axis for lo, hi in domain]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grid])


def certify_ellipticity(model: CoefficientModel, z_samples: int = 64, x_samples: int = 8,
                        points=None) -> EllipticityCertificate:
    """Scan eigenvalues of ``A(z, x)`` over a tensor grid of ``z`` and ``x``.

    ``z`` runs over ``z_samples`` equispaced values spanning the admissible
    range (endpoints included). ``x`` runs over ``points`` when given (e.g.
    element centroids), otherwise over midpoints of an ``x_samples``-per-axis
    grid of the model domain.

    Raises
    ------
    EllipticityError
        If any sampled matrix has a non-positive eigenvalue; the exception
        carries the worst ``(z, x)`` sample.
    """
    if z_samples < 2 or x_samples < 1:
        raise InvalidArgumentError("need z_samples >= 2 and x_samples >= 1")
    r = model.range
    zs = np.linspace(r.t_min, r.t_max, z_samples)
    xs = _sample_points(model.domain, x_samples) if points is None else np.atleast_2d(points)
    nx = len(xs)
    Z = np.repeat(zs, nx)
    X = np.tile(xs, (z_samples, 1))
    mats = model.evaluate(Z, X)
    if not np.isfinite(mats).all():
        i = int(np.flatnonzero(~np.isfinite(mats).all(axis=(1, 2)))[0])
        raise EllipticityError(f"A(z, x) is not finite at z={Z[i]:.6g}, x={X[i].tolist()}",
                               z=float(Z[i]), x=X[i].tolist())
    asym = np.abs(mats - np.transpose(mats, (0, 2, 1))).max()
    if asym > 1e-12 * max(1.0, np.abs(mats).max()):
        raise ModelConstructionError(f"A(z, x) is not symmetric (max asymmetry {asym:.3e})")
    lo, hi = symmetric_eigenvalues(mats)
    imin = int(np.argmin(lo))
    imax = int(np.argmax(hi))
    if lo[imin] <= 0:
        z0, x0 = float(Z[imin]), X[imin].tolist()
        raise EllipticityError(
            f"A(z, x) is not positive definite at z={z0:.6g}, x={x0} "
            f"(smallest eigenvalue {lo[imin]:.6g})",
            z=z0, x=x0, eigenvalue=float(lo[imin]),
        )
    return EllipticityCertificate(
        float(lo[imin]), float(hi[imax]), z_samples, nx,
        argmin=(float(Z[imin]), tuple(X[imin])), argmax=(float(Z[imax]), tuple(X[imax])),
    )


# ---------------------------------------------------------------------------
# continuity in z


def _nodal(field_or_values, mesh):
    fmesh = getattr(field_or_values, "mesh", None)
    if fmesh is not None and fmesh is not mesh:
        raise InvalidArgumentError("field lives on a different mesh")
    v = np.asarray(getattr(field_or_values, "values", field_or_values), dtype=float)
    if v.shape != (mesh.n_nodes,):
        raise InvalidArgumentError(f"field has {v.size} values, mesh has {mesh.n_nodes} nodes")
    return v


def continuity_modulus(model: CoefficientModel, z1, z2, mesh) -> float:
    """``max_pq || a_pq(z1(x), x) - a_pq(z2(x), x) ||_2`` by centroid quadrature."""
    v1, v2 = _nodal(z1, mesh), _nodal(z2, mesh)
    xc = mesh.centroids
    d = model.evaluate(mesh.element_centroid_values(v1), xc) - model.evaluate(mesh.element_centroid_values(v2), xc)
    sq = np.einsum("e,epq->pq", mesh.element_measures, d * d)
    return float(np.sqrt(sq.max()))


def holder_bound(model: CoefficientModel, z1, z2, mesh) -> float:
    """Upper bound on :func:`continuity_modulus` implied by the declared Hölder data.

    With ``|a(s, x) - a(t, x)| <= C |s - t|**alpha`` and Jensen's inequality the
    centroid-rule L2 distance obeys ``C * |Omega|**((1 - alpha) / 2) * ||dz||**alpha``.
    """
    if model.holder_exponent is None or model.holder_constant is None:
        raise InvalidArgumentError("model declares no Hölder modulus")
    v1, v2 = _nodal(z1, mesh), _nodal(z2, mesh)
    dz = mesh.element_centroid_values(v1) - mesh.element_centroid_values(v2)
    dz_norm = float(np.sqrt(np.dot(mesh.element_measures, dz * dz)))
    alpha = model.holder_exponent
    return model.holder_constant * mesh.measure ** ((1 - alpha) / 2) * dz_norm**alpha
