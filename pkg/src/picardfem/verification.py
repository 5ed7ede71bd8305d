"""Exact solutions, refinement studies and continuous-dependence experiments.

The exact solutions come from the Kirchhoff transform: for a scalar
coefficient ``a(z) = k + b z**3`` the primitive ``F(z) = k z + b z**4 / 4``
turns ``-div(a(u) grad u) = 0`` into Laplace's equation for ``F(u)``. Taking
``F(u)`` affine and inverting ``F`` by bisection gives ``u`` to ~1e-14.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .assembly import AdmissibleField, DirichletData, element_gradients, h1_norm, l2_norm
from .coefficients import AdmissibleRange, CoefficientModel, certify_ellipticity, rosseland_model
from .errors import (EllipticityError, ExperimentError, InvalidArgumentError, OracleDomainError,
                     RangeViolationError)
from .mesh import Mesh, unit_interval_mesh, unit_square_mesh
from .picard import PicardConfig, frozen_solve, linearized_map, solve_fixed_point

BISECTION_TOL = 1e-14


@dataclass(frozen=True)
class KirchhoffOracle:
    """Exact solution for ``a(z) = k + b z**3`` with ``F(u) = w_offset + w_gradient . x``."""

    k: float
    b: float
    w_offset: float
    w_gradient: tuple
    range: AdmissibleRange

    def __post_init__(self):
        if not self.k > 0 or self.b < 0:
            raise InvalidArgumentError("oracle needs k > 0 and b >= 0")
        if self.b > 0 and self.range.t_min < 0:
            raise InvalidArgumentError("a(z) >= k > 0 requires t_min >= 0 when b > 0")
        object.__setattr__(self, "w_gradient", tuple(float(g) for g in np.atleast_1d(self.w_gradient)))

    @classmethod
    def from_endpoints(cls, k, b, left, right, range) -> "KirchhoffOracle":
        """1D oracle on (0, 1) with ``u(0) = left`` and ``u(1) = right``."""
        f0 = k * left + b * left**4 / 4
        f1 = k * right + b * right**4 / 4
        return cls(k, b, f0, (f1 - f0,), range)

    @property
    def dim(self) -> int:
        return len(self.w_gradient)

    def primitive(self, z):
        z = np.asarray(z, dtype=float)
        return self.k * z + 0.25 * self.b * z**4

    def conductivity(self, z):
        return self.k + self.b * np.asarray(z, dtype=float) ** 3

    def w_star(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return self.w_offset + x @ np.array(self.w_gradient)

    def model(self, domain=None) -> CoefficientModel:
        return rosseland_model(self.k, self.b, self.range, dim=self.dim, domain=domain)

    def boundary_data(self, mesh: Mesh) -> DirichletData:
        return DirichletData(mesh, kirchhoff_exact(self, mesh.nodes[mesh.boundary_nodes]))

    def gradient(self, x):
        """Exact gradient ``grad w* / a(u)``."""
        u = kirchhoff_exact(self, x)
        return np.array(self.w_gradient)[None, :] / self.conductivity(u)[:, None]


def kirchhoff_exact(oracle: KirchhoffOracle, x) -> np.ndarray:
    """Invert the Kirchhoff primitive by bisection on ``[t_min, t_max]``.

    ``x`` may be a single point or an array of points; returns one value per
    point.
    """
    target = oracle.w_star(x)
    lo_v, hi_v = oracle.primitive(oracle.range.t_min), oracle.primitive(oracle.range.t_max)
    slack = 1e-14 * max(1.0, abs(lo_v), abs(hi_v))
    if np.any(target < lo_v - slack) or np.any(target > hi_v + slack):
        bad = target[(target < lo_v - slack) | (target > hi_v + slack)][0]
        raise OracleDomainError(f"w*(x) = {bad:.6g} outside attainable [{lo_v:.6g}, {hi_v:.6g}]")
    lo = np.full_like(target, oracle.range.t_min)
    hi = np.full_like(target, oracle.range.t_max)
    for _ in range(200):
        if (hi - lo).max(initial=0.0) <= BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        below = oracle.primitive(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# quadrature for errors against non-polynomial exact solutions


def element_quadrature(mesh: Mesh, order: int = 6):
    """Gauss rule on every element.

    Returns ``(bary, points, weights)`` with barycentric coordinates
    ``(q, dim+1)``, physical points ``(m, q, dim)`` and weights ``(m, q)``.
    Triangles use a collapsed (Duffy) tensor Gauss rule.
    """
    g, gw = np.polynomial.legendre.leggauss(order)
    s, sw = 0.5 * (g + 1), 0.5 * gw
    if mesh.dim == 1:
        bary = np.column_stack([1 - s, s])
        ref_w = sw
    else:
        S, T = np.meshgrid(s, s, indexing="ij")
        WS, WT = np.meshgrid(sw, sw, indexing="ij")
        xi, eta = S.ravel(), (T * (1 - S)).ravel()
        bary = np.column_stack([1 - xi - eta, xi, eta])
        ref_w = 2.0 * (WS * WT * (1 - S)).ravel()  # reference area 1/2 -> weights sum to 1
    verts = mesh.nodes[mesh.elements]
    points = np.einsum("qi,eid->eqd", bary, verts)
    weights = mesh.element_measures[:, None] * ref_w[None, :]
    return bary, points, weights


def error_norms(mesh: Mesh, values, exact, exact_gradient, order: int = 6):
    """``(L2 error, H1 error)`` of a P1 field against an exact solution.

    ``exact(points)`` and ``exact_gradient(points)`` take ``(N, dim)`` arrays.
    """
    values = np.asarray(getattr(values, "values", values), dtype=float)
    bary, pts, w = element_quadrature(mesh, order)
    m, q, d = pts.shape
    uh = values[mesh.elements] @ bary.T  # (m, q)
    u = exact(pts.reshape(-1, d)).reshape(m, q)
    l2 = float(np.sqrt(np.sum(w * (uh - u) ** 2)))
    gh = element_gradients(mesh, values)[:, None, :]
    gu = exact_gradient(pts.reshape(-1, d)).reshape(m, q, d)
    semi = float(np.sqrt(np.sum(w * ((gh - gu) ** 2).sum(axis=2))))
    return l2, float(np.hypot(l2, semi))


# ---------------------------------------------------------------------------
# refinement study


@dataclass
class ConvergenceRow:
    n: int
    h: float
    l2_error: float
    h1_error: float
    l2_order: float
    h1_order: float
    picard_iterations: int


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)

    COLUMNS = ("n", "h", "l2_error", "h1_error", "l2_order", "h1_order", "picard_iterations")

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([r.n, f"{r.h:.17g}", f"{r.l2_error:.17g}", f"{r.h1_error:.17g}",
                            f"{r.l2_order:.17g}", f"{r.h1_order:.17g}", r.picard_iterations])


def _order(e_coarse, e_fine, h_coarse, h_fine):
    if e_coarse <= 0 or e_fine <= 0:
        return float("nan")
    return float(np.log(e_coarse / e_fine) / np.log(h_coarse / h_fine))


def convergence_study(oracle: KirchhoffOracle, mesh_sizes, config: PicardConfig | None = None) -> ConvergenceTable:
    """Solve on unit meshes with ``n`` cells per side and measure errors.

    Raises
    ------
    ExperimentError
        If the Picard iteration fails at some level; ``partial`` holds the
        table computed so far.
    """
    config = config or PicardConfig()
    make = unit_interval_mesh if oracle.dim == 1 else unit_square_mesh
    table = ConvergenceTable()
    for n in mesh_sizes:
        mesh = make(n)
        model = oracle.model()
        u, rep = solve_fixed_point(mesh, model, oracle.boundary_data(mesh), config)
        if not rep.converged:
            raise ExperimentError(f"Picard iteration did not converge at n={n}", partial=table, parameter=n)
        l2, h1 = error_norms(mesh, u, lambda p: kirchhoff_exact(oracle, p), oracle.gradient)
        h = 1.0 / n
        if table.rows:
            prev = table.rows[-1]
            l2o, h1o = _order(prev.l2_error, l2, prev.h, h), _order(prev.h1_error, h1, prev.h, h)
        else:
            l2o = h1o = float("nan")
        table.rows.append(ConvergenceRow(n, h, l2, h1, l2o, h1o, rep.iterations_used))
    return table


# ---------------------------------------------------------------------------
# continuous dependence


@dataclass
class DependenceReport:
    """Distances between perturbed and reference solutions.

    ``parameters`` are the perturbation sizes in the order run; ``distances``
    is the primary (L2 unless stated otherwise) distance list.
    """

    kind: str
    parameters: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    distances_max: list = field(default_factory=list)
    distances_h1: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    uniqueness_gap: float = float("nan")

    @property
    def slope(self) -> float:
        """Least-squares slope of log(distance) against log(parameter)."""
        p = np.asarray(self.parameters, dtype=float)
        d = np.asarray(self.distances, dtype=float)
        keep = (p > 0) & (d > 0)
        if keep.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(p[keep]), np.log(d[keep]), 1)[0])

    @property
    def monotone(self) -> bool:
        """Distances strictly decrease as the perturbation shrinks."""
        order = np.argsort(-np.asarray(self.parameters, dtype=float), kind="stable")
        d = np.asarray(self.distances, dtype=float)[order]
        return bool(np.all(np.diff(d) < 0))

    @property
    def reduction(self) -> float:
        """Distance at the smallest parameter divided by that at the largest."""
        p = np.asarray(self.parameters, dtype=float)
        d = np.asarray(self.distances, dtype=float)
        big = d[np.argmax(p)]
        return float(d[np.argmin(p)] / big) if big > 0 else float("nan")

    @property
    def unique(self) -> bool:
        return not np.isfinite(self.uniqueness_gap) or self.uniqueness_gap <= 1e-6

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "distance_l2", "distance_max", "distance_h1", "converged"])
            for i, p in enumerate(self.parameters):
                h1 = self.distances_h1[i] if self.distances_h1 else float("nan")
                mx = self.distances_max[i] if self.distances_max else float("nan")
                ok = self.converged[i] if self.converged else True
                w.writerow([f"{p:.17g}", f"{self.distances[i]:.17g}", f"{mx:.17g}", f"{h1:.17g}", int(ok)])

    def summary(self) -> str:
        return (f"{self.kind}: {len(self.parameters)} runs, slope {self.slope:.3f}, "
                f"monotone={self.monotone}, reduction={self.reduction:.3e}")


def _uniqueness_gap(mesh, model, dirichlet, config, u_ref):
    """L2 gap between fixed points reached from two different starting fields."""
    alt = PicardConfig(**{**config.__dict__, "initial_guess": "constant", "initial_value": None})
    u_alt, rep = solve_fixed_point(mesh, model, dirichlet, alt)
    if not rep.converged:
        return float("nan")
    return l2_norm(mesh, u_alt.values - u_ref.values)


def _record(report, mesh, u, u0, converged):
    diff = u.values - u0.values
    report.distances.append(l2_norm(mesh, diff))
    report.distances_max.append(float(np.abs(diff).max()))
    report.distances_h1.append(h1_norm(mesh, diff))
    report.converged.append(converged)


def coefficient_dependence_experiment(mesh, model: CoefficientModel, dirichlet: DirichletData, epsilons,
                                      config: PicardConfig | None = None,
                                      check_uniqueness: bool = True) -> DependenceReport:
    """Distances ``||u_eps - u_0||`` for the shifted family ``A + eps * I``."""
    config = config or PicardConfig()
    u0, rep0 = solve_fixed_point(mesh, model, dirichlet, config)
    report = DependenceReport("coefficient")
    if check_uniqueness and rep0.converged:
        report.uniqueness_gap = _uniqueness_gap(mesh, model, dirichlet, config, u0)
    for eps in epsilons:
        shifted = model.shifted(eps) if eps != 0 else model
        try:
            cert = certify_ellipticity(shifted, points=mesh.centroids)
        except EllipticityError as exc:
            raise ExperimentError(f"A + {eps:g} I fails certification: {exc}", partial=report, parameter=eps) from exc
        u, rep = solve_fixed_point(mesh, shifted, dirichlet, config, certificate=cert)
        report.parameters.append(float(eps))
        _record(report, mesh, u, u0, rep.converged and rep0.converged)
    return report


def boundary_dependence_experiment(mesh, model: CoefficientModel, base: DirichletData, profile: DirichletData,
                                   epsilons, config: PicardConfig | None = None,
                                   check_uniqueness: bool = True) -> DependenceReport:
    """Distances ``||u_eps - u_0||`` for boundary data ``u_b + eps * g``."""
    config = config or PicardConfig()
    perturbed = []
    for eps in epsilons:
        ub = base + profile.scaled(eps)
        try:
            ub.check_range(model.range)
        except RangeViolationError as exc:
            raise InvalidArgumentError(f"eps={eps:g}: {exc}") from exc
        perturbed.append(ub)
    u0, rep0 = solve_fixed_point(mesh, model, base, config)
    report = DependenceReport("boundary")
    if check_uniqueness and rep0.converged:
        report.uniqueness_gap = _uniqueness_gap(mesh, model, base, config, u0)
    for eps, ub in zip(epsilons, perturbed):
        u, rep = solve_fixed_point(mesh, model, ub, config)
        report.parameters.append(float(eps))
        _record(report, mesh, u, u0, rep.converged and rep0.converged)
    return report


def harmonic_extension(mesh, model: CoefficientModel, g: DirichletData, config: PicardConfig | None = None):
    """Discrete ``A``-harmonic extension of ``g`` for a ``z``-independent model."""
    if not model.z_independent:
        raise InvalidArgumentError("harmonic extension is defined here for z-independent models only")
    config = config or PicardConfig()
    z = np.full(mesh.n_nodes, model.range.t_min)
    values, _ = frozen_solve(mesh, model, g, z, cg_tol=config.cg_tol, preconditioner=config.preconditioner)
    return values


def map_continuity_experiment(mesh, model, dirichlet, z, perturbation, deltas,
                              config: PicardConfig | None = None) -> DependenceReport:
    """``||L z_d - L z||`` for ``z_d = clamp(z + d * perturbation)``.

    Perturbations are measured in the max norm, the regime in which the map
    is continuous into H1.
    """
    config = config or PicardConfig()
    z = z if isinstance(z, AdmissibleField) else AdmissibleField(mesh, z, model.range)
    w = linearized_map(mesh, model, dirichlet, z, config)
    report = DependenceReport("map")
    for d in deltas:
        zd = AdmissibleField.clamped(mesh, z.values + d * np.asarray(perturbation), model.range)
        wd = linearized_map(mesh, model, dirichlet, zd, config)
        report.parameters.append(float(np.abs(zd.values - z.values).max()))
        _record(report, mesh, wd, w, True)
    return report


# ---------------------------------------------------------------------------
# flux functional


def _flux_vectors(mesh, model, z):
    zv = np.asarray(getattr(z, "values", z), dtype=float)
    A = model.evaluate(mesh.element_centroid_values(zv), mesh.centroids)
    return np.einsum("edf,ef->ed", A, element_gradients(mesh, zv))


def flux_functional(mesh, z, eta, model: CoefficientModel) -> float:
    """``<A(z) grad z, eta> = int A(z, x) grad z . grad eta`` by centroid quadrature."""
    q = _flux_vectors(mesh, model, z)
    ge = element_gradients(mesh, np.asarray(getattr(eta, "values", eta), dtype=float))
    return float(np.dot(mesh.element_measures, (q * ge).sum(axis=1)))


def lipschitz_constant(mesh, eta) -> float:
    """Lipschitz constant of the P1 interpolant of nodal ``eta``."""
    g = element_gradients(mesh, np.asarray(eta, dtype=float))
    return float(np.sqrt((g * g).sum(axis=1)).max())


def flux_bound(mesh, z, eta, lambda_max: float) -> float:
    """``Lambda * |Omega|**0.5 * ||grad z||_2 * Lip(eta)``."""
    zv = np.asarray(getattr(z, "values", z), dtype=float)
    gz = element_gradients(mesh, zv)
    grad_norm = np.sqrt(np.dot(mesh.element_measures, (gz * gz).sum(axis=1)))
    return float(lambda_max * np.sqrt(mesh.measure) * grad_norm * lipschitz_constant(mesh, eta))


def flux_continuity_experiment(mesh, model, z, eta, perturbation, deltas) -> DependenceReport:
    """``|flux(z + d * psi, eta) - flux(z, eta)|`` as ``d -> 0`` (clamped to the range)."""
    zv = np.asarray(getattr(z, "values", z), dtype=float)
    f0 = flux_functional(mesh, zv, eta, model)
    report = DependenceReport("flux")
    for d in deltas:
        zd = model.range.clamp(zv + d * np.asarray(perturbation))
        report.parameters.append(h1_norm(mesh, zd - zv))
        report.distances.append(abs(flux_functional(mesh, zd, eta, model) - f0))
        report.converged.append(True)
    return report
