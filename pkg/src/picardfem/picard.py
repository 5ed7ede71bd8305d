"""The frozen-coefficient map ``z -> w`` and damped Picard iteration to its fixed point.

One application of the map assembles the stiffness matrix with ``A`` frozen
at ``z``, eliminates the Dirichlet nodes and solves the SPD interior system
with conjugate gradients. Iterates are kept inside the admissible interval;
how far the raw solve fell outside it is recorded, since the continuous
problem satisfies a maximum principle and needs no clamping at all.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import (QUADRATURE, AdmissibleField, DirichletData, apply_dirichlet, assemble_stiffness,
                       attach_boundary, h1_norm, h1_seminorm, l2_norm)
from .coefficients import CoefficientModel, EllipticityCertificate, certify_ellipticity
from .errors import InvalidArgumentError, MaxPrincipleViolationError, SolverError
from .sparse import CgReport, cg_solve

log = logging.getLogger(__name__)

CLAMP_POLICIES = ("clamp", "reject")
INITIAL_GUESSES = ("boundary-extension", "constant")


@dataclass
class PicardConfig:
    tol_l2: float = 1e-10
    max_iterations: int = 50
    damping: float = 1.0
    clamp_policy: str = "clamp"
    clamp_tolerance: float = 1e-10
    initial_guess: object = "boundary-extension"  # or "constant", or a nodal array
    initial_value: float | None = None  # for "constant"; midpoint of the range if None
    auto_damping: bool = True
    fallback_damping: float = 0.5
    cg_tol: float = 1e-12
    cg_max_iter: int | None = None
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not self.tol_l2 > 0:
            raise InvalidArgumentError("tol_l2 must be positive")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if not 0 < self.damping <= 1:
            raise InvalidArgumentError("damping must lie in (0, 1]")
        if not 0 < self.fallback_damping <= 1:
            raise InvalidArgumentError("fallback_damping must lie in (0, 1]")
        if self.clamp_policy not in CLAMP_POLICIES:
            raise InvalidArgumentError(f"clamp_policy must be one of {CLAMP_POLICIES}")
        if isinstance(self.initial_guess, str) and self.initial_guess not in INITIAL_GUESSES:
            raise InvalidArgumentError(f"initial_guess must be one of {INITIAL_GUESSES} or an array")
        if not self.cg_tol > 0:
            raise InvalidArgumentError("cg_tol must be positive")
        if self.cg_tol > 1e-2 * self.tol_l2:
            log.warning("cg_tol=%g is not two orders below tol_l2=%g", self.cg_tol, self.tol_l2)


@dataclass
class PicardReport:
    """Iteration history.

    ``iterations_used`` counts the map applications needed to reach the fixed
    point; on convergence one further application (whose increment is at most
    ``tol_l2``) confirmed it, so ``len(increments_l2) == iterations_used + 1``.
    """

    iterations_used: int = 0
    increments_l2: list = field(default_factory=list)
    increments_h1: list = field(default_factory=list)
    clamp_violation_linf: list = field(default_factory=list)
    dampings: list = field(default_factory=list)
    linear_solves: list = field(default_factory=list)
    converged: bool = False
    nonlinear_residual: float = float("nan")
    quadrature: str = QUADRATURE

    @property
    def map_applications(self) -> int:
        return len(self.increments_l2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["linear_solves"] = [asdict(r) if not isinstance(r, dict) else r for r in self.linear_solves]
        d["map_applications"] = self.map_applications
        return d

    def rows(self):
        for k in range(self.map_applications):
            yield (k + 1, self.increments_l2[k], self.increments_h1[k], self.clamp_violation_linf[k],
                   self.linear_solves[k].iterations)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "increment_l2", "increment_h1", "clamp_violation", "cg_iterations"])
            for it, dl2, dh1, viol, cgi in self.rows():
                w.writerow([it, f"{dl2:.17g}", f"{dh1:.17g}", f"{viol:.17g}", cgi])


def frozen_solve(mesh, model: CoefficientModel, dirichlet: DirichletData, z, *, cg_tol=1e-12,
                 cg_max_iter=None, preconditioner="jacobi", x0=None):
    """Solve the linear problem with ``A`` frozen at ``z``; no range checks on the data.

    Returns the full nodal solution and the CG report.
    """
    S = assemble_stiffness(mesh, model, z)
    S_II, rhs = apply_dirichlet(S, dirichlet, mesh)
    if S_II.nrows == 0:
        return dirichlet.extension.copy(), CgReport(0, 0.0, True)
    v, rep = cg_solve(S_II, rhs, tol=cg_tol, max_iter=cg_max_iter, preconditioner=preconditioner, x0=x0)
    if not rep.converged:
        raise SolverError(f"CG did not converge: {rep.iterations} iterations, "
                          f"relative residual {rep.final_residual_norm:.3e}")
    return attach_boundary(mesh, v, dirichlet), rep


def linearized_step(mesh, model, dirichlet, z, config: PicardConfig | None = None, x0=None):
    """One application of the map, with diagnostics.

    Returns ``(w, violation, cg_report)`` where ``violation`` is the largest
    distance of the raw discrete solution outside ``[t_min, t_max]``.
    """
    config = config or PicardConfig()
    raw, rep = frozen_solve(mesh, model, dirichlet, z, cg_tol=config.cg_tol, cg_max_iter=config.cg_max_iter,
                            preconditioner=config.preconditioner, x0=x0)
    violation = model.range.violation(raw)
    if config.clamp_policy == "reject" and violation > config.clamp_tolerance:
        raise MaxPrincipleViolationError(
            f"discrete solution leaves [{model.range.t_min}, {model.range.t_max}] by {violation:.3e}", violation)
    return AdmissibleField.clamped(mesh, raw, model.range), violation, rep


def linearized_map(mesh, model, dirichlet, z, config: PicardConfig | None = None) -> AdmissibleField:
    """``w = L z``: the admissible solution of the problem frozen at ``z``."""
    w, _, _ = linearized_step(mesh, model, dirichlet, z, config)
    return w


def energy_bound(dirichlet: DirichletData, certificate: EllipticityCertificate, domain_constant=1.0) -> float:
    """Right-hand side ``C * Lambda * |u_b|_H1 / lambda + |u_b|_H1`` for the discrete lifting."""
    ub = h1_norm(dirichlet.mesh, dirichlet.extension)
    return domain_constant * certificate.lambda_max * ub / certificate.lambda_min + ub


def energy_bound_check(w, dirichlet: DirichletData, certificate: EllipticityCertificate,
                       domain_constant=1.0) -> bool:
    """Whether ``||w||_H1`` respects the a priori energy bound."""
    values = getattr(w, "values", w)
    return h1_norm(dirichlet.mesh, values) <= energy_bound(dirichlet, certificate, domain_constant)


def initial_field(mesh, model, dirichlet, config: PicardConfig) -> AdmissibleField:
    rng = model.range
    guess = config.initial_guess
    if isinstance(guess, str):
        if guess == "boundary-extension":
            return AdmissibleField.clamped(mesh, dirichlet.extension, rng)
        c = 0.5 * (rng.t_min + rng.t_max) if config.initial_value is None else config.initial_value
        return AdmissibleField.constant(mesh, c, rng)
    return AdmissibleField(mesh, np.asarray(guess, dtype=float), rng)


def nonlinear_residual(mesh, model, dirichlet, u) -> float:
    """Relative residual of the nonlinear Galerkin system assembled at ``u``."""
    values = getattr(u, "values", u)
    S = assemble_stiffness(mesh, model, values)
    S_II, rhs = apply_dirichlet(S, dirichlet, mesh)
    if S_II.nrows == 0:
        return 0.0
    res = float(np.linalg.norm(S_II @ values[mesh.interior_nodes] - rhs))
    scale = float(np.linalg.norm(rhs))
    return res / scale if scale > 0 else res


def solve_fixed_point(mesh, model: CoefficientModel, dirichlet: DirichletData,
                      config: PicardConfig | None = None,
                      certificate: EllipticityCertificate | None = None):
    """Damped Picard iteration ``z <- theta * L z + (1 - theta) * z``.

    The model is certified on the mesh centroids first unless a certificate
    is supplied. Non-convergence is not an error: the report carries
    ``converged=False`` and the full history.

    Returns
    -------
    AdmissibleField, PicardReport
    """
    config = config or PicardConfig()
    if certificate is None:
        certify_ellipticity(model, points=mesh.centroids)
    dirichlet.check_range(model.range)

    z = initial_field(mesh, model, dirichlet, config)
    theta = config.damping
    report = PicardReport()
    stagnant = 0
    warm = None
    for k in range(1, config.max_iterations + 1):
        w, violation, rep = linearized_step(mesh, model, dirichlet, z, config, x0=warm)
        new = theta * w.values + (1.0 - theta) * z.values
        z_new = AdmissibleField.clamped(mesh, new, model.range)
        diff = z_new.values - z.values
        inc = l2_norm(mesh, diff)
        report.increments_l2.append(inc)
        report.increments_h1.append(h1_seminorm(mesh, diff))
        report.clamp_violation_linf.append(violation)
        report.dampings.append(theta)
        report.linear_solves.append(rep)
        if not np.isfinite(inc):
            log.warning("non-finite increment at iteration %d", k)
            z = z_new
            break
        warm = w.values[mesh.interior_nodes]
        z = z_new
        log.debug("picard %d: increment %.3e, violation %.3e, cg %d", k, inc, violation, rep.iterations)
        if inc <= config.tol_l2:
            report.converged = True
            report.iterations_used = k - 1
            break
        if k > 1 and inc > 0.99 * report.increments_l2[-2]:
            stagnant += 1
        if (config.auto_damping and theta > config.fallback_damping
                and stagnant >= max(1, config.max_iterations // 2)):
            log.info("picard stagnating after %d steps; damping %.2f -> %.2f", k, theta, config.fallback_damping)
            theta = config.fallback_damping
            stagnant = 0
    if not report.converged:
        report.iterations_used = report.map_applications
    report.nonlinear_residual = nonlinear_residual(mesh, model, dirichlet, z)
    return z, report
