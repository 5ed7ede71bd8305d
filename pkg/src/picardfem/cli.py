"""Command-line interface.

    picardfem validate CONFIG
    picardfem solve CONFIG [--output-dir DIR] [--quiet]
    picardfem experiment CONFIG [--output-dir DIR] [--quiet]

Exit status: 0 on success, 1 on configuration or validation errors, 2 when
an iteration fails to converge (artifacts are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import plotting
from .assembly import apply_dirichlet, assemble_stiffness
from .coefficients import certify_ellipticity
from .errors import ConfigError, EllipticityError, ExperimentError, PicardFemError, SolverError
from .config import build_boundary, load_config
from .mesh import write_vtk
from .picard import solve_fixed_point
from .sparse import write_matrix_market
from .verification import (boundary_dependence_experiment, coefficient_dependence_experiment,
                           convergence_study, flux_bound, flux_continuity_experiment, flux_functional,
                           map_continuity_experiment)

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2

log = logging.getLogger("picardfem")


class _Out:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, msg):
        if not self.quiet:
            print(msg)


def _fmt(x):
    return f"{x:.17g}"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _certify(cfg, mesh):
    return certify_ellipticity(cfg.model(), points=mesh.centroids)


def _certificate_dict(cert):
    return {"lambda_min": cert.lambda_min, "lambda_max": cert.lambda_max,
            "samples_z": cert.samples_z, "samples_x": cert.samples_x,
            "argmin_z": cert.argmin[0], "argmin_x": list(cert.argmin[1])}


def cmd_validate(cfg, out, outdir):
    mesh = cfg.mesh()
    cert = _certify(cfg, mesh)
    out(f"ellipticity: lambda = {cert.lambda_min:.12g}, Lambda = {cert.lambda_max:.12g} "
        f"({cert.samples_z} z-samples x {cert.samples_x} x-samples)")
    cfg.dirichlet(mesh).check_range(cfg.range)
    out(f"boundary data within [{cfg.range.t_min}, {cfg.range.t_max}]")
    return EXIT_OK


def _write_solution_csv(path, mesh, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"x{i}" for i in range(mesh.dim)] + ["u"])
        for i, (p, v) in enumerate(zip(mesh.nodes, values)):
            w.writerow([i] + [_fmt(c) for c in p] + [_fmt(v)])


def cmd_solve(cfg, out, outdir):
    mesh = cfg.mesh()
    model = cfg.model()
    cert = _certify(cfg, mesh)
    dirichlet = cfg.dirichlet(mesh)
    u, report = solve_fixed_point(mesh, model, dirichlet, cfg.solver, certificate=cert)

    if "csv" in cfg.formats:
        _write_solution_csv(os.path.join(outdir, "solution.csv"), mesh, u.values)
        report.write_csv(os.path.join(outdir, "history.csv"))
    if "vtk" in cfg.formats:
        write_vtk(os.path.join(outdir, "solution.vtk"), mesh, {"u": u.values})
    if "mtx" in cfg.formats:
        S_II, _ = apply_dirichlet(assemble_stiffness(mesh, model, u), dirichlet, mesh)
        write_matrix_market(os.path.join(outdir, "stiffness.mtx"), S_II, "reduced stiffness at the solution")
    if cfg.figures:
        plotting.plot_solution(mesh, u.values, os.path.join(outdir, "solution.png"))
        plotting.plot_history(report, os.path.join(outdir, "history.png"))
    _write_json(os.path.join(outdir, "summary.json"), {
        "config": cfg.raw, "certificate": _certificate_dict(cert), "report": report.to_dict(),
        "solution_min": float(u.values.min()), "solution_max": float(u.values.max()),
    })
    status = "converged" if report.converged else "NOT converged"
    out(f"solve: {status} after {report.iterations_used} iterations, last increment "
        f"{report.increments_l2[-1]:.3e}, range [{u.values.min():.6g}, {u.values.max():.6g}]")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def _eps_list(exp, key="epsilons", default=(1e-1, 1e-2, 1e-3, 1e-4)):
    vals = exp.get(key, list(default))
    return [float(v) for v in vals]


def cmd_experiment(cfg, out, outdir):
    exp = cfg.experiment
    etype = exp["type"]
    if etype == "none":
        raise PicardFemError("experiment.type is \"none\"; use the solve subcommand")
    figs = cfg.figures
    path = lambda name: os.path.join(outdir, name)  # noqa: E731
    summary = {"config": cfg.raw, "experiment": etype}
    ok = True

    if etype == "convergence":
        levels = [int(n) for n in exp.get("levels", [8, 16, 32, 64, 128])]
        try:
            table = convergence_study(cfg.oracle(), levels, cfg.solver)
        except ExperimentError as exc:
            if exc.partial is not None:
                exc.partial.write_csv(path("convergence.csv"))
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
        table.write_csv(path("convergence.csv"))
        if figs:
            plotting.plot_convergence(table, path("convergence.png"))
        last = table.rows[-1]
        summary["rows"] = [r.__dict__ for r in table.rows]
        out(f"convergence: {len(table.rows)} levels, final L2 order {last.l2_order:.3f}, "
            f"H1 order {last.h1_order:.3f}")
    elif etype in ("coeff-dependence", "boundary-dependence", "map-continuity"):
        mesh = cfg.mesh()
        model = cfg.model()
        _certify(cfg, mesh)
        dirichlet = cfg.dirichlet(mesh)
        if etype == "coeff-dependence":
            report = coefficient_dependence_experiment(mesh, model, dirichlet, _eps_list(exp), cfg.solver)
        elif etype == "boundary-dependence":
            profile = build_boundary(exp.get("profile", {"type": "constant", "value": 1.0}), mesh, cfg,
                                     "experiment.profile")
            report = boundary_dependence_experiment(mesh, model, dirichlet, profile, _eps_list(exp), cfg.solver)
        else:
            u, rep = solve_fixed_point(mesh, model, dirichlet, cfg.solver)
            ok = rep.converged
            bump = np.sin(np.pi * mesh.nodes).prod(axis=1)
            report = map_continuity_experiment(mesh, model, dirichlet, u, bump, _eps_list(exp, "deltas"),
                                               cfg.solver)
        report.write_csv(path("dependence.csv"))
        if figs:
            plotting.plot_dependence(report, path("dependence.png"))
        ok = ok and all(report.converged)
        summary.update(parameters=report.parameters, distances_l2=report.distances,
                       distances_max=report.distances_max, distances_h1=report.distances_h1,
                       slope=report.slope, monotone=report.monotone, reduction=report.reduction,
                       uniqueness_gap=report.uniqueness_gap)
        if not report.unique:
            out(f"warning: fixed points from different initial guesses differ by {report.uniqueness_gap:.3e}")
        out(report.summary())
    elif etype == "flux":
        mesh = cfg.mesh()
        model = cfg.model()
        cert = _certify(cfg, mesh)
        dirichlet = cfg.dirichlet(mesh)
        u, rep = solve_fixed_point(mesh, model, dirichlet, cfg.solver, certificate=cert)
        ok = rep.converged
        eta_spec = exp.get("eta", {"type": "affine", "offset": 0.0, "gradient": [1.0] * cfg.dim})
        eta = _nodal_profile(eta_spec, mesh, cfg)
        value = flux_functional(mesh, u, eta, model)
        bound = flux_bound(mesh, u, eta, cert.lambda_max)
        bump = np.sin(np.pi * mesh.nodes).prod(axis=1)
        report = flux_continuity_experiment(mesh, model, u, eta, bump, _eps_list(exp, "deltas"))
        with open(path("flux.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["perturbation_h1", "flux_difference"])
            for p, d in zip(report.parameters, report.distances):
                w.writerow([_fmt(p), _fmt(d)])
        if figs:
            plotting.plot_dependence(report, path("flux.png"), xlabel="H1 size of perturbation")
        summary.update(flux=value, bound=bound, parameters=report.parameters, distances=report.distances)
        out(f"flux: <A(u) grad u, eta> = {value:.12g}, bound {bound:.6g}")
    _write_json(path("summary.json"), summary)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def _nodal_profile(spec, mesh, cfg):
    """Nodal values of an affine or constant test field ``eta``."""
    kind = spec.get("type")
    if kind == "constant":
        return np.full(mesh.n_nodes, float(spec.get("value", 0.0)))
    if kind == "affine":
        grad = np.asarray(spec.get("gradient", [1.0] * cfg.dim), dtype=float)
        if grad.shape != (cfg.dim,):
            raise ConfigError(f"expected {cfg.dim} components", "experiment.eta.gradient")
        return float(spec.get("offset", 0.0)) + mesh.nodes @ grad
    raise ConfigError("eta must be of type constant or affine", "experiment.eta.type")


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "experiment": cmd_experiment}


def build_parser():
    p = argparse.ArgumentParser(prog="picardfem", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="TOML run configuration")
        sp.add_argument("--output-dir", default=None, help="overrides output.directory")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = _Out(args.quiet)
    try:
        cfg = load_config(args.config)
        outdir = args.output_dir or cfg.output_dir
        if args.command != "validate":
            os.makedirs(outdir, exist_ok=True)
        return COMMANDS[args.command](cfg, out, outdir)
    except EllipticityError as exc:
        print(f"error: ellipticity violated: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except PicardFemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
