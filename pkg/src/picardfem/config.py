"""TOML run configuration.

Example::

    [problem]
    dim = 1
    n = 64

    [range]
    t_min = 1.0
    t_max = 2.0

    [model]
    type = "rosseland"      # rosseland | linear | piecewise
    K = 1.0                 # scalar (times I), matrix, or {cells = [...], values = [...]}
    B = 1.0

    [boundary]
    type = "affine"         # constant | affine | kirchhoff
    offset = 1.0
    gradient = [1.0]

    [solver]
    tol_l2 = 1e-10

    [experiment]
    type = "none"           # none | convergence | coeff-dependence | boundary-dependence | flux | map-continuity

    [output]
    directory = "out"
    formats = ["csv", "vtk"]
    figures = true

See README.md for every key.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .assembly import DirichletData
from .coefficients import AdmissibleRange, PiecewiseConstantField, linear_model, rosseland_model
from .errors import ConfigError, PicardFemError
from .mesh import interval_mesh, rectangle_mesh
from .picard import PicardConfig
from .verification import KirchhoffOracle

MODEL_TYPES = ("rosseland", "linear", "piecewise")
BOUNDARY_TYPES = ("constant", "affine", "kirchhoff")
EXPERIMENT_TYPES = ("none", "convergence", "coeff-dependence", "boundary-dependence", "flux", "map-continuity")
FORMATS = ("csv", "vtk", "mtx")

_SECTIONS = ("problem", "range", "model", "boundary", "solver", "experiment", "output")


@dataclass
class RunConfig:
    raw: dict
    dim: int
    n: int
    bounds: np.ndarray
    range: AdmissibleRange
    model_spec: dict
    boundary_spec: dict
    solver: PicardConfig
    experiment: dict
    output_dir: str = "out"
    formats: tuple = ("csv",)
    figures: bool = True
    _model: object = field(default=None, repr=False)

    def mesh(self, n=None):
        n = self.n if n is None else n
        if self.dim == 1:
            return interval_mesh(*self.bounds[0], n)
        (x0, x1), (y0, y1) = self.bounds
        return rectangle_mesh(x0, x1, y0, y1, n)

    def model(self):
        if self._model is None:
            self._model = build_model(self.model_spec, self.dim, self.range, self.bounds)
        return self._model

    def dirichlet(self, mesh, spec=None):
        return build_boundary(spec or self.boundary_spec, mesh, self, "boundary")

    def oracle(self):
        """Kirchhoff oracle matching the model and boundary specs."""
        spec = self.boundary_spec
        if spec.get("type") != "kirchhoff":
            raise ConfigError("convergence experiments need boundary.type = \"kirchhoff\"", "boundary.type")
        return _kirchhoff(spec, self, "boundary")


def _get(section, key, name, kind=None, default=...):
    if key not in section:
        if default is ...:
            raise ConfigError("missing required key", f"{name}.{key}")
        return default
    val = section[key]
    if kind is not None:
        ok = isinstance(val, kind) and not (kind in (int, float, (int, float)) and isinstance(val, bool))
        if not ok:
            raise ConfigError(f"expected {getattr(kind, '__name__', kind)}, got {val!r}", f"{name}.{key}")
    return val


def _table(raw, name, required=True):
    sec = raw.get(name)
    if sec is None:
        if required:
            raise ConfigError("missing required table", name)
        return {}
    if not isinstance(sec, dict):
        raise ConfigError("expected a table", name)
    return sec


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    for key in raw:
        if key not in _SECTIONS:
            raise ConfigError("unknown table", key)
    problem = _table(raw, "problem")
    dim = _get(problem, "dim", "problem", int, 1)
    if dim not in (1, 2):
        raise ConfigError("must be 1 or 2", "problem.dim")
    n = _get(problem, "n", "problem", int)
    if n < 1:
        raise ConfigError("mesh size must be >= 1", "problem.n")
    bounds = np.array(_get(problem, "bounds", "problem", list, [[0.0, 1.0]] * dim), dtype=float)
    if bounds.shape != (dim, 2) or not np.all(bounds[:, 1] > bounds[:, 0]):
        raise ConfigError(f"expected {dim} pairs [lo, hi] with lo < hi", "problem.bounds")

    rsec = _table(raw, "range")
    t_min = float(_get(rsec, "t_min", "range", (int, float)))
    t_max = float(_get(rsec, "t_max", "range", (int, float)))
    if t_min > t_max:
        raise ConfigError("t_min exceeds t_max", "range")
    rng = AdmissibleRange(t_min, t_max)

    model = _table(raw, "model")
    mtype = _get(model, "type", "model", str)
    if mtype not in MODEL_TYPES:
        raise ConfigError(f"unknown model type {mtype!r}; expected one of {MODEL_TYPES}", "model.type")

    boundary = _table(raw, "boundary")
    btype = _get(boundary, "type", "boundary", str)
    if btype not in BOUNDARY_TYPES:
        raise ConfigError(f"unknown boundary type {btype!r}; expected one of {BOUNDARY_TYPES}", "boundary.type")

    solver_sec = _table(raw, "solver", required=False)
    known = {f.name for f in fields(PicardConfig)}
    for key in solver_sec:
        if key not in known:
            raise ConfigError("unknown solver option", f"solver.{key}")
    try:
        solver = PicardConfig(**solver_sec)
    except (PicardFemError, TypeError) as exc:
        raise ConfigError(str(exc), "solver") from exc

    experiment = dict(_table(raw, "experiment", required=False))
    etype = experiment.setdefault("type", "none")
    if etype not in EXPERIMENT_TYPES:
        raise ConfigError(f"unknown experiment {etype!r}; expected one of {EXPERIMENT_TYPES}", "experiment.type")

    out = _table(raw, "output", required=False)
    formats = tuple(_get(out, "formats", "output", list, ["csv"]))
    for f in formats:
        if f not in FORMATS:
            raise ConfigError(f"unknown format {f!r}; expected a subset of {FORMATS}", "output.formats")
    cfg = RunConfig(raw, dim, n, bounds, rng, model, boundary, solver, experiment,
                    output_dir=_get(out, "directory", "output", str, "out"),
                    formats=formats, figures=bool(_get(out, "figures", "output", bool, True)))
    return cfg


def _field(spec, name, dim, bounds):
    if isinstance(spec, dict):
        cells = _get(spec, "cells", name, list)
        values = np.asarray(_get(spec, "values", name, list), dtype=float)
        if len(cells) != dim:
            raise ConfigError(f"expected {dim} cell counts", f"{name}.cells")
        ncell = int(np.prod(cells))
        if values.size == ncell:
            table = values.reshape(tuple(cells))
        elif values.size == ncell * dim * dim:
            table = values.reshape(tuple(cells) + (dim, dim))
        else:
            raise ConfigError(f"expected {ncell} scalars or {ncell} {dim}x{dim} matrices", f"{name}.values")
        return PiecewiseConstantField(table, bounds, dim)
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return float(spec)
    arr = np.asarray(spec, dtype=float)
    if arr.shape != (dim, dim):
        raise ConfigError(f"expected a scalar, a {dim}x{dim} matrix or a cell table", name)
    return arr


def build_model(spec, dim, rng, bounds):
    mtype = spec["type"]
    try:
        if mtype == "linear":
            A = _field(_get(spec, "A", "model"), "model.A", dim, bounds)
            return linear_model(A, rng, dim=dim, domain=bounds)
        K = _field(_get(spec, "K", "model"), "model.K", dim, bounds)
        B = _field(_get(spec, "B", "model", default=0.0), "model.B", dim, bounds)
        return rosseland_model(K, B, rng, dim=dim, domain=bounds)
    except ConfigError:
        raise
    except PicardFemError as exc:
        raise ConfigError(str(exc), "model") from exc


def _kirchhoff(spec, cfg, name):
    m = cfg.model_spec
    if m["type"] not in ("rosseland", "piecewise") or not all(
            isinstance(m.get(k, 0.0), (int, float)) for k in ("K", "B")):
        raise ConfigError("kirchhoff data needs a rosseland model with scalar K and B", f"{name}.type")
    k, b = float(m["K"]), float(m.get("B", 0.0))
    try:
        if "left" in spec or "right" in spec:
            if cfg.dim != 1:
                raise ConfigError("left/right are only valid in 1D", f"{name}.left")
            return KirchhoffOracle.from_endpoints(k, b, float(_get(spec, "left", name)),
                                                  float(_get(spec, "right", name)), cfg.range)
        grad = _get(spec, "w_gradient", name, list)
        if len(grad) != cfg.dim:
            raise ConfigError(f"expected {cfg.dim} components", f"{name}.w_gradient")
        return KirchhoffOracle(k, b, float(_get(spec, "w_offset", name, (int, float))), tuple(grad), cfg.range)
    except ConfigError:
        raise
    except PicardFemError as exc:
        raise ConfigError(str(exc), name) from exc


def build_boundary(spec, mesh, cfg, name="boundary") -> DirichletData:
    btype = _get(spec, "type", name, str)
    if btype == "constant":
        return DirichletData.constant(mesh, float(_get(spec, "value", name, (int, float))))
    if btype == "affine":
        offset = float(_get(spec, "offset", name, (int, float), 0.0))
        grad = np.asarray(_get(spec, "gradient", name, list), dtype=float)
        if grad.shape != (cfg.dim,):
            raise ConfigError(f"expected {cfg.dim} components", f"{name}.gradient")
        return DirichletData(mesh, offset + mesh.nodes[mesh.boundary_nodes] @ grad)
    if btype == "kirchhoff":
        return _kirchhoff(spec, cfg, name).boundary_data(mesh)
    raise ConfigError(f"unknown boundary type {btype!r}", f"{name}.type")
