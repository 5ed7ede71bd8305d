import numpy as np
import pytest

from picardfem.assembly import AdmissibleField, DirichletData, h1_seminorm, l2_norm
from picardfem.coefficients import (AdmissibleRange, CoefficientModel, certify_ellipticity, linear_model,
                                    rosseland_model)
from picardfem.errors import EllipticityError, InvalidArgumentError, MaxPrincipleViolationError, RangeViolationError
from picardfem.mesh import unit_interval_mesh, unit_square_mesh
from picardfem.picard import (PicardConfig, PicardReport, energy_bound_check, linearized_map, linearized_step,
                              solve_fixed_point)


def linear_1d_data(mesh):
    return DirichletData.from_function(mesh, lambda p: 1.0 + p[0])


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        PicardConfig(tol_l2=0)
    with pytest.raises(InvalidArgumentError):
        PicardConfig(max_iterations=0)
    with pytest.raises(InvalidArgumentError):
        PicardConfig(damping=1.5)
    with pytest.raises(InvalidArgumentError):
        PicardConfig(clamp_policy="ignore")
    with pytest.raises(InvalidArgumentError):
        PicardConfig(initial_guess="random")


def test_linear_map_constant_in_z(rng):
    mesh = unit_square_mesh(5)
    r = AdmissibleRange(1, 2)
    model = linear_model(lambda x: 1 + x[0], r, dim=2)
    ub = DirichletData.from_function(mesh, lambda p: 1 + 0.5 * p[0] + 0.25 * p[1])
    ws = [linearized_map(mesh, model, ub, AdmissibleField(mesh, rng.uniform(1, 2, mesh.n_nodes), r))
          for _ in range(3)]
    for w in ws[1:]:
        np.testing.assert_array_equal(w.values, ws[0].values)


def test_map_constant_boundary(small_mesh, unit_range):
    model = rosseland_model(1.0, 1.0, unit_range, dim=small_mesh.dim)
    z = AdmissibleField.constant(small_mesh, 1.9, unit_range)
    w, viol, _ = linearized_step(small_mesh, model, DirichletData.constant(small_mesh, 1.25), z)
    np.testing.assert_allclose(w.values, 1.25, atol=1e-12)
    assert viol == 0.0


def test_map_frozen_at_one_gives_interpolant(rosseland_1d, unit_range):
    mesh = unit_interval_mesh(16)
    w = linearized_map(mesh, rosseland_1d, linear_1d_data(mesh), AdmissibleField.constant(mesh, 1.0, unit_range))
    np.testing.assert_allclose(w.values, 1 + mesh.nodes[:, 0], atol=1e-12)


def test_reject_policy(unit_range):
    # obtuse-free mesh but boundary data outside the range forces a violation
    mesh = unit_interval_mesh(4)
    model = rosseland_model(1.0, 1.0, unit_range)
    ub = DirichletData(mesh, [1.0, 2.5])
    z = AdmissibleField.constant(mesh, 1.5, unit_range)
    _, viol, _ = linearized_step(mesh, model, ub, z)
    assert viol == pytest.approx(0.5)
    with pytest.raises(MaxPrincipleViolationError):
        linearized_step(mesh, model, ub, z, PicardConfig(clamp_policy="reject"))


def test_energy_bound_examples(rosseland_1d, unit_range):
    mesh = unit_interval_mesh(16)
    cert = certify_ellipticity(rosseland_1d, points=mesh.centroids)
    ub = DirichletData.constant(mesh, 1.5)
    w = linearized_map(mesh, rosseland_1d, ub, AdmissibleField.constant(mesh, 1.2, unit_range))
    assert energy_bound_check(w, ub, cert)
    ub = linear_1d_data(mesh)
    w = linearized_map(mesh, rosseland_1d, ub, AdmissibleField.constant(mesh, 1.0, unit_range))
    assert h1_seminorm(mesh, w.values) == pytest.approx(1.0, abs=1e-12)
    assert energy_bound_check(w, ub, cert, domain_constant=1.0)
    assert not energy_bound_check(10 * w.values * 50, ub, cert)


def test_energy_bound_random(rng, small_mesh, unit_range):
    model = rosseland_model(1.0, 1.0, unit_range, dim=small_mesh.dim)
    cert = certify_ellipticity(model, points=small_mesh.centroids)
    for _ in range(5):
        ub = DirichletData(small_mesh, rng.uniform(1, 2, len(small_mesh.boundary_nodes)))
        z = AdmissibleField(small_mesh, rng.uniform(1, 2, small_mesh.n_nodes), unit_range)
        assert energy_bound_check(linearized_map(small_mesh, model, ub, z), ub, cert)


def test_linear_model_one_iteration(unit_range):
    mesh = unit_square_mesh(8)
    model = linear_model(lambda x: 1 + x[1], unit_range, dim=2)
    ub = DirichletData.from_function(mesh, lambda p: 1 + 0.5 * p[0] * p[1])
    u, rep = solve_fixed_point(mesh, model, ub)
    assert rep.converged and rep.iterations_used == 1
    assert rep.increments_l2[1] == 0.0


def test_constant_boundary_one_iteration(rosseland_2d, unit_range):
    mesh = unit_square_mesh(6)
    u, rep = solve_fixed_point(mesh, rosseland_2d, DirichletData.constant(mesh, 1.5))
    assert rep.converged and rep.iterations_used == 1
    np.testing.assert_allclose(u.values, 1.5, atol=1e-12)


def test_report_consistency(rosseland_1d):
    mesh = unit_interval_mesh(32)
    cfg = PicardConfig(tol_l2=1e-11)
    u, rep = solve_fixed_point(mesh, rosseland_1d, linear_1d_data(mesh), cfg)
    assert rep.converged
    assert rep.increments_l2[-1] <= cfg.tol_l2
    assert rep.map_applications == rep.iterations_used + 1
    assert all(v >= 0 for v in rep.clamp_violation_linf)
    assert all(np.isfinite(rep.increments_l2))
    assert rep.nonlinear_residual <= 10 * cfg.tol_l2


def test_fixed_point_residual(rosseland_1d, rosseland_2d):
    for mesh, model in ((unit_interval_mesh(64), rosseland_1d), (unit_square_mesh(16), rosseland_2d)):
        ub = DirichletData.from_function(mesh, lambda p: 1 + p.sum() / mesh.dim)
        cfg = PicardConfig()
        u, rep = solve_fixed_point(mesh, model, ub, cfg)
        assert rep.converged
        again = linearized_map(mesh, model, ub, u, cfg)
        assert l2_norm(mesh, again.values - u.values) <= 10 * cfg.tol_l2


def test_damping_independence(rosseland_1d):
    mesh = unit_interval_mesh(32)
    ub = linear_1d_data(mesh)
    sols = []
    for theta in (1.0, 0.7, 0.4):
        u, rep = solve_fixed_point(mesh, rosseland_1d, ub, PicardConfig(damping=theta, max_iterations=200))
        assert rep.converged
        sols.append(u.values)
    for s in sols[1:]:
        assert l2_norm(mesh, s - sols[0]) <= 10 * 1e-10


def test_initial_guess_variants(rosseland_1d):
    mesh = unit_interval_mesh(32)
    ub = linear_1d_data(mesh)
    a, _ = solve_fixed_point(mesh, rosseland_1d, ub, PicardConfig(initial_guess="constant"))
    b, _ = solve_fixed_point(mesh, rosseland_1d, ub, PicardConfig(initial_guess=np.full(33, 2.0)))
    c, _ = solve_fixed_point(mesh, rosseland_1d, ub)
    assert l2_norm(mesh, a.values - c.values) <= 1e-9
    assert l2_norm(mesh, b.values - c.values) <= 1e-9
    with pytest.raises(RangeViolationError):
        solve_fixed_point(mesh, rosseland_1d, ub, PicardConfig(initial_guess=np.full(33, 3.0)))


def test_nonconvergence_reported(rosseland_1d):
    mesh = unit_interval_mesh(32)
    u, rep = solve_fixed_point(mesh, rosseland_1d, linear_1d_data(mesh), PicardConfig(max_iterations=3))
    assert not rep.converged
    assert rep.iterations_used == 3 and len(rep.increments_l2) == 3
    assert np.all((u.values >= 1) & (u.values <= 2))


def cycling_model():
    """Two-element 1D problem whose undamped map is v -> 1 - v at the interior node.

    Left element has a = 1; the right element's coefficient g(z_c) is chosen so
    that the frozen solve returns w = g / (1 + g) = 1 - v, with z_c = (v + 1) / 2.
    """
    def batch(z, x):
        v = np.clip(2 * z - 1, 1e-2, 1 - 1e-2)
        g = (1 - v) / v
        return np.where(x[:, 0] < 0.5, 1.0, g)[:, None, None]

    return CoefficientModel(1, batch, AdmissibleRange(0.0, 1.0))


def test_undamped_cycle_is_reported():
    mesh = unit_interval_mesh(2)
    _, rep = solve_fixed_point(mesh, cycling_model(), DirichletData(mesh, [0.0, 1.0]),
                               PicardConfig(max_iterations=20, auto_damping=False))
    assert not rep.converged
    assert min(rep.increments_l2) > 0.1


def test_auto_damping_fallback_converges():
    mesh = unit_interval_mesh(2)
    u, rep = solve_fixed_point(mesh, cycling_model(), DirichletData(mesh, [0.0, 1.0]),
                               PicardConfig(max_iterations=20))
    assert rep.converged
    switch = rep.dampings.index(0.5)
    assert switch >= 10  # needs max_iterations // 2 stagnant steps first
    assert u.values[1] == pytest.approx(0.5, abs=1e-9)


def test_uncertified_model_rejected():
    r = AdmissibleRange(0.0, 1.0)
    mesh = unit_interval_mesh(8)
    with pytest.raises(EllipticityError):
        solve_fixed_point(mesh, rosseland_model(0.0, 1.0, r), DirichletData.constant(mesh, 0.5))


def test_boundary_out_of_range_rejected(rosseland_1d):
    mesh = unit_interval_mesh(8)
    with pytest.raises(RangeViolationError):
        solve_fixed_point(mesh, rosseland_1d, DirichletData(mesh, [1.0, 3.0]))


def test_history_csv(tmp_path, rosseland_1d):
    mesh = unit_interval_mesh(16)
    _, rep = solve_fixed_point(mesh, rosseland_1d, linear_1d_data(mesh))
    rep.write_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "iteration,increment_l2,increment_h1,clamp_violation,cg_iterations"
    assert len(lines) == rep.map_applications + 1
    d = rep.to_dict()
    assert d["converged"] and isinstance(d["linear_solves"][0], dict)
    assert isinstance(PicardReport().to_dict(), dict)
