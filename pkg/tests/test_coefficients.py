import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picardfem.coefficients import (AdmissibleRange, CoefficientModel, PiecewiseConstantField, certify_ellipticity,
                                    continuity_modulus, holder_bound, linear_model, rosseland_model,
                                    symmetric_eigenvalues)
from picardfem.errors import EllipticityError, InvalidArgumentError, ModelConstructionError
from picardfem.mesh import unit_interval_mesh, unit_square_mesh


def test_range_validation():
    with pytest.raises(InvalidArgumentError):
        AdmissibleRange(2.0, 1.0)
    r = AdmissibleRange(1.0, 2.0)
    assert r.violation([1.5, 2.25, 0.5]) == 0.5
    assert r.violation([1.0, 2.0]) == 0.0


@pytest.mark.parametrize("z, expected", [(0.0, 1.0), (1.0, 2.0), (2.0, 9.0)])
@pytest.mark.parametrize("dim", [1, 2])
def test_rosseland_identity(z, expected, dim):
    m = rosseland_model(1.0, 1.0, AdmissibleRange(0.0, 2.0), dim=dim)
    np.testing.assert_allclose(m.eval(z, [0.3] * dim), expected * np.eye(dim))


def test_rosseland_rejects_asymmetric():
    with pytest.raises(ModelConstructionError):
        rosseland_model([[1.0, 0.2], [0.0, 1.0]], 0.0, AdmissibleRange(0, 1), dim=2)
    with pytest.raises(ModelConstructionError):
        rosseland_model(1.0, lambda x: [[1.0, x[0]], [0.0, 1.0]], AdmissibleRange(0, 1), dim=2)


def test_symmetry_of_eval(rng):
    K = np.array([[2.0, 0.3], [0.3, 1.0]])
    B = PiecewiseConstantField(rng.uniform(0, 1, (3, 2)), [[0, 1], [0, 1]], 2)
    m = rosseland_model(K, B, AdmissibleRange(0, 2), dim=2)
    z = rng.uniform(0, 2, 200)
    x = rng.uniform(0, 1, (200, 2))
    A = m.evaluate(z, x)
    assert np.abs(A - np.transpose(A, (0, 2, 1))).max() <= 1e-14


def test_certify_identity_range01():
    cert = certify_ellipticity(rosseland_model(1.0, 1.0, AdmissibleRange(0, 1)))
    assert cert.lambda_min == pytest.approx(1.0, abs=1e-15)
    assert cert.lambda_max == pytest.approx(2.0, abs=1e-15)
    assert cert.argmin[0] == 0.0 and cert.argmax[0] == 1.0


def test_certify_rejects_zero_K():
    with pytest.raises(EllipticityError) as info:
        certify_ellipticity(rosseland_model(0.0, 1.0, AdmissibleRange(0, 1)))
    assert info.value.z == 0.0
    assert info.value.x is not None


def test_certify_negative_B():
    cert = certify_ellipticity(rosseland_model(1.0, -0.5, AdmissibleRange(0, 1)))
    # oracle: brute-force grid minimum of 1 - 0.5 z^3
    zs = np.linspace(0, 1, 64)
    assert cert.lambda_min == pytest.approx((1 - 0.5 * zs**3).min(), abs=1e-15)
    assert cert.lambda_min == pytest.approx(0.5)


def test_certify_argument_checks(rosseland_1d):
    with pytest.raises(InvalidArgumentError):
        certify_ellipticity(rosseland_1d, z_samples=1)
    with pytest.raises(InvalidArgumentError):
        certify_ellipticity(rosseland_1d, x_samples=0)


def test_certify_positive_window():
    # K + z^3 B positive definite only for z above a threshold
    m = rosseland_model(-1.0, 1.0, AdmissibleRange(1.5, 2.0))
    assert certify_ellipticity(m).lambda_min == pytest.approx(1.5**3 - 1)
    with pytest.raises(EllipticityError):
        certify_ellipticity(rosseland_model(-1.0, 1.0, AdmissibleRange(0.5, 2.0)))


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_closed_form_eigenvalues(a, b, c):
    M = np.array([[a, b], [b, c]])
    lo, hi = symmetric_eigenvalues(M[None])
    ref = np.linalg.eigvalsh(M)
    assert lo[0] == pytest.approx(ref[0], abs=1e-12)
    assert hi[0] == pytest.approx(ref[1], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(k=st.floats(0.1, 5), b=st.floats(0, 5), t0=st.floats(0, 2), width=st.floats(0, 2))
def test_rosseland_psd_B_certifies_above_eigmin_K(k, b, t0, width):
    K = np.array([[k + 0.5, 0.2], [0.2, k]])
    B = b * np.array([[1.0, 0.5], [0.5, 1.0]])
    cert = certify_ellipticity(rosseland_model(K, B, AdmissibleRange(t0, t0 + width), dim=2), z_samples=8)
    assert cert.lambda_min >= np.linalg.eigvalsh(K)[0] - 1e-12


def test_modulus_identical_fields_is_zero(rosseland_1d):
    mesh = unit_interval_mesh(8)
    z = np.linspace(1, 2, mesh.n_nodes)
    assert continuity_modulus(rosseland_1d, z, z, mesh) == 0.0


def test_modulus_constant_fields():
    mesh = unit_interval_mesh(10)
    m = rosseland_model(1.0, 1.0, AdmissibleRange(0, 1))
    val = continuity_modulus(m, np.ones(mesh.n_nodes), np.zeros(mesh.n_nodes), mesh)
    assert val == pytest.approx(1.0, abs=1e-14)


def test_modulus_symmetric(rng, rosseland_2d):
    mesh = unit_square_mesh(4)
    z1, z2 = rng.uniform(1, 2, (2, mesh.n_nodes))
    assert continuity_modulus(rosseland_2d, z1, z2, mesh) == continuity_modulus(rosseland_2d, z2, z1, mesh)


def test_modulus_mesh_mismatch(rosseland_1d):
    with pytest.raises(InvalidArgumentError):
        continuity_modulus(rosseland_1d, np.ones(3), np.ones(4), unit_interval_mesh(3))


def test_holder_bound_on_constant_fields(rng):
    # Rosseland z^3 with B = I on [1, 2]: Lipschitz constant 3 * 2^2 = 12.
    r = AdmissibleRange(1.0, 2.0)
    m = rosseland_model(1.0, 1.0, r)
    assert m.holder_exponent == 1.0 and m.holder_constant == 12.0
    mesh = unit_interval_mesh(6)
    for _ in range(20):
        s, t = rng.uniform(1, 2, 2)
        mod = continuity_modulus(m, np.full(mesh.n_nodes, s), np.full(mesh.n_nodes, t), mesh)
        assert mod == pytest.approx(abs(s**3 - t**3), rel=1e-12)
        assert mod <= holder_bound(m, np.full(mesh.n_nodes, s), np.full(mesh.n_nodes, t), mesh) + 1e-14


def test_holder_declared_sqrt_model(rng):
    # a(z) = sqrt(z) is 1/2-Hölder with constant 1
    r = AdmissibleRange(0.0, 1.0)
    m = CoefficientModel(1, lambda z, x: (1 + np.sqrt(z))[:, None, None], r, holder_exponent=0.5, holder_constant=1.0)
    mesh = unit_interval_mesh(12)
    for _ in range(20):
        z1, z2 = rng.uniform(0, 1, (2, mesh.n_nodes))
        assert continuity_modulus(m, z1, z2, mesh) <= holder_bound(m, z1, z2, mesh) + 1e-14


def test_modulus_vanishes_under_refinement(rng, rosseland_1d):
    mesh = unit_interval_mesh(32)
    z = rng.uniform(1.2, 1.8, mesh.n_nodes)
    pert = rng.uniform(-1, 1, mesh.n_nodes)
    mods = [continuity_modulus(rosseland_1d, z, z + 0.2 * 2.0**-k * pert, mesh) for k in range(8)]
    assert all(b < a for a, b in zip(mods, mods[1:]))
    assert mods[-1] < 1e-2 * mods[0]


def test_linear_and_shift():
    m = linear_model(2.0, AdmissibleRange(0, 1))
    assert m.z_independent
    np.testing.assert_allclose(m.shifted(0.5).eval(0.3, [0.1]), [[2.5]])


def test_pointwise_callable_model():
    m = CoefficientModel.from_pointwise(lambda z, x: (1 + z) * (1 + x[0]), 1, AdmissibleRange(0, 1))
    assert m.eval(1.0, [1.0])[0, 0] == 4.0
    cert = certify_ellipticity(m, z_samples=3, x_samples=2)
    assert cert.lambda_min == pytest.approx(1.25)


def test_piecewise_lookup():
    f = PiecewiseConstantField([1.0, 10.0], [[0, 1]], 1)
    np.testing.assert_allclose(f(np.array([[0.1], [0.49], [0.51], [1.0]]))[:, 0, 0], [1, 1, 10, 10])
