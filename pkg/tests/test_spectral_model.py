import math

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from galerkin_bilinear import AccuracyError, ModelDiagnosticsError
from galerkin_bilinear.spectral_model import (
    Potential, build_box_model, build_torus_model, compress, eigenstate, lift,
    model_from_json, model_to_json, project, rebuild, sobolev_norm, weighted_similarity,
)

COS = Potential.cosine()


def quad_matrix_element(j, k, w):
    """Independent oracle: adaptive quadrature of (2/pi) int sin(jx) sin(kx) w(x)."""
    f = lambda x: (2 / math.pi) * math.sin(j * x) * math.sin(k * x) * w(x)
    val, _ = scipy.integrate.quad(f, 0, math.pi, limit=200, epsabs=1e-14, epsrel=1e-14)
    return val


def test_box_cos_n3_matches_analytic_and_quad_oracle():
    m = build_box_model(3, None, COS, 12)
    np.testing.assert_array_equal(m.eigenvalues, [1, 4, 9])
    for j in range(1, 4):
        for k in range(1, 4):
            oracle = quad_matrix_element(j, k, math.cos)
            analytic = 0.5 if abs(j - k) == 1 else 0.0
            assert oracle == pytest.approx(analytic, abs=1e-13)
            assert m.b_matrix[j - 1, k - 1] == pytest.approx(-1j * oracle, abs=1e-13)
    assert m.provenance == "analytic"


def test_zero_potential_gives_zero_b():
    m = build_box_model(2, None, None, 8)
    np.testing.assert_array_equal(m.b_matrix, np.zeros((2, 2)))


def test_polynomial_w_against_quad_oracle():
    w = Potential.polynomial([0.3, -1.0, 0.25])
    m = build_box_model(5, None, w, 80)
    for j, k in [(1, 1), (1, 2), (2, 5), (4, 4)]:
        assert m.b_matrix[j - 1, k - 1] == pytest.approx(-1j * quad_matrix_element(j, k, w), abs=1e-12)


def finite_difference_spectrum(v, count, points=4000):
    """Independent oracle: second-order finite differences for -u'' + V u on (0, pi)."""
    h = math.pi / (points + 1)
    x = h * np.arange(1, points + 1)
    main = 2 / h**2 + v(x)
    off = -np.ones(points - 1) / h**2
    return scipy.linalg.eigh_tridiagonal(main, off, select="i", select_range=(0, count - 1))[0]


def test_box_cos_cos_n8_eigenvalues():
    m = build_box_model(8, COS, COS)
    assert m.provenance == "numerically_diagonalized"
    assert np.all(np.diff(m.eigenvalues) > 0)
    squares = np.arange(1, 9) ** 2
    assert np.max(np.abs(m.eigenvalues - squares)) <= 0.6
    reference = build_box_model(64, COS, COS)
    assert np.max(np.abs(reference.eigenvalues[:8] - squares)) <= 0.6
    assert np.max(np.abs(reference.eigenvalues[:8] - m.eigenvalues)) < 0.02
    fd = finite_difference_spectrum(COS, 8)
    # O(h^2) finite-difference error at 4000 points is ~1e-4 for the 8th mode
    np.testing.assert_allclose(reference.eigenvalues[:8], fd, atol=1e-3)


def test_numerical_basis_phase_convention():
    m = build_box_model(6, COS, COS)
    idx = np.argmax(np.abs(m.basis), axis=0)
    pivots = m.basis[idx, np.arange(6)]
    assert np.all(pivots > 0)
    np.testing.assert_allclose(m.basis.T @ m.basis, np.eye(6), atol=1e-13)


@pytest.mark.parametrize("builder,v,w", [
    (build_box_model, None, COS),
    (build_box_model, COS, COS),
    (build_box_model, Potential(kind="trig", cos=(0.2, 0.5), sin=(0.0, 0.0, 0.7)), COS),
    (build_torus_model, None, COS),
    (build_torus_model, None, Potential(kind="trig", sin=(0.0, 1.0))),
])
def test_skew_hermitian_positive_spectrum(builder, v, w):
    m = builder(10, v, w)
    assert np.max(np.abs(m.b_matrix + m.b_matrix.conj().T)) <= 1e-12
    assert np.all(m.eigenvalues > 0)
    assert np.all(np.diff(m.eigenvalues) >= 0)
    for n in (1, 4, 7):
        c = compress(m, n)
        assert np.max(np.abs(c.b_matrix + c.b_matrix.conj().T)) <= 1e-12
        assert np.all(c.eigenvalues > 0)


def test_box_v0_spectrum_is_exact_squares():
    m = build_box_model(12, None, COS)
    np.testing.assert_array_equal(m.eigenvalues, np.arange(1, 13) ** 2)


def test_torus_spectrum_and_coupling():
    m = build_torus_model(5, None, COS)
    np.testing.assert_array_equal(m.eigenvalues, [1, 2, 2, 5, 5])
    assert m.shift == 1.0
    # modes ordered 0, 1, -1, 2, -2 and cos couples m to m +- 1 with weight 1/2
    expected = np.zeros((5, 5))
    for a, b in [(0, 1), (0, 2), (1, 3), (2, 4)]:
        expected[a, b] = expected[b, a] = 0.5
    np.testing.assert_allclose(m.b_matrix, -1j * expected, atol=1e-14)


def test_quadrature_doubling_is_stable():
    for n in (4, 16, 32):
        w = Potential(kind="trig", cos=tuple([0.0] * n + [1.0]))
        a = build_box_model(n, None, w, 8 * n + 64)
        b = build_box_model(n, None, w, 2 * (8 * n + 64))
        assert np.max(np.abs(a.b_matrix - b.b_matrix)) <= 1e-10


def test_quadrature_failure_is_an_accuracy_error():
    with pytest.raises(AccuracyError):
        build_box_model(4, None, Potential.cosine(1.0, 60), 16)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        Potential(kind="trig", cos=(1j,))
    with pytest.raises(ValueError):
        build_box_model(4, None, COS, 15)
    with pytest.raises(ValueError):
        build_box_model(0, None, COS)


def test_non_positive_spectrum_rejected():
    with pytest.raises(ModelDiagnosticsError):
        build_box_model(4, Potential(kind="trig", cos=(-5.0,)), COS)
    with pytest.raises(ModelDiagnosticsError):
        build_torus_model(4, None, COS, shift=0.0)


def test_degenerate_numerical_spectrum_rejected():
    # a constant shift on the torus keeps the +-m degeneracy exactly
    with pytest.raises(ModelDiagnosticsError):
        build_torus_model(5, Potential(kind="trig", cos=(0.5,)), COS)


def test_compress_identity_nested_and_block():
    m = build_box_model(16, COS, COS)
    assert compress(m, m.dim) == m
    assert compress(compress(m, 8), 4) == compress(m, 4)
    m3 = build_box_model(3, None, COS, 12)
    np.testing.assert_allclose(compress(m3, 2).b_matrix, [[0, -0.5j], [-0.5j, 0]], atol=1e-15)
    with pytest.raises(ValueError):
        compress(m, 17)
    with pytest.raises(ValueError):
        compress(m, 0)


def test_rebuild_matches_fresh_build():
    m = build_box_model(8, None, COS)
    big = rebuild(m, 16)
    assert big.dim == 16
    low = compress(big, 8)
    np.testing.assert_array_equal(low.eigenvalues, m.eigenvalues)
    np.testing.assert_allclose(low.b_matrix, m.b_matrix, atol=1e-14)


def test_project_and_lift_examples():
    e1 = eigenstate(5, 1)
    np.testing.assert_array_equal(project(e1, 3), [1, 0, 0])
    psi = np.full(4, 0.5, dtype=complex)
    out = lift(project(psi, 2), 4)
    np.testing.assert_array_equal(out, [0.5, 0.5, 0, 0])
    assert np.linalg.norm(out) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    with pytest.raises(ValueError):
        project(psi, 5)
    with pytest.raises(ValueError):
        lift(psi, 3)


complex_vectors = arrays(np.complex128, st.integers(2, 12),
                         elements=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                     allow_infinity=False))


@given(complex_vectors, st.data())
def test_lift_project_is_orthogonal_projection(psi, data):
    n = data.draw(st.integers(1, psi.size))
    p = lift(project(psi, n), psi.size)
    assert np.linalg.norm(p) <= np.linalg.norm(psi) * (1 + 1e-15) + 1e-300
    np.testing.assert_allclose(lift(project(p, n), psi.size), p)
    assert abs(np.vdot(psi - p, p)) <= 1e-12 * max(1.0, np.linalg.norm(psi) ** 2)
    if not np.any(psi[n:]):
        assert np.linalg.norm(p) == np.linalg.norm(psi)


def test_sobolev_norm_examples():
    m = build_box_model(4, None, COS)
    for k in (0, 0.5, 1, 3.7):
        assert sobolev_norm(m, eigenstate(4, 1), k) == pytest.approx(1.0, rel=1e-15)
    assert sobolev_norm(m, eigenstate(4, 2), 2) == pytest.approx(4.0, rel=1e-15)
    psi = (eigenstate(4, 1) + eigenstate(4, 2)) / math.sqrt(2)
    assert sobolev_norm(m, psi, 1) == pytest.approx(math.sqrt(2.5), rel=1e-14)
    assert math.sqrt(2.5) == pytest.approx(1.58114, abs=1e-5)
    with pytest.raises(ValueError):
        sobolev_norm(m, psi, -1)


@given(arrays(np.complex128, 6, elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False,
                                                            allow_infinity=False)))
def test_sobolev_norm_k0_is_euclidean(psi):
    m = build_box_model(6, None, COS)
    assert abs(sobolev_norm(m, psi, 0) - np.linalg.norm(psi)) <= 1e-14 * max(1.0, np.linalg.norm(psi))


def test_weighted_similarity_examples():
    m = build_box_model(2, None, COS)
    np.testing.assert_array_equal(weighted_similarity(m, 0), m.b_matrix)
    np.testing.assert_allclose(weighted_similarity(m, 2), [[0, -1j / 8], [-2j, 0]], atol=1e-15)
    diag = m.__class__(eigenvalues=[1.0, 4.0, 9.0], b_matrix=np.diag([1j, -2j, 0.5j]))
    for k in (0.5, 1, 2, 5):
        np.testing.assert_allclose(weighted_similarity(diag, k), diag.b_matrix, atol=1e-15)


@pytest.mark.parametrize("builder,v", [(build_box_model, None), (build_box_model, COS),
                                       (build_torus_model, None)])
def test_json_round_trip_is_exact(builder, v):
    m = builder(7, v, Potential(kind="trig", cos=(0.1, 0.9), sin=(0.0, 0.3)))
    back = model_from_json(model_to_json(m))
    assert back == m
    assert back.b_matrix.tobytes() == m.b_matrix.tobytes()
