import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qinv.errors import RejectedInputError
from qinv.operators import (IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z, anticommutator, commutator,
                            dagger, embed, fix_phases, gram_schmidt, hermitize, is_hermitian,
                            ket, matrix_from_literal, matrix_to_literal, orthogonal_complement,
                            orthonormality_error, orthonormalize, projector,
                            spectral_decompose, subspace_intersection, tensor_product)

from conftest import random_hermitian

E = np.eye(3, dtype=complex)


# --- commutators -----------------------------------------------------------------


def test_commutator_of_an_operator_with_itself_vanishes(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.array_equal(commutator(a, a), np.zeros((3, 3)))


def test_pauli_commutators():
    np.testing.assert_allclose(commutator(SIGMA_Z, SIGMA_X), 2j * SIGMA_Y, atol=0)
    np.testing.assert_allclose(commutator(SIGMA_X, SIGMA_Y), 2j * SIGMA_Z, atol=0)
    np.testing.assert_allclose(commutator(SIGMA_Y, SIGMA_Z), 2j * SIGMA_X, atol=0)


def test_pauli_z_sign_convention():
    # sz|0> = -|0>, sz|1> = +|1>
    assert SIGMA_Z[0, 0] == -1 and SIGMA_Z[1, 1] == 1


def test_anticommutators(rng):
    np.testing.assert_allclose(anticommutator(SIGMA_X, SIGMA_X), 2 * IDENTITY_2)
    np.testing.assert_allclose(anticommutator(SIGMA_X, SIGMA_Y), np.zeros((2, 2)))
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    np.testing.assert_allclose(anticommutator(np.eye(4), m), 2 * m)


@pytest.mark.parametrize("op", [commutator, anticommutator])
def test_bracket_dimension_mismatch(op):
    with pytest.raises(RejectedInputError):
        op(np.eye(2), np.eye(3))


# --- spectral decomposition -----------------------------------------------------


def test_spectrum_of_sigma_z():
    es = spectral_decompose(SIGMA_Z)
    np.testing.assert_allclose(es.values, [-1, 1])
    # largest component real and positive
    np.testing.assert_allclose(es.vectors, np.eye(2))


def test_degenerate_identity():
    es = spectral_decompose(np.eye(4))
    np.testing.assert_allclose(es.values, [1, 1, 1, 1])
    assert orthonormality_error(es.vectors) <= 1e-12


def test_field_block_spectrum():
    bz = 2.0
    es = spectral_decompose(np.diag([-bz, bz]))
    np.testing.assert_allclose(es.values, [-2, 2])


def test_non_hermitian_input_is_rejected():
    with pytest.raises(RejectedInputError):
        spectral_decompose(np.array([[0, 1], [0, 0]]))


def test_eigen_equation_and_reconstruction(rng):
    for n in (2, 3, 5, 8):
        m = random_hermitian(rng, n)
        es = spectral_decompose(m)
        norm = np.max(np.abs(m))
        for k in range(n):
            v = es.vectors[:, k]
            assert np.max(np.abs(m @ v - es.values[k] * v)) <= 1e-10 * norm
        assert orthonormality_error(es.vectors) <= 1e-10
        np.testing.assert_allclose(es.reconstruct(), m, atol=1e-12 * norm)


def test_degenerate_cluster_is_orthonormalized(rng):
    u, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    m = u @ np.diag([1.0, 1.0 + 1e-13, 1.0, 3.0]) @ u.conj().T
    es = spectral_decompose(hermitize(m))
    assert orthonormality_error(es.vectors) <= 1e-10


def test_continuity_follows_a_crossing():
    # diag(t, -t): ascending order would swap the curves at t = 0
    ref = None
    first = []
    for t in np.linspace(-1, 1, 41):
        ref = spectral_decompose(np.diag([t, -t]).astype(complex), reference=ref)
        first.append(ref.values[0])
    np.testing.assert_allclose(first, np.linspace(-1, 1, 41), atol=1e-12)


def test_continuity_through_an_avoided_crossing():
    # a small coupling with coarse sampling: the tracked curve follows the
    # eigenvector (diabatic branch) rather than jumping between branches
    delta = 1e-4
    ref = None
    vals = []
    for t in np.linspace(-1, 1, 40):
        m = np.array([[t, delta], [delta, -t]], dtype=complex)
        ref = spectral_decompose(m, reference=ref)
        vals.append(ref.values[0])
    assert np.all(np.diff(vals) > 0)


def test_reference_pairing_is_a_permutation(rng):
    m = random_hermitian(rng, 4)
    ref = spectral_decompose(m)
    es = spectral_decompose(m + 1e-3 * random_hermitian(rng, 4), reference=ref)
    assert sorted(es.pairing.tolist()) == [0, 1, 2, 3]
    overlaps = np.abs(np.einsum("ik,ik->k", ref.vectors.conj(), es.vectors))
    assert np.all(overlaps > 0.99)


def test_reference_phase_alignment(rng):
    m = random_hermitian(rng, 3)
    ref = spectral_decompose(m)
    es = spectral_decompose(m, reference=ref)
    np.testing.assert_allclose(es.vectors, ref.vectors, atol=1e-12)


@st.composite
def hermitian_matrices(draw, max_n=5):
    n = draw(st.integers(1, max_n))
    elems = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    re = draw(arrays(float, (n, n), elements=elems))
    im = draw(arrays(float, (n, n), elements=elems))
    a = re + 1j * im
    return (a + a.conj().T) / 2


@given(hermitian_matrices())
@settings(max_examples=60, deadline=None)
def test_decompose_reconstruct_is_idempotent(m):
    es = spectral_decompose(m)
    scale = max(1.0, np.max(np.abs(m)))
    again = spectral_decompose(hermitize(es.reconstruct()))
    np.testing.assert_allclose(again.values, es.values, atol=1e-10 * scale)


# --- subspaces ------------------------------------------------------------------------


def test_intersection_of_coordinate_planes():
    s = subspace_intersection(E[:, [0, 1]], E[:, [1, 2]])
    assert s.shape == (3, 1)
    np.testing.assert_allclose(projector(s), projector(E[:, [1]]), atol=1e-12)


def test_intersection_of_orthogonal_lines_is_empty():
    s = subspace_intersection(E[:, [0]], E[:, [1]])
    assert s.shape == (3, 0)


def test_intersection_with_full_space(rng):
    s = orthonormalize(rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)))
    out = subspace_intersection(E, s)
    np.testing.assert_allclose(projector(out), projector(s), atol=1e-9)


def test_intersection_of_tilted_planes():
    # the plane z = 0 and the plane x = y share the line (1, 1, 0)
    a = E[:, [0, 1]]
    b = orthonormalize(np.array([[1, 0], [1, 0], [0, 1]], dtype=complex))
    s = subspace_intersection(a, b)
    assert s.shape == (3, 1)
    line = np.array([1, 1, 0]) / np.sqrt(2)
    np.testing.assert_allclose(projector(s), np.outer(line, line), atol=1e-12)


@st.composite
def subspaces(draw):
    n = draw(st.integers(2, 6))
    k = draw(st.integers(1, n))
    seed = draw(st.integers(0, 2**32 - 1))
    r = np.random.default_rng(seed)
    return orthonormalize(r.normal(size=(n, k)) + 1j * r.normal(size=(n, k)))


@given(subspaces(), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_intersection_with_itself(s, seed):
    # a different basis of the same span
    r = np.random.default_rng(seed)
    k = s.shape[1]
    u, _ = np.linalg.qr(r.normal(size=(k, k)) + 1j * r.normal(size=(k, k)))
    out = subspace_intersection(s, s @ u)
    assert out.shape[1] == k
    assert np.max(np.abs(projector(out) - projector(s))) <= 1e-9


def test_orthogonal_complement_completes_the_basis(rng):
    s = orthonormalize(rng.normal(size=(5, 2)) + 1j * rng.normal(size=(5, 2)))
    c = orthogonal_complement(s)
    assert c.shape == (5, 3)
    np.testing.assert_allclose(projector(s) + projector(c), np.eye(5), atol=1e-10)


def test_orthonormalize_drops_dependent_vectors():
    v = np.array([[1, 2, 0], [0, 0, 1], [0, 0, 0]], dtype=complex)
    assert orthonormalize(v).shape == (3, 2)


def test_gram_schmidt_orthonormalizes(rng):
    v = rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3))
    assert orthonormality_error(gram_schmidt(v)) <= 1e-12


def test_fix_phases():
    v = np.array([[-1.0, 0.6j], [0.0, 0.8j]])
    out = fix_phases(v)
    np.testing.assert_array_equal(out[:, 0], [1.0, 0.0])
    np.testing.assert_allclose(out[:, 1], [0.6, 0.8])


# --- tensor products ------------------------------------------------------------------


def test_tensor_of_identities():
    np.testing.assert_array_equal(tensor_product(IDENTITY_2, IDENTITY_2), np.eye(4))


def test_collective_z_in_the_computational_basis():
    f = tensor_product(SIGMA_Z, IDENTITY_2) + tensor_product(IDENTITY_2, SIGMA_Z)
    np.testing.assert_array_equal(f, np.diag([-2, 0, 0, 2]))


def test_xx_corner_entry():
    # row |00>, column |11>
    assert tensor_product(SIGMA_X, SIGMA_X)[0, 3] == 1


def test_qubit_one_is_the_left_factor():
    assert np.array_equal(embed(SIGMA_Z, 0, 2), tensor_product(SIGMA_Z, IDENTITY_2))
    assert np.array_equal(ket("01"), np.array([0, 1, 0, 0]))


@given(*(arrays(np.int64, (2, 2), elements=st.integers(-5, 5)) for _ in range(3)))
@settings(max_examples=50, deadline=None)
def test_tensor_product_is_associative(a, b, c):
    left = tensor_product(tensor_product(a, b), c)
    right = tensor_product(a, tensor_product(b, c))
    assert np.array_equal(left, right)
    assert np.array_equal(tensor_product(a, b, c), left)


# --- misc -----------------------------------------------------------------------------


def test_hermitize_and_dagger_on_stacks(rng):
    a = rng.normal(size=(3, 2, 2)) + 1j * rng.normal(size=(3, 2, 2))
    h = hermitize(a)
    np.testing.assert_allclose(h, dagger(h))
    assert is_hermitian(h[0]) and not is_hermitian(a[0])


def test_matrix_literal_round_trip(rng):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    lit = matrix_to_literal(m)
    assert lit["dim"] == 3
    np.testing.assert_array_equal(matrix_from_literal(lit), m)


def test_matrix_literal_without_imaginary_part():
    m = matrix_from_literal({"dim": 2, "re": [[1, 2], [3, 4]]})
    assert m.dtype == complex and m[1, 0] == 3


@pytest.mark.parametrize("bad", [{"dim": 2, "re": [[1, 2]]}, {"re": [[1]]},
                                 {"dim": 1, "re": [[1]], "im": [[1, 2]]}])
def test_bad_matrix_literals(bad):
    with pytest.raises(RejectedInputError):
        matrix_from_literal(bad)
