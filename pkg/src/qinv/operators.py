"""Dense operator algebra, Hermitian eigensystems and subspace utilities.

Operators are plain complex ``numpy`` arrays of shape ``(n, n)``; subspace
bases are ``(n, D)`` arrays whose columns are orthonormal vectors.

Pauli convention: ``SIGMA_Z`` has ``|0> -> -|0>`` and ``|1> -> +|1>``, which is
what makes the collective dephasing operator ``sz1 + sz2`` read
``diag(-2, 2)`` on ``{|00>, |11>}``.  ``SIGMA_Y`` is flipped with it so that
the set stays right-handed, ``[sx, sy] = 2i sz``.  Equivalently, these are
the textbook Pauli matrices with the roles of ``|0>`` and ``|1>`` swapped.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import RejectedInputError

HERMITIAN_TOL = 1e-12
ORTHO_TOL = 1e-10
EIG_TOL = 1e-10
DEGENERACY_TOL = 1e-9

IDENTITY_2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
PAULIS = {"I": IDENTITY_2, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


def as_operator(m, dim=None, name="operator"):
    """Coerce ``m`` to a square complex array, checking its dimension."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise RejectedInputError(f"{name} must be a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise RejectedInputError(f"{name} has dimension {a.shape[0]}, expected {dim}")
    return a


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def max_abs(m):
    """Max-abs-entry norm, the norm used by every tolerance in this package."""
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def hermiticity_error(m):
    return max_abs(m - dagger(m))


def is_hermitian(m, tol=HERMITIAN_TOL):
    return hermiticity_error(m) <= tol


def hermitize(m):
    """Return ``(m + m^dagger) / 2``; works on stacks of matrices."""
    return 0.5 * (m + dagger(m))


def require_hermitian(m, tol=HERMITIAN_TOL, name="operator"):
    err = hermiticity_error(m)
    if err > tol * max(1.0, max_abs(m)):
        raise RejectedInputError(f"{name} is not Hermitian (max |M - M^dag| = {err:.3e})")


def _check_pair(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[-2:] != b.shape[-2:]:
        raise RejectedInputError(f"dimension mismatch: {a.shape[-2:]} vs {b.shape[-2:]}")
    return a, b


def commutator(a, b):
    a, b = _check_pair(a, b)
    return a @ b - b @ a


def anticommutator(a, b):
    a, b = _check_pair(a, b)
    return a @ b + b @ a


def tensor_product(*ops):
    """Kronecker product; the first factor is qubit 1 (most significant)."""
    if not ops:
        raise RejectedInputError("tensor_product needs at least one factor")
    return reduce(np.kron, [np.asarray(o) for o in ops])


def embed(op, site, n_sites, local_dim=2):
    """Place a single-site operator at ``site`` (0-based) of an ``n_sites`` register."""
    factors = [np.eye(local_dim, dtype=complex)] * n_sites
    factors[site] = np.asarray(op, dtype=complex)
    return tensor_product(*factors)


def ket(bits):
    """Computational basis ket from a bit string such as ``"01"``."""
    dim = 2 ** len(bits)
    v = np.zeros(dim, dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def projector(basis):
    q = np.asarray(basis, dtype=complex)
    return q @ dagger(q)


# --- eigensystems -------------------------------------------------------


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs of a Hermitian matrix.

    ``vectors[:, k]`` belongs to ``values[k]``.  ``pairing[k]`` is the
    position of eigenpair ``k`` in the plain ascending order, so an
    unreferenced decomposition has ``pairing == arange(n)``.
    """

    values: np.ndarray
    vectors: np.ndarray
    pairing: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ dagger(self.vectors)


def _clusters(values, tol):
    groups = [[0]]
    for k in range(1, len(values)):
        if values[k] - values[k - 1] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def gram_schmidt(vectors):
    """Modified Gram-Schmidt on the columns of ``vectors``."""
    q = np.array(vectors, dtype=complex, copy=True)
    for j in range(q.shape[1]):
        for i in range(j):
            q[:, j] -= np.vdot(q[:, i], q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    return q


def _greedy_match(overlaps):
    """Greedy maximum-overlap assignment; ties go to the lower index."""
    n = overlaps.shape[0]
    rows, cols = np.unravel_index(np.arange(n * n), (n, n))
    order = np.lexsort((cols, rows, -overlaps.ravel()))
    perm = np.full(n, -1)
    used_rows = np.zeros(n, bool)
    used_cols = np.zeros(n, bool)
    for idx in order:
        r, c = rows[idx], cols[idx]
        if used_rows[r] or used_cols[c]:
            continue
        perm[r] = c
        used_rows[r] = used_cols[c] = True
    return perm


def spectral_decompose(m, reference=None, hermitian_tol=HERMITIAN_TOL,
                       degeneracy_tol=DEGENERACY_TOL):
    """Eigendecomposition of a Hermitian matrix with optional continuity ordering.

    Without a reference the eigenvalues come out ascending.  With a
    reference ``EigenSystem`` the pairs are reordered by greedy maximum
    overlap with the reference vectors, and each vector's phase is chosen so
    that its overlap with the matched reference vector is real and positive.
    Eigenvalues closer than ``degeneracy_tol * ||m||`` are clustered and
    their vectors re-orthonormalized together.
    """
    m = as_operator(m)
    require_hermitian(m, hermitian_tol)
    values, vectors = np.linalg.eigh(hermitize(m))
    scale = max(float(np.max(np.abs(values))), 1.0) if len(values) else 1.0
    for group in _clusters(values, degeneracy_tol * scale):
        if len(group) > 1:
            vectors[:, group] = gram_schmidt(vectors[:, group])

    n = len(values)
    if reference is None:
        return EigenSystem(values, fix_phases(vectors), np.arange(n))

    if len(reference.values) != n:
        raise RejectedInputError("reference eigensystem has a different dimension")
    overlaps = np.abs(dagger(reference.vectors) @ vectors) ** 2
    perm = _greedy_match(overlaps)
    values = values[perm]
    vectors = vectors[:, perm]
    phases = np.einsum("ik,ik->k", reference.vectors.conj(), vectors)
    nonzero = np.abs(phases) > 0
    vectors[:, nonzero] *= np.exp(-1j * np.angle(phases[nonzero]))
    return EigenSystem(values, vectors, perm)


# --- subspaces ----------------------------------------------------------


def fix_phases(vectors):
    """Rotate each column so its largest-magnitude entry is real and positive."""
    vectors = np.array(vectors, dtype=complex)
    for k in range(vectors.shape[1]):
        i = np.argmax(np.abs(vectors[:, k]))
        if vectors[i, k] != 0:
            # conj(v)/|v| is exact for real negative entries, unlike exp(-i*angle)
            vectors[:, k] *= np.conj(vectors[i, k]) / abs(vectors[i, k])
    return vectors + 0.0  # turns signed zeros into plain zeros


def orthonormalize(vectors, rank_tol=ORTHO_TOL):
    """Orthonormal basis for the column span of ``vectors`` (SVD, rank revealing)."""
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[1] == 0:
        return v.reshape(v.shape[0], 0)
    u, s, _ = np.linalg.svd(v, full_matrices=False)
    rank = int(np.sum(s > rank_tol * max(1.0, s[0])))
    return u[:, :rank]


def orthonormality_error(basis):
    q = np.asarray(basis, dtype=complex)
    return max_abs(dagger(q) @ q - np.eye(q.shape[1]))


def orthogonal_complement(basis, dim=None):
    q = np.asarray(basis, dtype=complex)
    n = q.shape[0] if dim is None else dim
    if q.size == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(dagger(q), full_matrices=True)
    rank = int(np.sum(s > ORTHO_TOL))
    return dagger(vh[rank:])


def subspace_intersection(s1, s2, tol=1e-9):
    """Orthonormal basis of ``span(s1) & span(s2)``.

    Uses the singular values of ``Q1^dag Q2`` (cosines of the principal
    angles); a direction is kept when its cosine is at least ``1 - tol``.
    Returns an ``(n, 0)`` array for an empty intersection.
    """
    q1 = orthonormalize(s1)
    q2 = orthonormalize(s2)
    if q1.shape[0] != q2.shape[0]:
        raise RejectedInputError("subspaces live in different ambient dimensions")
    n = q1.shape[0]
    if q1.shape[1] == 0 or q2.shape[1] == 0:
        return np.zeros((n, 0), dtype=complex)
    u, s, _ = np.linalg.svd(dagger(q1) @ q2)
    keep = s >= 1.0 - tol
    return orthonormalize(q1 @ u[:, : len(s)][:, keep])


# --- matrix literals ----------------------------------------------------


def matrix_from_literal(obj):
    """Parse ``{"dim": n, "re": [[...]], "im": [[...]]}``; ``im`` may be omitted."""
    try:
        dim = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise RejectedInputError(f"bad matrix literal: {exc}") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise RejectedInputError(f"matrix literal entries must be {dim}x{dim}")
    return re + 1j * im


def matrix_to_literal(m):
    m = as_operator(m)
    return {"dim": m.shape[0], "re": m.real.tolist(), "im": m.imag.tolist()}
