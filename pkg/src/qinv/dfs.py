"""Decoherence-free subspace detection and block decomposition.

A subspace spanned by ``|Phi_j>`` is decoherence free when every Lindblad
operator acts on it as a scalar, ``F_a |Phi_j> = c_a |Phi_j>``, and the
effective Hamiltonian

    H_eff = G + H + (i/2) sum_a (c_a^* F_a - c_a F_a^dag)

does not leak it into the complement.  ``G = i sum |Phi><dPhi/dt|`` over the
full (DFS + complement) basis vanishes for static bases.

The eigenvalues ``c_a`` and the blocks ``A_a``, ``B_a`` are reported for the
*base* Lindblad matrices of the model; at time ``t`` the effective ones are
scaled by ``sqrt(rate_a(t))``, and ``DfsDecomposition.rates`` carries the
rates at the decomposition time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .errors import NotADfsError, RejectedInputError, UnsupportedModelError
from .operators import (HERMITIAN_TOL, ORTHO_TOL, as_operator, dagger, fix_phases,
                        hermiticity_error, hermitize, max_abs, orthogonal_complement,
                        orthonormality_error, orthonormalize, subspace_intersection)

DFS_TOL = 1e-9
MAX_CONDITION = 1e8


@dataclass(frozen=True)
class DfsDecomposition:
    """A DFS / complement split of the Hilbert space and the blocks it induces.

    Bases are ``(N, D)`` and ``(N, N - D)`` column arrays.  Block fields stay
    ``None`` until :func:`block_decompose` fills them.
    """

    dfs_basis: np.ndarray
    comp_basis: np.ndarray
    c: tuple
    time: float = 0.0
    rates: tuple = ()
    heff_invariant: bool | None = None
    heff_residual: float | None = None
    A: tuple | None = None
    B: tuple | None = None
    H_D: np.ndarray | None = None
    H_N: np.ndarray | None = None
    H_C: np.ndarray | None = None
    G_D: np.ndarray | None = None
    G_N: np.ndarray | None = None
    G_C: np.ndarray | None = None

    @property
    def dim(self):
        return self.dfs_basis.shape[0]

    @property
    def dfs_dim(self):
        return self.dfs_basis.shape[1]

    @property
    def basis(self):
        """Joint basis, DFS vectors first."""
        return np.hstack([self.dfs_basis, self.comp_basis])

    def dfs_projector(self):
        return self.dfs_basis @ dagger(self.dfs_basis)

    def comp_projector(self):
        return self.comp_basis @ dagger(self.comp_basis)

    def with_bases(self, dfs_basis, comp_basis):
        return replace(self, dfs_basis=np.asarray(dfs_basis, dtype=complex),
                       comp_basis=np.asarray(comp_basis, dtype=complex))

    def effective_c(self):
        return tuple(np.sqrt(r) * c for r, c in zip(self.rates, self.c))

    def effective_blocks(self):
        """``(A_a, B_a)`` of the rate-scaled Lindblad operators."""
        if self.A is None:
            raise RejectedInputError("decomposition has no blocks; run block_decompose")
        return ([np.sqrt(r) * a for r, a in zip(self.rates, self.A)],
                [np.sqrt(r) * b for r, b in zip(self.rates, self.B)])


def make_decomposition(dfs_basis, comp_basis=None, c=(), time=0.0, rates=()):
    """Build a decomposition from user bases, checking joint orthonormality."""
    dfs_basis = np.asarray(dfs_basis, dtype=complex)
    if dfs_basis.ndim == 1:
        dfs_basis = dfs_basis[:, None]
    if comp_basis is None:
        comp_basis = orthogonal_complement(dfs_basis)
    comp_basis = np.asarray(comp_basis, dtype=complex).reshape(dfs_basis.shape[0], -1)
    joint = np.hstack([dfs_basis, comp_basis])
    if joint.shape[1] != joint.shape[0] or orthonormality_error(joint) > ORTHO_TOL:
        raise RejectedInputError("DFS and complement bases are not a joint orthonormal basis")
    return DfsDecomposition(dfs_basis, comp_basis, tuple(c), float(time), tuple(rates))


# --- detection --------------------------------------------------------------


def _eigenspaces(f, tol, index):
    """Cluster the right eigenvectors of ``f`` by eigenvalue."""
    values, vectors = np.linalg.eig(f)
    if np.linalg.cond(vectors) > MAX_CONDITION:
        raise UnsupportedModelError(f"Lindblad operator {index} is not diagonalizable")
    scale = max(1.0, float(np.max(np.abs(values))))
    order = np.lexsort((values.imag, values.real))
    clusters = []
    for k in order:
        for cl in clusters:
            if abs(values[k] - cl[0]) <= tol * scale:
                cl[1].append(k)
                break
        else:
            clusters.append([values[k], [k]])
    out = []
    for _, members in clusters:
        c = complex(np.mean(values[members]))
        out.append((c, orthonormalize(vectors[:, members])))
    out.sort(key=lambda item: (item[0].real, item[0].imag))
    return out


def find_static_dfs(model, t=0.0, tol=DFS_TOL, min_dim=2):
    """Search for static DFSs of ``model`` at time ``t``.

    Every tuple of eigenvalues ``(c_1, ..., c_K)``, one per Lindblad
    operator, gives the intersection of the matching eigenspaces.  Each
    intersection of dimension ``>= min_dim`` becomes a candidate, flagged
    with ``heff_invariant`` according to the ``H_eff`` leakage check.  The
    default ``min_dim=2`` asks for *degenerate* common eigenstates; pass
    ``min_dim=1`` to also see single common eigenvectors.  Output is sorted
    lexicographically by ``(Re c, Im c)``.
    """
    n = model.dim
    fs = model._F
    rates = tuple(model.rates(t))
    if len(fs) == 0:
        spaces = [((), np.eye(n, dtype=complex))]
    else:
        per_op = [_eigenspaces(f, tol, a) for a, f in enumerate(fs)]
        spaces = []
        for combo in itertools.product(*per_op):
            basis = combo[0][1]
            for _, other in combo[1:]:
                basis = subspace_intersection(basis, other, tol)
                if basis.shape[1] == 0:
                    break
            if basis.shape[1] > 0:
                spaces.append((tuple(c for c, _ in combo), basis))

    found = []
    zero_g = np.zeros((n, n), dtype=complex)
    for cs, basis in spaces:
        if basis.shape[1] < min_dim:
            continue
        d = make_decomposition(fix_phases(basis), c=cs, time=t, rates=rates)
        res = dfs_condition_residual(compute_Heff(model, d, zero_g, t), d)
        found.append(replace(d, heff_invariant=bool(res <= tol), heff_residual=res))
    found.sort(key=lambda d: tuple((c.real, c.imag) for c in d.c))
    return found


# --- time-dependent bases ------------------------------------------------------


@dataclass(frozen=True)
class BasisTrajectory:
    """Time-dependent DFS and complement bases.

    ``bases(t)`` returns ``(dfs_basis, comp_basis)``.  ``derivative(t)``,
    when given, returns their time derivatives; otherwise a central
    difference with ``h = 1e-6 * T`` is used.
    """

    bases: object
    T: float
    derivative: object = None

    @classmethod
    def static(cls, decomposition, T=1.0):
        d0, c0 = decomposition.dfs_basis, decomposition.comp_basis
        return cls(lambda t: (d0, c0), T,
                   lambda t: (np.zeros_like(d0), np.zeros_like(c0)))

    def joint(self, t):
        d, c = self.bases(t)
        return np.hstack([np.asarray(d, dtype=complex), np.asarray(c, dtype=complex)])

    def joint_derivative(self, t):
        if self.derivative is not None:
            d, c = self.derivative(t)
            return np.hstack([np.asarray(d, dtype=complex), np.asarray(c, dtype=complex)])
        h = 1e-6 * self.T
        return (self.joint(t + h) - self.joint(t - h)) / (2 * h)


def compute_G(bt, t):
    """``G(t) = i sum_k |e_k><de_k/dt|`` over the joint basis; Hermitian."""
    v = bt.joint(t)
    if v.shape[0] != v.shape[1] or orthonormality_error(v) > ORTHO_TOL:
        raise RejectedInputError(f"basis is not orthonormal at t={t}")
    g = 1j * v @ dagger(bt.joint_derivative(t))
    err = hermiticity_error(g)
    if err > 1e-6 * max(1.0, max_abs(g)):
        raise RejectedInputError(f"G is not Hermitian at t={t} (error {err:.3e})")
    return hermitize(g)


# --- effective Hamiltonian and DFS condition -------------------------------------


def compute_Heff(model, d, G, t):
    G = as_operator(G, model.dim, "G")
    if d.dim != model.dim:
        raise RejectedInputError("decomposition and model dimensions differ")
    heff = G + model.hamiltonian(t)
    for r, f, c in zip(model.rates(t), model._F, d.c):
        # effective operator and eigenvalue both carry sqrt(rate)
        heff = heff + 0.5j * r * (np.conj(c) * f - c * dagger(f))
    return heff


def dfs_condition_residual(heff, d):
    """``max_{n,j} |<Phi_n^perp| H_eff |Phi_j>|``."""
    if d.comp_basis.shape[1] == 0:
        return 0.0
    return max_abs(dagger(d.comp_basis) @ heff @ d.dfs_basis)


def block_decompose(model, d, G, t, tol=DFS_TOL):
    """Fill in ``A_a, B_a, H^D, H^N, H^C, G^D, G^N, G^C`` at time ``t``.

    Raises ``NotADfsError`` when some ``F_a`` maps the DFS into the
    complement, or does not act as ``c_a`` on the DFS.
    """
    G = as_operator(G, model.dim, "G")
    vd, vc = d.dfs_basis, d.comp_basis
    cs = []
    a_blocks, b_blocks = [], []
    for a, f in enumerate(model._F):
        lower = dagger(vc) @ f @ vd
        if max_abs(lower) > tol:
            raise NotADfsError(f"Lindblad operator {a} leaks the DFS into the complement "
                               f"(|block| = {max_abs(lower):.3e})", max_abs(lower))
        top = dagger(vd) @ f @ vd
        c = complex(np.trace(top) / top.shape[0])
        scalar_err = max_abs(top - c * np.eye(top.shape[0]))
        if scalar_err > tol:
            raise NotADfsError(f"Lindblad operator {a} is not scalar on the DFS "
                               f"(deviation {scalar_err:.3e})", scalar_err)
        cs.append(c)
        a_blocks.append(dagger(vd) @ f @ vc)
        b_blocks.append(dagger(vc) @ f @ vc)
    h = model.hamiltonian(t)
    return replace(
        d, c=tuple(cs), time=float(t), rates=tuple(model.rates(t)),
        A=tuple(a_blocks), B=tuple(b_blocks),
        H_D=hermitize(dagger(vd) @ h @ vd), H_N=dagger(vd) @ h @ vc,
        H_C=hermitize(dagger(vc) @ h @ vc),
        G_D=hermitize(dagger(vd) @ G @ vd), G_N=dagger(vd) @ G @ vc,
        G_C=hermitize(dagger(vc) @ G @ vc),
    )


def reembed(d, top_left, top_right, bottom_left, bottom_right):
    """Map a 2x2 block matrix in the joint basis back to the full space."""
    vd, vc = d.dfs_basis, d.comp_basis
    return (vd @ top_left @ dagger(vd) + vd @ top_right @ dagger(vc)
            + vc @ bottom_left @ dagger(vd) + vc @ bottom_right @ dagger(vc))


def coupling_block(d):
    """``X = i(G^N + H^N) - sum_a (c_a^*/2) A_a`` with rate-scaled ``c_a, A_a``."""
    if d.H_N is None:
        raise RejectedInputError("decomposition has no blocks; run block_decompose")
    x = 1j * (d.G_N + d.H_N)
    for r, c, a in zip(d.rates, d.c, d.A):
        x = x - 0.5 * r * np.conj(c) * a
    return x


def decoupling_residual(d, ID, IC):
    """Return ``(max|I^D X - X I^C|, max|X|)``.

    The second number separates "X vanishes" from "X is nonzero but happens
    to intertwine the two blocks".
    """
    x = coupling_block(d)
    ID = as_operator(ID, d.dfs_dim, "I^D")
    IC = as_operator(IC, d.dim - d.dfs_dim, "I^C")
    for name, m in (("I^D", ID), ("I^C", IC)):
        if hermiticity_error(m) > HERMITIAN_TOL * max(1.0, max_abs(m)):
            raise RejectedInputError(f"{name} is not Hermitian")
    return max_abs(ID @ x - x @ IC), max_abs(x)
