"""Block-diagonal invariants ``I = I^D (+) I^C`` built on a DFS split.

Given the blocks of ``F_a``, ``H`` and ``G`` (see :mod:`qinv.dfs`), the
invariant condition splits into

    dI^D/dt = -i[G^D + H^D, I^D]
    dI^C/dt = -i(K I^C - I^C K^dag) - sum_a A_a^dag I^D A_a
              + (1/2) sum_a ({B_a^dag B_a, I^C} - 2 B_a^dag I^C B_a)

with ``K = G^C + H^C + (i/2) sum_a A_a^dag A_a``, plus the decoupling
requirement on the off-diagonal block.  ``I^D`` therefore evolves unitarily
and keeps its spectrum, while ``I^C`` is driven by ``I^D`` through ``A_a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dfs import block_decompose, compute_G, reembed
from .errors import RejectedInputError
from .lindblad import (DEGENERACY_TOL, EigenFlowRecord, InvariantTrajectory, _min_gaps,
                       _uniform_dt, integrate_hermitian, invariant_residual,
                       propagate_invariant, time_grid)
from .operators import (HERMITIAN_TOL, as_operator, dagger, hermitize, max_abs,
                        require_hermitian)


class BlockModel:
    """A Lindblad model seen through a (possibly moving) DFS split.

    ``at(t)`` returns the decomposition with all blocks filled at ``t``.
    Without a ``basis_trajectory`` the split of ``decomposition`` is static,
    ``G = 0``, and the per-term blocks are projected once up front.
    """

    def __init__(self, model, decomposition, basis_trajectory=None):
        self.model = model
        self.decomposition = decomposition
        self.basis_trajectory = basis_trajectory
        self._cache = {}
        self._terms = None
        if basis_trajectory is None:
            n = decomposition.dim
            # validates the split once (raises NotADfsError)
            d0 = block_decompose(model, decomposition, np.zeros((n, n), dtype=complex), 0.0)
            vd, vc = d0.dfs_basis, d0.comp_basis
            self._terms = [(c, hermitize(dagger(vd) @ h @ vd), hermitize(dagger(vc) @ h @ vc))
                           for h, c in model.hamiltonian_terms]
            self._fblocks = list(zip(d0.A, d0.B))

    @property
    def dfs_dim(self):
        return self.decomposition.dfs_dim

    @property
    def comp_dim(self):
        return self.decomposition.dim - self.decomposition.dfs_dim

    def at(self, t):
        d = self.decomposition
        if self.basis_trajectory is None:
            g = np.zeros((d.dim, d.dim), dtype=complex)
        else:
            d = d.with_bases(*self.basis_trajectory.bases(t))
            g = compute_G(self.basis_trajectory, t)
        return block_decompose(self.model, d, g, t)

    def bases(self, t):
        if self.basis_trajectory is None:
            return self.decomposition.dfs_basis, self.decomposition.comp_basis
        return self.basis_trajectory.bases(t)

    def generators(self, t):
        """``(G^D + H^D, K, [A_eff], [B_eff])`` at ``t``, memoized per ``t``.

        ``K = G^C + H^C + (i/2) sum A_eff^dag A_eff``.
        """
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        if self._terms is not None:
            nd, nc = self.dfs_dim, self.comp_dim
            hd = np.zeros((nd, nd), dtype=complex)
            hc = np.zeros((nc, nc), dtype=complex)
            for c, bd, bc in self._terms:
                v = c.eval(t)
                hd = hd + v * bd
                hc = hc + v * bc
            roots = np.sqrt(self.model.rates(t))
            a_eff = [r * a for r, (a, _) in zip(roots, self._fblocks)]
            b_eff = [r * b for r, (_, b) in zip(roots, self._fblocks)]
        else:
            d = self.at(t)
            hd = d.G_D + d.H_D
            hc = d.G_C + d.H_C
            a_eff, b_eff = d.effective_blocks()
        k = hc
        for a in a_eff:
            k = k + 0.5j * dagger(a) @ a
        hit = (hd, k, a_eff, b_eff)
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[t] = hit
        return hit


def _id_rhs(bm, ID, t):
    h = bm.generators(t)[0]
    return -1j * (h @ ID - ID @ h)


def _ic_rhs(bm, ID, IC, t):
    _, k, a_eff, b_eff = bm.generators(t)
    out = -1j * (k @ IC - IC @ dagger(k))
    for a in a_eff:
        out -= dagger(a) @ ID @ a
    for b in b_eff:
        bdb = dagger(b) @ b
        out += 0.5 * (bdb @ IC + IC @ bdb) - dagger(b) @ IC @ b
    return out


def propagate_ID(bm, ID0, T, steps):
    """Unitary RK4 propagation of the DFS block."""
    ID0 = as_operator(ID0, bm.dfs_dim, "I^D(0)")
    require_hermitian(ID0, HERMITIAN_TOL, "I^D(0)")
    times, ys, drift = integrate_hermitian(lambda y, t: _id_rhs(bm, y, t), ID0, T, steps)
    return InvariantTrajectory(times, ys, drift)


def propagate_IC(bm, ID_traj, IC0, T=None, steps=None):
    """RK4 propagation of the complement block, driven by a finished ``I^D`` run.

    Each step restarts the coupled pair ``(I^D, I^C)`` from the sampled
    ``I^D(t_k)`` so the ``A``-coupling sees stage values of ``I^D`` of the
    same order as the integrator; the recomputed ``I^D(t_{k+1})`` is
    discarded in favour of the supplied trajectory.
    """
    times = np.asarray(ID_traj.times)
    if T is not None or steps is not None:
        expected = time_grid(T, steps)
        if expected.shape != times.shape or not np.allclose(expected, times, rtol=0,
                                                             atol=1e-12):
            raise RejectedInputError("requested grid differs from the I^D trajectory grid")
    dt = _uniform_dt(times)
    IC0 = as_operator(IC0, bm.comp_dim, "I^C(0)")
    require_hermitian(IC0, HERMITIAN_TOL, "I^C(0)")

    ys = np.empty((len(times), bm.comp_dim, bm.comp_dim), dtype=complex)
    drift = np.zeros(len(times))
    ys[0] = hermitize(IC0)
    for k in range(1, len(times)):
        new = _rk4_pair(bm, ID_traj.invariants[k - 1], ys[k - 1], times[k - 1], dt,
                        times[k])
        drift[k] = max_abs(new - dagger(new))
        ys[k] = hermitize(new)
    return InvariantTrajectory(times, ys, drift)


def _rk4_pair(bm, ID, IC, t, dt, t_next):
    # classical RK4 on the pair, returning only the I^C component
    h = 0.5 * dt
    d1 = _id_rhs(bm, ID, t)
    c1 = _ic_rhs(bm, ID, IC, t)
    d2 = _id_rhs(bm, ID + h * d1, t + h)
    c2 = _ic_rhs(bm, ID + h * d1, IC + h * c1, t + h)
    d3 = _id_rhs(bm, ID + h * d2, t + h)
    c3 = _ic_rhs(bm, ID + h * d2, IC + h * c2, t + h)
    c4 = _ic_rhs(bm, ID + dt * d3, IC + dt * c3, t_next)
    return IC + (dt / 6.0) * (c1 + 2 * c2 + 2 * c3 + c4)


# --- assembly -------------------------------------------------------------------


@dataclass(frozen=True)
class BlockInvariant:
    ID: np.ndarray
    IC: np.ndarray
    decomposition: object

    def __post_init__(self):
        d = self.decomposition
        ID = as_operator(self.ID, d.dfs_dim, "I^D")
        IC = as_operator(self.IC, d.dim - d.dfs_dim, "I^C")
        require_hermitian(ID, HERMITIAN_TOL, "I^D")
        require_hermitian(IC, HERMITIAN_TOL, "I^C")
        object.__setattr__(self, "ID", ID)
        object.__setattr__(self, "IC", IC)


def assemble_invariant(b, dfs_basis=None, comp_basis=None):
    """Embed ``I^D (+) I^C`` into the full space (optionally in moved bases)."""
    d = b.decomposition
    if dfs_basis is not None:
        d = d.with_bases(dfs_basis, comp_basis)
    zero_n = np.zeros((b.ID.shape[0], b.IC.shape[0]), dtype=complex)
    return hermitize(reembed(d, b.ID, zero_n, zero_n.T, b.IC))


def split_invariant(inv, dfs_basis, comp_basis):
    """Return ``(I^D, I^C, off-diagonal block)`` of a full operator."""
    inv = np.asarray(inv, dtype=complex)
    return (dagger(dfs_basis) @ inv @ dfs_basis, dagger(comp_basis) @ inv @ comp_basis,
            dagger(dfs_basis) @ inv @ comp_basis)


def assemble_trajectory(bm, ID_traj, IC_traj):
    if len(ID_traj.times) != len(IC_traj.times):
        raise RejectedInputError("I^D and I^C trajectories use different grids")
    invs = []
    for t, ID, IC in zip(ID_traj.times, ID_traj.invariants, IC_traj.invariants):
        b = BlockInvariant(ID, IC, bm.decomposition)
        invs.append(assemble_invariant(b, *bm.bases(t)))
    return InvariantTrajectory(np.asarray(ID_traj.times), np.array(invs))


@dataclass(frozen=True)
class FullInvariantReport:
    residuals: np.ndarray
    max_residual: float
    direct_offdiag: np.ndarray
    max_direct_offdiag: float


def offdiag_norms(bm, traj):
    out = np.empty(len(traj.times))
    for k, (t, inv) in enumerate(zip(traj.times, traj.invariants)):
        vd, vc = bm.bases(t)
        out[k] = max_abs(split_invariant(inv, vd, vc)[2])
    return out


def verify_full_invariant(bm, ID_traj, IC_traj):
    """Check the assembled block trajectory against the full invariant condition.

    Also propagates the assembled initial operator directly with the full
    adjoint equation and reports how large its off-diagonal block becomes.
    """
    assembled = assemble_trajectory(bm, ID_traj, IC_traj)
    residuals = invariant_residual(bm.model, assembled)
    times = assembled.times
    direct = propagate_invariant(bm.model, assembled.invariants[0], times[-1],
                                 len(times) - 1)
    off = offdiag_norms(bm, direct)
    return FullInvariantReport(residuals, float(residuals.max()), off, float(off.max()))


def complement_eigenflow(bm, ID_traj, IC_traj, degeneracy_tol=DEGENERACY_TOL):
    """Eigenvalue-flow law for ``I^C`` against finite differences.

    For eigenpair ``n`` of ``I^C`` the predicted rate is
    ``sum_a [sum_j (l_n - l^D_j)|<psi_j|A_a|psi_n>|^2
    + sum_{m != n} (l_n - l_m)|<psi_m|B_a|psi_n>|^2]``.
    """
    times = np.asarray(IC_traj.times)
    if len(times) < 3:
        raise RejectedInputError("need at least 3 samples for a central difference")
    if len(ID_traj.times) != len(times):
        raise RejectedInputError("I^D and I^C trajectories use different grids")
    dt = _uniform_dt(times)
    c_sys = IC_traj.eigensystems
    d_sys = ID_traj.eigensystems
    records = []
    for k in range(1, len(times) - 1):
        _, _, a_eff, b_eff = bm.generators(times[k])
        lc, vc = c_sys[k].values, c_sys[k].vectors
        ld, vd = d_sys[k].values, d_sys[k].vectors
        gaps = _min_gaps(lc)
        scale = max(1.0, float(np.max(np.abs(lc))))
        for n, lam in enumerate(lc):
            rhs = 0.0
            for a in a_eff:
                amp = np.abs(dagger(vd) @ a @ vc[:, n]) ** 2
                rhs += float(np.sum((lam - ld) * amp))
            for b in b_eff:
                amp = np.abs(dagger(vc) @ b @ vc[:, n]) ** 2
                amp[n] = 0.0
                rhs += float(np.sum((lam - lc) * amp))
            fd = (c_sys[k + 1].values[n] - c_sys[k - 1].values[n]) / (2 * dt)
            records.append(EigenFlowRecord(float(times[k]), n, float(lam), rhs, float(fd),
                                           abs(rhs - fd),
                                           bool(gaps[n] < degeneracy_tol * scale)))
    return records
