"""Lindblad generator, its adjoint on invariants, and fixed-step propagation.

States obey ``drho/dt = -i[H, rho] + sum_a (F rho F^dag - {F^dag F, rho}/2)``.
An invariant ``I(t)`` keeps ``Tr(I rho)`` constant along every state
trajectory, which forces

    dI/dt = -i[H, I] - sum_a (F^dag I F - {F^dag F, I}/2).

Each Lindblad operator is stored as a base matrix plus a rate schedule; the
operator entering both equations at time ``t`` is ``sqrt(rate(t)) * F``.
Everything here works on stacks of matrices (leading batch axes), which is
what makes paired propagation of many initial conditions cheap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import IntegrationQualityError, RejectedInputError
from .operators import (DEGENERACY_TOL, HERMITIAN_TOL, as_operator, dagger,
                        hermiticity_error, hermitize, max_abs, require_hermitian,
                        spectral_decompose)
from .schedules import as_schedule

log = logging.getLogger(__name__)

TRACE_TOL = 1e-9
PSD_TOL = 1e-10
DRIFT_TOL = 1e-9
# per-model memo of time-dependent generators; one RK4 step touches 3 times
_CACHE_SIZE = 32


@dataclass(frozen=True)
class LindbladModel:
    """``H(t) = sum_i c_i(t) H_i`` plus rated Lindblad operators.

    ``hamiltonian_terms`` is a sequence of ``(H_i, schedule)`` pairs and
    ``lindblad_ops`` a sequence of ``(F_base, rate_schedule)`` pairs.  Plain
    numbers are accepted in place of schedules and become constants.
    """

    dim: int
    hamiltonian_terms: tuple = ()
    lindblad_ops: tuple = ()
    _H: np.ndarray = field(init=False, repr=False, compare=False)
    _F: np.ndarray = field(init=False, repr=False, compare=False)
    _FdF: np.ndarray = field(init=False, repr=False, compare=False)
    _cache: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.dim)
        if n < 1:
            raise RejectedInputError("dim must be positive")
        terms = []
        for i, (h, c) in enumerate(self.hamiltonian_terms):
            h = as_operator(h, n, f"Hamiltonian term {i}")
            require_hermitian(h, HERMITIAN_TOL, f"Hamiltonian term {i}")
            terms.append((hermitize(h), as_schedule(c)))
        ops = []
        for a, (f, r) in enumerate(self.lindblad_ops):
            ops.append((as_operator(f, n, f"Lindblad operator {a}"), as_schedule(r)))
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "hamiltonian_terms", tuple(terms))
        object.__setattr__(self, "lindblad_ops", tuple(ops))
        empty = np.zeros((0, n, n), dtype=complex)
        object.__setattr__(self, "_H", np.array([h for h, _ in terms]) if terms else empty)
        fs = np.array([f for f, _ in ops]) if ops else empty
        object.__setattr__(self, "_F", fs)
        object.__setattr__(self, "_FdF", dagger(fs) @ fs)
        object.__setattr__(self, "_cache", {})

    def hamiltonian(self, t):
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for (_, c), hi in zip(self.hamiltonian_terms, self._H):
            h += c.eval(t) * hi
        return h

    def rates(self, t):
        r = [rate.eval(t) for _, rate in self.lindblad_ops]
        if any(x < 0 for x in r):
            raise RejectedInputError(f"negative Lindblad rate at t={t}: {r}")
        return r

    def dissipators(self, t):
        """Effective Lindblad operators ``sqrt(rate(t)) * F_base`` at time ``t``."""
        return [np.sqrt(r) * f for r, f in zip(self.rates(t), self._F)]

    def _parts(self, t, sign):
        """``(K, K^dag, [F], [F^dag])`` with ``K = H + sign*(i/2) sum F^dag F``.

        The ``F`` are the effective (rate-scaled) operators.  Memoized per
        ``t``, since RK4 evaluates each midpoint twice.
        """
        key = (t, sign)
        hit = self._cache.get(key)
        if hit is None:
            rates = self.rates(t)
            k = self.hamiltonian(t)
            fs = []
            for r, f, fdf in zip(rates, self._F, self._FdF):
                if r:
                    k = k + sign * 0.5j * r * fdf
                    fs.append(np.sqrt(r) * f)
            if len(self._cache) > _CACHE_SIZE:
                self._cache.clear()
            hit = self._cache[key] = (k, dagger(k).copy(), fs, [dagger(f).copy() for f in fs])
        return hit

    def without_dissipators(self):
        return LindbladModel(self.dim, self.hamiltonian_terms, ())

    def with_hamiltonian_term(self, h, schedule=1.0):
        return LindbladModel(self.dim, self.hamiltonian_terms + ((h, schedule),),
                             self.lindblad_ops)


def _lindblad_rhs(model, rho, t):
    # -i[H, rho] - {F^dag F, rho}/2 == -i(K rho - rho K^dag), K = H - (i/2) sum F^dag F
    k, kd, fs, fds = model._parts(t, -1)
    out = k @ rho
    out -= rho @ kd
    out *= -1j
    for f, fd in zip(fs, fds):
        out += f @ rho @ fd
    return out


def _adjoint_rhs(model, inv, t):
    # -i[H, I] + {F^dag F, I}/2 == -i(K I - I K^dag), K = H + (i/2) sum F^dag F
    k, kd, fs, fds = model._parts(t, +1)
    out = k @ inv
    out -= inv @ kd
    out *= -1j
    for f, fd in zip(fs, fds):
        out -= fd @ inv @ f
    return out


def apply_liouvillian(model, rho, t):
    """Right-hand side of the master equation for the state ``rho`` at ``t``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (model.dim, model.dim):
        raise RejectedInputError(f"state has shape {rho.shape}, model dim is {model.dim}")
    return _lindblad_rhs(model, rho, t)


def apply_adjoint_generator(model, inv, t):
    """``dI/dt`` demanded of an invariant ``I`` at time ``t``."""
    inv = np.asarray(inv, dtype=complex)
    if inv.shape[-2:] != (model.dim, model.dim):
        raise RejectedInputError(f"invariant has shape {inv.shape}, model dim is {model.dim}")
    require_hermitian(inv, HERMITIAN_TOL, "invariant")
    return _adjoint_rhs(model, inv, t)


# --- integration ----------------------------------------------------------


def time_grid(T, steps):
    if not T > 0:
        raise RejectedInputError("T must be positive")
    if int(steps) != steps or steps < 1:
        raise RejectedInputError("steps must be a positive integer")
    steps = int(steps)
    return np.arange(steps + 1) * (T / steps)


def rk4_step(rhs, y, t, dt, t_next=None):
    """One classical Runge-Kutta step of ``dy/dt = rhs(y, t)``.

    ``t_next`` lets a caller pass the exact grid time for ``t + dt`` so that
    per-time memoization sees the same float as the next step's ``t``.
    """
    t_mid = t + 0.5 * dt
    t_next = t + dt if t_next is None else t_next
    k1 = rhs(y, t)
    k2 = rhs(y + 0.5 * dt * k1, t_mid)
    k3 = rhs(y + 0.5 * dt * k2, t_mid)
    k4 = rhs(y + dt * k3, t_next)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_hermitian(rhs, y0, T, steps):
    """Fixed-step RK4 for a Hermiticity-preserving matrix ODE.

    Every step is followed by ``y <- (y + y^dag)/2``.  Returns the time grid,
    the samples (time on axis 0) and the Hermiticity error each step had
    before being re-symmetrized.
    """
    times = time_grid(T, steps)
    dt = T / int(steps)
    y = hermitize(np.asarray(y0, dtype=complex))
    ys = np.empty((len(times),) + y.shape, dtype=complex)
    drift = np.zeros(len(times))
    ys[0] = y
    for k in range(1, len(times)):
        y = rk4_step(rhs, y, times[k - 1], dt, times[k])
        drift[k] = hermiticity_error(y)
        y = hermitize(y)
        ys[k] = y
    return times, ys, drift


@dataclass(frozen=True)
class StateTrajectory:
    times: np.ndarray
    states: np.ndarray
    trace_deviation: np.ndarray
    hermiticity_deviation: np.ndarray
    min_eigenvalue: np.ndarray

    def purity(self):
        return np.einsum("kij,kji->k", self.states, self.states).real

    def expectation(self, obs):
        return np.einsum("ij,kji->k", np.asarray(obs, dtype=complex), self.states).real


@dataclass(frozen=True)
class InvariantTrajectory:
    """Sampled invariant ``I(t_k)`` with continuity-ordered eigensystems."""

    times: np.ndarray
    invariants: np.ndarray
    hermiticity_deviation: np.ndarray | None = None

    @cached_property
    def eigensystems(self):
        systems = []
        ref = None
        for inv in self.invariants:
            ref = spectral_decompose(inv, reference=ref, hermitian_tol=1e-9)
            systems.append(ref)
        return systems

    @property
    def eigenvalues(self):
        return np.array([e.values for e in self.eigensystems])

    @property
    def dt(self):
        return _uniform_dt(self.times)


def _uniform_dt(times):
    d = np.diff(times)
    if len(d) == 0 or np.max(np.abs(d - d[0])) > 1e-9 * abs(d[0]):
        raise RejectedInputError("trajectory is not sampled on a uniform grid")
    return float(d[0])


def _check_state(rho, dim):
    rho = as_operator(rho, dim, "initial state")
    require_hermitian(rho, HERMITIAN_TOL, "initial state")
    if abs(np.trace(rho) - 1) > 1e-12:
        raise RejectedInputError(f"initial state has trace {np.trace(rho).real:.15g}")
    if np.linalg.eigvalsh(hermitize(rho))[0] < -PSD_TOL:
        raise RejectedInputError("initial state is not positive semidefinite")
    return rho


def propagate_state(model, rho0, T, steps, trace_tol=TRACE_TOL, psd_tol=PSD_TOL):
    """RK4 propagation of a density matrix, with quality diagnostics.

    The trace is never renormalized; drift beyond ``trace_tol`` or an
    eigenvalue below ``-psd_tol`` raises ``IntegrationQualityError``.
    """
    rho0 = _check_state(rho0, model.dim)
    times, states, drift = integrate_hermitian(
        lambda r, t: _lindblad_rhs(model, r, t), rho0, T, steps)
    trace_dev = np.abs(np.trace(states, axis1=1, axis2=2) - 1)
    min_eig = np.linalg.eigvalsh(states)[:, 0]
    bad = np.flatnonzero(trace_dev > trace_tol)
    if bad.size:
        raise IntegrationQualityError(f"trace drifted by {trace_dev[bad[0]]:.3e}", int(bad[0]))
    bad = np.flatnonzero(min_eig < -psd_tol)
    if bad.size:
        raise IntegrationQualityError(
            f"state lost positivity, min eigenvalue {min_eig[bad[0]]:.3e}", int(bad[0]))
    return StateTrajectory(times, states, trace_dev, drift, min_eig)


def propagate_invariant(model, inv0, T, steps, drift_tol=DRIFT_TOL):
    """RK4 propagation of a candidate invariant under the adjoint equation."""
    inv0 = as_operator(inv0, model.dim, "initial invariant")
    require_hermitian(inv0, HERMITIAN_TOL, "initial invariant")
    times, invs, drift = integrate_hermitian(
        lambda i, t: _adjoint_rhs(model, i, t), inv0, T, steps)
    scale = np.maximum(1.0, np.max(np.abs(invs), axis=(1, 2)))
    bad = np.flatnonzero(drift > drift_tol * scale)
    if bad.size:
        raise IntegrationQualityError(
            f"invariant Hermiticity drift {drift[bad[0]]:.3e}", int(bad[0]))
    return InvariantTrajectory(times, invs, drift)


# --- batched propagation -----------------------------------------------------
#
# A stack of B matrices is stored as Y[i, b, j] = y_b[i, j].  In that layout
# M @ y_b for every b is one (n, n) x (n, B n) product and y_b @ M is one
# (B n, n) x (n, n) product, which is much cheaper than numpy's broadcast
# matmul over many tiny matrices.


def _to_layout(stack):
    return np.ascontiguousarray(np.asarray(stack, dtype=complex).transpose(1, 0, 2))


def _layout_rhs(parts):
    """``dY/dt = -i(K Y - Y K^dag) + sum_j L_j Y R_j`` in the stacked layout."""

    def rhs(y, t):
        k, kd, lefts, rights = parts(t)
        n = y.shape[0]
        out = (k @ y.reshape(n, -1)).reshape(y.shape)
        out -= (y.reshape(-1, n) @ kd).reshape(y.shape)
        out *= -1j
        for left, right in zip(lefts, rights):
            out += (left @ (y.reshape(-1, n) @ right).reshape(n, -1)).reshape(y.shape)
        return out

    return rhs


def _integrate_layout(rhs, y0, T, steps):
    times = time_grid(T, steps)
    dt = T / int(steps)
    y = _to_layout(y0)
    y = 0.5 * (y + y.conj().transpose(2, 1, 0))
    ys = np.empty((len(times),) + y.shape, dtype=complex)
    ys[0] = y
    for k in range(1, len(times)):
        y = rk4_step(rhs, y, times[k - 1], dt, times[k])
        y = 0.5 * (y + y.conj().transpose(2, 1, 0))
        ys[k] = y
    return times, ys.transpose(0, 2, 1, 3)


def _sandwich_parts(model, adjoint):
    sign = 1 if adjoint else -1

    def parts(t):
        k, kd, fs, fds = model._parts(t, sign)
        if adjoint:
            return k, kd, [-fd for fd in fds], fs
        return k, kd, fs, fds

    return parts


def propagate_batch(model, initial, T, steps, adjoint=False):
    """Propagate a stack ``(batch, n, n)`` of states (or invariants) at once.

    No validation or diagnostics; returns ``(times, samples)`` with samples
    of shape ``(steps + 1, batch, n, n)``.
    """
    initial = np.asarray(initial, dtype=complex)
    if initial.ndim == 2:
        times, ys = propagate_batch(model, initial[None], T, steps, adjoint)
        return times, ys[:, 0]
    return _integrate_layout(_layout_rhs(_sandwich_parts(model, adjoint)), initial, T, steps)


def _pair_parts(model, t):
    # block-diagonal generators acting on Z = diag(rho, I): the state block
    # sees the master equation, the invariant block the adjoint equation
    key = (t, "pair")
    hit = model._cache.get(key)
    if hit is None:
        ks, _, fs, fds = model._parts(t, -1)
        ka = model._parts(t, +1)[0]
        n = model.dim

        def diag(a, b):
            out = np.zeros((2 * n, 2 * n), dtype=complex)
            out[:n, :n] = a
            out[n:, n:] = b
            return out

        k = diag(ks, ka)
        lefts = [diag(f, -fd) for f, fd in zip(fs, fds)]
        rights = [diag(fd, f) for f, fd in zip(fs, fds)]
        if len(model._cache) > _CACHE_SIZE:
            model._cache.clear()
        hit = model._cache[key] = (k, dagger(k).copy(), lefts, rights)
    return hit


def propagate_pairs(model, states, invariants, T, steps):
    """Propagate matching stacks of states and invariants in one RK4 pass.

    Each pair travels as the block-diagonal matrix ``diag(rho, I)``.  Returns
    ``(times, states, invariants)`` with time on axis 0.  No validation.
    """
    states = np.asarray(states, dtype=complex)
    invariants = np.asarray(invariants, dtype=complex)
    if states.shape != invariants.shape or states.ndim != 3:
        raise RejectedInputError("states and invariants must be matching (batch, n, n) stacks")
    n = model.dim
    z0 = np.zeros((states.shape[0], 2 * n, 2 * n), dtype=complex)
    z0[:, :n, :n] = states
    z0[:, n:, n:] = invariants
    times, zs = _integrate_layout(_layout_rhs(lambda t: _pair_parts(model, t)), z0, T, steps)
    return times, zs[..., :n, :n], zs[..., n:, n:]


# --- verification ----------------------------------------------------------


def invariant_residual(model, traj):
    """Per interior step, ``max|dI/dt_fd + i[H, I] + sum(F^dag I F - {F^dag F, I}/2)|``.

    ``dI/dt_fd`` is the central difference on the trajectory's grid, so a
    faithful trajectory shows a residual that shrinks like ``dt**2``.
    """
    invs = np.asarray(traj.invariants)
    times = np.asarray(traj.times)
    if len(times) < 3:
        raise RejectedInputError("need at least 3 samples for a central difference")
    dt = _uniform_dt(times)
    out = np.empty(len(times) - 2)
    for k in range(1, len(times) - 1):
        fd = (invs[k + 1] - invs[k - 1]) / (2 * dt)
        out[k - 1] = max_abs(fd - _adjoint_rhs(model, invs[k], times[k]))
    return out


def expectation_series(itraj, straj):
    """``Tr(I(t_k) rho(t_k))`` and its constancy defect ``max_k |v_k - v_0|``."""
    if len(itraj.times) != len(straj.times) or not np.allclose(
            itraj.times, straj.times, rtol=0, atol=1e-12):
        raise RejectedInputError("invariant and state trajectories use different grids")
    values = np.einsum("kij,kji->k", itraj.invariants, straj.states).real
    return values, float(np.max(np.abs(values - values[0])))


@dataclass(frozen=True)
class EigenFlowRecord:
    time: float
    index: int
    value: float
    rhs: float
    fd: float
    defect: float
    degenerate: bool


def _min_gaps(values):
    diffs = np.abs(values[:, None] - values[None, :])
    np.fill_diagonal(diffs, np.inf)
    return diffs.min(axis=1)


def eigenflow(model, itraj, degeneracy_tol=DEGENERACY_TOL):
    """Compare the eigenvalue-flow law with finite differences of ``lambda_k(t)``.

    For eigenpair ``(lambda, psi)`` the law reads
    ``dlambda/dt = sum_a <psi|lambda F^dag F - F^dag I F|psi>``.  Records whose
    eigenvalue is within ``degeneracy_tol * max(1, ||I||)`` of another one
    are flagged, since their eigenvectors (and so the prediction) are
    ill-defined.
    """
    times = np.asarray(itraj.times)
    if len(times) < 3:
        raise RejectedInputError("need at least 3 samples for a central difference")
    dt = _uniform_dt(times)
    systems = itraj.eigensystems
    records = []
    for k in range(1, len(times) - 1):
        inv = itraj.invariants[k]
        es = systems[k]
        fs = model.dissipators(times[k])
        gaps = _min_gaps(es.values)
        scale = max(1.0, float(np.max(np.abs(es.values))))
        for j, lam in enumerate(es.values):
            psi = es.vectors[:, j]
            rhs = 0.0
            for f in fs:
                fpsi = f @ psi
                rhs += (lam * np.vdot(fpsi, fpsi) - np.vdot(fpsi, inv @ fpsi)).real
            fd = (systems[k + 1].values[j] - systems[k - 1].values[j]) / (2 * dt)
            degenerate = bool(gaps[j] < degeneracy_tol * scale)
            if degenerate:
                log.warning("degenerate eigenvalue %d at t=%.6g", j, times[k])
            records.append(EigenFlowRecord(float(times[k]), j, float(lam), float(rhs),
                                           float(fd), abs(rhs - fd), degenerate))
    return records
