"""Collective dephasing of two qubits: model, closed forms, and cross-checks.

The model is ``H0 = g12(t) Ox + Bz(t) Oz`` with ``Ox = (sx sx + sy sy)/2``,
``Oz = (sz1 + sz2)/2`` and one Lindblad operator ``F = sz1 + sz2`` at rate
``gamma``.  ``{|01>, |10>}`` is decoherence free (``F`` annihilates it) and
``{|00>, |11>}`` is its complement.

Block coefficient convention
----------------------------
The closed forms below are written for 2x2 blocks expanded as
``x sx + y sy + z sz`` over the *block* Pauli set

    sx = [[0, 1], [1, 0]],  sy = [[0, i], [-i, 0]],  sz = [[1, 0], [0, -1]],

which is left-handed (``[sx, sy] = -2i sz``).  It is the only set for which
the rotation senses of the ``I^D`` and ``I^C`` equations, the eigenvector
formula and the ``z = 0`` eigenvectors all hold as written.  Relative to the
package-wide Pauli matrices of :mod:`qinv.operators` it is
``(SIGMA_X, SIGMA_Y, -SIGMA_Z)``: block coefficients ``(x, y, z)`` equal
package coefficients ``(x, y, -z)``.  See :func:`to_package_convention`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockModel, propagate_IC, propagate_ID
from .dfs import block_decompose, make_decomposition
from .errors import RejectedInputError, SingularScheduleError
from .lindblad import LindbladModel, rk4_step, time_grid
from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z, embed, ket
from .schedules import Schedule, as_schedule

BLOCK_SX = np.array([[0, 1], [1, 0]], dtype=complex)
BLOCK_SY = np.array([[0, 1j], [-1j, 0]], dtype=complex)
BLOCK_SZ = np.array([[1, 0], [0, -1]], dtype=complex)

G_MIN = 1e-8


@dataclass(frozen=True)
class BlochCoefficients:
    """Traceless 2x2 Hermitian operator ``x sx + y sy + z sz`` (block convention)."""

    x: float
    y: float
    z: float

    def as_array(self):
        return np.array([self.x, self.y, self.z])

    def to_matrix(self):
        return self.x * BLOCK_SX + self.y * BLOCK_SY + self.z * BLOCK_SZ

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m)
        return cls(float(np.trace(BLOCK_SX @ m).real / 2),
                   float(np.trace(BLOCK_SY @ m).real / 2),
                   float(np.trace(BLOCK_SZ @ m).real / 2))

    @classmethod
    def of(cls, value):
        if isinstance(value, BlochCoefficients):
            return value
        x, y, z = value
        return cls(float(x), float(y), float(z))


def to_package_convention(c):
    """Block coefficients -> coefficients over ``SIGMA_X, SIGMA_Y, SIGMA_Z``."""
    return BlochCoefficients(c.x, c.y, -c.z)


def from_package_convention(c):
    return BlochCoefficients(c.x, c.y, -c.z)


@dataclass(frozen=True)
class DephasingScenario:
    """Parameters of one run; defaults are demo values, not physical ones."""

    g12: Schedule = field(default_factory=lambda: Schedule.constant(1.0))
    Bz: Schedule = field(default_factory=lambda: Schedule.constant(1.0))
    gamma: float = 0.05
    ID0: BlochCoefficients = BlochCoefficients(0.0, 0.0, 1.0)
    IC0: BlochCoefficients = BlochCoefficients(1.0, 0.0, 0.0)
    T: float = 2.0
    steps: int = 8000

    def __post_init__(self):
        if self.gamma < 0:
            raise RejectedInputError("gamma must be nonnegative")
        object.__setattr__(self, "g12", as_schedule(self.g12))
        object.__setattr__(self, "Bz", as_schedule(self.Bz))
        object.__setattr__(self, "ID0", BlochCoefficients.of(self.ID0))
        object.__setattr__(self, "IC0", BlochCoefficients.of(self.IC0))

    @classmethod
    def from_dict(cls, d):
        kwargs = {}
        for key in ("g12", "Bz"):
            if key in d:
                kwargs[key] = as_schedule(d[key])
        for key in ("ID0", "IC0"):
            if key in d:
                kwargs[key] = BlochCoefficients.of(d[key])
        for key, conv in (("gamma", float), ("T", float), ("steps", int)):
            if key in d:
                kwargs[key] = conv(d[key])
        return cls(**kwargs)

    def to_dict(self):
        return {"g12": self.g12.to_dict(), "Bz": self.Bz.to_dict(), "gamma": self.gamma,
                "ID0": self.ID0.as_array().tolist(), "IC0": self.IC0.as_array().tolist(),
                "T": self.T, "steps": self.steps}


# --- model ------------------------------------------------------------------


def xy_coupling(i, j, n):
    return 0.5 * (embed(SIGMA_X, i, n) @ embed(SIGMA_X, j, n)
                  + embed(SIGMA_Y, i, n) @ embed(SIGMA_Y, j, n))


def total_z(n):
    return sum(embed(SIGMA_Z, i, n) for i in range(n))


def collective_dephasing_model(n, couplings, field_schedule, gamma):
    """``n``-qubit model: ``sum_{i<j} g_ij Ox_ij + Bz Oz`` with ``F = sum sz_i``.

    ``couplings`` maps ``(i, j)`` pairs to schedules (or numbers).
    """
    terms = [(xy_coupling(i, j, n), g) for (i, j), g in sorted(couplings.items())]
    terms.append((0.5 * total_z(n), field_schedule))
    return LindbladModel(2 ** n, tuple(terms), ((total_z(n), as_schedule(gamma)),))


DFS_KETS = ("01", "10")
COMP_KETS = ("00", "11")


def build_two_qubit_model(s):
    """The two-qubit model and its block decomposition at ``t = 0``."""
    model = collective_dephasing_model(2, {(0, 1): s.g12}, s.Bz, s.gamma)
    d = make_decomposition(np.array([ket(b) for b in DFS_KETS]).T,
                           np.array([ket(b) for b in COMP_KETS]).T)
    d = block_decompose(model, d, np.zeros((4, 4), dtype=complex), 0.0)
    return model, d


# --- closed forms ---------------------------------------------------------------


def analytic_ID(s, t):
    two_l = 2 * s.g12.integral(t)
    c0 = s.ID0
    return BlochCoefficients(c0.x,
                             c0.y * np.cos(two_l) + c0.z * np.sin(two_l),
                             c0.z * np.cos(two_l) - c0.y * np.sin(two_l))


def analytic_IC(s, t):
    two_th = 2 * s.Bz.integral(t)
    growth = np.exp(8 * s.gamma * t)
    c0 = s.IC0
    return BlochCoefficients((c0.x * np.cos(two_th) - c0.y * np.sin(two_th)) * growth,
                             (c0.y * np.cos(two_th) + c0.x * np.sin(two_th)) * growth,
                             c0.z)


def analytic_IC_eigenvalues(s, t):
    """``lambda_+-^C(t) = +-sqrt((x0^2 + y0^2) exp(16 gamma t) + z0^2)``."""
    c0 = s.IC0
    lam = np.sqrt((c0.x ** 2 + c0.y ** 2) * np.exp(16 * s.gamma * t) + c0.z ** 2)
    return lam, -lam


@dataclass(frozen=True)
class BlochEigs:
    plus: float
    minus: float
    psi_plus: np.ndarray
    psi_minus: np.ndarray


def _eigvec(lam, c):
    # two algebraically equal forms; keep the one with the larger normalizer
    first = np.array([lam + c.z, c.x - 1j * c.y])
    second = np.array([c.x + 1j * c.y, lam - c.z])
    v = first if 2 * lam * (lam + c.z) >= 2 * lam * (lam - c.z) else second
    return v / np.linalg.norm(v)


def analytic_eigs(c):
    """Eigenpairs of ``x sx + y sy + z sz``.

    ``psi = ((lambda + z), (x - i y)) / sqrt(2 lambda (lambda + z))``, switching
    to the equivalent ``((x + i y), (lambda - z))`` form near ``z = -lambda``.
    """
    c = BlochCoefficients.of(c)
    r = float(np.sqrt(c.x ** 2 + c.y ** 2 + c.z ** 2))
    if r == 0:
        raise RejectedInputError("zero operator: eigenvectors are arbitrary")
    return BlochEigs(r, -r, _eigvec(r, c), _eigvec(-r, c))


# --- second-order ODE via the Riccati substitution ---------------------------------


def riccati_solve_second_order(g, z0, zdot0, times):
    """Solve ``z'' - (g'/g) z' + 4 g^2 z = 0`` on ``times``.

    With ``u = -z'/(g z)`` the equation becomes ``u' = g (u^2 + 4)``, so
    ``u = 2 tan(2 Lambda + A)`` and ``z = z0 cos(2 Lambda + A) / cos A`` where
    ``Lambda = int_0^t g``.  Expanding the cosine gives the form used here,
    ``z = z0 cos(2 Lambda) - y0 sin(2 Lambda)`` with ``y0 = -z'(0) / (2 g(0))``,
    which stays finite when ``z0 = 0``.
    """
    g = as_schedule(g)
    times = np.asarray(times, dtype=float)
    gv = np.atleast_1d(g.eval(times))
    if np.any(np.abs(gv) < G_MIN):
        k = int(np.flatnonzero(np.abs(gv) < G_MIN)[0])
        raise SingularScheduleError(f"|g| < {G_MIN} at t = {np.atleast_1d(times)[k]}")
    if z0 == 0 and zdot0 == 0:
        return np.zeros_like(times)
    y0 = -zdot0 / (2 * g.eval(0.0))
    two_l = 2 * g.integral(times)
    return z0 * np.cos(two_l) - y0 * np.sin(two_l)


def riccati_u(g, z0, zdot0, times):
    """The Riccati variable ``u(t) = 2 tan(2 Lambda(t) + A)``, ``A = atan(-z'(0)/(2 g(0) z0))``."""
    g = as_schedule(g)
    if z0 == 0:
        raise SingularScheduleError("u is undefined for z(0) = 0")
    a = np.arctan(-zdot0 / (2 * g.eval(0.0) * z0))
    return 2 * np.tan(2 * g.integral(np.asarray(times, dtype=float)) + a)


def rk4_first_order(g, y0, z0, T, steps):
    """RK4 of ``y' = 2 g z, z' = -2 g y`` (the block rotation, block convention)."""
    g = as_schedule(g)
    times = time_grid(T, steps)
    dt = T / steps
    out = np.empty((len(times), 2))
    v = np.array([y0, z0], dtype=float)
    out[0] = v

    def rhs(v, t):
        gt = g.eval(t)
        return np.array([2 * gt * v[1], -2 * gt * v[0]])

    for k in range(1, len(times)):
        v = rk4_step(rhs, v, times[k - 1], dt, times[k])
        out[k] = v
    return times, out


# --- analytic vs numeric ---------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    times: np.ndarray
    analytic_ID: np.ndarray
    numeric_ID: np.ndarray
    analytic_IC: np.ndarray
    numeric_IC: np.ndarray
    numeric_ID_eigs: np.ndarray
    numeric_IC_eigs: np.ndarray
    id_deviation: np.ndarray
    ic_deviation: np.ndarray
    ic_relative_deviation: float
    id_eig_drift: float
    ic_eig_relative_deviation: float
    z_c_drift: float
    growth_rate: float
    growth_rate_error: float

    def checks(self, id_tol=1e-5, ic_tol=1e-5, eig_tol=1e-8, growth_tol=0.01):
        """``{name: (value, tolerance, passed)}`` for the headline comparisons."""
        out = {
            "ID componentwise max deviation": (float(self.id_deviation.max()), id_tol),
            "IC componentwise max relative deviation": (self.ic_relative_deviation, ic_tol),
            "ID eigenvalue drift": (self.id_eig_drift, eig_tol),
            "IC eigenvalues vs closed form (relative)": (self.ic_eig_relative_deviation,
                                                         ic_tol),
            "z^C drift": (self.z_c_drift, 1e-9),
        }
        if np.isfinite(self.growth_rate_error):
            out["growth rate relative error vs 8 gamma"] = (self.growth_rate_error, growth_tol)
        return {k: (v, tol, bool(v <= tol)) for k, (v, tol) in out.items()}


def _stack_series(c):
    # constant components come back as scalars; broadcast them over the grid
    return np.stack(np.broadcast_arrays(c.x, c.y, c.z), axis=1)


def bloch_series(mats):
    """``(K, 3)`` block-convention coefficients of a stack of 2x2 matrices."""
    paulis = np.array([BLOCK_SX, BLOCK_SY, BLOCK_SZ])
    return np.einsum("pij,kji->kp", paulis, np.asarray(mats)).real / 2


def fit_growth_rate(times, values):
    """Least-squares slope of ``log(values)`` against ``times``."""
    slope, _ = np.polyfit(times, np.log(values), 1)
    return float(slope)


def compare_analytic_numeric(s, steps=None, T=None):
    """Propagate both blocks numerically and line them up with the closed forms."""
    T = s.T if T is None else T
    steps = s.steps if steps is None else steps
    model, d = build_two_qubit_model(s)
    bm = BlockModel(model, d)
    id_traj = propagate_ID(bm, s.ID0.to_matrix(), T, steps)
    ic_traj = propagate_IC(bm, id_traj, s.IC0.to_matrix())
    times = id_traj.times

    num_id = bloch_series(id_traj.invariants)
    num_ic = bloch_series(ic_traj.invariants)
    # the closed forms broadcast over an array of times
    ana_id = _stack_series(analytic_ID(s, times))
    ana_ic = _stack_series(analytic_IC(s, times))

    id_dev = np.max(np.abs(num_id - ana_id), axis=1)
    ic_scale = np.maximum(np.max(np.abs(ana_ic), axis=1), 1e-300)
    ic_dev = np.max(np.abs(num_ic - ana_ic), axis=1)

    id_eigs = np.linalg.eigvalsh(id_traj.invariants)
    ic_eigs = np.linalg.eigvalsh(ic_traj.invariants)
    lam_plus, lam_minus = analytic_IC_eigenvalues(s, times)
    closed = np.stack([lam_minus, lam_plus], axis=1)
    ic_eig_rel = float(np.max(np.abs(ic_eigs - closed) / np.maximum(np.abs(closed), 1e-300)))

    r_c = np.hypot(num_ic[:, 0], num_ic[:, 1])
    if s.gamma > 0 and np.all(r_c > 0):
        rate = fit_growth_rate(times, r_c)
        rate_err = abs(rate - 8 * s.gamma) / (8 * s.gamma)
    else:
        rate, rate_err = float("nan"), float("nan")

    return ComparisonReport(
        times=times, analytic_ID=ana_id, numeric_ID=num_id, analytic_IC=ana_ic,
        numeric_IC=num_ic, numeric_ID_eigs=id_eigs, numeric_IC_eigs=ic_eigs,
        id_deviation=id_dev, ic_deviation=ic_dev,
        ic_relative_deviation=float(np.max(ic_dev / ic_scale)),
        id_eig_drift=float(np.max(np.abs(id_eigs - id_eigs[0]))),
        ic_eig_relative_deviation=ic_eig_rel,
        z_c_drift=float(np.max(np.abs(num_ic[:, 2] - num_ic[0, 2]))),
        growth_rate=rate, growth_rate_error=rate_err,
    )


def block_models(s):
    """``(model, decomposition, BlockModel)`` for a scenario."""
    model, d = build_two_qubit_model(s)
    return model, d, BlockModel(model, d)

