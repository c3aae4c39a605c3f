"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest
import scipy.linalg

from qinv.dephasing import (DephasingScenario, build_two_qubit_model,
                            riccati_solve_second_order)

ACCEPTANCE_LINES = []


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_state(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def liouvillian_superop(model, t, adjoint=False):
    """Column-stacking superoperator of the (adjoint) generator at ``t``.

    Built from scratch with Kronecker products, independently of the
    package's matrix-form right-hand sides: ``vec(A X B) = (B^T kron A) vec(X)``.
    """
    n = model.dim
    eye = np.eye(n)
    h = model.hamiltonian(t)
    if not adjoint:
        sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
        for f in model.dissipators(t):
            fdf = f.conj().T @ f
            sup += np.kron(f.conj(), f) - 0.5 * np.kron(eye, fdf) - 0.5 * np.kron(fdf.T, eye)
        return sup
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for f in model.dissipators(t):
        fd = f.conj().T
        fdf = fd @ f
        sup -= np.kron(f.T, fd) - 0.5 * np.kron(eye, fdf) - 0.5 * np.kron(fdf.T, eye)
    return sup


def vec(m):
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, n):
    return np.asarray(v).reshape(n, n, order="F")


def exact_evolution(model, m0, t, adjoint=False):
    """``exp(L t) m0`` for a time-independent model (test oracle only)."""
    sup = liouvillian_superop(model, 0.0, adjoint)
    return unvec(scipy.linalg.expm(sup * t) @ vec(m0), model.dim)


def second_derivative_5pt(f, t, h):
    return (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (12 * h * h)


def first_derivative_5pt(f, t, h):
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


def riccati_residual(g, z0, zdot0, ts, h=1e-3):
    """``max |z'' - (g'/g) z' + 4 g^2 z|`` by fourth-order finite differences."""
    def z(t):
        return riccati_solve_second_order(g, z0, zdot0, np.atleast_1d(t))

    zd = first_derivative_5pt(z, ts, h)
    zdd = second_derivative_5pt(z, ts, h)
    gv, gd = g(ts), g.derivative(ts)
    return np.max(np.abs(zdd - (gd / gv) * zd + 4 * gv**2 * z(ts)))


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


@pytest.fixture(scope="session")
def demo():
    s = DephasingScenario()
    model, d = build_two_qubit_model(s)
    return s, model, d


def record_acceptance(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {title} ({detail})"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
