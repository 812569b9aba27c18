"""Shared fixtures and numerical helpers for the test suite."""

import numpy as np
import pytest

from distdelay import kernels, msr


@pytest.fixture(scope="session")
def params():
    return msr.table1()


@pytest.fixture(scope="session")
def geometry(params):
    return params.geometry


@pytest.fixture(scope="session")
def dp_ref(params):
    """Pressure drop giving an average pipe velocity of 4 m/s."""
    return kernels.pressure_drop_for_velocity(4.0, params.viscosity, params.geometry)


@pytest.fixture(scope="session")
def u_ref(dp_ref):
    """Reference input: 50 pcm external reactivity, 4 m/s average velocity."""
    return np.array([50.0, dp_ref])


@pytest.fixture(scope="session")
def steady_1mw(params, u_ref):
    x_s, u_s = msr.steady_state(1.0, u_ref[1], u_ref[0], params)
    return x_s, u_s


def fd_jacobian(fun, x, eps=1e-6):
    """Central-difference Jacobian of a vector function, scaled steps."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(fun(x))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = eps * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.atleast_1d(fun(xp)) - np.atleast_1d(fun(xm))) / (2.0 * h)
    return jac


def rel_err(approx, exact):
    """Inf-norm relative error with an absolute floor."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    scale = max(np.max(np.abs(exact)), 1.0)
    return np.max(np.abs(approx - exact)) / scale
