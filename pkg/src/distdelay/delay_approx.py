"""Delay linearization and characteristic-function analysis.

Expanding each delayed variable to first order around the current time
replaces the convolution with r(t) - rdot(t) * gamma, where gamma is the
kernel's mean lag.  This module builds those memory states and evaluates the
characteristic functions of both the original distributed-delay system and
the linearized one at a steady state, with a heuristic grid-plus-Newton root
scan.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels, msr


def memory_state(r: np.ndarray, r_dot: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """First-order memory state z_i = r_i - rdot_i * gamma_i."""
    r = np.asarray(r, dtype=float)
    r_dot = np.asarray(r_dot, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if not (r.shape == r_dot.shape == gamma.shape):
        raise ValueError("r, r_dot, and gamma must have matching shapes")
    return r - r_dot * gamma


@dataclass(frozen=True, eq=False)
class SteadyPointData:
    """Steady-state Jacobian data needed by the characteristic functions.

    `a_matrix` is df/dx, `delay_input` df/dz (n x m), `delay_output` dh/dx
    (m x n), and `laplace[i]` evaluates the Laplace transform of kernel i.
    """

    a_matrix: np.ndarray
    delay_input: np.ndarray
    delay_output: np.ndarray
    mean_lags: np.ndarray
    laplace: Sequence[Callable[[complex], complex]]

    @property
    def n_states(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_delays(self) -> int:
        return self.delay_input.shape[1]


@dataclass(frozen=True)
class CharacteristicSample:
    lam: complex
    det_value: complex


def msr_steady_data(x_s: np.ndarray, u_s: np.ndarray, p: msr.MsrParams) -> SteadyPointData:
    """Characteristic-function data for the reactor at a steady point."""
    z_s = msr.delayed_outputs(x_s)
    dfdx, dfdz, _, dhdx = msr.jacobians(x_s, z_s, u_s, p)
    gamma, _ = msr.mean_lags(u_s, p)
    tau0 = msr.min_lag(float(u_s[1]), p)
    full = kernels.hp_kernel(float(u_s[1]), p.viscosity, p.geometry)
    half_geom = kernels.PipeGeometry(p.geometry.length / 2.0, p.geometry.radius)
    half = kernels.hp_kernel(float(u_s[1]) / 2.0, p.viscosity, half_geom)
    assert abs(full.min_lag - tau0) < 1e-12 * tau0
    transforms = [full.laplace] * 6 + [half.laplace] * 2
    return SteadyPointData(a_matrix=dfdx, delay_input=dfdz, delay_output=dhdx,
                           mean_lags=gamma, laplace=transforms)


def _char_matrix(lam: complex, data: SteadyPointData, factors: np.ndarray) -> np.ndarray:
    n = data.n_states
    mat = lam * np.eye(n, dtype=complex) - data.a_matrix.astype(complex)
    for i in range(data.n_delays):
        mat -= factors[i] * np.outer(data.delay_input[:, i], data.delay_output[i, :])
    return mat


def characteristic_dde(lam: complex, data: SteadyPointData) -> complex:
    """det(lam I - df/dx - sum_i df/dz_i dh_i/dx * L[alpha_i](lam))."""
    factors = np.array([transform(lam) for transform in data.laplace], dtype=complex)
    return complex(np.linalg.det(_char_matrix(complex(lam), data, factors)))


def characteristic_approx(lam: complex, data: SteadyPointData) -> complex:
    """Characteristic determinant of the linearized system, factor 1 - lam gamma_i."""
    lam = complex(lam)
    factors = 1.0 - lam * data.mean_lags.astype(complex)
    return complex(np.linalg.det(_char_matrix(lam, data, factors)))


def normalized_characteristic(lam: complex, data: SteadyPointData, which: str) -> complex:
    """Characteristic determinant divided by the Hadamard row-norm bound.

    The raw determinant of a physically scaled system spans tens of orders
    of magnitude; the normalized value is O(1) away from roots and zero at
    them, which gives a scale-free residual for root refinement.
    """
    lam = complex(lam)
    if which == "dde":
        factors = np.array([t(lam) for t in data.laplace], dtype=complex)
    elif which == "approx":
        factors = 1.0 - lam * data.mean_lags.astype(complex)
    else:
        raise ValueError(f"unknown characteristic function {which!r}")
    mat = _char_matrix(lam, data, factors)
    scale = np.prod(np.maximum(np.linalg.norm(mat, axis=1), 1e-300))
    return complex(np.linalg.det(mat) / scale)


@dataclass(frozen=True)
class RootScanResult:
    roots: np.ndarray  # refined roots with residual below tolerance
    dropped: np.ndarray  # Newton candidates that failed to converge
    samples: list  # CharacteristicSample grid values


def _factors(lam: complex, data: SteadyPointData, which: str) -> np.ndarray:
    if which == "dde":
        return np.array([t(lam) for t in data.laplace], dtype=complex)
    if which == "approx":
        return 1.0 - lam * data.mean_lags.astype(complex)
    raise ValueError(f"unknown characteristic function {which!r}")


def _factor_derivs(lam: complex, data: SteadyPointData, which: str) -> np.ndarray:
    if which == "approx":
        return -data.mean_lags.astype(complex)
    h = 1e-7 * max(abs(lam), 1.0)
    return np.array([(t(lam + h) - t(lam - h)) / (2.0 * h) for t in data.laplace],
                    dtype=complex)


def _log_abs_det(lam: complex, data: SteadyPointData, which: str) -> float:
    """log |det| of the characteristic matrix, -inf at an exact zero."""
    mat = _char_matrix(lam, data, _factors(lam, data, which))
    if not np.all(np.isfinite(mat)):
        return np.inf
    sign, logdet = np.linalg.slogdet(mat)
    return float(logdet) if sign != 0.0 else -np.inf


def _is_root(lam: complex, data: SteadyPointData, which: str, tol: float) -> bool:
    """Accept lam when |det(lam)| < tol * |det| at nearby probe points.

    The comparison is carried out in log space, which keeps it meaningful
    even where the analytically continued Laplace factors make the raw
    determinant astronomically large or small.
    """
    d0 = _log_abs_det(lam, data, which)
    if d0 == np.inf:
        return False
    if d0 == -np.inf:
        return True
    delta = 1e-3 * max(abs(lam), 1.0)
    probes = [_log_abs_det(lam + d, data, which)
              for d in (delta, -delta, 1j * delta, -1j * delta)]
    return d0 - float(np.median(probes)) < np.log(tol)


def root_scan(
    data: SteadyPointData,
    re_range: tuple[float, float],
    im_range: tuple[float, float],
    n_re: int = 40,
    n_im: int = 40,
    which: str = "approx",
    residual_tol: float = 1e-8,
    max_newton: int = 60,
) -> RootScanResult:
    """Best-effort root search: sample on a grid, Newton-refine local minima.

    Newton runs on the log-determinant (step 1 / tr(M^-1 M')), which is
    holomorphic and insensitive to the determinant's overall scale.  A
    candidate counts as a root when |det| there is below residual_tol times
    the determinant at nearby probe points.  Grid nodes where the
    characteristic function overflows are skipped.  No completeness
    guarantee; roots outside the rectangle or between nodes may be missed.
    """
    res = np.linspace(re_range[0], re_range[1], n_re)
    ims = np.linspace(im_range[0], im_range[1], n_im)
    vals = np.empty((n_re, n_im), dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for i, a in enumerate(res):
            for j, b in enumerate(ims):
                vals[i, j] = normalized_characteristic(complex(a, b), data, which)
    mag = np.abs(vals)
    mag[~np.isfinite(mag)] = np.inf
    samples = [CharacteristicSample(complex(res[i], ims[j]), vals[i, j])
               for i in range(n_re) for j in range(n_im)
               if np.isfinite(vals[i, j])]

    scale = max(abs(re_range[1] - re_range[0]), abs(im_range[1] - im_range[0]), 1.0)
    finite = mag[np.isfinite(mag)]
    # seed Newton from every local minimum plus the lowest-magnitude decile,
    # which catches roots whose basins are narrower than the grid spacing
    low = float(np.quantile(finite, 0.1)) if finite.size else np.inf
    candidates = []
    for i in range(n_re):
        for j in range(n_im):
            if not np.isfinite(mag[i, j]):
                continue
            lo_i, hi_i = max(i - 1, 0), min(i + 1, n_re - 1)
            lo_j, hi_j = max(j - 1, 0), min(j + 1, n_im - 1)
            if (mag[i, j] <= mag[lo_i:hi_i + 1, lo_j:hi_j + 1].min()
                    or mag[i, j] <= low):
                candidates.append(complex(res[i], ims[j]))

    eye = np.eye(data.n_states, dtype=complex)
    roots: list[complex] = []
    dropped: list[complex] = []
    for lam0 in candidates:
        lam = lam0
        ok = True
        for _ in range(max_newton):
            factors = _factors(lam, data, which)
            dfactors = _factor_derivs(lam, data, which)
            mat = _char_matrix(lam, data, factors)
            dmat = eye.copy()
            for i in range(data.n_delays):
                dmat -= dfactors[i] * np.outer(data.delay_input[:, i].astype(complex),
                                               data.delay_output[i, :].astype(complex))
            try:
                trace = np.trace(np.linalg.solve(mat, dmat))
            except np.linalg.LinAlgError:
                break  # exactly singular: lam is a root as it stands
            if trace == 0.0 or not np.isfinite(trace):
                ok = False
                break
            step = 1.0 / trace
            if not np.isfinite(step) or abs(step) > scale:
                ok = False
                break
            lam = lam - step
            if abs(step) <= 1e-13 * max(abs(lam), 1.0):
                break
        if ok and _is_root(lam, data, which, residual_tol):
            if not any(abs(lam - r) < 1e-6 * scale for r in roots):
                roots.append(lam)
        else:
            dropped.append(lam0)
    return RootScanResult(roots=np.array(sorted(roots, key=lambda r: (r.real, r.imag)),
                                         dtype=complex),
                          dropped=np.array(dropped, dtype=complex),
                          samples=samples)
