"""High-fidelity simulation of the reactor and its delay-linearized twin.

`simulate_true` replaces each delay convolution with a K-point kernel
discretization, turning the model into a DDE with input-dependent absolute
lags, and integrates it with fixed-step classical Runge-Kutta using a cubic
Hermite dense history.  `simulate_approx` marches the same implicit-Euler
equality system as the transcription (Newton solve per step), so the
optimizer's trajectory is reproduced exactly when fed its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels, msr
from .msr import MsrParams


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class InputSchedule:
    """Zero-order-hold input signal: u(t) = values[j] on [switch[j], switch[j+1])."""

    switch_times: np.ndarray  # (K,), increasing; first entry is the start time
    values: np.ndarray  # (K, nu)

    def __post_init__(self) -> None:
        t = np.asarray(self.switch_times, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "switch_times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or v.shape[0] != t.size:
            raise ValueError("switch times and values must have matching lengths")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("switch times must be strictly increasing")

    def __call__(self, t: float) -> np.ndarray:
        j = np.searchsorted(self.switch_times, t, side="right") - 1
        return self.values[max(j, 0)]

    def truncated(self, t_end: float) -> "InputSchedule":
        """Schedule with all switches after t_end removed (for causality checks)."""
        keep = self.switch_times <= t_end
        keep[0] = True
        return InputSchedule(self.switch_times[keep], self.values[keep])

    @staticmethod
    def constant(t0: float, u: np.ndarray) -> "InputSchedule":
        return InputSchedule(np.array([t0]), np.asarray(u, dtype=float)[None, :])

    @staticmethod
    def from_intervals(t0: float, dt: float, inputs: np.ndarray) -> "InputSchedule":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        times = t0 + dt * np.arange(inputs.shape[0])
        return InputSchedule(times, inputs)


@dataclass(frozen=True)
class SimConfig:
    """Integrator settings for the high-fidelity run."""

    step: float = 1e-3  # RK4 step, s
    kernel_points: int = 30  # K lags per kernel
    # "current": lags evaluated with u(t); "emission" (experimental): lags
    # solved self-consistently with the input at emission time u(t - tau)
    lag_input_mode: str = "current"

    def __post_init__(self) -> None:
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        if self.kernel_points < 1:
            raise ValueError("need at least one kernel point")
        if self.lag_input_mode not in ("current", "emission"):
            raise ValueError(f"unknown lag input mode {self.lag_input_mode!r}")


class History:
    """Piecewise cubic-Hermite record of the state trajectory.

    Queries before the first breakpoint return the initial value (constant
    pre-history).  Appended breakpoints must advance strictly in time.
    """

    def __init__(self, t0: float, x0: np.ndarray, xdot0: np.ndarray | None = None,
                 capacity: int = 1024):
        x0 = np.asarray(x0, dtype=float)
        self._dim = x0.size
        self._t = np.empty(max(capacity, 16))
        self._x = np.empty((max(capacity, 16), self._dim))
        self._d = np.empty_like(self._x)
        self._n = 1
        self._t[0] = t0
        self._x[0] = x0
        self._d[0] = np.zeros(self._dim) if xdot0 is None else np.asarray(xdot0, dtype=float)

    @property
    def t_start(self) -> float:
        return float(self._t[0])

    @property
    def t_end(self) -> float:
        return float(self._t[self._n - 1])

    def append(self, t: float, x: np.ndarray, xdot: np.ndarray) -> None:
        if t <= self.t_end:
            raise ValueError("breakpoints must be strictly increasing")
        if self._n == self._t.size:
            grow = self._t.size * 2
            self._t = np.resize(self._t, grow)
            for name in ("_x", "_d"):
                arr = getattr(self, name)
                new = np.empty((grow, self._dim))
                new[:self._n] = arr[:self._n]
                setattr(self, name, new)
        self._t[self._n] = t
        self._x[self._n] = x
        self._d[self._n] = xdot
        self._n += 1

    def eval(self, times: np.ndarray) -> np.ndarray:
        """Dense output at the query times, shape (len(times), dim)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        t = self._t[:self._n]
        idx = np.searchsorted(t, times, side="right") - 1
        before = idx < 0
        idx = np.clip(idx, 0, self._n - 2) if self._n > 1 else np.zeros_like(idx)
        out = np.empty((times.size, self._dim))
        if self._n == 1:
            out[:] = self._x[0]
            return out
        t_lo = t[idx]
        h = t[idx + 1] - t_lo
        s = np.clip((times - t_lo) / h, 0.0, 1.0)[:, None]
        x_lo = self._x[idx]
        x_hi = self._x[idx + 1]
        d_lo = self._d[idx] * h[:, None]
        d_hi = self._d[idx + 1] * h[:, None]
        s2 = s * s
        s3 = s2 * s
        out = ((2 * s3 - 3 * s2 + 1) * x_lo + (s3 - 2 * s2 + s) * d_lo
               + (-2 * s3 + 3 * s2) * x_hi + (s3 - s2) * d_hi)
        if np.any(before):
            out[before] = self._x[0]
        return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled simulation result with derived reactor outputs."""

    t: np.ndarray
    states: np.ndarray  # (n, 10)
    inputs: np.ndarray  # (n, 2)
    params: MsrParams

    CSV_COLUMNS = ("t", "C_1", "C_2", "C_3", "C_4", "C_5", "C_6", "C_n",
                   "rho_th", "T_r", "T_hx", "rho_ext_pcm", "dP_Pa", "Q_g_MW",
                   "v_avg_mps")

    def thermal_power(self) -> np.ndarray:
        return self.params.nominal_power * self.states[:, msr.IDX_CN] / self.params.nominal_neutron_conc

    def avg_velocity(self) -> np.ndarray:
        return kernels.avg_velocity_for_pressure_drop(
            self.inputs[:, 1], self.params.viscosity, self.params.geometry)

    def table(self) -> np.ndarray:
        return np.column_stack([
            self.t, self.states, self.inputs,
            self.thermal_power(), self.avg_velocity(),
        ])


def _base_lags(p: MsrParams, n_points: int) -> kernels.DiscretizedKernel:
    # unit-coefficient discretization; lags scale as 1/a at runtime
    return kernels.discretize_hp_unit(p.geometry, n_points)


def _hp_coefficient(dp: float, p: MsrParams) -> float:
    return dp / (4.0 * p.viscosity * p.geometry.length)


def simulate_true(x0, schedule: InputSchedule, duration: float, cfg: SimConfig,
                  p: MsrParams) -> Trajectory:
    """Integrate the discretized-kernel DDE with classical RK4.

    `x0` is either a state vector (constant pre-history) or a `History`.
    The lag sets are the full-loop discretization for the precursor
    variables and the half-loop one (same weights, half the lags) for the
    temperatures; both scale with the instantaneous pressure drop.
    """
    base = _base_lags(p, cfg.kernel_points)
    weights = base.weights
    unit_lags = base.lags  # lags at a = 1

    if isinstance(x0, History):
        hist = x0
        t0 = hist.t_end
        x = hist.eval(np.array([t0]))[0]
    else:
        x = np.asarray(x0, dtype=float).copy()
        t0 = float(schedule.switch_times[0])
        hist = History(t0, x, capacity=int(duration / cfg.step) + 8)

    h = cfg.step
    n_steps = int(round(duration / h))
    if abs(n_steps * h - duration) > 1e-9 * max(duration, 1.0):
        n_steps = int(np.ceil(duration / h))

    # fastest streamline over the whole schedule limits the step size
    a_max = max(_hp_coefficient(float(dp), p) for dp in schedule.values[:, 1])
    min_abs_lag = unit_lags[0] / (2.0 * a_max)
    if h >= min_abs_lag:
        raise SimulationError(
            f"step {h} s does not resolve the smallest lag {min_abs_lag:.4g} s")

    lam = p.decay_rates
    prec_cols = np.arange(6)

    def lag_sets(t: float, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = _hp_coefficient(float(u[1]), p)
        full = unit_lags / a
        if cfg.lag_input_mode == "emission":
            # experimental: tau solves tau = tau_k(u(t - tau))
            for _ in range(8):
                a_em = np.array([_hp_coefficient(float(schedule(t - tk)[1]), p) for tk in full])
                new = unit_lags / a_em
                if np.max(np.abs(new - full)) < 1e-12:
                    full = new
                    break
                full = new
        return full, full / 2.0

    def memory(t: float, u: np.ndarray) -> np.ndarray:
        full, half = lag_sets(t, u)
        z = np.empty(msr.N_DELAYS)
        vals = hist.eval(t - full)
        z[:6] = weights @ vals[:, prec_cols]
        vals_h = hist.eval(t - half)
        z[6] = weights @ vals_h[:, msr.IDX_THX]
        z[7] = weights @ vals_h[:, msr.IDX_TR]
        return z

    def deriv(t: float, x_cur: np.ndarray) -> np.ndarray:
        u = schedule(t)
        return msr.rhs(x_cur, memory(t, u), u, p)

    t = t0
    if not isinstance(x0, History):
        # replace the placeholder zero derivative at the first breakpoint
        hist._d[0] = deriv(t0, x)
    warned = False
    for _ in range(n_steps):
        k1 = deriv(t, x)
        z_mid_u = schedule(t + 0.5 * h)
        z_mid = memory(t + 0.5 * h, z_mid_u)
        k2 = msr.rhs(x + 0.5 * h * k1, z_mid, z_mid_u, p)
        k3 = msr.rhs(x + 0.5 * h * k2, z_mid, z_mid_u, p)
        k4 = deriv(t + h, x + h * k3)
        x_new = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_new = t + h
        hist.append(t_new, x_new, deriv(t_new, x_new))
        if not warned and np.any(x_new[:7] < -1e-9):
            warnings.warn("negative concentration beyond tolerance; step may be too large")
            warned = True
        x, t = x_new, t_new

    times = t0 + h * np.arange(n_steps + 1)
    states = hist.eval(times)
    inputs = np.array([schedule(tt) for tt in times])
    return Trajectory(t=times, states=states, inputs=inputs, params=p)


def simulate_approx(x0: np.ndarray, schedule: InputSchedule, duration: float,
                    step: float, p: MsrParams, newton_tol: float = 1e-10,
                    max_newton: int = 50) -> Trajectory:
    """March the delay-linearized system with implicit Euler.

    Identical equations to the transcription residuals with fixed inputs,
    solved step by step with a Newton iteration on the analytic Jacobian.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    t0 = float(schedule.switch_times[0])
    n_steps = int(round(duration / step))
    x = np.asarray(x0, dtype=float).copy()
    times = t0 + step * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, msr.N_STATES))
    inputs = np.empty((n_steps + 1, msr.N_INPUTS))
    states[0] = x
    inputs[0] = schedule(t0)
    eye = np.eye(msr.N_STATES)
    for i in range(n_steps):
        t_new = times[i + 1]
        u = schedule(times[i])
        gamma, _ = msr.mean_lags(u, p)
        r_old = msr.delayed_outputs(x)
        x_new = x.copy()
        converged = False
        for _ in range(max_newton):
            r_new = msr.delayed_outputs(x_new)
            z = r_new - (r_new - r_old) / step * gamma
            resid = x_new - x - msr.rhs(x_new, z, u, p) * step
            if np.max(np.abs(resid)) < newton_tol:
                converged = True
                break
            dfdx, dfdz, _, dhdx = msr.jacobians(x_new, z, u, p)
            dv_dxnew = (1.0 - gamma / step)[:, None] * dhdx
            jac = eye - (dfdx + dfdz @ dv_dxnew) * step
            x_new = x_new - np.linalg.solve(jac, resid)
        if not converged:
            raise SimulationError(
                f"implicit Euler Newton failed at t = {t_new:.6g} s "
                f"(residual {np.max(np.abs(resid)):.2e})")
        x = x_new
        states[i + 1] = x
        inputs[i + 1] = u
    return Trajectory(t=times, states=states, inputs=inputs, params=p)


@dataclass(frozen=True, eq=False)
class ErrorMetrics:
    """Pointwise and summary error between two power trajectories."""

    t: np.ndarray
    delta_power: np.ndarray  # Q_g,true - Q_g,approx, MW
    max_abs: float
    rms: float
    t_max: float


def error_metrics(true_traj: Trajectory, approx_traj: Trajectory) -> ErrorMetrics:
    """Thermal-power difference on the coarser of the two time grids."""
    lo = max(true_traj.t[0], approx_traj.t[0])
    hi = min(true_traj.t[-1], approx_traj.t[-1])
    if hi <= lo:
        raise ValueError("trajectories do not overlap in time")
    coarse = true_traj if true_traj.t.size <= approx_traj.t.size else approx_traj
    mask = (coarse.t >= lo) & (coarse.t <= hi)
    t = coarse.t[mask]
    q_true = np.interp(t, true_traj.t, true_traj.thermal_power())
    q_approx = np.interp(t, approx_traj.t, approx_traj.thermal_power())
    delta = q_true - q_approx
    abs_delta = np.abs(delta)
    i_max = int(np.argmax(abs_delta))
    return ErrorMetrics(
        t=t,
        delta_power=delta,
        max_abs=float(abs_delta[i_max]),
        rms=float(np.sqrt(np.mean(delta**2))),
        t_max=float(t[i_max]),
    )
