"""Molten salt reactor with delayed recirculation through an external loop.

Point-kinetics neutronics (six precursor groups), thermal-reactivity
feedback, and two lumped energy balances.  The salt leaving the core flows
through a pipe to a heat exchanger halfway around the loop and back, so the
precursor concentrations re-enter with the full-loop delay kernel and the
two temperatures exchange with the half-loop kernel.

State vector (length 10):
    x = [C_1 .. C_6, C_n, rho_th, T_r, T_hx]
Delayed-variable vector (length 8):
    r = [C_1 .. C_6, T_hx, T_r]
Input vector (length 2):
    u = [rho_ext (pcm), dP (Pa)]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .kernels import PipeGeometry

N_STATES = 10
N_INPUTS = 2
N_DELAYS = 8

PCM = 1.0e-5  # reactivity per pcm

STATE_NAMES = ("C_1", "C_2", "C_3", "C_4", "C_5", "C_6",
               "C_n", "rho_th", "T_r", "T_hx")
IDX_CN = 6
IDX_RHO_TH = 7
IDX_TR = 8
IDX_THX = 9

# r = H x: six precursor groups, then T_hx (feeds the reactor inlet) and
# T_r (feeds the heat-exchanger inlet)
_H = np.zeros((N_DELAYS, N_STATES))
for _i in range(6):
    _H[_i, _i] = 1.0
_H[6, IDX_THX] = 1.0
_H[7, IDX_TR] = 1.0
_H.setflags(write=False)

# delays 0..5 use the full-loop kernel, 6..7 the half-loop kernel
FULL_LOOP = slice(0, 6)
HALF_LOOP = slice(6, 8)


@dataclass(frozen=True, eq=False)
class MsrParams:
    """Physical parameters; `table1()` gives the reference set."""

    decay_rates: np.ndarray  # lambda_i, 1/s
    delayed_fractions: np.ndarray  # beta_i
    generation_time: float  # Lambda, s
    heat_capacity: float  # c_P, MJ/(kg K)
    conductance: float  # k_hx, MW/K
    feedback: float  # kappa, 1/K
    salt_density: float  # rho_s, kg/m^3
    core_mass: float  # m_r, kg
    hx_mass: float  # m_hx, kg
    core_volume: float  # V, m^3
    geometry: PipeGeometry
    coolant_temp: float  # T_c, K
    nominal_power: float  # Q_g0, MW
    nominal_neutron_conc: float  # C_n0, kmol/m^3
    viscosity: float = 0.01  # mu, Pa s

    def __post_init__(self) -> None:
        object.__setattr__(self, "decay_rates", np.asarray(self.decay_rates, dtype=float))
        object.__setattr__(self, "delayed_fractions", np.asarray(self.delayed_fractions, dtype=float))
        if self.decay_rates.shape != (6,) or self.delayed_fractions.shape != (6,):
            raise ValueError("expected six precursor groups")
        for name in ("generation_time", "heat_capacity", "conductance",
                     "salt_density", "core_mass", "hx_mass", "core_volume",
                     "coolant_temp", "nominal_power", "nominal_neutron_conc", "viscosity"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.feedback < 0.0:
            raise ValueError("feedback must be nonnegative")

    @property
    def beta(self) -> float:
        """Total delayed fraction, the sum of the group fractions."""
        return float(self.delayed_fractions.sum())


def table1() -> MsrParams:
    """Reference parameter set ("msr-table1" preset)."""
    return MsrParams(
        decay_rates=np.array([0.0124, 0.0305, 0.1110, 0.3010, 1.1300, 3.0000]),
        delayed_fractions=np.array([0.00021, 0.00141, 0.00127, 0.00255, 0.00074, 0.00027]),
        generation_time=5.0e-5,
        heat_capacity=2.0e-3,
        conductance=0.5,
        feedback=5.0e-5,
        salt_density=2000.0,
        core_mass=10000.0,
        hx_mass=2500.0,
        core_volume=0.5,
        geometry=PipeGeometry(length=30.0, radius=0.3),
        coolant_temp=723.15,
        nominal_power=1.0,
        nominal_neutron_conc=1.0,
    )


def flow_rate(pressure_drop: float, p: MsrParams) -> float:
    """Volumetric flow rate through the loop at the given pressure drop."""
    if pressure_drop <= 0.0:
        raise ValueError(f"pressure drop must be positive, got {pressure_drop}")
    a = pressure_drop / (4.0 * p.viscosity * p.geometry.length)
    return 0.5 * math.pi * a * p.geometry.radius**4


def min_lag(pressure_drop: float, p: MsrParams) -> float:
    """Full-loop minimum lag tau0 = L / (a R^2)."""
    if pressure_drop <= 0.0:
        raise ValueError(f"pressure drop must be positive, got {pressure_drop}")
    a = pressure_drop / (4.0 * p.viscosity * p.geometry.length)
    return p.geometry.length / (a * p.geometry.radius**2)


def mean_lags(u: np.ndarray, p: MsrParams) -> tuple[np.ndarray, np.ndarray]:
    """Mean lag of each delayed variable and its input Jacobian.

    The six precursor delays use the full loop (gamma = 2 tau0); the two
    temperature delays use half the loop length at half the pressure drop,
    which gives gamma_h = gamma_f / 2.  Returns (gamma (8,), dgamma/du (8, 2)).
    """
    dp = float(u[1])
    tau0 = min_lag(dp, p)
    gamma = np.empty(N_DELAYS)
    gamma[FULL_LOOP] = 2.0 * tau0
    gamma[HALF_LOOP] = tau0
    dgamma = np.zeros((N_DELAYS, N_INPUTS))
    dgamma[:, 1] = -gamma / dp  # gamma is proportional to 1/dP
    return gamma, dgamma


def delayed_outputs(x: np.ndarray) -> np.ndarray:
    """r = h(x): precursor concentrations, T_hx, T_r."""
    return _H @ np.asarray(x, dtype=float)


def output_matrix() -> np.ndarray:
    """Constant selector dh/dx (8 x 10)."""
    return _H


def thermal_power(x: np.ndarray, p: MsrParams) -> float:
    """Generated thermal power Q_g = Q_g0 C_n / C_n0, MW."""
    return p.nominal_power * float(x[IDX_CN]) / p.nominal_neutron_conc


def rhs(x: np.ndarray, z: np.ndarray, u: np.ndarray, p: MsrParams) -> np.ndarray:
    """Time derivative f(x, z, u) of the reactor state.

    z holds the convolved (or otherwise approximated) delayed variables in
    the same order as `delayed_outputs`.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    rho_ext_pcm, dp = float(u[0]), float(u[1])
    lam = p.decay_rates
    conc = x[:6]
    c_n = x[IDX_CN]
    t_r = x[IDX_TR]
    t_hx = x[IDX_THX]

    flow = flow_rate(dp, p)
    dilution = flow / p.core_volume
    gamma_f = 2.0 * min_lag(dp, p)
    conc_in = np.exp(-lam * gamma_f) * z[:6]

    dx = np.empty(N_STATES)
    dx[:6] = (conc_in - conc) * dilution - lam * conc + p.delayed_fractions * c_n / p.generation_time
    rho = x[IDX_RHO_TH] + rho_ext_pcm * PCM
    dx[IDX_CN] = lam @ conc + (rho - p.beta) * c_n / p.generation_time

    q_g = thermal_power(x, p)
    mass_flow = flow * p.salt_density
    dt_r = mass_flow / p.core_mass * (z[6] - t_r) + q_g / (p.core_mass * p.heat_capacity)
    dx[IDX_TR] = dt_r
    dx[IDX_THX] = (mass_flow / p.hx_mass * (z[7] - t_hx)
                   - p.conductance / (p.hx_mass * p.heat_capacity) * (t_hx - p.coolant_temp))
    dx[IDX_RHO_TH] = -p.feedback * dt_r
    return dx


def jacobians(x: np.ndarray, z: np.ndarray, u: np.ndarray, p: MsrParams):
    """Analytic Jacobians (df/dx, df/dz, df/du, dh/dx)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    rho_ext_pcm, dp = float(u[0]), float(u[1])
    lam = p.decay_rates
    c_n = x[IDX_CN]
    t_r = x[IDX_TR]
    t_hx = x[IDX_THX]

    flow = flow_rate(dp, p)
    dilution = flow / p.core_volume
    gamma_f = 2.0 * min_lag(dp, p)
    decay = np.exp(-lam * gamma_f)
    mass_flow = flow * p.salt_density

    dfdx = np.zeros((N_STATES, N_STATES))
    for i in range(6):
        dfdx[i, i] = -dilution - lam[i]
        dfdx[i, IDX_CN] = p.delayed_fractions[i] / p.generation_time
        dfdx[IDX_CN, i] = lam[i]
    rho = x[IDX_RHO_TH] + rho_ext_pcm * PCM
    dfdx[IDX_CN, IDX_CN] = (rho - p.beta) / p.generation_time
    dfdx[IDX_CN, IDX_RHO_TH] = c_n / p.generation_time
    dq_dcn = p.nominal_power / p.nominal_neutron_conc
    dfdx[IDX_TR, IDX_CN] = dq_dcn / (p.core_mass * p.heat_capacity)
    dfdx[IDX_TR, IDX_TR] = -mass_flow / p.core_mass
    dfdx[IDX_THX, IDX_THX] = -mass_flow / p.hx_mass - p.conductance / (p.hx_mass * p.heat_capacity)
    dfdx[IDX_RHO_TH, :] = -p.feedback * dfdx[IDX_TR, :]

    dfdz = np.zeros((N_STATES, N_DELAYS))
    for i in range(6):
        dfdz[i, i] = decay[i] * dilution
    dfdz[IDX_TR, 6] = mass_flow / p.core_mass
    dfdz[IDX_THX, 7] = mass_flow / p.hx_mass
    dfdz[IDX_RHO_TH, :] = -p.feedback * dfdz[IDX_TR, :]

    dfdu = np.zeros((N_STATES, N_INPUTS))
    dfdu[IDX_CN, 0] = c_n / p.generation_time * PCM
    # F, D scale with dP; gamma_f with 1/dP
    dflow = flow / dp
    ddilution = dilution / dp
    ddecay = decay * lam * gamma_f / dp
    conc_in = decay * z[:6]
    dfdu[:6, 1] = (conc_in - x[:6]) * ddilution + ddecay * z[:6] * dilution
    dmass_flow = dflow * p.salt_density
    dfdu[IDX_TR, 1] = dmass_flow / p.core_mass * (z[6] - t_r)
    dfdu[IDX_THX, 1] = dmass_flow / p.hx_mass * (z[7] - t_hx)
    dfdu[IDX_RHO_TH, :] = -p.feedback * dfdu[IDX_TR, :]

    return dfdx, dfdz, dfdu, _H.copy()


def steady_state(target_power: float, pressure_drop: float, rho_ext_ref_pcm: float,
                 p: MsrParams) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form steady state at a target power and pressure drop.

    The external reactivity is held at the reference value and the
    remaining steady reactivity is assigned to rho_th (only its derivative
    is modeled, so the split is a gauge choice).  Returns (x_s, u_s); the
    result is verified to satisfy ||rhs||_inf < 1e-10.
    """
    if target_power <= 0.0:
        raise ValueError(f"target power must be positive, got {target_power}")
    flow = flow_rate(pressure_drop, p)
    dilution = flow / p.core_volume
    gamma_f = 2.0 * min_lag(pressure_drop, p)
    lam = p.decay_rates

    c_n = p.nominal_neutron_conc * target_power / p.nominal_power
    conc = p.delayed_fractions * c_n / (
        p.generation_time * (lam + dilution * (1.0 - np.exp(-lam * gamma_f))))
    rho_total = p.beta - p.generation_time * float(lam @ conc) / c_n
    t_hx = p.coolant_temp + target_power / p.conductance
    t_r = t_hx + target_power / (flow * p.salt_density * p.heat_capacity)

    x_s = np.empty(N_STATES)
    x_s[:6] = conc
    x_s[IDX_CN] = c_n
    x_s[IDX_RHO_TH] = rho_total - rho_ext_ref_pcm * PCM
    x_s[IDX_TR] = t_r
    x_s[IDX_THX] = t_hx
    u_s = np.array([rho_ext_ref_pcm, pressure_drop])

    resid = rhs(x_s, delayed_outputs(x_s), u_s, p)
    if np.max(np.abs(resid)) >= 1e-10:
        raise RuntimeError(f"steady state verification failed, ||rhs||_inf = {np.max(np.abs(resid)):.2e}")
    return x_s, u_s


@dataclass(frozen=True)
class MsrModel:
    """Adapter exposing the reactor in the generic transcription interface."""

    params: MsrParams

    n_states: int = N_STATES
    n_inputs: int = N_INPUTS
    n_delays: int = N_DELAYS

    def rhs(self, x, z, u):
        return rhs(x, z, u, self.params)

    def delayed(self, x):
        return delayed_outputs(x)

    def mean_lags(self, u):
        return mean_lags(u, self.params)

    def jacobians(self, x, z, u):
        return jacobians(x, z, u, self.params)

    def tracked(self, x) -> float:
        return thermal_power(x, self.params)

    def tracked_grad(self, x) -> np.ndarray:
        g = np.zeros(N_STATES)
        g[IDX_CN] = self.params.nominal_power / self.params.nominal_neutron_conc
        return g
