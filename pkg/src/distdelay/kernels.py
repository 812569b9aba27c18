"""Distributed-delay kernels induced by laminar flow in a pipe.

A velocity profile v(r) over the cross section of a pipe of length L maps
every streamline to a travel time tau = L / v(r).  Integrating the flow over
the cross section turns the profile into a density of travel times: the
delay kernel.  This module constructs kernels for the parabolic
(Hagen-Poiseuille) profile in closed form and for arbitrary monotone
profiles numerically, computes their mean lag, and discretizes them into a
finite set of weighted absolute delays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

# Truncation point for tau^-3 tails: the mass beyond TAIL_FACTOR * tau0 is
# tau0^2 / tau_max^2 = 1e-8.
TAIL_FACTOR = 1.0e4


class ProfileError(ValueError):
    """The velocity profile violates the modeling assumptions."""


@dataclass(frozen=True)
class PipeGeometry:
    """Cylindrical pipe of length `length` and radius `radius` (meters)."""

    length: float
    radius: float

    def __post_init__(self) -> None:
        if self.length <= 0.0:
            raise ValueError(f"pipe length must be positive, got {self.length}")
        if self.radius <= 0.0:
            raise ValueError(f"pipe radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class HagenPoiseuilleKernel:
    """Closed-form delay kernel for the parabolic profile v(r) = a (R^2 - r^2).

    The normalized density is 2 tau0^2 / tau^3 on [tau0, inf) and zero
    below the minimum lag tau0 = L / (a R^2).
    """

    geometry: PipeGeometry
    coefficient: float  # a = dP / (4 mu L), 1/(m s)
    min_lag: float  # tau0, s
    flow_rate: float  # F = (pi/2) a R^4, m^3/s
    pressure_drop: float  # Pa
    viscosity: float  # Pa s

    @property
    def mean_lag(self) -> float:
        return 2.0 * self.min_lag

    def density(self, tau):
        """Normalized kernel alpha(tau), vectorized over tau."""
        tau = np.asarray(tau, dtype=float)
        out = np.zeros_like(tau)
        mask = tau >= self.min_lag
        out = np.where(mask, 2.0 * self.min_lag**2 / np.where(mask, tau, 1.0) ** 3, 0.0)
        return out if out.ndim else float(out)

    def tail_mass(self, tau: float) -> float:
        """Mass of the kernel beyond tau."""
        if tau <= self.min_lag:
            return 1.0
        return self.min_lag**2 / tau**2

    def laplace(self, lam: complex) -> complex:
        """Laplace transform of the density, int_tau0^inf e^{-lam tau} alpha dtau.

        Evaluated in closed form via the exponential integral, which also
        provides the analytic continuation to Re(lam) < 0 where the defining
        integral diverges.
        """
        z = complex(lam) * self.min_lag
        if z == 0.0:
            return 1.0 + 0.0j
        e1 = complex(special.exp1(z))
        return z * z * e1 + np.exp(-z) * (1.0 - z)

    def velocity(self, r):
        return self.coefficient * (self.geometry.radius**2 - np.asarray(r, dtype=float) ** 2)


def hp_kernel(pressure_drop: float, viscosity: float, geometry: PipeGeometry) -> HagenPoiseuilleKernel:
    """Hagen-Poiseuille kernel for a given pressure drop and viscosity."""
    if pressure_drop <= 0.0:
        raise ValueError(f"pressure drop must be positive, got {pressure_drop}")
    if viscosity <= 0.0:
        raise ValueError(f"viscosity must be positive, got {viscosity}")
    a = pressure_drop / (4.0 * viscosity * geometry.length)
    tau0 = geometry.length / (a * geometry.radius**2)
    flow = 0.5 * math.pi * a * geometry.radius**4
    return HagenPoiseuilleKernel(
        geometry=geometry,
        coefficient=a,
        min_lag=tau0,
        flow_rate=flow,
        pressure_drop=pressure_drop,
        viscosity=viscosity,
    )


def pressure_drop_for_velocity(avg_velocity: float, viscosity: float, geometry: PipeGeometry) -> float:
    """Pressure drop giving a prescribed cross-section average velocity.

    For the parabolic profile the average velocity is a R^2 / 2, half the
    centerline maximum.
    """
    if avg_velocity <= 0.0:
        raise ValueError(f"average velocity must be positive, got {avg_velocity}")
    a = 2.0 * avg_velocity / geometry.radius**2
    return 4.0 * viscosity * geometry.length * a


def avg_velocity_for_pressure_drop(pressure_drop, viscosity: float, geometry: PipeGeometry):
    """Inverse of :func:`pressure_drop_for_velocity`, vectorized."""
    a = np.asarray(pressure_drop, dtype=float) / (4.0 * viscosity * geometry.length)
    out = 0.5 * a * geometry.radius**2
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class NumericKernel:
    """Delay kernel for an arbitrary monotone velocity profile.

    `density` is the normalized kernel; it vanishes below `min_lag` and its
    tail beyond `tail_cutoff` carries less than ~1e-8 mass for tau^-3 decay.
    """

    min_lag: float
    density: Callable[[np.ndarray], np.ndarray]
    flow_rate: float
    tail_cutoff: float

    @property
    def mean_lag(self) -> float:
        return mean_lag(self)

    def laplace(self, lam: complex) -> complex:
        """Laplace transform by adaptive quadrature (requires Re(lam) >= 0)."""
        lam = complex(lam)
        if lam.real < 0.0:
            raise ValueError("quadrature Laplace transform requires Re(lam) >= 0")
        re, _ = integrate.quad(
            lambda t: (np.exp(-lam * t) * self.density(t)).real,
            self.min_lag, self.tail_cutoff, limit=200)
        im, _ = integrate.quad(
            lambda t: (np.exp(-lam * t) * self.density(t)).imag,
            self.min_lag, self.tail_cutoff, limit=200)
        # account for the truncated tail assuming ~c/tau^3 decay, for which
        # the remaining mass is density(cutoff) * cutoff / 2
        tail = float(self.density(self.tail_cutoff)) * self.tail_cutoff / 2.0
        return complex(re, im) + tail * np.exp(-lam * self.tail_cutoff)


@dataclass(frozen=True, eq=False)
class DiscretizedKernel:
    """Finite approximation of a kernel: weights w_k on absolute lags tau_k."""

    lags: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        lags = np.asarray(self.lags, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "weights", weights)
        if lags.shape != weights.shape or lags.ndim != 1 or lags.size == 0:
            raise ValueError("lags and weights must be matching non-empty 1-d arrays")
        if np.any(np.diff(lags) <= 0.0):
            raise ValueError("lags must be strictly increasing")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")

    @property
    def mean_lag(self) -> float:
        return float(self.weights @ self.lags)


def kernel_from_profile(
    v: Callable[[float], float],
    dv_dr: Callable[[float], float],
    geometry: PipeGeometry,
) -> NumericKernel:
    """Build the delay kernel for a strictly decreasing profile with v(R) = 0.

    The density at lag tau is obtained by inverting v(r) tau = L for the
    emitting radius r(tau) with a bracketed root find, then applying the
    change-of-variables factor -(2 pi L^2) / (F tau^3) * r / v'(r).
    """
    L = geometry.length
    R = geometry.radius
    v0 = float(v(0.0))
    if v0 <= 0.0 or float(v(R)) > 1e-9 * v0:
        raise ProfileError("profile must have v(0) > 0 and v(R) = 0")
    tau0 = L / v0

    flow, _ = integrate.quad(lambda r: 2.0 * math.pi * v(r) * r, 0.0, R, limit=200)

    def radius_at(tau: float) -> float:
        target = L / tau
        lo, hi = 0.0, R
        flo = float(v(lo)) - target
        fhi = float(v(hi)) - target
        if flo < 0.0 or fhi > 0.0:
            raise ProfileError(f"cannot bracket radius for lag {tau}")
        return float(optimize.bisect(lambda r: float(v(r)) - target, lo, hi,
                                     xtol=1e-12 * R))

    def density(tau):
        tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.zeros_like(tau_arr)
        for i, t in enumerate(tau_arr):
            if t < tau0:
                continue
            r = radius_at(float(t))
            # at r = 0 the factor r / v'(r) is 0/0; evaluate at a small
            # offset where the limit is already attained to rounding
            r_eval = max(r, 1e-9 * R)
            slope = float(dv_dr(r_eval))
            if slope >= 0.0:
                raise ProfileError("profile must be strictly decreasing")
            out[i] = -2.0 * math.pi * L**2 / (flow * t**3) * r_eval / slope
        return out if np.ndim(tau) else float(out[0])

    return NumericKernel(min_lag=tau0, density=density, flow_rate=flow,
                         tail_cutoff=tau0 * TAIL_FACTOR)


def total_mass(kernel) -> float:
    """Integral of the kernel density (1 for a normalized kernel)."""
    if isinstance(kernel, HagenPoiseuilleKernel):
        return 1.0
    if isinstance(kernel, DiscretizedKernel):
        return float(kernel.weights.sum())
    tau0, tau_max = kernel.min_lag, kernel.tail_cutoff
    pieces = np.geomspace(tau0, tau_max, 8)
    mass = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        val, _ = integrate.quad(kernel.density, lo, hi, limit=200)
        mass += val
    # assume a ~c/tau^3 tail beyond the cutoff
    mass += float(kernel.density(tau_max)) * tau_max / 2.0
    return mass


def mean_lag(kernel) -> float:
    """First moment of the kernel density.

    Closed form for Hagen-Poiseuille and discretized kernels; adaptive
    quadrature with a power-law tail estimate otherwise.  Raises if the
    tail decays too slowly for the moment to exist.
    """
    if isinstance(kernel, (HagenPoiseuilleKernel, DiscretizedKernel)):
        return kernel.mean_lag
    tau0, tau_max = kernel.min_lag, kernel.tail_cutoff
    a_hi = float(kernel.density(tau_max))
    a_mid = float(kernel.density(tau_max / 2.0))
    if a_hi > 0.0 and a_mid > 0.0:
        power = math.log(a_hi / a_mid) / math.log(2.0)
        if power >= -2.0:
            raise ValueError(f"kernel tail decays like tau^{power:.2f}; mean lag is not integrable")
        tail = a_hi * tau_max**2 / (-power - 2.0)
    else:
        tail = 0.0
    pieces = np.geomspace(tau0, tau_max, 8)
    first = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        val, _ = integrate.quad(lambda t: t * kernel.density(t), lo, hi, limit=200)
        first += val
    return first + tail


def discretize_profile(
    v: Callable[[float], float],
    geometry: PipeGeometry,
    n_segments: int,
) -> DiscretizedKernel:
    """Approximate the kernel by K weighted absolute lags.

    The radius is split into K equal-width annuli; each annulus contributes
    its flow fraction as the weight and the lag of its flow-weighted mean
    velocity.  (Reconstruction of the discretization used for high-fidelity
    simulation; see the README.)
    """
    if n_segments < 1:
        raise ValueError(f"need at least one segment, got {n_segments}")
    L, R = geometry.length, geometry.radius
    edges = np.linspace(0.0, R, n_segments + 1)
    flows = np.empty(n_segments)
    momenta = np.empty(n_segments)
    for k in range(n_segments):
        flows[k], _ = integrate.quad(lambda r: 2.0 * math.pi * v(r) * r,
                                     edges[k], edges[k + 1], limit=100)
        momenta[k], _ = integrate.quad(lambda r: 2.0 * math.pi * v(r) ** 2 * r,
                                       edges[k], edges[k + 1], limit=100)
    if np.any(flows <= 0.0):
        raise ProfileError("profile produced a non-positive annulus flow")
    vbar = momenta / flows
    lags = L / vbar
    if np.any(np.diff(lags) <= 0.0):
        raise ProfileError("annulus lags are not strictly increasing; profile must decrease monotonically")
    weights = flows / flows.sum()
    return DiscretizedKernel(lags=lags, weights=weights)


def discretize_hp_unit(geometry: PipeGeometry, n_segments: int) -> DiscretizedKernel:
    """Discretization of the parabolic profile with unit coefficient a = 1.

    For Hagen-Poiseuille flow the weights are independent of a and the lags
    scale as 1/a, so the unit discretization can be rescaled to any
    operating pressure drop.
    """
    R = geometry.radius
    return discretize_profile(lambda r: R**2 - r * r, geometry, n_segments)
