"""JSON scenario configuration: schema, validation, and resolution.

A scenario file selects the model preset, the delay-kernel settings, the
horizon grid, the tracking problem (setpoint profile, weights, bounds,
reference input), and solver/simulator options.  Unknown keys are rejected
with the offending key named in the error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import jsonschema
import numpy as np

from . import kernels, msr, nlp, simulate, transcription


class ConfigError(ValueError):
    """Invalid scenario configuration."""


_BOUND_PAIR = {
    "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "distdelay scenario configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"type": "string", "enum": ["msr-table1"]},
            },
        },
        "kernel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "viscosity_Pa_s": {"type": "number", "exclusiveMinimum": 0},
                "discretization_points": {"type": "integer", "minimum": 1},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t0_s": {"type": "number"},
                "interval_s": {"type": "number", "exclusiveMinimum": 0},
                "intervals": {"type": "integer", "minimum": 1},
                "steps_per_interval": {"type": "integer", "minimum": 1},
            },
        },
        "ocp": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tracking_weight": {"type": "number", "exclusiveMinimum": 0},
                "move_weights": _BOUND_PAIR,
                "setpoint_MW": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["knots"],
                    "properties": {
                        "knots": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["t_s", "value_MW"],
                                "properties": {
                                    "t_s": {"type": "number"},
                                    "value_MW": {"type": "number", "exclusiveMinimum": 0},
                                    "mode": {"type": "string", "enum": ["hold", "linear"]},
                                },
                            },
                        },
                    },
                },
                "reference": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "rho_ext_pcm": {"type": "number"},
                        "avg_velocity_mps": {"type": "number", "exclusiveMinimum": 0},
                        "pressure_drop_Pa": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "bounds": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "concentration_min": {"type": "number"},
                        "temperature_K": _BOUND_PAIR,
                        "rho_th": _BOUND_PAIR,
                        "rho_ext_pcm": _BOUND_PAIR,
                        "avg_velocity_mps": _BOUND_PAIR,
                    },
                },
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "max_iter": {"type": "integer", "minimum": 1},
                "mu0": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "simulator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "step_s": {"type": "number", "exclusiveMinimum": 0},
                "approx_step_s": {"type": "number", "exclusiveMinimum": 0},
                "lag_input_mode": {"type": "string", "enum": ["current", "emission"]},
            },
        },
        "steady": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "power_MW": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "stability": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "re_range": _BOUND_PAIR,
                "im_range": _BOUND_PAIR,
                "grid_points": {"type": "integer", "minimum": 4},
                "which": {"type": "string", "enum": ["dde", "approx"]},
            },
        },
        "output_dir": {"type": "string"},
    },
}


@dataclass(frozen=True)
class SetpointProfile:
    """Knot-based setpoint: each knot's mode shapes the following segment."""

    times: np.ndarray
    values: np.ndarray
    modes: tuple[str, ...]

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        for i, tt in enumerate(t):
            j = int(np.searchsorted(self.times, tt, side="right")) - 1
            if j < 0:
                out[i] = self.values[0]
            elif j >= self.times.size - 1:
                out[i] = self.values[-1]
            elif self.modes[j] == "hold":
                out[i] = self.values[j]
            else:
                frac = (tt - self.times[j]) / (self.times[j + 1] - self.times[j])
                out[i] = self.values[j] + frac * (self.values[j + 1] - self.values[j])
        return out if out.size > 1 else float(out[0])


@dataclass(frozen=True)
class Scenario:
    """Fully resolved runtime objects for one configuration file."""

    params: msr.MsrParams
    grid: transcription.Grid
    setpoint: SetpointProfile
    ocp: transcription.OcpSpec
    solver: nlp.SolverOptions
    sim: simulate.SimConfig
    approx_step: float
    steady_power: float
    stability: dict
    output_dir: str
    raw: dict


def validate(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field {path!r}: {err.message}")


def _reference_input(ocp_raw: dict, p: msr.MsrParams) -> np.ndarray:
    ref = ocp_raw.get("reference", {})
    rho_ext = float(ref.get("rho_ext_pcm", 50.0))
    if "pressure_drop_Pa" in ref and "avg_velocity_mps" in ref:
        raise ConfigError("reference: give either pressure_drop_Pa or avg_velocity_mps, not both")
    if "pressure_drop_Pa" in ref:
        dp = float(ref["pressure_drop_Pa"])
    else:
        vbar = float(ref.get("avg_velocity_mps", 4.0))
        dp = kernels.pressure_drop_for_velocity(vbar, p.viscosity, p.geometry)
    return np.array([rho_ext, dp])


def _bounds(ocp_raw: dict, p: msr.MsrParams):
    b = ocp_raw.get("bounds", {})
    conc_min = float(b.get("concentration_min", 0.0))
    temp = b.get("temperature_K", [600.0, 1000.0])
    rho_th = b.get("rho_th", [-0.05, 0.05])
    rho_ext = b.get("rho_ext_pcm", [-1000.0, 1000.0])
    vel = b.get("avg_velocity_mps", [0.5, 12.0])
    x_min = np.empty(msr.N_STATES)
    x_max = np.empty(msr.N_STATES)
    x_min[:7] = conc_min
    x_max[:7] = np.inf
    x_min[msr.IDX_RHO_TH], x_max[msr.IDX_RHO_TH] = rho_th
    x_min[msr.IDX_TR], x_max[msr.IDX_TR] = temp
    x_min[msr.IDX_THX], x_max[msr.IDX_THX] = temp
    dp_lo = kernels.pressure_drop_for_velocity(float(vel[0]), p.viscosity, p.geometry)
    dp_hi = kernels.pressure_drop_for_velocity(float(vel[1]), p.viscosity, p.geometry)
    u_min = np.array([rho_ext[0], dp_lo])
    u_max = np.array([rho_ext[1], dp_hi])
    if np.any(u_min >= u_max) or np.any(x_min >= x_max):
        raise ConfigError("bounds must satisfy min < max")
    return x_min, x_max, u_min, u_max


def resolve(raw: dict) -> Scenario:
    """Validate a raw config dict and build the runtime objects."""
    validate(raw)
    preset = raw.get("model", {}).get("preset", "msr-table1")
    assert preset == "msr-table1"
    params = msr.table1()

    kern = raw.get("kernel", {})
    if "viscosity_Pa_s" in kern:
        params = replace(params, viscosity=float(kern["viscosity_Pa_s"]))
    k_points = int(kern.get("discretization_points", 30))

    g = raw.get("grid", {})
    grid = transcription.Grid(
        t0=float(g.get("t0_s", 0.0)),
        dt=float(g.get("interval_s", 30.0)),
        n_intervals=int(g.get("intervals", 40)),
        steps_per_interval=int(g.get("steps_per_interval", 1)),
    )

    ocp_raw = raw.get("ocp", {})
    sp_raw = ocp_raw.get("setpoint_MW", {"knots": [{"t_s": grid.t0, "value_MW": 1.0}]})
    knots = sp_raw["knots"]
    times = np.array([k["t_s"] for k in knots], dtype=float)
    if np.any(np.diff(times) <= 0.0):
        raise ConfigError("setpoint knot times must be strictly increasing")
    setpoint = SetpointProfile(
        times=times,
        values=np.array([k["value_MW"] for k in knots], dtype=float),
        modes=tuple(k.get("mode", "linear") for k in knots),
    )
    u_ref = _reference_input(ocp_raw, params)
    x_min, x_max, u_min, u_max = _bounds(ocp_raw, params)
    # per-interval setpoints, sampled at the interval ends (right rectangle)
    interval_sp = np.array([float(setpoint(grid.t0 + (k + 1) * grid.dt))
                            for k in range(grid.n_intervals)])
    ocp = transcription.OcpSpec(
        tracking_weight=float(ocp_raw.get("tracking_weight", 1.0)),
        setpoints=interval_sp,
        move_weights=np.asarray(ocp_raw.get("move_weights", [1e-2, 1e2]), dtype=float),
        u_ref=u_ref,
        x_min=x_min, x_max=x_max, u_min=u_min, u_max=u_max,
    )

    s = raw.get("solver", {})
    solver = nlp.SolverOptions(
        tol=float(s.get("tol", 1e-6)),
        max_iter=int(s.get("max_iter", 200)),
        mu0=float(s.get("mu0", 1e-1)),
    )

    sim_raw = raw.get("simulator", {})
    sim = simulate.SimConfig(
        step=float(sim_raw.get("step_s", 1e-3)),
        kernel_points=k_points,
        lag_input_mode=sim_raw.get("lag_input_mode", "current"),
    )
    approx_step = float(sim_raw.get("approx_step_s", grid.dt_step))

    return Scenario(
        params=params,
        grid=grid,
        setpoint=setpoint,
        ocp=ocp,
        solver=solver,
        sim=sim,
        approx_step=approx_step,
        steady_power=float(raw.get("steady", {}).get("power_MW", 1.0)),
        stability=raw.get("stability", {}),
        output_dir=raw.get("output_dir", "out"),
        raw=raw,
    )


def load(path: str) -> Scenario:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return resolve(raw)


def default_scaling(layout: transcription.DecisionLayout, u_ref: np.ndarray) -> np.ndarray:
    """Nominal decision-variable magnitudes for KKT conditioning.

    Concentrations ~1, temperatures ~100 K, thermal reactivity ~1e-3,
    external reactivity ~100 pcm, pressure drop ~its reference value.
    """
    x_nom = np.ones(msr.N_STATES)
    x_nom[msr.IDX_TR] = 100.0
    x_nom[msr.IDX_THX] = 100.0
    x_nom[msr.IDX_RHO_TH] = 1e-3
    u_nom = np.array([100.0, float(u_ref[1])])
    s = np.empty(layout.size)
    for k in range(layout.n_intervals):
        for n in range(1, layout.steps_per_interval + 1):
            off = layout.x_offset(k, n)
            s[off:off + layout.n_states] = x_nom
        off = layout.u_offset(k)
        s[off:off + layout.n_inputs] = u_nom
    return s
