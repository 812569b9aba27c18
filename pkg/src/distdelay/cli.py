"""Command-line front end: steady | solve | compare | kernel | stability.

Every command reads one JSON scenario file and writes CSV artifacts to the
output directory.  Exit codes: 0 success, 2 configuration error, 3 solver
failure, 4 simulation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import config, delay_approx, kernels, msr, nlp, simulate, transcription
from .config import ConfigError, Scenario

log = logging.getLogger("distdelay")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SIMULATION = 4


def _atomic_write_rows(path: str, header: list[str], rows) -> None:
    """Write a CSV atomically (temp file + rename)."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory(path: str, traj: simulate.Trajectory) -> None:
    _atomic_write_rows(path, list(simulate.Trajectory.CSV_COLUMNS),
                       (list(row) for row in traj.table()))


def _nlp_trajectory(w: np.ndarray, x0: np.ndarray, scenario: Scenario) -> simulate.Trajectory:
    """Rebuild a time-stamped trajectory from the decision vector."""
    grid = scenario.grid
    model = msr.MsrModel(scenario.params)
    lay = transcription.layout_for(model, grid)
    n_rows = grid.n_intervals * grid.steps_per_interval + 1
    t = np.empty(n_rows)
    states = np.empty((n_rows, msr.N_STATES))
    inputs = np.empty((n_rows, msr.N_INPUTS))
    t[0] = grid.t0
    states[0] = x0
    inputs[0] = lay.input(w, 0)
    row = 1
    for k in range(grid.n_intervals):
        u_k = lay.input(w, k)
        for n in range(1, grid.steps_per_interval + 1):
            t[row] = grid.t0 + k * grid.dt + n * grid.dt_step
            states[row] = lay.state(w, k, n)
            inputs[row] = u_k
            row += 1
    return simulate.Trajectory(t=t, states=states, inputs=inputs, params=scenario.params)


def run_solve(scenario: Scenario):
    """Transcribe and solve the scenario's OCP; returns (w, report, trajectory, x0)."""
    p = scenario.params
    model = msr.MsrModel(p)
    grid = scenario.grid
    spec = scenario.ocp
    x0, _ = msr.steady_state(float(scenario.setpoint(grid.t0)), spec.u_ref[1],
                             spec.u_ref[0], p)

    def steady_fn(power, u_ref):
        x_s, _ = msr.steady_state(power, u_ref[1], u_ref[0], p)
        return x_s

    lay = transcription.layout_for(model, grid)
    scaling = config.default_scaling(lay, spec.u_ref)
    problem = transcription.build_nlp(x0, model, grid, spec, x_scale=scaling)
    w0 = transcription.initial_guess(model, grid, spec, steady_fn)
    lines: list[str] = []
    opts = nlp.SolverOptions(
        tol=scenario.solver.tol, max_iter=scenario.solver.max_iter,
        mu0=scenario.solver.mu0, log=lines.append)
    w, report = nlp.solve(problem, w0, opts)
    return w, report, _nlp_trajectory(w, x0, scenario), x0, lines


def cmd_steady(scenario: Scenario, out_dir: str) -> int:
    p = scenario.params
    power = scenario.steady_power
    u_ref = scenario.ocp.u_ref
    x_s, u_s = msr.steady_state(power, u_ref[1], u_ref[0], p)
    gamma, _ = msr.mean_lags(u_s, p)
    flow = msr.flow_rate(u_s[1], p)
    rows = [("power_MW", power)]
    rows += list(zip(msr.STATE_NAMES, x_s))
    rows += [
        ("rho_ext_pcm", u_s[0]),
        ("dP_Pa", u_s[1]),
        ("rho_total", x_s[msr.IDX_RHO_TH] + u_s[0] * msr.PCM),
        ("gamma_full_s", gamma[0]),
        ("gamma_half_s", gamma[6]),
        ("F_m3ps", flow),
        ("D_1ps", flow / p.core_volume),
        ("v_avg_mps", kernels.avg_velocity_for_pressure_drop(u_s[1], p.viscosity, p.geometry)),
    ]
    path = os.path.join(out_dir, "steady.csv")
    _atomic_write_rows(path, ["name", "value"], rows)
    for name, value in rows:
        print(f"{name},{value:.10g}")
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_kernel(scenario: Scenario, out_dir: str) -> int:
    p = scenario.params
    dp = float(scenario.ocp.u_ref[1])
    kern = kernels.hp_kernel(dp, p.viscosity, p.geometry)
    disc_unit = kernels.discretize_hp_unit(p.geometry, scenario.sim.kernel_points)
    lags = disc_unit.lags / kern.coefficient
    weights = disc_unit.weights
    if abs(weights.sum() - 1.0) > 1e-12:
        raise RuntimeError("discretization weights do not sum to one")

    taus = np.linspace(0.0, 10.0 * kern.min_lag, 400)
    _atomic_write_rows(os.path.join(out_dir, "kernel_density.csv"),
                       ["tau_s", "alpha_1ps"],
                       zip(taus, kern.density(taus)))
    _atomic_write_rows(os.path.join(out_dir, "kernel_discretization.csv"),
                       ["tau_k_s", "w_k"], zip(lags, weights))
    summary = [
        ("tau0_s", kern.min_lag),
        ("gamma_s", kern.mean_lag),
        ("F_m3ps", kern.flow_rate),
        ("dP_Pa", dp),
        ("sum_w", weights.sum()),
        ("discretized_mean_lag_s", float(weights @ lags)),
    ]
    _atomic_write_rows(os.path.join(out_dir, "kernel_summary.csv"), ["name", "value"], summary)
    for name, value in summary:
        print(f"{name},{value:.10g}")
    return EXIT_OK


def cmd_solve(scenario: Scenario, out_dir: str) -> int:
    w, report, traj, _, lines = run_solve(scenario)
    grid = scenario.grid
    model = msr.MsrModel(scenario.params)
    lay = transcription.layout_for(model, grid)
    u_rows = []
    for k in range(grid.n_intervals):
        u_k = lay.input(w, k)
        u_rows.append((k, grid.t0 + k * grid.dt, u_k[0], u_k[1]))
    _atomic_write_rows(os.path.join(out_dir, "optimal_inputs.csv"),
                       ["k", "t_s", "rho_ext_pcm", "dP_Pa"], u_rows)
    write_trajectory(os.path.join(out_dir, "nlp_trajectory.csv"), traj)
    _atomic_write_text(os.path.join(out_dir, "iterations.log"), "\n".join(lines) + "\n")
    _atomic_write_text(os.path.join(out_dir, "solve_report.json"), json.dumps({
        "status": report.status,
        "iterations": report.iterations,
        "stationarity": report.stationarity,
        "feasibility": report.feasibility,
        "complementarity": report.complementarity,
        "objective": report.objective,
        "wall_time_s": report.wall_time,
        "message": report.message,
    }, indent=2) + "\n")
    print(f"solver status: {report.status} ({report.iterations} iterations, "
          f"objective {report.objective:.6e})")
    return EXIT_OK if report.converged else EXIT_SOLVER


def cmd_compare(scenario: Scenario, out_dir: str) -> int:
    w, report, nlp_traj, x0, lines = run_solve(scenario)
    code = cmd_solve_artifacts(scenario, out_dir, w, report, nlp_traj, lines)
    if code != EXIT_OK:
        return code
    grid = scenario.grid
    model = msr.MsrModel(scenario.params)
    lay = transcription.layout_for(model, grid)
    u_opt = np.array([lay.input(w, k) for k in range(grid.n_intervals)])
    schedule = simulate.InputSchedule.from_intervals(grid.t0, grid.dt, u_opt)
    duration = grid.tf - grid.t0
    try:
        true_traj = simulate.simulate_true(x0, schedule, duration, scenario.sim, scenario.params)
        approx_traj = simulate.simulate_approx(x0, schedule, duration,
                                               scenario.approx_step, scenario.params)
    except (simulate.SimulationError, RuntimeError) as exc:
        log.error("simulation failed: %s", exc)
        return EXIT_SIMULATION

    write_trajectory(os.path.join(out_dir, "true_trajectory.csv"), true_traj)
    write_trajectory(os.path.join(out_dir, "approx_trajectory.csv"), approx_traj)

    metrics = simulate.error_metrics(true_traj, approx_traj)
    _atomic_write_rows(os.path.join(out_dir, "error.csv"), ["t", "dQ_g_MW"],
                       zip(metrics.t, metrics.delta_power))
    _atomic_write_text(os.path.join(out_dir, "error_summary.json"), json.dumps({
        "max_abs_dQ_g_MW": metrics.max_abs,
        "rms_dQ_g_MW": metrics.rms,
        "t_of_max_s": metrics.t_max,
        "final_setpoint_MW": float(scenario.ocp.setpoints[-1]),
        "final_v_avg_mps": float(true_traj.avg_velocity()[-1]),
    }, indent=2) + "\n")

    # panel series of the comparison figure and the precursor figure
    _atomic_write_rows(
        os.path.join(out_dir, "comparison.csv"),
        ["t", "Q_g_MW", "T_r", "rho_th", "T_hx", "rho_ext_pcm", "v_avg_mps"],
        zip(true_traj.t, true_traj.thermal_power(),
            true_traj.states[:, msr.IDX_TR], true_traj.states[:, msr.IDX_RHO_TH],
            true_traj.states[:, msr.IDX_THX], true_traj.inputs[:, 0],
            true_traj.avg_velocity()))
    _atomic_write_rows(
        os.path.join(out_dir, "precursors.csv"),
        ["t", "C_1", "C_2", "C_3", "C_4", "C_5", "C_6"],
        zip(true_traj.t, *(true_traj.states[:, i] for i in range(6))))
    print(f"max |dQ_g| = {metrics.max_abs:.6g} MW (rms {metrics.rms:.6g} MW)")
    return EXIT_OK


def cmd_solve_artifacts(scenario, out_dir, w, report, traj, lines) -> int:
    """Write the solve artifacts that `compare` shares with `solve`."""
    write_trajectory(os.path.join(out_dir, "nlp_trajectory.csv"), traj)
    _atomic_write_text(os.path.join(out_dir, "iterations.log"), "\n".join(lines) + "\n")
    _atomic_write_text(os.path.join(out_dir, "solve_report.json"), json.dumps({
        "status": report.status, "iterations": report.iterations,
        "objective": report.objective}, indent=2) + "\n")
    if not report.converged:
        log.error("solver did not converge: %s", report.status)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_stability(scenario: Scenario, out_dir: str) -> int:
    p = scenario.params
    u_ref = scenario.ocp.u_ref
    x_s, u_s = msr.steady_state(scenario.steady_power, u_ref[1], u_ref[0], p)
    data = delay_approx.msr_steady_data(x_s, u_s, p)
    st = scenario.stability
    re_range = tuple(st.get("re_range", [-50.0, 5.0]))
    im_range = tuple(st.get("im_range", [-50.0, 50.0]))
    n_grid = int(st.get("grid_points", 40))
    which = st.get("which", "approx")
    result = delay_approx.root_scan(data, re_range, im_range, n_grid, n_grid, which=which)
    _atomic_write_rows(os.path.join(out_dir, "stability_samples.csv"),
                       ["re_lambda", "im_lambda", "abs_det"],
                       ((s.lam.real, s.lam.imag, abs(s.det_value)) for s in result.samples))
    _atomic_write_rows(os.path.join(out_dir, "stability_roots.csv"),
                       ["re_lambda", "im_lambda"],
                       ((r.real, r.imag) for r in result.roots))
    print(f"{result.roots.size} refined roots, {result.dropped.size} candidates dropped")
    for r in result.roots:
        print(f"root,{r.real:.8g},{r.imag:.8g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distdelay",
        description="Optimal control and simulation of the delayed-recirculation reactor")
    parser.add_argument("--print-schema", action="store_true",
                        help="print the scenario JSON schema and exit")
    parser.add_argument("--config", help="scenario JSON file")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("command", nargs="?",
                        choices=["steady", "solve", "compare", "kernel", "stability"])
    return parser


_COMMANDS = {
    "steady": cmd_steady,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "kernel": cmd_kernel,
    "stability": cmd_stability,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level))
    if args.print_schema:
        print(json.dumps(config.SCHEMA, indent=2))
        return EXIT_OK
    if args.command is None:
        print("error: a command is required (steady|solve|compare|kernel|stability)",
              file=sys.stderr)
        return EXIT_CONFIG
    if args.config is None:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        scenario = config.load(args.config)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or scenario.output_dir
    try:
        return _COMMANDS[args.command](scenario, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except simulate.SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
