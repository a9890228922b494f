"""
commands.py - The CLI subcommands. Each takes a validated config and writes into one
output directory holding exactly one manifest.json.
"""
import logging
import os
import time
from contextlib import contextmanager

from . import __version__
from .benchmark import estimate_runtime
from .chain import build_chain, recurrence_time, verify_legendre_orthonormality
from .config import (
    command_problems,
    config_hash,
    grid_spec,
    initial_states,
    lindblad_config,
    print_config,
    simulation_config,
    system_params,
    write_default_config,
)
from .display import (
    print_chain_info,
    print_compare_report,
    print_estimate,
    print_info,
    print_success,
    print_sweep_table,
    print_warning,
    spinner,
)
from .doctor import run_doctor
from .errors import ConfigError, KerrSimError, NumericalError, OutputError, ToleranceFailure
from .exporter import (
    RunManifest,
    export_markdown,
    write_compare_json,
    write_frames,
    write_manifest,
    write_sweep_csv,
    write_checkpoint,
    write_trajectory_csv,
    write_wigner_grid,
)
from .model import bistable_drive_interval
from .runs import (
    FRAME_NORMALIZATION_TOL,
    compare_run,
    run_lindblad,
    run_tebd,
    steady_sweep,
)

log = logging.getLogger(__name__)


@contextmanager
def _recorded(command: str, cfg: dict, out_dir: str, threads: int, seedless: bool):
    """Yield a RunManifest and write it when the block ends, however it ends.

    A failed disk write marks the manifest partial; a numerical failure is recorded
    under convergence["error"]. A ValueError from a domain check is recorded the same
    way and re-raised as ConfigError.
    """
    manifest = RunManifest(
        command=command,
        config_hash=config_hash(cfg),
        config=cfg,
        version=__version__,
        threads=threads,
        seedless=seedless,
    )
    start = time.monotonic()
    try:
        yield manifest
    except OutputError:
        manifest.partial = True
        manifest.wall_clock_seconds = time.monotonic() - start
        try:
            write_manifest(manifest, out_dir)
        except OutputError:
            log.error("could not write the partial-output manifest to %s", out_dir)
        raise
    except KerrSimError as e:
        if not isinstance(e, ToleranceFailure):
            manifest.convergence["error"] = str(e)
        manifest.wall_clock_seconds = time.monotonic() - start
        write_manifest(manifest, out_dir)
        raise
    except ValueError as e:
        # a parameter outside some routine's domain that validation did not catch
        manifest.convergence["error"] = str(e)
        manifest.wall_clock_seconds = time.monotonic() - start
        write_manifest(manifest, out_dir)
        raise ConfigError(str(e)) from e
    manifest.wall_clock_seconds = time.monotonic() - start
    write_manifest(manifest, out_dir)


def wigner_map_name(drive: float) -> str:
    return f"wigner_E{drive:09.4f}.csv"


def cmd_steady_sweep(cfg: dict, out_dir: str, threads: int = 1, seedless: bool = False):
    problems = command_problems(cfg, "steady-sweep")
    if problems:
        raise ConfigError(problems)
    params = system_params(cfg)
    sweep = cfg["sweep"]
    sim = simulation_config(cfg) if sweep["tebd_columns"] else None
    states = initial_states(cfg)
    grid = grid_spec(cfg) if sweep["wigner_maps"] else None
    interval = bistable_drive_interval(params)
    if interval is not None:
        low, high = interval
        print_info(f"Semiclassical bistable drive interval: {low:.4g} < E < {high:.4g}")

    with _recorded("steady-sweep", cfg, out_dir, threads, seedless) as manifest:
        with spinner(f"Solving {len(sweep['drives'])} steady states...") as p:
            p.add_task("")
            rows = steady_sweep(
                params,
                sweep["drives"],
                sweep["density_dim"],
                sim=sim,
                states=states,
                grid=grid,
                workers=threads,
            )
        print_sweep_table(rows)

        manifest.files.append(write_sweep_csv(rows, os.path.join(out_dir, "sweep.csv")))
        for row in rows:
            if row.wigner is not None:
                path = os.path.join(out_dir, "wigner", wigner_map_name(row.drive))
                manifest.files.append(write_wigner_grid(row.wigner, path))
            if row.trunc_errors:
                manifest.trunc_error[f"E={row.drive:g}"] = row.trunc_errors
        manifest.convergence["analytic_points"] = len(rows)
        print_success(f"Sweep written to [bold]{out_dir}[/bold]")


def cmd_evolve(
    cfg: dict,
    out_dir: str,
    threads: int = 1,
    seedless: bool = False,
    method: str = "tebd",
    checkpoint: bool = False,
):
    params = system_params(cfg)
    sim = simulation_config(cfg)
    states = initial_states(cfg)
    frame_times = tuple(cfg["wigner"]["times"])
    grid = grid_spec(cfg) if frame_times else None
    lindblad = lindblad_config(cfg)
    single = len(states) == 1
    if checkpoint and method != "tebd":
        print_warning("--checkpoint saves chain states and is ignored with --method lindblad")

    with _recorded("evolve", cfg, out_dir, threads, seedless) as manifest:
        manifest.convergence["method"] = method
        for k, initial in enumerate(states):
            label = f"s{k}"
            with spinner(f"Evolving {label} from α(0) = {initial.alpha:.4g} ({method})...") as p:
                p.add_task("")
                if method == "tebd":
                    run = run_tebd(params, sim, initial, grid, frame_times, max_workers=threads)
                else:
                    run = run_lindblad(
                        params, lindblad, initial,
                        sample_every=sim.dt * sim.snapshot_stride,
                        grid=grid, frame_times=frame_times, max_workers=threads,
                    )
            suffix = "" if single else f"_{label}"
            path = os.path.join(out_dir, f"trajectory{suffix}.csv")
            manifest.files.append(write_trajectory_csv(run, path))
            manifest.files += write_frames(run.frames, os.path.join(out_dir, f"frames{suffix}"))
            if checkpoint and run.final_state is not None:
                path = os.path.join(out_dir, f"checkpoint{suffix}.kmps")
                manifest.files.append(write_checkpoint(run.final_state, path))
            manifest.trunc_error[label] = run.trunc_error
            manifest.convergence[label] = {
                "frames": len(run.frames),
                "frames_cover_support": all(f.support_ok for f in run.frames),
                "frames_normalized": all(
                    f.metadata["normalization_deficit"] <= FRAME_NORMALIZATION_TOL
                    for f in run.frames
                ),
            }
            print_info(
                f"{label}: {len(run.rows)} rows, {len(run.frames)} frames, "
                f"truncation {run.trunc_error:.2e}"
            )
        print_success(f"Trajectories written to [bold]{out_dir}[/bold]")


def cmd_compare(cfg: dict, out_dir: str, threads: int = 1, seedless: bool = False):
    params = system_params(cfg)
    sim = simulation_config(cfg)
    states = initial_states(cfg)
    if len(states) > 1:
        print_warning("compare uses only the first entry of initial_states")

    with _recorded("compare", cfg, out_dir, threads, seedless) as manifest:
        with spinner("Running TEBD, Lindblad and the closed form...") as p:
            p.add_task("")
            report = compare_run(
                params,
                sim,
                states[0],
                lindblad_config(cfg),
                cfg["compare"],
                density_dim=cfg["sweep"]["density_dim"],
                max_workers=threads,
            )
        print_compare_report(report)

        manifest.files.append(write_compare_json(report, os.path.join(out_dir, "report.json")))
        manifest.files.append(export_markdown(report, os.path.join(out_dir, "report.md")))
        tebd = report.methods.get("tebd")
        if tebd is not None and "trunc_error" in tebd.detail:
            manifest.trunc_error["tebd"] = tebd.detail["trunc_error"]
        manifest.convergence.update({name: m.status for name, m in report.methods.items()})
        steady = report.methods.get("lindblad_steady")
        if steady is not None and "converged" in steady.detail:
            manifest.convergence["lindblad_steady_converged"] = steady.detail["converged"]

        if report.failed_methods:
            raise NumericalError(f"sub-run failed: {', '.join(report.failed_methods)}")
        if not report.passed:
            failed = sum(not d.passed for d in report.deviations)
            raise ToleranceFailure(
                f"{failed} of {len(report.deviations)} checks outside tolerance"
            )
        print_success("All methods agree within tolerance.")


def cmd_chain_info(cfg: dict):
    params = system_params(cfg)
    sim = simulation_config(cfg)
    chain = build_chain(params, sim.n_sites)
    print_chain_info(chain, recurrence_time(chain))
    n_max = min(sim.n_sites - 2, 40)
    err = verify_legendre_orthonormality(n_max, n_max + 1, params.cutoff)
    print_info(f"Legendre basis orthonormal to {err:.1e} through order {n_max}")
    if sim.t_total > recurrence_time(chain):
        print_warning("simulation.t_total exceeds the recurrence time of this chain")


def cmd_doctor(cfg: dict) -> bool:
    return run_doctor(cfg)


def cmd_estimate(cfg: dict):
    sim = simulation_config(cfg)
    with spinner("Timing a saturated bond update...") as p:
        p.add_task("")
        est = estimate_runtime(sim)
    print_estimate(est)


def cmd_init_config(path: str, force: bool = False):
    written = write_default_config(path, force=force)
    print_success(f"Default config written to [bold]{written}[/bold]")


def cmd_show_config(cfg: dict, source: str | None = None):
    print_config(cfg, source)
