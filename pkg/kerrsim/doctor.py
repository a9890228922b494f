"""
doctor.py - Pre-flight checks for a kerrsim run: environment, machine and config sanity.
"""
import sys
from importlib import metadata

import psutil
from rich import box
from rich.table import Table

from .benchmark import mps_memory_bytes
from .config import initial_states, simulation_config, system_params
from .display import console
from .fock import coherent_truncation_loss, required_dim
from .mps import COHERENT_TRUNCATION_TOL

_PACKAGES = ("numpy", "scipy", "mpmath", "rich", "psutil")


def _check_python(cfg: dict) -> tuple[bool, str]:
    v = sys.version_info
    ok = v >= (3, 10)
    return ok, f"{v.major}.{v.minor}.{v.micro}"


def _check_packages(cfg: dict) -> tuple[bool, str]:
    found, missing = [], []
    for name in _PACKAGES:
        try:
            found.append(f"{name} {metadata.version(name)}")
        except metadata.PackageNotFoundError:
            missing.append(name)
    if missing:
        return False, f"missing: {', '.join(missing)}"
    return True, ", ".join(found)


def _check_cores(cfg: dict) -> tuple[bool, str]:
    physical = psutil.cpu_count(logical=False)
    logical = psutil.cpu_count(logical=True)
    if not physical:
        return False, "physical core count unavailable; --threads defaults to 1"
    return True, f"{physical} physical / {logical} logical"


def _check_ram(cfg: dict) -> tuple[bool, str]:
    need = mps_memory_bytes(simulation_config(cfg))
    available = psutil.virtual_memory().available
    detail = f"{need / 1024 ** 2:.1f} MB needed, {available / 1024 ** 3:.1f} GB available"
    # worker threads each hold a two-site workspace
    return need * 4 < available, detail


def _check_truncation(cfg: dict) -> tuple[bool, str]:
    sim = simulation_config(cfg)
    worst, need = 0.0, 0
    for state in initial_states(cfg):
        loss = coherent_truncation_loss(state.alpha, sim.local_dim)
        worst = max(worst, loss)
        need = max(need, required_dim(state.alpha, COHERENT_TRUNCATION_TOL))
    if worst > COHERENT_TRUNCATION_TOL:
        return False, f"norm loss {worst:.1e} at local_dim={sim.local_dim}; need {need}"
    return True, f"worst norm loss {worst:.1e} at local_dim={sim.local_dim}"


def _check_cutoff(cfg: dict) -> tuple[bool, str]:
    params = system_params(cfg)
    ratio = params.cutoff / params.gamma
    return ratio >= 5, f"cutoff/gamma = {ratio:.3g} (want >= 5)"


_CHECKS = [
    ("Python ≥ 3.10", _check_python),
    ("Packages", _check_packages),
    ("CPU cores", _check_cores),
    ("RAM for chain", _check_ram),
    ("Fock truncation", _check_truncation),
    ("Bath cutoff", _check_cutoff),
]


def run_doctor(cfg: dict) -> bool:
    """Run all health checks, print a summary table and return whether all passed."""
    table = Table(
        title="[bold cyan]kerrsim Doctor[/bold cyan]",
        box=box.ROUNDED,
        border_style="cyan",
    )
    table.add_column("Check", style="bold white", min_width=16)
    table.add_column("Status", justify="center", min_width=6)
    table.add_column("Details", style="dim")

    all_ok = True
    for label, check_fn in _CHECKS:
        try:
            ok, detail = check_fn(cfg)
        except Exception as e:
            ok, detail = False, f"check failed: {e}"
        if ok:
            status = "[bold green]✓  OK[/bold green]"
        else:
            status = "[bold yellow]⚠  WARN[/bold yellow]"
            all_ok = False
        table.add_row(label, status, detail)

    console.print()
    console.print(table)
    console.print()
    if all_ok:
        console.print("[bold green]All checks passed.[/bold green]")
    else:
        console.print("[yellow]Some checks returned warnings. See details above.[/yellow]")
    console.print()
    return all_ok
