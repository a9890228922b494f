"""
display.py - Rich terminal UI for kerrsim.
"""
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table
from rich.text import Text

from .benchmark import RuntimeEstimate
from .chain import ChainCoefficients
from .runs import CompareReport, StatePoint, SweepRow

console = Console()

RATING_STYLES = {
    "Fast": ("bold green", "Fast ⚡"),
    "Moderate": ("bold yellow", "Moderate 🔄"),
    "Slow": ("dim yellow", "Slow 🐢"),
}

STATUS_STYLES = {
    "ok": "[bold green]✓  OK[/bold green]",
    "error": "[bold red]✗  ERROR[/bold red]",
}


def print_banner():
    from kerrsim import __version__
    banner = Text()
    banner.append("kerr", style="bold cyan")
    banner.append("sim", style="bold white")
    banner.append(f"  v{__version__}", style="dim cyan")
    banner.append("  |  Driven dissipative Kerr oscillator", style="dim white")
    console.print(Panel(banner, border_style="cyan", padding=(0, 2)))


def fmt(value, digits: int = 5) -> str:
    """Compact number for tables; None renders as a dash."""
    if value is None:
        return "[dim]–[/dim]"
    if isinstance(value, complex):
        return f"{value.real:.{digits}g}{value.imag:+.{digits}g}i"
    return f"{value:.{digits}g}"


def print_chain_info(chain: ChainCoefficients, t_recurrence: float, limit: int = 12):
    table = Table(
        title="[bold cyan]Bath Chain[/bold cyan]",
        box=box.ROUNDED,
        border_style="cyan",
        show_header=True,
        header_style="bold white",
    )
    table.add_column("Bond", justify="right", style="dim white")
    table.add_column("Sites", justify="center")
    table.add_column("Coupling", justify="right", style="white")

    couplings = chain.bond_couplings
    shown = couplings if len(couplings) <= limit else couplings[: limit - 2]
    for i, c in enumerate(shown):
        label = "η′ (system)" if i == 0 else f"η_{i - 1}"
        table.add_row(str(i), f"{i}–{i + 1}", f"{c:.10g}  [dim]{label}[/dim]")
    if len(shown) < len(couplings):
        table.add_row("…", "…", "[dim]…[/dim]")
        last = len(couplings) - 1
        table.add_row(str(last), f"{last}–{last + 1}", f"{couplings[last]:.10g}")

    console.print(table)
    console.print(
        f"  [dim]sites:[/dim] {chain.n_sites}   "
        f"[dim]on-site frequencies:[/dim] 0   "
        f"[dim]recurrence time:[/dim] [bold]{t_recurrence:.4g}[/bold] / g"
    )
    console.print()


def _point_cells(point: StatePoint | None) -> list[str]:
    if point is None:
        return ["[dim]–[/dim]"] * 5
    return [
        fmt(point.field, 4),
        fmt(point.n),
        fmt(point.g2),
        fmt(point.fidelity),
        fmt(point.non_gaussianity),
    ]


def print_sweep_table(rows: list[SweepRow]):
    table = Table(
        title="[bold cyan]Steady State vs Drive[/bold cyan]",
        box=box.SIMPLE_HEAVY,
        border_style="bright_black",
        show_header=True,
        header_style="bold dim white",
        padding=(0, 1),
    )
    table.add_column("E", justify="right", style="bold white")
    table.add_column("⟨a⟩", justify="right")
    table.add_column("⟨n⟩", justify="right")
    table.add_column("g²(0)", justify="right")
    table.add_column("F", justify="right")
    table.add_column("δ_NG", justify="right")
    n_tebd = max((len(r.tebd) for r in rows), default=0)
    for k in range(n_tebd):
        table.add_column(f"⟨n⟩ TEBD s{k}", justify="right", style="cyan")

    for row in rows:
        cells = [fmt(row.drive)] + _point_cells(row.analytic)
        cells += [fmt(p.n) for p in row.tebd]
        table.add_row(*cells)

    console.print(table)
    console.print()


def print_compare_report(report: CompareReport):
    table = Table(
        title=f"[bold cyan]Methods at E={fmt(report.drive)}[/bold cyan]",
        box=box.ROUNDED,
        border_style="cyan",
        show_header=True,
        header_style="bold white",
        padding=(0, 1),
    )
    table.add_column("Method", style="bold white")
    table.add_column("Status", justify="center")
    table.add_column("⟨a⟩", justify="right")
    table.add_column("⟨n⟩", justify="right")
    table.add_column("g²(0)", justify="right")
    table.add_column("F", justify="right")
    table.add_column("δ_NG", justify="right")
    for name, result in report.methods.items():
        table.add_row(name, STATUS_STYLES.get(result.status, result.status),
                      *_point_cells(result.point))
    console.print(table)

    checks = Table(
        title="[bold white]Deviations[/bold white]",
        box=box.SIMPLE_HEAVY,
        border_style="bright_black",
        show_header=True,
        header_style="bold dim white",
    )
    checks.add_column("Pair", style="white")
    checks.add_column("Quantity")
    checks.add_column("|Δ|", justify="right")
    checks.add_column("Tol", justify="right", style="dim")
    checks.add_column("", justify="center")
    for d in report.deviations:
        mark = "[bold green]✓[/bold green]" if d.passed else "[bold red]✗[/bold red]"
        checks.add_row(f"{d.pair[0]} / {d.pair[1]}", d.quantity, fmt(d.value, 3),
                       fmt(d.tolerance, 3), mark)
    console.print(checks)

    for name, result in report.methods.items():
        if result.error:
            console.print(f"  [red]{name}:[/red] [dim]{result.error}[/dim]")
    console.print()


def print_estimate(est: RuntimeEstimate):
    style, label = RATING_STYLES.get(est.rating, ("white", est.rating))
    table = Table(
        title="[bold cyan]Runtime Estimate[/bold cyan]",
        box=box.ROUNDED,
        border_style="cyan",
        show_header=False,
    )
    table.add_column("", style="dim white")
    table.add_column("", style="white")
    table.add_row("Bond update", f"{est.seconds_per_bond * 1e3:.3g} ms")
    table.add_row("Trotter step", f"{est.seconds_per_step:.3g} s")
    table.add_row("Steps", str(est.n_steps))
    table.add_row("Total", f"{est.total_seconds:.3g} s")
    table.add_row("Rating", f"[{style}]{label}[/{style}]")
    console.print(table)
    console.print(
        "[dim]Assumes every bond saturated at the configured bond dimension; early "
        "steps run faster.[/dim]"
    )
    console.print()


def print_error(msg: str):
    console.print(f"[bold red]Error:[/bold red] {msg}")


def print_warning(msg: str):
    console.print(f"[bold yellow]Warning:[/bold yellow] {msg}")


def print_success(msg: str):
    console.print(f"[bold green]OK:[/bold green] {msg}")


def print_info(msg: str):
    console.print(f"[dim cyan]>>[/dim cyan]  {msg}")


def spinner(message: str):
    return Progress(
        SpinnerColumn(),
        TextColumn(f"[cyan]{message}[/cyan]"),
        transient=True,
    )
