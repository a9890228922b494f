"""
config.py - The JSON run document: defaults, loading, validation and domain builders.

A run is described by one JSON file. Anything it leaves out falls back to
DEFAULT_CONFIG; unknown keys are errors, so a typo in a physics parameter never
passes silently.
"""
import copy
import hashlib
import json
import os

from .errors import ConfigError, OutputError
from .lindblad import LindbladConfig
from .model import InitialState, SimulationConfig, SystemParams
from .observables import GridSpec

SCHEMA_VERSION = 1

# Reference bistable Kerr oscillator, all rates in units of the coupling g.
DEFAULT_CONFIG: dict = {
    "schema_version": SCHEMA_VERSION,
    "system": {
        "delta": -12.0,
        "chi2": 1.5,
        "gamma": 6.28,
        "drive_re": 1.0,
        "drive_im": 0.0,
        "cutoff": 60.0,
    },
    "simulation": {
        "n_sites": 61,
        "local_dim": 20,
        "bond_dim": 36,
        "dt": 0.01,
        "t_total": 2.0,
        "snapshot_stride": 1,
    },
    "initial_states": [
        {"amplitude": 0.0, "phase_pi": 0.0},
    ],
    "sweep": {
        "drives": [1.0, 8.0, 10.0, 20.0],
        "tebd_columns": False,
        "wigner_maps": False,
        "density_dim": 30,
    },
    "wigner": {
        "x_min": -5.0,
        "x_max": 5.0,
        "p_min": -5.0,
        "p_max": 5.0,
        "nx": 81,
        "np": 81,
        "times": [0.1, 0.3, 0.8, 2.0],
    },
    "lindblad": {
        "dim": 30,
        "dt": 0.001,
        "t_total": 2.0,
    },
    "compare": {
        "tol_field": 0.05,
        "tol_n": 0.05,
        "tol_g2": 0.05,
        "tol_nongauss": 0.05,
    },
}

# Template for each entry of the initial_states list.
_INITIAL_STATE_TEMPLATE = {"amplitude": 0.0, "phase_pi": 0.0}


def _merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; lists and scalars in override replace the base value."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_type(path: str, value, default, problems: list[str]) -> None:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            problems.append(f"{path}: expected true/false, got {value!r}")
    elif isinstance(default, int):
        if not isinstance(value, int) or isinstance(value, bool):
            problems.append(f"{path}: expected an integer, got {value!r}")
    elif isinstance(default, float):
        if not _is_number(value):
            problems.append(f"{path}: expected a number, got {value!r}")
    elif isinstance(default, list):
        if not isinstance(value, list):
            problems.append(f"{path}: expected a list, got {value!r}")
    elif isinstance(default, dict):
        if not isinstance(value, dict):
            problems.append(f"{path}: expected an object, got {value!r}")
        else:
            _check_keys(value, default, path, problems)


def _check_keys(section: dict, template: dict, prefix: str, problems: list[str]) -> None:
    for key, value in section.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in template:
            problems.append(f"{path}: unknown key")
            continue
        _check_type(path, value, template[key], problems)
    for key in template:
        if key not in section:
            path = f"{prefix}.{key}" if prefix else key
            problems.append(f"{path}: missing")


def _check_number_list(path: str, values, problems: list[str], allow_empty: bool) -> bool:
    if not isinstance(values, list):
        return False
    if not values and not allow_empty:
        problems.append(f"{path}: must not be empty")
        return False
    ok = True
    for i, v in enumerate(values):
        if not _is_number(v):
            problems.append(f"{path}[{i}]: expected a number, got {v!r}")
            ok = False
        elif v < 0:
            problems.append(f"{path}[{i}]: must be >= 0, got {v}")
            ok = False
    return ok


def _collect(section: str, build, problems: list[str]):
    try:
        return build()
    except (ValueError, TypeError, KeyError) as e:
        for message in str(e).split("; "):
            problems.append(f"{section}: {message}")
        return None


def validate_config(cfg, command: str | None = None) -> list[str]:
    """Every schema violation in cfg; an empty list means the document is valid.

    With `command`, that subcommand's own requirements are checked as well.
    """
    if not isinstance(cfg, dict):
        return ["config must be a JSON object"]
    problems: list[str] = []
    _check_keys(cfg, DEFAULT_CONFIG, "", problems)
    if cfg.get("schema_version") != SCHEMA_VERSION:
        problems.append(
            f"schema_version: expected {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}"
        )
    if problems:
        # builders below assume well-typed sections
        return problems

    states = cfg["initial_states"]
    if not states:
        problems.append("initial_states: must not be empty")
    for i, state in enumerate(states):
        path = f"initial_states[{i}]"
        if not isinstance(state, dict):
            problems.append(f"{path}: expected an object, got {state!r}")
            continue
        _check_keys(state, _INITIAL_STATE_TEMPLATE, path, problems)
    _check_number_list("sweep.drives", cfg["sweep"]["drives"], problems, allow_empty=False)
    if cfg["sweep"]["density_dim"] < 2:
        problems.append(f"sweep.density_dim: must be >= 2, got {cfg['sweep']['density_dim']}")
    times_ok = _check_number_list(
        "wigner.times", cfg["wigner"]["times"], problems, allow_empty=True
    )
    for key, value in cfg["compare"].items():
        if value < 0:
            problems.append(f"compare.{key}: must be >= 0, got {value}")
    if problems:
        return problems

    _collect("system", lambda: system_params(cfg), problems)
    sim = _collect("simulation", lambda: simulation_config(cfg), problems)
    _collect("initial_states", lambda: initial_states(cfg), problems)
    _collect("wigner", lambda: grid_spec(cfg), problems)
    _collect("lindblad", lambda: lindblad_config(cfg), problems)

    if sim is not None and times_ok:
        for i, t in enumerate(cfg["wigner"]["times"]):
            if t > sim.n_steps * sim.dt + 1e-9:
                problems.append(f"wigner.times[{i}]: {t} is beyond simulation.t_total")
                continue
            step = round(t / sim.dt)
            on_stride = step % sim.snapshot_stride == 0 or step == sim.n_steps
            if abs(step * sim.dt - t) > 1e-9 or not on_stride:
                problems.append(
                    f"wigner.times[{i}]: {t} does not fall on a snapshot "
                    f"(dt={sim.dt}, snapshot_stride={sim.snapshot_stride})"
                )
    if not problems:
        problems += command_problems(cfg, command)
    return problems


def _steady_sweep_problems(cfg: dict) -> list[str]:
    # the closed form is written for a real drive and a nonzero Kerr coefficient
    problems = []
    if cfg["system"]["drive_im"] != 0:
        problems.append(
            "system.drive_im: the steady-state sweep uses real drive amplitudes; set it to 0"
        )
    if cfg["system"]["chi2"] == 0:
        problems.append(
            "system.chi2: the exact steady state needs chi2 != 0; "
            "use evolve or compare for the linear cavity"
        )
    return problems


_COMMAND_CHECKS = {
    "steady-sweep": _steady_sweep_problems,
}


def command_problems(cfg: dict, command: str | None) -> list[str]:
    """Extra requirements a particular subcommand places on a valid document."""
    check = _COMMAND_CHECKS.get(command)
    return check(cfg) if check is not None else []


def load_config(path: str | None = None, command: str | None = None) -> dict:
    """Read a run document, merge it over DEFAULT_CONFIG and validate it."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                user_cfg = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e.strerror or e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        if not isinstance(user_cfg, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        if "config_hash" in user_cfg and isinstance(user_cfg.get("config"), dict):
            # a run manifest; rerun the document it recorded
            user_cfg = user_cfg["config"]
        cfg = _merge(cfg, user_cfg)
    problems = validate_config(cfg, command)
    if problems:
        raise ConfigError(problems)
    return cfg


def write_default_config(path: str, force: bool = False) -> str:
    """Write DEFAULT_CONFIG as an editable starting point."""
    if os.path.exists(path) and not force:
        raise OutputError(f"{path} already exists; pass --force to overwrite")
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(DEFAULT_CONFIG, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e
    return os.path.abspath(path)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON encoding."""
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --- builders -------------------------------------------------------------------

def system_params(cfg: dict) -> SystemParams:
    s = cfg["system"]
    return SystemParams(
        delta=float(s["delta"]),
        chi2=float(s["chi2"]),
        gamma=float(s["gamma"]),
        drive=complex(s["drive_re"], s["drive_im"]),
        cutoff=float(s["cutoff"]),
    )


def simulation_config(cfg: dict) -> SimulationConfig:
    s = cfg["simulation"]
    return SimulationConfig(
        n_sites=s["n_sites"],
        local_dim=s["local_dim"],
        bond_dim=s["bond_dim"],
        dt=float(s["dt"]),
        t_total=float(s["t_total"]),
        snapshot_stride=s["snapshot_stride"],
    )


def initial_states(cfg: dict) -> list[InitialState]:
    return [
        InitialState.from_pi(float(s["amplitude"]), float(s["phase_pi"]))
        for s in cfg["initial_states"]
    ]


def lindblad_config(cfg: dict) -> LindbladConfig:
    s = cfg["lindblad"]
    return LindbladConfig(dim=s["dim"], dt=float(s["dt"]), t_total=float(s["t_total"]))


def grid_spec(cfg: dict) -> GridSpec:
    w = cfg["wigner"]
    return GridSpec(
        x_min=float(w["x_min"]),
        x_max=float(w["x_max"]),
        p_min=float(w["p_min"]),
        p_max=float(w["p_max"]),
        nx=w["nx"],
        np=w["np"],
    )


def _flatten(section, prefix: str = "") -> dict:
    out = {}
    if isinstance(section, dict):
        for key, value in section.items():
            path = f"{prefix}.{key}" if prefix else key
            if isinstance(value, dict):
                out.update(_flatten(value, path))
            else:
                out[path] = value
    return out


def print_config(cfg: dict, source: str | None = None) -> None:
    """Print every leaf key of cfg next to its default, changed values highlighted."""
    from rich import box
    from rich.table import Table

    from .display import console

    title = "[bold cyan]Run config[/bold cyan]"
    title += f"  [dim]({source})[/dim]" if source else "  [dim](defaults)[/dim]"
    table = Table(title=title, box=box.ROUNDED, border_style="cyan")
    table.add_column("Key", style="bold white")
    table.add_column("Value", style="white")
    table.add_column("Default", style="dim")

    defaults = _flatten(DEFAULT_CONFIG)
    for key, current in _flatten(cfg).items():
        default = defaults.get(key)
        is_changed = current != default
        val_style = "bold yellow" if is_changed else "white"
        table.add_row(key, f"[{val_style}]{current!r}[/{val_style}]", repr(default))

    console.print(table)
    console.print(f"\n[dim]config hash:[/dim] {config_hash(cfg)[:16]}")
