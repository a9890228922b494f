"""
exporter.py - Write run results to disk: CSV tables, Wigner frames, JSON reports and
the per-directory run manifest.

Floats are written with 17 significant digits so every value reads back bit-exact.
"""
import cmath
import csv
import json
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime

import numpy as np
import psutil

from .errors import OutputError
from .mps import MPSState, save_checkpoint
from .observables import WignerGrid
from .runs import CompareReport, EvolutionRun, StatePoint, SweepRow

MANIFEST_NAME = "manifest.json"


def format_float(x) -> str:
    """Shortest text that round-trips a double; undefined values as nan."""
    if x is None:
        return "nan"
    return f"{float(x):.17g}"


def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _open(path: str, newline: str | None = None):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        return open(path, "w", encoding="utf-8", newline=newline)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e


def _write_json(path: str, payload) -> str:
    f = _open(path)
    try:
        with f:
            json.dump(payload, f, indent=2, default=_jsonable)
            f.write("\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e
    return os.path.abspath(path)


def _write_rows(path: str, header: list[str], rows) -> str:
    f = _open(path, newline="")
    try:
        with f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e
    return os.path.abspath(path)


# --- sweep ------------------------------------------------------------------------

SWEEP_COLUMNS = [
    "E", "re_alpha", "im_alpha", "abs_alpha", "arg_alpha", "n", "g2", "fidelity",
    "non_gaussianity",
]
TEBD_SWEEP_COLUMNS = ["re_alpha", "im_alpha", "n", "g2", "fidelity", "non_gaussianity",
                      "trunc_error"]


def _point_cells(point: StatePoint) -> list[str]:
    a = point.field
    return [
        format_float(a.real),
        format_float(a.imag),
        format_float(abs(a)),
        format_float(cmath.phase(a)),
        format_float(point.n),
        format_float(point.g2),
        format_float(point.fidelity),
        format_float(point.non_gaussianity),
    ]


def write_sweep_csv(rows: list[SweepRow], path: str) -> str:
    n_tebd = max((len(r.tebd) for r in rows), default=0)
    header = list(SWEEP_COLUMNS)
    for k in range(n_tebd):
        header += [f"tebd{k}_{c}" for c in TEBD_SWEEP_COLUMNS]

    def _cells(row: SweepRow) -> list[str]:
        cells = [format_float(row.drive)] + _point_cells(row.analytic)
        for point, trunc in zip(row.tebd, row.trunc_errors):
            cells += [
                format_float(point.field.real),
                format_float(point.field.imag),
                format_float(point.n),
                format_float(point.g2),
                format_float(point.fidelity),
                format_float(point.non_gaussianity),
                format_float(trunc),
            ]
        return cells

    return _write_rows(path, header, (_cells(r) for r in rows))


# --- trajectories and frames -------------------------------------------------------

TRAJECTORY_COLUMNS = [
    "method", "t", "re_alpha", "im_alpha", "n", "g2", "fidelity", "non_gaussianity",
    "trunc_error",
]


def write_trajectory_csv(run: EvolutionRun, path: str) -> str:
    rows = (
        [
            run.method,
            format_float(r.time),
            format_float(r.point.field.real),
            format_float(r.point.field.imag),
            format_float(r.point.n),
            format_float(r.point.g2),
            format_float(r.point.fidelity),
            format_float(r.point.non_gaussianity),
            format_float(r.trunc_error),
        ]
        for r in run.rows
    )
    return _write_rows(path, TRAJECTORY_COLUMNS, rows)


def frame_name(t: float) -> str:
    """Fixed-width time stamp so a lexical sort of frame files is temporal."""
    return f"frame_t{t:010.4f}.csv"


def write_wigner_grid(grid: WignerGrid, path: str) -> str:
    """Matrix CSV (row i at x_i, column j at p_j) plus a JSON sidecar next to it."""
    rows = ([format_float(v) for v in row] for row in np.asarray(grid.values))
    f = _open(path, newline="")
    try:
        with f:
            csv.writer(f, lineterminator="\n").writerows(rows)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e
    sidecar = {
        "x_range": list(grid.x_range),
        "p_range": list(grid.p_range),
        "nx": grid.nx,
        "np": grid.np,
        "axes": "rows are Re(alpha), columns are Im(alpha)",
        **grid.metadata,
    }
    _write_json(os.path.splitext(path)[0] + ".json", sidecar)
    return os.path.abspath(path)


def write_frames(frames: list[WignerGrid], directory: str) -> list[str]:
    return [
        write_wigner_grid(frame, os.path.join(directory, frame_name(frame.metadata["time"])))
        for frame in frames
    ]


def write_checkpoint(state: MPSState, path: str) -> str:
    """Final chain state in the binary checkpoint layout; load it with mps.load_checkpoint."""
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        save_checkpoint(state, path)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e
    return os.path.abspath(path)


# --- compare -----------------------------------------------------------------------

def compare_payload(report: CompareReport) -> dict:
    methods = {}
    for name, m in report.methods.items():
        methods[name] = {
            "status": m.status,
            "error": m.error,
            "point": asdict(m.point) if m.point is not None else None,
            "detail": m.detail,
        }
    return {
        "drive": report.drive,
        "t_final": report.t_final,
        "passed": report.passed,
        "failed_methods": report.failed_methods,
        "methods": methods,
        "deviations": [
            {
                "pair": list(d.pair),
                "quantity": d.quantity,
                "value": d.value,
                "tolerance": d.tolerance,
                "passed": d.passed,
            }
            for d in report.deviations
        ],
    }


def write_compare_json(report: CompareReport, path: str) -> str:
    return _write_json(path, compare_payload(report))


def _md(value) -> str:
    if value is None:
        return "–"
    if isinstance(value, complex):
        return f"{value.real:.6g}{value.imag:+.6g}i"
    return f"{value:.6g}"


def export_markdown(report: CompareReport, output_path: str) -> str:
    lines = []
    now = datetime.now().strftime("%Y-%m-%d %H:%M:%S")

    lines.append("# kerrsim Oracle Comparison")
    lines.append(f"\n> Generated: {now}\n")
    verdict = "PASS" if report.passed else "FAIL"
    lines.append(f"**Result:** {verdict}  (E = {_md(report.drive)}, t = {_md(report.t_final)})\n")

    lines.append("## Methods\n")
    lines.append("| Method | Status | ⟨a⟩ | ⟨n⟩ | g²(0) | Fidelity | Non-Gaussianity |")
    lines.append("|--------|--------|-----|-----|-------|----------|-----------------|")
    for name, m in report.methods.items():
        p = m.point
        if p is None:
            lines.append(f"| {name} | {m.status} | – | – | – | – | – |")
            continue
        lines.append(
            f"| {name} | {m.status} | {_md(p.field)} | {_md(p.n)} | {_md(p.g2)} "
            f"| {_md(p.fidelity)} | {_md(p.non_gaussianity)} |"
        )
    lines.append("")

    lines.append("## Deviations\n")
    lines.append("| Pair | Quantity | abs. deviation | Tolerance | Pass |")
    lines.append("|------|----------|----------------|-----------|------|")
    for d in report.deviations:
        mark = "✔" if d.passed else "✘"
        lines.append(
            f"| {d.pair[0]} / {d.pair[1]} | {d.quantity} | {_md(d.value)} "
            f"| {_md(d.tolerance)} | {mark} |"
        )
    lines.append("")

    errors = [(n, m.error) for n, m in report.methods.items() if m.error]
    if errors:
        lines.append("## Errors\n")
        for name, message in errors:
            lines.append(f"- **{name}**: {message}")
        lines.append("")

    f = _open(output_path)
    try:
        with f:
            f.write("\n".join(lines))
    except OSError as e:
        raise OutputError(f"cannot write {output_path}: {e.strerror or e}") from e
    return os.path.abspath(output_path)


# --- manifest ----------------------------------------------------------------------

def host_snapshot() -> dict:
    vm = psutil.virtual_memory()
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "physical_cores": psutil.cpu_count(logical=False),
        "logical_cores": psutil.cpu_count(logical=True),
        "ram_total_gb": round(vm.total / 1024 ** 3, 2),
        "ram_available_gb": round(vm.available / 1024 ** 3, 2),
    }


@dataclass
class RunManifest:
    command: str
    config_hash: str
    config: dict
    version: str
    wall_clock_seconds: float = 0.0
    trunc_error: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    partial: bool = False
    threads: int = 1
    seedless: bool = False
    host: dict = field(default_factory=dict)
    started: float = field(default_factory=time.time)


def write_manifest(manifest: RunManifest, directory: str) -> str:
    """Write (or replace) the single manifest of an output directory."""
    if not manifest.host:
        manifest.host = host_snapshot()
    payload = asdict(manifest)
    payload["files"] = sorted(os.path.relpath(p, directory) for p in manifest.files)
    return _write_json(os.path.join(directory, MANIFEST_NAME), payload)


def read_manifest(path: str) -> RunManifest:
    """Load a manifest back; its `config` reproduces the run."""
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise OutputError(f"cannot read manifest {path}: {e}") from e
    known = set(RunManifest.__dataclass_fields__)
    return RunManifest(**{k: v for k, v in data.items() if k in known})
