"""Run directory layout and CSV/binary persistence.

A run directory is append-only:

    <out>/config.json        byte-identical copy of the input configuration
    <out>/diagnostics.csv    one row per accepted step, fixed header
    <out>/snapshots/t_<i>.f64 (+ .meta sidecars)
    <out>/run.summary        key=value facts and sha256 checksums

`verify` and `plotdata` later add verdicts.csv, fit CSVs, and plot files;
re-running into an existing file is an error.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_config_text, serialize_config
from .fields import DiagnosticsRecord
from .grid import ScalarField, read_snapshot, write_snapshot
from .solver import Trajectory


class RunDirectoryError(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), "g")


def diagnostics_header(p_list, k_list) -> str:
    cols = ["time", "mass", "momentum_x", "momentum_y", "momentum_z", "energy", "entropy"]
    cols += [f"lp_{_fmt(p)}" for p in p_list]
    cols.append("linf")
    for k in k_list:
        cols += [f"l1m_{_fmt(k)}", f"l1m_{_fmt(k)}_tail"]
    cols += [f"diss_{_fmt(p)}" for p in p_list]
    return ",".join(cols)


def record_row(rec: DiagnosticsRecord, p_list, k_list) -> str:
    vals = [rec.time, rec.mass, *rec.momentum, rec.energy, rec.entropy]
    vals += [rec.lp[float(p)] for p in p_list]
    vals.append(rec.linf)
    for k in k_list:
        vals += [rec.moments[float(k)], rec.moment_tails[float(k)]]
    vals += [rec.dissipation[float(p)] for p in p_list]
    return ",".join(repr(float(v)) for v in vals)


def diagnostics_text(records, p_list, k_list) -> str:
    lines = [diagnostics_header(p_list, k_list)]
    lines += [record_row(rec, p_list, k_list) for rec in records]
    return "\n".join(lines) + "\n"


def parse_diagnostics(text: str) -> list[DiagnosticsRecord]:
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    p_list = [float(c[3:]) for c in header if c.startswith("lp_")]
    k_list = [float(c[4:]) for c in header if c.startswith("l1m_") and not c.endswith("_tail")]
    records = []
    for line in lines[1:]:
        vals = dict(zip(header, (float(x) for x in line.split(","))))
        records.append(DiagnosticsRecord(
            time=vals["time"], mass=vals["mass"],
            momentum=(vals["momentum_x"], vals["momentum_y"], vals["momentum_z"]),
            energy=vals["energy"], entropy=vals["entropy"],
            lp={p: vals[f"lp_{_fmt(p)}"] for p in p_list},
            linf=vals["linf"],
            moments={k: vals[f"l1m_{_fmt(k)}"] for k in k_list},
            moment_tails={k: vals[f"l1m_{_fmt(k)}_tail"] for k in k_list},
            dissipation={p: vals[f"diss_{_fmt(p)}"] for p in p_list}))
    return records


def _sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def write_run_directory(out: Path, traj: Trajectory, config_text: str | None = None) -> Path:
    """Persist a trajectory.  ``config_text`` is copied byte-identically when
    given (the CLI passes the original file contents); otherwise the canonical
    serialization is used."""
    out = Path(out)
    if out.exists() and any(out.iterdir()):
        raise RunDirectoryError(f"run directory {out} already exists and is not empty")
    out.mkdir(parents=True, exist_ok=True)
    cfg = traj.config
    text = config_text if config_text is not None else serialize_config(cfg)
    (out / "config.json").write_text(text)
    (out / "diagnostics.csv").write_text(
        diagnostics_text(traj.records, cfg.p_list, cfg.k_list))
    snapdir = out / "snapshots"
    snapdir.mkdir()
    for i, (t, f) in enumerate(zip(traj.snapshot_times, traj.snapshot_fields)):
        write_snapshot(f, snapdir / f"t_{i:04d}.f64", t)
    summary = {
        "package": "landaulab",
        "outcome": traj.outcome,
        "steps": len(traj.dt_history),
        "snapshots": len(traj.snapshot_times),
        "total_clamped_mass": repr(sum(s.clamped_mass for s in traj.step_stats)),
        "max_repaired_mass": repr(max((abs(s.repaired_mass) for s in traj.step_stats),
                                      default=0.0)),
        "config_canonical": json.dumps(json.loads(serialize_config(cfg)),
                                       separators=(",", ":")),
    }
    lines = [f"{k}={v}" for k, v in summary.items()]
    for path in sorted(p for p in out.rglob("*") if p.is_file()):
        lines.append(f"checksum_{path.relative_to(out)}={_sha256(path)}")
    (out / "run.summary").write_text("\n".join(lines) + "\n")
    return out


def load_trajectory(run_dir: Path) -> Trajectory:
    """Rebuild a Trajectory (without per-step stats) from a run directory."""
    run_dir = Path(run_dir)
    config = parse_config_text((run_dir / "config.json").read_text(),
                               source=str(run_dir / "config.json"))
    records = parse_diagnostics((run_dir / "diagnostics.csv").read_text())
    snapshots = sorted((run_dir / "snapshots").glob("t_*.f64"))
    fields: list[ScalarField] = []
    times: list[float] = []
    for path in snapshots:
        f, t = read_snapshot(path)
        fields.append(f)
        times.append(t)
    dts = [b.time - a.time for a, b in zip(records[:-1], records[1:])]
    outcome = "completed"
    summary = run_dir / "run.summary"
    if summary.exists():
        for line in summary.read_text().splitlines():
            if line.startswith("outcome="):
                outcome = line.split("=", 1)[1]
    return Trajectory(config=config, snapshot_times=times, snapshot_fields=fields,
                      records=records, dt_history=dts, step_stats=[], outcome=outcome)


def write_new_file(path: Path, text: str) -> Path:
    """Append-only discipline: refuse to overwrite existing artifacts."""
    path = Path(path)
    if path.exists():
        raise RunDirectoryError(f"{path} already exists (run directories are append-only)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_fit_csv(path: Path, columns: dict) -> Path:
    keys = list(columns)
    rows = zip(*(np.asarray(columns[k], dtype=float) for k in keys))
    text = ",".join(keys) + "\n" + "\n".join(
        ",".join(repr(float(v)) for v in row) for row in rows) + "\n"
    return write_new_file(path, text)
