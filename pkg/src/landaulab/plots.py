"""Plot-data emitter: tidy CSVs plus one SVG figure per series.

Consumers are scripts and plotting tools; figures are deterministic (no
timestamps in the SVG metadata).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .exponents import ExponentSet
from .harness import degiorgi_empirical
from .rundir import load_trajectory, write_fit_csv, write_new_file

PLOT_KINDS = ("smoothing", "entropy", "degiorgi")


def _save(fig, path: Path) -> None:
    if path.exists():
        raise FileExistsError(f"{path} already exists (run directories are append-only)")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plotdata(run_dir: Path, kind: str, out_dir: Path | None = None) -> list[Path]:
    """Write the tidy CSV and SVG for one series kind; returns written paths."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; valid kinds: {', '.join(PLOT_KINDS)}")
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run_dir / "plots"
    out.mkdir(parents=True, exist_ok=True)
    traj = load_trajectory(run_dir)
    th = traj.config.verify
    written = []

    if kind == "smoothing":
        t = np.asarray(traj.snapshot_times)
        linf = np.array([float(np.abs(f.values).max()) for f in traj.snapshot_fields])
        beta_star = float(ExponentSet.from_pm(th.p, th.m).beta_star)
        pos = t > 0
        anchor = np.argmax(pos)
        reference = np.full_like(linf, np.nan)
        reference[pos] = linf[anchor] * (t[pos] / t[anchor]) ** (-beta_star)
        written.append(write_fit_csv(out / "smoothing.csv",
                                     {"time": t, "linf": linf, "reference": reference}))
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.loglog(t[pos], linf[pos], "o-", ms=3, label=r"$\|f(t)\|_\infty$")
        ax.loglog(t[pos], reference[pos], "--",
                  label=rf"$t^{{-\beta^*}}$, $\beta^*={beta_star:.4f}$")
        ax.set_xlabel("t")
        ax.set_ylabel("sup norm")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, out / "smoothing.svg")
        written.append(out / "smoothing.svg")

    elif kind == "entropy":
        t = traj.times
        ent = traj.series(lambda r: r.entropy)
        written.append(write_fit_csv(out / "entropy.csv", {"time": t, "entropy": ent}))
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(t, ent, "-")
        ax.set_xlabel("t")
        ax.set_ylabel(r"$\int f \log f$")
        fig.tight_layout()
        _save(fig, out / "entropy.svg")
        written.append(out / "entropy.svg")

    else:  # degiorgi
        t_end = traj.snapshot_times[-1]
        verdict = degiorgi_empirical(traj, th.p, th.m,
                                     th.degiorgi_t_fraction * t_end, t_end, th)
        data = verdict.fit_data.get("degiorgi")
        if data is None:
            raise ValueError("trajectory has no level-set iterate data (A0 = 0)")
        written.append(write_fit_csv(out / "degiorgi.csv", data))
        fig, ax = plt.subplots(figsize=(5, 3.5))
        pos = data["A_n"] > 0
        ax.semilogy(data["n"][pos], data["A_n"][pos], "o", label=r"$A_n$")
        ax.semilogy(data["n"], data["barrier"], "--", label=r"$A_0 Q^{-n}$")
        ax.set_xlabel("n")
        ax.set_ylabel("level-set control")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, out / "degiorgi.svg")
        written.append(out / "degiorgi.svg")

    return written
