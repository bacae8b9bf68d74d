"""CSV and plot emission for sweep results.

CSV files are RFC-4180-style (CRLF rows) with floats printed by repr, so
rereading reproduces the stored doubles exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .sweep import SweepResult


def _fmt(x) -> str:
    return repr(float(x))


def emit_report(result: SweepResult, out_dir) -> dict:
    """Write sweep.csv, result.json and (for nonempty sweeps) a log-log plot.

    Returns the paths written, keyed by artifact name.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mass", "error", "sbar_sup", "dt_used"])
        for mass, err, sbar in zip(result.masses, result.errors, result.sbar_sup):
            writer.writerow([_fmt(mass), _fmt(err), _fmt(sbar), _fmt(result.dt_used)])
    paths["csv"] = csv_path

    json_path = out / "result.json"
    json_path.write_text(result.to_json(), encoding="utf-8")
    paths["json"] = json_path

    plot_points = [
        (m, e)
        for m, e, st in zip(result.masses, result.errors, result.statuses)
        if st == "ok" and e == e and e > 0
    ]
    if plot_points:
        paths["plot"] = _emit_plot(result, plot_points, out / "sweep.png")
    return paths


def _emit_plot(result: SweepResult, points, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    masses = [m for m, _ in points]
    errors = [e for _, e in points]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(masses, errors, "ko", label="measured error")
    fit = result.rates_by_index.get(repr_key_of_primary(result))
    if fit is not None:
        line = [10 ** fit["intercept"] * m ** (-fit["rate"]) for m in masses]
        ax.loglog(
            masses, line, "k--", label=f"fit: slope {-fit['rate']:.3f}"
        )
    ax.set_xlabel("field mass m")
    ax.set_ylabel("sup-in-time error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def repr_key_of_primary(result: SweepResult) -> str:
    # the primary measurement index is the one whose curve equals result.errors
    for key, values in result.errors_by_index.items():
        if values == result.errors:
            return key
    return next(iter(result.errors_by_index), "")


def read_sweep_csv(path) -> list[dict]:
    """Read a sweep.csv, returning one dict of floats per data row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in reader]
