"""Figure rendering for the report path.

Each run that produces delimited data can also render matplotlib figures
next to those files.  Figures are a presentation layer only: nothing in the
audits or manifests depends on them, and the ``--no-plots`` flag disables
them entirely.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_histogram(csv_path: Path) -> Path:
    """Bar chart of the exact Gibbs energy-density histogram."""
    _, rows = _read_csv(csv_path)
    left = [float(r[0]) for r in rows]
    right = [float(r[1]) for r in rows]
    mass = [float(r[2]) for r in rows]
    width = [b - a for a, b in zip(left, right)]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(left, mass, width=width, align="edge", edgecolor="none")
    ax.set_xlabel("energy density H/N")
    ax.set_ylabel("Gibbs mass")
    ax.set_title(csv_path.stem)
    return _save(fig, csv_path.with_suffix(".png"))


def plot_concentration(csv_path: Path) -> Path:
    """Observed outside-mass per disorder sample against the proved bound."""
    _, rows = _read_csv(csv_path)
    idx = [int(r[0]) for r in rows]
    mass = [max(float(r[5]), 1e-300) for r in rows]
    bound = [float(r[6]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(idx, mass, "o", label="Gibbs mass outside")
    ax.semilogy(idx, bound, "k--", label="bound")
    ax.set_xlabel("disorder sample")
    ax.set_ylabel("mass")
    ax.set_title(csv_path.stem)
    ax.legend()
    return _save(fig, csv_path.with_suffix(".png"))


def plot_tail(csv_path: Path) -> Path:
    """Margin of the exponential tail bound over the (epsilon, lambda) grid."""
    _, rows = _read_csv(csv_path)
    eps = [float(r[1]) for r in rows]
    margin = [float(r[10]) - max(float(r[8]), float(r[9])) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(eps, margin, "o")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("bound minus observed tail mass")
    ax.set_title(csv_path.stem)
    return _save(fig, csv_path.with_suffix(".png"))


def plot_moment(csv_path: Path) -> Path:
    _, rows = _read_csv(csv_path)
    idx = [int(r[0]) for r in rows]
    lhs = [float(r[3]) for r in rows]
    rhs = [float(r[4]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(idx, lhs, "o", label="first absolute moment")
    ax.plot(idx, rhs, "k--", label="bound")
    ax.set_xlabel("disorder sample")
    ax.set_ylabel("value")
    ax.set_title(csv_path.stem)
    ax.legend()
    return _save(fig, csv_path.with_suffix(".png"))


def plot_gg(csv_path: Path) -> Path:
    """Residual of the overlap identity with error bars against its bound."""
    _, rows = _read_csv(csv_path)
    ns = [int(r[0]) for r in rows]
    res = [abs(float(r[4])) for r in rows]
    err = [float(r[5]) for r in rows]
    bound = [float(r[6]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ns, res, yerr=err, fmt="o", label="|residual|")
    ax.plot(ns, bound, "k--", label="bound")
    ax.set_xlabel("N")
    ax.set_ylabel("value")
    ax.set_title(csv_path.stem)
    ax.legend()
    return _save(fig, csv_path.with_suffix(".png"))


def plot_traces(csv_path: Path) -> Path:
    """Energy-density traces per ladder temperature."""
    _, rows = _read_csv(csv_path)
    series: dict[str, tuple[list[int], list[float]]] = {}
    for r in rows:
        t, beta, u = int(r[0]), r[1], float(r[2])
        series.setdefault(beta, ([], []))
        series[beta][0].append(t)
        series[beta][1].append(u)
    fig, ax = plt.subplots(figsize=(7, 4))
    for beta, (ts, us) in series.items():
        ax.plot(ts, us, lw=0.7, label=f"beta={beta}")
    ax.set_xlabel("sweep")
    ax.set_ylabel("H/N")
    ax.set_title(csv_path.stem)
    ax.legend(fontsize=7)
    return _save(fig, csv_path.with_suffix(".png"))


def plot_trend(csv_path: Path) -> Path:
    """Mean metric against N with stderr bars."""
    header, rows = _read_csv(csv_path)
    ns = [int(r[0]) for r in rows]
    mean = [float(r[1]) for r in rows]
    err = [float(r[2]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ns, mean, yerr=err, fmt="o-")
    ax.set_xlabel("N")
    ax.set_ylabel(header[1])
    ax.set_title(csv_path.stem)
    return _save(fig, csv_path.with_suffix(".png"))


_BY_PREFIX = {
    "histogram": plot_histogram,
    "concentration": plot_concentration,
    "tail": plot_tail,
    "moment": plot_moment,
    "gg": plot_gg,
    "traces": plot_traces,
    "epsilon-trend": plot_trend,
    "free-energy-trend": plot_trend,
    "l1-trend": plot_trend,
    "gg-trend": plot_trend,
}


def render_for_run(config, files: list[Path]) -> list[Path]:
    """Render a figure next to every CSV whose name has a known prefix."""
    rendered = []
    for path in files:
        if path.suffix != ".csv":
            continue
        stem = path.stem
        for prefix in sorted(_BY_PREFIX, key=len, reverse=True):
            if stem == prefix or stem.startswith(prefix + "-"):
                rendered.append(_BY_PREFIX[prefix](path))
                break
    return rendered
