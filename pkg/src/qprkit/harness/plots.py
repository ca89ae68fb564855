"""Figure rendering for the harness reports.

Figures are a convenience companion to the CSV outputs (which remain the
machine-readable contract); every renderer writes PNG files next to the
CSVs it illustrates.
"""

from __future__ import annotations

import csv
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ..quantizer import Quantizer
from ..specfun import chi2_1_cdf


def _save(fig, out_dir: str, name: str) -> str:
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_run(out_dir: str, labels: list[str]) -> None:
    """Mean reconstruction SNR and consistency versus iteration, one curve
    per algorithm, from the mean_trace_*.csv files."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 3.8))
    for label in labels:
        path = os.path.join(out_dir, f"mean_trace_{label}.csv")
        if not os.path.exists(path):
            continue
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        it = np.array([int(r["iter"]) for r in rows])
        snr = np.array([float(r["mean_snr_db"]) for r in rows])
        std = np.array([float(r["std_snr_db"]) for r in rows])
        ups = np.array([float(r["mean_upsilon"]) for r in rows])
        ax1.plot(it, snr, label=label)
        ax1.fill_between(it, snr - std, snr + std, alpha=0.15)
        ax2.plot(it, ups, label=label)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("mean reconstruction SNR (dB)")
    ax1.legend(fontsize=8)
    ax1.grid(alpha=0.3)
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("mean consistency")
    ax2.set_ylim(0.0, 1.02)
    ax2.grid(alpha=0.3)
    _save(fig, out_dir, "run_curves.png")


def render_quantizer(out_dir: str, q: Quantizer, kind: str) -> None:
    """Intensity c.d.f. with the designed thresholds and symbols marked."""
    hi = float(q.symbols[-1]) * 1.25
    grid = np.linspace(0.0, hi, 400)
    cdf = [chi2_1_cdf(b) for b in grid]
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(grid, cdf, color="k")
    for t in q.thresholds:
        ax.axvline(t, color="tab:blue", lw=0.8, alpha=0.7)
    ax.plot(q.symbols, [chi2_1_cdf(min(s, hi)) for s in q.symbols], "r.", ms=7,
            label="symbols")
    ax.set_xlabel("intensity")
    ax.set_ylabel("c.d.f.")
    ax.set_title(f"{kind} quantizer, k={q.levels}")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, out_dir, f"quantizer_{kind}_{q.levels}.png")


def render_crb(out_dir: str, sweep_rows: list[dict], mse_cols: list[str]) -> None:
    """Reconstruction MSE curves against the two bound curves."""
    x = [r["input_snr_db"] for r in sweep_rows]
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    ax.plot(x, [r["crb_eq_db"] for r in sweep_rows], "k--", label="bound (eq)")
    if not any(r["crb_lmq_rank_deficient_frac"] > 0.5 for r in sweep_rows):
        ax.plot(x, [r["crb_lmq_db"] for r in sweep_rows], "k:", label="bound (lmq)")
    for col in mse_cols:
        ax.plot(x, [r[col] for r in sweep_rows], marker="o",
                label=col.replace("mse_", "").replace("_db", ""))
    ax.set_xlabel("input SNR (dB)")
    ax.set_ylabel("reconstruction MSE (dB)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, out_dir, "crb_sweep.png")


def render_analysis(out_dir: str, robust_rows: list[tuple]) -> None:
    """Minimum-measurement sweep curves plus the robustness profile."""
    path = os.path.join(out_dir, "bounds_sweep.csv")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 3.8))
    if os.path.exists(path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        rhos = sorted({float(r["rho"]) for r in rows})
        for rho in rhos:
            sel = [r for r in rows if float(r["rho"]) == rho and r["m_min"]]
            if not sel:
                continue
            ax1.semilogy(
                [float(r["delta"]) for r in sel],
                [int(r["m_min"]) for r in sel],
                label=f"rho={rho:g}",
            )
        ax1.set_xlabel("precision delta")
        ax1.set_ylabel("m_min")
        ax1.legend(fontsize=8)
        ax1.grid(alpha=0.3)
    ks = sorted({k for k, _, _ in robust_rows})
    for k in ks:
        pts = [(s2, p) for kk, s2, p in robust_rows if kk == k]
        ax2.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"k={k}")
    ax2.set_xlabel("noise variance")
    ax2.set_ylabel("robustness estimate")
    ax2.set_ylim(0, 1.02)
    ax2.legend(fontsize=8)
    ax2.grid(alpha=0.3)
    _save(fig, out_dir, "analysis.png")
