"""Figure rendering for run artifacts.

Everything draws through the Agg backend straight to files; no display is
ever opened.  Each function returns the path it wrote so callers can log it.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np


def plot_microstructure(phase: np.ndarray, path):
    """Phase-index map: step plot (1d), image (2d), or the middle slice (3d)."""
    d = phase.ndim
    fig, ax = plt.subplots(figsize=(5, 4))
    if d == 1:
        ax.step(np.arange(len(phase)), phase, where="mid")
        ax.set_xlabel("voxel")
        ax.set_ylabel("phase")
    else:
        img = phase if d == 2 else phase[:, :, phase.shape[2] // 2]
        im = ax.imshow(img.T, origin="lower", interpolation="nearest")
        fig.colorbar(im, ax=ax, label="phase")
        ax.set_xlabel("x voxel")
        ax.set_ylabel("y voxel")
        if d == 3:
            ax.set_title("slice z = %d" % (phase.shape[2] // 2))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_residuals(reports, path):
    """Relative residual per iteration, one curve per solve."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for rep in reports:
        if not rep.residuals:
            continue
        ax.semilogy(np.arange(1, len(rep.residuals) + 1), rep.residuals,
                    label="N=%d %s" % (rep.n, rep.solver))
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative residual")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(result, path):
    """Homogenized value vs N next to the log-log error decay."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    ns = [row.n for row in result.rows]
    left.plot(ns, [row.scalar for row in result.rows], "o-")
    left.axhline(result.reference_scalar, color="gray", linestyle="--",
                 label="reference")
    left.set_xscale("log", base=2)
    left.set_xlabel("N")
    left.set_ylabel("homogenized value")
    left.legend()
    pairs = result.errors()
    if pairs:
        hs = [h for h, _ in pairs]
        errs = [e for _, e in pairs]
        right.loglog(hs, errs, "o-", label="error")
        if result.fit is not None:
            hfit = np.array([min(hs), max(hs)])
            anchor = errs[-1] / hs[-1] ** result.fit.alpha
            right.loglog(hfit, anchor * hfit ** result.fit.alpha, "--",
                         label="slope %.2f" % result.fit.alpha)
        right.legend()
    right.set_xlabel("h")
    right.set_ylabel("|value - reference|")
    right.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_bench(rows, path):
    """Wall time against N per thread count, efficiency against threads."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    by_threads = {}
    for row in rows:
        by_threads.setdefault(row.threads, []).append(row)
    for threads, group in sorted(by_threads.items()):
        left.loglog([r.n for r in group], [r.wall_time for r in group], "o-",
                    label="P=%d" % threads)
    left.set_xlabel("N")
    left.set_ylabel("wall time [s]")
    left.legend()
    left.grid(True, which="both", alpha=0.3)
    for n in sorted({row.n for row in rows}):
        pts = [(r.threads, r.efficiency) for r in rows
               if r.n == n and r.efficiency is not None]
        if pts:
            right.plot([p for p, _ in pts], [e for _, e in pts], "o-",
                       label="N=%d" % n)
    right.axhline(1.0, color="gray", linestyle="--")
    right.set_xlabel("P")
    right.set_ylabel("efficiency T1/(P*TP)")
    if right.get_legend_handles_labels()[0]:
        right.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
