"""Run reports: per-iteration trace as CSV plus rendered diagnostic figures.

Figures are drawn straight onto Agg canvases so importing this module never
touches the global pyplot state or requires a display.
"""

import csv
import os

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .imgio import ensure_image
from .metrics import psnr

__all__ = ["write_trace_csv", "render_figures", "write_report"]


def _mean(values):
    return float(np.mean(values)) if len(values) else 0.0


def write_trace_csv(path, trace) -> None:
    """Write one row per iteration: noise level, class stats, quality."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "sigma", "classes", "min_class_size",
             "max_class_size", "mean_rank", "psnr", "ssim"]
        )
        for rec in trace:
            sizes = rec.class_sizes
            writer.writerow([
                rec.iteration,
                f"{rec.sigma:.6f}",
                len(sizes),
                min(sizes) if len(sizes) else 0,
                max(sizes) if len(sizes) else 0,
                f"{_mean(rec.ranks):.3f}",
                "" if rec.psnr is None else f"{rec.psnr:.4f}",
                "" if rec.ssim is None else f"{rec.ssim:.4f}",
            ])


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=110)


def _schedule_figure(trace) -> Figure:
    its = [rec.iteration for rec in trace]
    fig = Figure(figsize=(6.0, 3.6))
    ax = fig.add_subplot(111)
    ax.plot(its, [rec.sigma for rec in trace], "o-", color="tab:blue",
            label="noise level fed to iteration")
    ax.set_xlabel("iteration")
    ax.set_ylabel("sigma", color="tab:blue")
    ax.set_xticks(its)
    ax2 = ax.twinx()
    ax2.plot(its, [_mean(rec.ranks) for rec in trace], "s--",
             color="tab:orange", label="mean stack rank")
    ax2.set_ylabel("mean retained rank", color="tab:orange")
    ax.set_title("Noise schedule and retained rank")
    fig.tight_layout()
    return fig


def _quality_figure(trace) -> Figure:
    its = [rec.iteration for rec in trace]
    fig = Figure(figsize=(6.0, 3.6))
    ax = fig.add_subplot(111)
    ax.plot(its, [rec.psnr for rec in trace], "o-", color="tab:blue")
    ax.set_xlabel("iteration")
    ax.set_ylabel("PSNR (dB)", color="tab:blue")
    ax.set_xticks(its)
    ax2 = ax.twinx()
    ax2.plot(its, [rec.ssim for rec in trace], "s--", color="tab:orange")
    ax2.set_ylabel("SSIM", color="tab:orange")
    ax.set_title("Quality per iteration")
    fig.tight_layout()
    return fig


def _panel_figure(noisy, denoised, reference=None) -> Figure:
    panels = [("noisy input", noisy), ("denoised", denoised)]
    if reference is not None:
        panels.append(("reference", reference))
        panels[0] = (f"noisy input ({psnr(reference, noisy):.2f} dB)", noisy)
        panels[1] = (f"denoised ({psnr(reference, denoised):.2f} dB)", denoised)
    fig = Figure(figsize=(3.2 * len(panels), 3.6))
    for i, (title, img) in enumerate(panels):
        ax = fig.add_subplot(1, len(panels), i + 1)
        ax.imshow(img, cmap="gray", vmin=0.0, vmax=255.0, interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.set_axis_off()
    fig.tight_layout()
    return fig


def render_figures(report_dir, noisy, denoised, trace, reference=None) -> list:
    """Render diagnostic figures into report_dir, returning the paths."""
    noisy = ensure_image(noisy, "noisy")
    denoised = ensure_image(denoised, "denoised")
    if reference is not None:
        reference = ensure_image(reference, "reference")
    written = []

    def emit(fig, name):
        path = os.path.join(report_dir, name)
        _save(fig, path)
        written.append(path)

    if len(trace):
        emit(_schedule_figure(trace), "schedule.png")
        if all(rec.psnr is not None and rec.ssim is not None for rec in trace):
            emit(_quality_figure(trace), "quality.png")
    emit(_panel_figure(noisy, denoised, reference), "comparison.png")
    return written


def write_report(report_dir, noisy, denoised, trace, reference=None) -> list:
    """Write trace.csv and the figures into report_dir (created if needed)."""
    os.makedirs(report_dir, exist_ok=True)
    csv_path = os.path.join(report_dir, "trace.csv")
    write_trace_csv(csv_path, trace)
    return [csv_path] + render_figures(report_dir, noisy, denoised, trace,
                                       reference=reference)
