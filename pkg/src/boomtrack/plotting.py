"""Report figures written next to the CSV outputs."""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from boomtrack.displacement import DisplacementSample  # noqa: E402
from boomtrack.validate import ValidationReport  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
    "svg.hashsalt": "boomtrack",
}


_NO_STAMP = {".png": {"Software": None}, ".pdf": {"CreationDate": None}, ".svg": {"Date": None}}


def _save(fig, path: str | os.PathLike) -> None:
    # dropping timestamps keeps figure bytes reproducible
    fig.savefig(path, metadata=_NO_STAMP.get(os.path.splitext(str(path))[1].lower()))
    plt.close(fig)


def plot_validation(report: ValidationReport, path: str | os.PathLike) -> None:
    """Vision vs sensor vertical displacement, with per-pair error against the tolerance."""
    with plt.rc_context(STYLE):
        fig, (top, bottom) = plt.subplots(2, 1, sharex=True, gridspec_kw={"height_ratios": [2, 1]})
        t = [p.t_frame for p in report.pairs]
        top.plot(t, [p.vision.dy * 1000 for p in report.pairs], "o-", ms=3, lw=1, label="vision")
        top.plot(t, [p.sensor.dy * 1000 for p in report.pairs], "s--", ms=3, lw=1, label="inclinometer")
        top.set_ylabel("vertical displacement [mm]")
        top.legend(loc="best")
        status = "PASS" if report.passed else "FAIL"
        top.set_title(f"{status}: max error {report.max_error * 1000:.1f} mm, gaps {report.gap_count}")
        errs = report.magnitude_errors if report.use_magnitude else report.errors
        bottom.plot(t, [e * 1000 for e in errs], "k.-", ms=3, lw=0.8)
        bottom.axhline(report.tolerance * 1000, color="C3", lw=1, ls=":", label="tolerance")
        bottom.set_ylabel("|error| [mm]")
        bottom.set_xlabel("time [s]")
        bottom.legend(loc="upper right")
        fig.tight_layout()
        _save(fig, path)


def plot_displacement(samples: Sequence[DisplacementSample], path: str | os.PathLike) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        t = [s.t for s in samples]
        ax.plot(t, [s.dx * 1000 for s in samples], lw=1, label="dx (fore-aft)")
        ax.plot(t, [s.dy * 1000 for s in samples], lw=1, label="dy (vertical)")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("displacement [mm]")
        ax.legend(loc="best")
        fig.tight_layout()
        _save(fig, path)


def plot_pr_curves(curves: dict[float, Sequence[tuple[float, float]]], path: str | os.PathLike) -> None:
    """Precision-recall curves keyed by IoU threshold."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.2))
        for thr, curve in sorted(curves.items()):
            if not curve:
                continue
            ax.step([0.0] + [r for _, r in curve], [curve[0][0]] + [p for p, _ in curve], where="post",
                    label=f"IoU {thr:.2f}")
        ax.set_xlim(0, 1.02)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.legend(loc="lower left")
        fig.tight_layout()
        _save(fig, path)
