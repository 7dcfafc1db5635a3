"""Write an evaluation report as CSV tables, a text summary and SVG plots."""

from __future__ import annotations

import math
import os

from .evaluation import EvalReport, histogram_edges
from .exceptions import IoError

SUMMARY = "summary.txt"
HISTOGRAM_CSV = "histogram.csv"
FAR_FRR_CSV = "far_frr.csv"
ROC_CSV = "roc.csv"
OPERATING_POINTS_CSV = "operating_points.csv"
SUSPECTS_CSV = "suspected_mislabels.csv"
EXCLUDED_CSV = "excluded.csv"


def _num(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def summary_text(report: EvalReport) -> str:
    imp, gen = report.imposter_stats, report.genuine_stats
    lines = [
        "distribution  count     mean      std       min       max",
        f"imposter      {imp.count:<9d} {imp.mean:.5f}  {imp.std:.5f}  {imp.min:.5f}  {imp.max:.5f}",
        f"genuine       {gen.count:<9d} {gen.mean:.5f}  {gen.std:.5f}  {gen.min:.5f}  {gen.max:.5f}",
        "",
        f"decidability: {report.decidability:.4f}",
        f"EER: {report.eer_value:.6g} @ {report.eer_threshold:.4f}",
        f"minimum genuine score: {report.min_genuine:.4f}",
        f"maximum imposter score: {report.max_imposter:.4f}",
        f"ROC AUC: {report.auc:.6f}",
        "",
        "operating points (FAR target, FRR, threshold):",
    ]
    for op in report.operating_points:
        if op.resolvable:
            lines.append(f"  ({op.far_target:.0E}, {op.frr:.6g}, {op.threshold:.4f})")
        else:
            lines.append(f"  ({op.far_target:.0E}, UNRESOLVABLE with {imp.count} imposter scores)")
    lines += [
        "",
        f"suspected mislabels (k = {report.mislabel_k:g}): {len(report.suspected_mislabels)}",
    ]
    for s in report.suspected_mislabels:
        lines.append(f"  {s.pair[0]},{s.pair[1]} declared {s.declared_label.name} score {s.score:.4f}")
    lines.append(f"excluded templates: {len(report.excluded)}")
    return "\n".join(lines) + "\n"


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _plots(report: EvalReport, out_dir: str) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    rc = {"svg.hashsalt": "crossiris", "svg.fonttype": "none", "path.simplify": False}
    meta = {"Date": None, "Creator": None}
    edges = histogram_edges()
    centres = (edges[:-1] + edges[1:]) / 2
    imp, gen = report.imposter_stats, report.genuine_stats

    with plt.rc_context(rc):
        for scale in ("linear", "log"):
            fig, ax = plt.subplots(figsize=(7, 4.5))
            ax.step(centres, imp.histogram, where="mid", color="tab:red",
                    label=f"Imposter (mu={imp.mean:.5f} sigma={imp.std:.4f})")
            ax.step(centres, gen.histogram, where="mid", color="tab:blue",
                    label=f"Genuine (mu={gen.mean:.5f} sigma={gen.std:.4f})")
            ax.set_yscale(scale, **({"nonpositive": "mask"} if scale == "log" else {}))
            ax.set_xlabel("Hamming similarity")
            ax.set_ylabel("count")
            ax.set_xlim(0, 1)
            ax.legend(loc="upper left", fontsize=8)
            path = os.path.join(out_dir, f"distributions_{scale}.svg")
            fig.savefig(path, format="svg", metadata=meta)
            plt.close(fig)
            written.append(path)

        for scale in ("linear", "log"):
            fig, ax = plt.subplots(figsize=(7, 4.5))
            ax.plot(report.thresholds, report.far, color="tab:red", label="False Accept")
            ax.plot(report.thresholds, report.frr, color="tab:blue", label="False Reject")
            ax.plot([report.eer_threshold], [report.eer_value], "ko",
                    label=f"EER {report.eer_value:.3g} @ {report.eer_threshold:.4f}")
            ax.set_yscale(scale, **({"nonpositive": "mask"} if scale == "log" else {}))
            ax.set_xlabel("threshold")
            ax.set_ylabel("rate")
            ax.set_xlim(0, 1)
            ax.legend(loc="center left", fontsize=8)
            path = os.path.join(out_dir, f"far_frr_{scale}.svg")
            fig.savefig(path, format="svg", metadata=meta)
            plt.close(fig)
            written.append(path)

        fig, ax = plt.subplots(figsize=(6, 4.5))
        pts = report.roc[report.roc[:, 0] > 0]
        ax.plot(pts[:, 0], pts[:, 1], color="tab:blue")
        ax.set_xscale("log")
        ax.set_xlabel("FAR")
        ax.set_ylabel("TAR")
        ax.grid(True, which="both", linewidth=0.3)
        path = os.path.join(out_dir, "roc.svg")
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        written.append(path)
    return written


def emit_report(report: EvalReport, out_dir: str | os.PathLike, plots: bool = True) -> list[str]:
    """Write every report artefact into ``out_dir``; returns the written paths."""
    out_dir = os.fspath(out_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
        written = []

        def put(name: str, text: str) -> None:
            path = os.path.join(out_dir, name)
            _write(path, text)
            written.append(path)

        put(SUMMARY, summary_text(report))

        edges = histogram_edges()
        rows = ["bin_low,bin_high,imposter_count,genuine_count"]
        for lo, hi, a, b in zip(edges[:-1], edges[1:], report.imposter_stats.histogram, report.genuine_stats.histogram):
            rows.append(f"{lo:.3f},{hi:.3f},{int(a)},{int(b)}")
        put(HISTOGRAM_CSV, "\n".join(rows) + "\n")

        rows = ["threshold,far,frr"]
        rows += [f"{t:.4f},{_num(a)},{_num(b)}" for t, a, b in zip(report.thresholds, report.far, report.frr)]
        put(FAR_FRR_CSV, "\n".join(rows) + "\n")

        rows = ["far,tar"] + [f"{_num(a)},{_num(b)}" for a, b in report.roc]
        put(ROC_CSV, "\n".join(rows) + "\n")

        rows = ["far_target,frr,threshold,far,status"]
        rows += [
            f"{op.far_target:.0E},{_num(op.frr)},{_num(op.threshold)},{_num(op.far)},{op.status}"
            for op in report.operating_points
        ]
        put(OPERATING_POINTS_CSV, "\n".join(rows) + "\n")

        rows = ["probe_id,enrolled_id,declared_label,score"]
        rows += [f"{s.pair[0]},{s.pair[1]},{s.declared_label.value},{s.score!r}" for s in report.suspected_mislabels]
        put(SUSPECTS_CSV, "\n".join(rows) + "\n")

        rows = ["template_id,reason"] + [f"{t},{r.replace(',', ';')}" for t, r in report.excluded]
        put(EXCLUDED_CSV, "\n".join(rows) + "\n")

        if plots:
            written += _plots(report, out_dir)
    except OSError as exc:
        raise IoError(f"cannot write report to {out_dir}: {exc}") from exc
    return written
