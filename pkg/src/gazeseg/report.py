"""Per-class report tables (CSV + aligned text), comparisons, and figures.

Statistics use the population standard deviation; every table carries one
row per class plus a "total" row over all records.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .metrics import EvalRecord

CSV_HEADER = ["class", "mean_iou", "std_iou", "mean_time_s", "std_time_s", "frames"]
TOTAL_ROW = "total"


@dataclass(frozen=True)
class ClassReport:
    class_name: str
    mean_iou: float
    std_iou: float
    mean_time_s: float
    std_time_s: float
    frame_count: int


def summarize(records: Sequence[EvalRecord]) -> list[ClassReport]:
    """One ClassReport per class (sorted) plus the total row."""
    if not records:
        raise ValueError("no records to report")
    by_class: dict[str, list[EvalRecord]] = {}
    for r in records:
        by_class.setdefault(r.class_name, []).append(r)
    reports = [_aggregate(cls, rows) for cls, rows in sorted(by_class.items())]
    reports.append(_aggregate(TOTAL_ROW, list(records)))
    return reports


def _aggregate(name: str, rows: list[EvalRecord]) -> ClassReport:
    ious = np.array([r.iou for r in rows])
    times = np.array([r.inference_time_s for r in rows])
    return ClassReport(name, float(ious.mean()), float(ious.std()),
                       float(times.mean()), float(times.std()), len(rows))


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def to_csv(reports: Sequence[ClassReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow([r.class_name, _fmt(r.mean_iou), _fmt(r.std_iou),
                         _fmt(r.mean_time_s), _fmt(r.std_time_s), r.frame_count])
    return buf.getvalue()


def to_text(reports: Sequence[ClassReport], title: str = "") -> str:
    """Human-readable aligned table. Std columns are population std."""
    name_w = max(len("class"), max(len(r.class_name) for r in reports))
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'class':<{name_w}}  {'mIoU':>8}  {'std':>8}  "
                 f"{'time_s':>9}  {'std':>8}  {'frames':>6}")
    for r in reports:
        lines.append(f"{r.class_name:<{name_w}}  {r.mean_iou:>8.4f}  "
                     f"{r.std_iou:>8.4f}  {r.mean_time_s:>9.4f}  "
                     f"{r.std_time_s:>8.4f}  {r.frame_count:>6}")
    return "\n".join(lines) + "\n"


def compare_csv(reports_a: Sequence[ClassReport],
                reports_b: Sequence[ClassReport]) -> str:
    """Paired columns with the percent delta of mean IoU (b relative to a)."""
    index_b = {r.class_name: r for r in reports_b}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", "mean_iou_a", "mean_iou_b",
                     "mean_time_s_a", "mean_time_s_b", "pct_delta"])
    for ra in reports_a:
        rb = index_b.get(ra.class_name)
        if rb is None:
            continue
        if ra.mean_iou > 0:
            pct = 100.0 * (rb.mean_iou - ra.mean_iou) / ra.mean_iou
        else:
            pct = float("inf") if rb.mean_iou > 0 else 0.0
        writer.writerow([ra.class_name, _fmt(ra.mean_iou), _fmt(rb.mean_iou),
                         _fmt(ra.mean_time_s), _fmt(rb.mean_time_s),
                         f"{pct:.2f}"])
    return buf.getvalue()


def parse_report_csv(path) -> list[ClassReport]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [ClassReport(row["class"], float(row["mean_iou"]),
                            float(row["std_iou"]), float(row["mean_time_s"]),
                            float(row["std_time_s"]), int(row["frames"]))
                for row in reader]


def records_csv(records: Sequence[EvalRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", "frame_id", "iou", "inference_time_s", "mode", "flags"])
    for r in records:
        writer.writerow([r.class_name, r.frame_id, _fmt(r.iou),
                         _fmt(r.inference_time_s), r.mode, ";".join(r.flags)])
    return buf.getvalue()


def sequences_csv(records: Sequence[EvalRecord]) -> str:
    """Per-sequence aggregation; the paper-style mIoU over one grasping
    sequence, reported alongside the per-class table."""
    by_seq: dict[str, list[EvalRecord]] = {}
    for r in records:
        by_seq.setdefault(r.sequence or r.class_name, []).append(r)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sequence", "mean_iou", "std_iou", "frames"])
    for seq, rows in sorted(by_seq.items()):
        ious = np.array([r.iou for r in rows])
        writer.writerow([seq, _fmt(float(ious.mean())), _fmt(float(ious.std())),
                         len(rows)])
    return buf.getvalue()


def render_report_figure(reports: Sequence[ClassReport], path,
                         title: str = "Per-class mean IoU") -> None:
    """Bar chart of per-class mean IoU with population-std error bars."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in reports if r.class_name != TOTAL_ROW]
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(rows) + 2), 4))
    xs = np.arange(len(rows))
    ax.bar(xs, [r.mean_iou for r in rows],
           yerr=[r.std_iou for r in rows], capsize=3, color="#4878cf")
    ax.set_xticks(xs)
    ax.set_xticklabels([r.class_name for r in rows], rotation=45, ha="right")
    ax.set_ylabel("mean IoU")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def render_ablation_figure(per_window: dict[int, Sequence[ClassReport]], path) -> None:
    """Mean IoU (total row) as a function of the temporal window length."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ts = sorted(per_window)
    totals = []
    for t in ts:
        total = [r for r in per_window[t] if r.class_name == TOTAL_ROW][0]
        totals.append(total.mean_iou)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, totals, marker="o", color="#4878cf")
    ax.set_xlabel("temporal window (frames)")
    ax.set_ylabel("mean IoU")
    ax.set_xticks(ts)
    ax.set_ylim(0, 1.05)
    ax.set_title("Temporal window sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def write_report_bundle(records: Sequence[EvalRecord], outdir,
                        stem: str = "report", title: str = "") -> list[str]:
    """CSV + aligned text + per-frame records + figure, side by side."""
    os.makedirs(outdir, exist_ok=True)
    reports = summarize(records)
    paths = []
    for name, content in [
        (f"{stem}.csv", to_csv(reports)),
        (f"{stem}.txt", to_text(reports, title=title)),
        (f"{stem}_records.csv", records_csv(records)),
        (f"{stem}_sequences.csv", sequences_csv(records)),
    ]:
        path = os.path.join(outdir, name)
        with open(path, "w", newline="") as f:
            f.write(content)
        paths.append(path)
    fig_path = os.path.join(outdir, f"{stem}.png")
    render_report_figure(reports, fig_path, title=title or "Per-class mean IoU")
    paths.append(fig_path)
    return paths
