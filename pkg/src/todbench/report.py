"""Report emission: JSON + aligned plain-text table + histogram CSV from
`score`, and matplotlib figures rendered to files by `report`."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

from .metrics import EvalReport

_METRIC_COLUMNS = [
    ("Method", "method_accuracy"),
    ("Param Names", "param_name_accuracy"),
    ("Param Values", "param_value_accuracy"),
    ("Operator", "operator_accuracy"),
    ("Full API", "full_api_accuracy"),
    ("Success", "dialog_success_rate"),
    ("Inform", "inform_accuracy"),
    ("SE", "mean_se_bits"),
    ("CE", "mean_ce_bits"),
]

_CLASS_ROWS = [("Single", "single"), ("Multi", "multi"), ("Both", "both")]


def _cell(value: Optional[float], key: str) -> str:
    if value is None:
        return "N/A"
    if key in ("mean_se_bits", "mean_ce_bits"):
        return f"{value:.4f}"
    return f"{value * 100:.2f}"


def render_table(report: EvalReport) -> str:
    """Fixed-width table: one row per domain class, one column per metric.
    Accuracy columns are percentages; SE/CE are bits."""
    doc = report.to_document()
    header = ["Class"] + [label for label, _ in _METRIC_COLUMNS]
    rows = [header]
    for row_label, row_key in _CLASS_ROWS:
        cells = [row_label]
        for _, key in _METRIC_COLUMNS:
            cells.append(_cell(doc[row_key].get(key), key))
        rows.append(cells)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for index, row in enumerate(rows):
        lines.append("  ".join(cell.rjust(width) if i else cell.ljust(width)
                               for i, (cell, width) in enumerate(zip(row, widths))))
        if index == 0:
            lines.append("  ".join("-" * width for width in widths))
    meta = doc["metadata"]
    lines.append("")
    lines.append(f"dialogs={doc['both']['dialogs']} "
                 f"gold_calls={doc['both']['gold_calls']} "
                 f"hallucinated={doc['both']['hallucinated_calls']} "
                 f"fuzzy_threshold={meta['fuzzy_threshold']} "
                 f"averaging={meta['averaging']}")
    return "\n".join(lines) + "\n"


def write_report_files(report: EvalReport, out_dir: Path) -> dict[str, Path]:
    """score's delimited outputs: report.json, report.txt, histogram CSV."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "report.json",
        "table": out_dir / "report.txt",
        "histogram": out_dir / "success_by_call_count.csv",
    }
    paths["json"].write_text(
        json.dumps(report.to_document(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    paths["table"].write_text(render_table(report), encoding="utf-8")
    with open(paths["histogram"], "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n_calls", "dialogs", "successes", "success_rate"])
        for n_calls in sorted(report.success_by_call_count):
            cell = report.success_by_call_count[n_calls]
            writer.writerow([n_calls, cell["dialogs"], cell["successes"],
                             f"{cell['rate']:.6f}"])
    return paths


def _load_report_document(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def render_figures(report_json: Path, out_dir: Path) -> list[Path]:
    """Render the success-rate trend and the accuracy breakdown as PNGs next
    to the delimited outputs."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    doc = _load_report_document(report_json)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    histogram = doc.get("success_by_call_count", {})
    if histogram:
        ns = sorted(histogram, key=int)
        rates = [histogram[n]["rate"] for n in ns]
        counts = [histogram[n]["dialogs"] for n in ns]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot([int(n) for n in ns], rates, marker="o")
        for n, rate, count in zip(ns, rates, counts):
            ax.annotate(f"n={count}", (int(n), rate), fontsize=8,
                        textcoords="offset points", xytext=(0, 6))
        ax.set_xlabel("API calls per dialog")
        ax.set_ylabel("Dialog success rate")
        ax.set_ylim(-0.05, 1.05)
        ax.set_title("Success rate vs. call count")
        ax.grid(True, alpha=0.3)
        path = out_dir / "success_by_call_count.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    labels = ["Method", "Param Names", "Param Values", "Operator", "Full API"]
    keys = ["method_accuracy", "param_name_accuracy", "param_value_accuracy",
            "operator_accuracy", "full_api_accuracy"]
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.25
    for offset, (class_label, class_key) in enumerate(_CLASS_ROWS):
        values = [doc[class_key].get(key) for key in keys]
        xs = [i + (offset - 1) * width for i in range(len(keys))]
        ax.bar(xs, [0 if v is None else v * 100 for v in values],
               width=width, label=class_label)
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(labels, fontsize=9)
    ax.set_ylabel("Accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title("API call accuracy breakdown")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    path = out_dir / "accuracy_breakdown.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
