"""Rendering of run summaries as text, markdown or CSV tables."""

from __future__ import annotations

import io
from typing import List

from .metrics import geo_mean

AVERAGE_NOTE = (
    "Average speedup is the geometric mean across kernels; per-kernel speedups "
    "are geometric means across shapes."
)


def _fmt_geo(value) -> str:
    return f"{value:.2f}x" if value is not None else "n/a"


def _round_rows(summary: dict) -> List[List[str]]:
    rows = []
    for r in summary["rounds"]:
        rows.append(
            [
                str(r["round"]),
                "yes" if r["correct"] else "no",
                f"{r['geo_mean']:.3f}" if r["geo_mean"] is not None else "n/a",
                str(r["loc"]),
                r["note"] or "",
            ]
        )
    return rows


def _shape_rows(summary: dict) -> List[List[str]]:
    return [
        [
            s["label"],
            f"{s['baseline_us']:.2f}",
            f"{s['candidate_us']:.2f}",
            f"{s['speedup']:.3f}",
        ]
        for s in summary["per_shape"]
    ]


def _kernel_row(summary: dict) -> List[str]:
    return [
        summary["task"],
        str(summary["loc_base"]),
        str(summary["loc_best"]),
        f"{summary['loc_delta_pct']:+d}%",
        f"{summary['time_base_us']:.1f}",
        f"{summary['time_best_us']:.1f}",
        _fmt_geo(summary["geo_mean"]),
        "yes" if summary["correct"] else "no",
    ]


def _average_row(summaries: List[dict]) -> List[str]:
    n = len(summaries)
    return [
        "Average",
        str(round(sum(s["loc_base"] for s in summaries) / n)),
        str(round(sum(s["loc_best"] for s in summaries) / n)),
        f"{round(sum(s['loc_delta_pct'] for s in summaries) / n):+d}%",
        f"{sum(s['time_base_us'] for s in summaries) / n:.1f}",
        f"{sum(s['time_best_us'] for s in summaries) / n:.1f}",
        _fmt_geo(geo_mean([s["geo_mean"] for s in summaries])),
        "yes" if all(s["correct"] for s in summaries) else "no",
    ]


def _layout(headers: List[str], rows: List[List[str]], markdown: bool) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    out = io.StringIO()
    if markdown:
        out.write("| " + " | ".join(h.ljust(w) for h, w in zip(headers, widths)) + " |\n")
        out.write("|" + "|".join("-" * (w + 2) for w in widths) + "|\n")
        for row in rows:
            out.write("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |\n")
    else:
        out.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip() + "\n")
        for row in rows:
            out.write("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
    return out.getvalue()


KERNEL_HEADERS = [
    "kernel",
    "loc-base",
    "loc-best",
    "dloc",
    "time-base-us",
    "time-best-us",
    "speedup",
    "correct",
]


def render(summaries: List[dict], fmt: str = "text") -> str:
    """Per-round and per-shape tables for each summary, then the kernel table.

    With more than one summary an Average row aggregates across kernels.
    """
    if fmt == "csv":
        return render_csv(summaries)
    markdown = fmt == "md"
    out = io.StringIO()
    for summary in summaries:
        out.write(f"{'## ' if markdown else '== '}task: {summary['task']}"
                  f"{'' if markdown else ' =='}\n\n")
        out.write(_layout(["round", "correct", "geo-speedup", "loc", "note"],
                          _round_rows(summary), markdown))
        out.write("\n")
        out.write(_layout(["shape", "base-us", "best-us", "speedup"],
                          _shape_rows(summary), markdown))
        out.write("\n")
        if summary.get("aborted"):
            out.write("note: run aborted early; table covers completed rounds only\n\n")
    rows = [_kernel_row(s) for s in summaries]
    if len(summaries) > 1:
        rows.append(_average_row(summaries))
    out.write(_layout(KERNEL_HEADERS, rows, markdown))
    out.write("\n" + AVERAGE_NOTE + "\n")
    return out.getvalue()


def render_csv(summaries: List[dict]) -> str:
    """One row per (round, shape); failed rounds keep empty shape columns."""
    out = io.StringIO()
    out.write("task,round,correct,shape,baseline_us,candidate_us,speedup,geo_mean\n")
    for summary in summaries:
        for r in summary["rounds"]:
            prefix = f"{summary['task']},{r['round']},{int(r['correct'])}"
            rec_shapes = r.get("per_shape")
            if r["geo_mean"] is None:
                out.write(f"{prefix},,,,,\n")
                continue
            if rec_shapes:
                for s in rec_shapes:
                    out.write(
                        f"{prefix},{s['label']},{s['baseline_us']:.6g},"
                        f"{s['candidate_us']:.6g},{s['speedup']:.6g},{r['geo_mean']:.6g}\n"
                    )
            else:
                out.write(f"{prefix},,,,,{r['geo_mean']:.6g}\n")
    return out.getvalue()
