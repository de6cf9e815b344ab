"""Report rendering: JSON documents, per-block CSV, and summary figures."""

from __future__ import annotations

import csv
import json
import os
from typing import Sequence

from .bytecode import assemble
from .superopt import OptimizationReport

SCHEMA_VERSION = 1


def report_dict(rep: OptimizationReport) -> dict:
    """Stable-schema JSON object for one block (deterministic key order)."""
    out = {
        "schema_version": SCHEMA_VERSION,
        "source_hex": assemble(rep.source).hex(),
        "source_asm": rep.source.asm(),
        "target_hex": assemble(rep.target).hex(),
        "target_asm": rep.target.asm(),
        "status": rep.status,
        "gas_saved_min": rep.gas_saved_min,
        "gas_saved_max": rep.gas_saved_max,
        "search_width": rep.search_width,
        "mode": rep.mode,
        "solver_calls": rep.solver_calls,
        "time_ms": int(rep.total_time * 1000),
    }
    if rep.counterexample is not None:
        out["counterexample"] = {str(k): v for k, v in sorted(rep.counterexample.items())}
    if rep.reason:
        out["reason"] = rep.reason
    return out


def summarize(reports: Sequence[OptimizationReport]) -> dict:
    counts: dict[str, int] = {}
    for r in reports:
        counts[r.status] = counts.get(r.status, 0) + 1
    return {
        "blocks": len(reports),
        "optimized": sum(1 for r in reports if r.improved),
        "proved_optimal": counts.get("OptimizedOptimal", 0) + counts.get("AlreadyOptimal", 0),
        "timeouts": counts.get("Timeout", 0) + counts.get("TranslationValidationFailed", 0),
        "statuses": dict(sorted(counts.items())),
        "total_gas_saved_min": sum(r.gas_saved_min for r in reports),
        "total_gas_saved_max": sum(r.gas_saved_max for r in reports),
    }


def report_json(reports: Sequence[OptimizationReport]) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "summary": summarize(reports),
        "blocks": [report_dict(r) for r in reports],
    }
    return json.dumps(doc, indent=1)


def render_text(reports: Sequence[OptimizationReport]) -> str:
    lines = []
    for i, r in enumerate(reports):
        lines.append(f"block {i}: {r.status}")
        lines.append(f"  source: {r.source.asm() or '<empty>'}")
        if r.improved:
            lines.append(f"  target: {r.target.asm() or '<empty>'}")
            lines.append(f"  gas saved: {r.gas_saved_min}"
                         + (f"..{r.gas_saved_max}" if r.gas_saved_max != r.gas_saved_min else ""))
        lines.append(f"  mode={r.mode} width={r.search_width} "
                     f"solver_calls={r.solver_calls} time={r.total_time:.1f}s")
    s = summarize(reports)
    lines.append(f"summary: {s['blocks']} blocks, {s['optimized']} optimized, "
                 f"{s['proved_optimal']} proved optimal, {s['timeouts']} timed out, "
                 f"gas saved {s['total_gas_saved_min']}..{s['total_gas_saved_max']}")
    return "\n".join(lines)


CSV_FIELDS = ["index", "status", "mode", "search_width", "source_asm", "target_asm",
              "gas_saved_min", "gas_saved_max", "solver_calls", "time_ms"]


def write_csv(reports: Sequence[OptimizationReport], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for i, r in enumerate(reports):
            w.writerow({
                "index": i, "status": r.status, "mode": r.mode,
                "search_width": r.search_width, "source_asm": r.source.asm(),
                "target_asm": r.target.asm(), "gas_saved_min": r.gas_saved_min,
                "gas_saved_max": r.gas_saved_max, "solver_calls": r.solver_calls,
                "time_ms": int(r.total_time * 1000),
            })


def render_figures(reports: Sequence[OptimizationReport], outdir: str) -> list[str]:
    """Status breakdown and gas-savings histogram as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(outdir, exist_ok=True)
    written = []

    counts = summarize(reports)["statuses"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    names = list(counts)
    ax.bar(range(len(names)), [counts[n] for n in names], color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("blocks")
    ax.set_title("optimization outcomes")
    fig.tight_layout()
    path = os.path.join(outdir, "status.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    savings = [r.gas_saved_min for r in reports if r.improved]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if savings:
        ax.hist(savings, bins=min(20, max(3, len(set(savings)))), color="#58a065")
    ax.set_xlabel("gas saved (guaranteed)")
    ax.set_ylabel("blocks")
    ax.set_title("savings per optimized block")
    fig.tight_layout()
    path = os.path.join(outdir, "savings.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def write_report_dir(reports: Sequence[OptimizationReport], outdir: str) -> list[str]:
    """Delimited per-block data plus figures plus the JSON document."""
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "blocks.csv")
    write_csv(reports, csv_path)
    json_path = os.path.join(outdir, "report.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(report_json(reports))
    return [csv_path, json_path] + render_figures(reports, outdir)
