"""CSV / Markdown emission of experiment reports and run manifests."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from fbmdrift import __version__
from fbmdrift.experiment import ExperimentReport

__all__ = [
    "REPORT_HEADER",
    "RATES_HEADER",
    "fmt",
    "report_rows",
    "write_report_csv",
    "read_report_csv",
    "write_rates_csv",
    "markdown_table",
    "emit_report",
    "RunManifest",
    "write_manifest",
    "read_manifest",
]

REPORT_HEADER = ("H", "n", "estimator", "mean_rel_error", "median_rel_error", "failures", "wall_time_ms")
RATES_HEADER = ("H", "estimator", "slope", "intercept")


def fmt(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    return f"{float(x):.17g}"


def report_rows(report: ExperimentReport) -> list[tuple[str, ...]]:
    rows = []
    for (H, n, est), cell in sorted(report.cells.items()):
        rows.append((
            fmt(H), str(n), est, fmt(cell.mean_rel_error), fmt(cell.median_rel_error),
            str(cell.failures), fmt(cell.wall_time_ms),
        ))
    return rows


def write_report_csv(report: ExperimentReport, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        writer.writerows(report_rows(report))
    return path


def read_report_csv(path: str | Path) -> dict[tuple[float, int, str], dict[str, float]]:
    out = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out[(float(row["H"]), int(row["n"]), row["estimator"])] = {
                "mean_rel_error": float(row["mean_rel_error"]),
                "median_rel_error": float(row["median_rel_error"]),
                "failures": int(row["failures"]),
                "wall_time_ms": float(row["wall_time_ms"]),
            }
    return out


def write_rates_csv(report: ExperimentReport, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RATES_HEADER)
        for (H, est), fit in sorted(report.rate_fits.items()):
            writer.writerow((fmt(H), est, fmt(fit.slope), fmt(fit.intercept)))
    return path


def markdown_table(report: ExperimentReport) -> str:
    """Rows indexed by ``n``; one column per ``(H, estimator)``, 3 decimals."""
    config = report.config
    cols = [(H, est) for H in config.hurst_list for est in config.estimators]
    label = {"weighted": "weighted", "simple": "simple"}
    head = "| n | " + " | ".join(f"H={H:g} {label[e]}" for H, e in cols) + " |"
    rule = "|---|" + "---|" * len(cols)
    lines = [head, rule]
    for n in config.n_list:
        cells = []
        for H, est in cols:
            value = report.mean_error(H, n, est)
            cells.append("n/a" if math.isnan(value) else f"{value:.3f}")
        lines.append(f"| {n} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, out_dir: str | Path, markdown: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        write_report_csv(report, out_dir / "report.csv"),
        write_rates_csv(report, out_dir / "rates.csv"),
    ]
    if markdown:
        md = out_dir / "report.md"
        md.write_text(markdown_table(report))
        written.append(md)
    return written


@dataclass
class RunManifest:
    """Everything needed to rerun a subcommand; ``timestamp`` is informational."""

    subcommand: str
    config: dict[str, Any]
    seed: int | None
    derived: dict[str, Any] = field(default_factory=dict)
    tool_version: str = __version__
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )


def write_manifest(manifest: RunManifest, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path: str | Path) -> RunManifest:
    data = json.loads(Path(path).read_text())
    return RunManifest(**data)
