"""Writing experiment results to disk.

Each output path has a single writer; files are written to a temporary
sibling and renamed into place, so readers never see a partial file.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from ..metrics import EyeRaster
from .config import LinkConfig, config_report
from .experiments import ExperimentResult, Table


def _cell(v: object) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_atomic(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def raster_csv(raster: EyeRaster) -> str:
    """Dense count matrix, top row = highest amplitude bin, after a three-line header."""
    lo, hi = raster.amplitude_range
    header = [
        f"# bins: phase={raster.phase_bins} amplitude={raster.amplitude_bins}",
        f"# ranges: phase_ui=0.0..2.0 (ref {_cell(raster.phase_ref)}) amplitude={_cell(lo)}..{_cell(hi)}",
        f"# units: phase=UI amplitude={raster.unit} counts=samples",
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in raster.counts[::-1]:
        w.writerow([str(int(c)) for c in row])
    return "\n".join(header) + "\n" + buf.getvalue()


def summary_csv(summary: dict[str, object]) -> str:
    return table_csv(Table(("key", "value"), [(k, v) for k, v in summary.items()]))


def emit_outputs(result: ExperimentResult, out_dir: str | Path, cfg: LinkConfig | None = None) -> list[Path]:
    """Write every table, raster and figure of ``result``; returns the paths written."""
    out = Path(out_dir)
    stem = result.kind
    written = []
    for name, table in result.tables.items():
        written.append(write_atomic(out / f"{stem}_{name}.csv", table_csv(table)))
    for name, raster in result.rasters.items():
        written.append(write_atomic(out / f"{stem}_{name}_raster.csv", raster_csv(raster)))
    for name, fig in result.figures.items():
        written.append(write_atomic(out / f"{name}.svg", fig))
    if result.summary:
        written.append(write_atomic(out / f"{stem}_summary.csv", summary_csv(result.summary)))
    if cfg is not None:
        written.append(write_atomic(out / "config-report", config_report(cfg)))
    return written
