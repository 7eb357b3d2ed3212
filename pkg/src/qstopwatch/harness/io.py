"""Writing sweep results to disk as CSV matrices and JSON bundles.

All files are UTF-8 with LF line endings. CSV floats use 17 significant
digits, so every double survives a round trip. JSON numbers use Python's
shortest round-trip repr. Non-finite values become ``null`` (NaN) or the
strings ``"inf"`` / ``"-inf"``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .sweep import PointResult, SweepResult

HEATMAPS = ("qfi", "bound", "purity", "ma2")
CORNER = "t\\h"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path: Path, rows: np.ndarray, cols: np.ndarray, matrix: np.ndarray,
                     corner: str = CORNER) -> None:
    """One header row of column coordinates, then ``row coordinate, values...``."""
    lines = [",".join([corner] + [_fmt(c) for c in cols])]
    for r, vals in zip(rows, matrix):
        lines.append(",".join([_fmt(r)] + [_fmt(v) for v in vals]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_matrix_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_matrix_csv`: ``(rows, cols, matrix)``."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    cols = np.array([float(x) for x in text[0].split(",")[1:]])
    body = [[float(x) for x in line.split(",")] for line in text[1:] if line]
    arr = np.array(body).reshape(len(body), cols.size + 1)
    return arr[:, 0].copy(), cols, arr[:, 1:].copy()


def jsonable(obj: Any) -> Any:
    """Recursively turn numpy containers and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    return obj


def dump_json(obj: Any, path: Path) -> None:
    text = json.dumps(jsonable(obj), indent=1, sort_keys=True, allow_nan=False, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def manifest(result: SweepResult, files: list[str]) -> dict[str, Any]:
    degenerate = [p.h for p in result.points if p.degenerate]
    return {
        "config": result.config.canonical(),
        "provenance": result.provenance(),
        "violation_summary": result.violation_summary(),
        "violations": result.violations,
        "degenerate_h": degenerate,
        # columns of these points are NaN in every heatmap
        "failed_points": [{"h": h, "error": e} for h, e in result.failed.items()],
        "invalid_fits_h": [p.h for p in result.points if not p.fit.get("valid")],
        "time_average_t_max": result.config.average_t_max,
        "files": files,
    }


def emit(result: SweepResult, output_dir: str | Path) -> list[Path]:
    """Write heatmaps, the lambda curve, per-point bundles and the manifest."""
    out = Path(output_dir)
    try:
        (out / "points").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write to {out}: {exc}") from exc

    written: list[Path] = []
    for name in HEATMAPS:
        path = out / f"{name}_heatmap.csv"
        write_matrix_csv(path, result.t_grid, result.h_grid, getattr(result, f"{name}_heatmap"))
        written.append(path)

    path = out / "lambda_curve.csv"
    lines = ["h,lambda_q,valid,r_squared,t_lo,t_hi,qfi_time_average,bound_time_average"]
    qa = result.time_average(result.qfi_heatmap)
    ba = result.time_average(result.bound_heatmap)
    for i, p in enumerate(result.points):
        f = p.fit
        lines.append(",".join([
            _fmt(p.h), _fmt(f.get("lambda_q", math.nan)), str(int(bool(f.get("valid")))),
            _fmt(f.get("r_squared", math.nan)), _fmt(f.get("t_lo", math.nan)), _fmt(f.get("t_hi", math.nan)),
            _fmt(qa[i]), _fmt(ba[i]),
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    written.append(path)

    for i, p in enumerate(result.points):
        path = out / "points" / f"point_{i:03d}.json"
        dump_json(p.to_json(), path)
        written.append(path)

    path = out / "manifest.json"
    dump_json(manifest(result, [w.relative_to(out).as_posix() for w in written]), path)
    written.append(path)
    return written


def emit_point(point: PointResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dump_json(point.to_json(), path)
    return path
