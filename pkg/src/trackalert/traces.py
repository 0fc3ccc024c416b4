"""Trace files: reading recorded tracker output and writing results.

Formats (all carry ``format_version``):

* box trace CSV ``frame,x,y,w,h`` (one file for predictions, one for ground truth)
* metric CSV ``frame,value``
* response-map JSONL, one ``{"t", "rows", "cols", "data"}`` record per frame
  (row-major data), preceded by a ``{"format_version": ...}`` header line
* bundle sidecar JSON naming the video, its source kind, frame rate and files
* event log JSONL, evaluation summary JSON and flat trial CSV (writers only)
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .boxes import BoundingBox, ngiou
from .response import ResponseMap, ResponseMetric
from .stream import MetricSample

FORMAT_VERSION = 1

SOURCES = ("box_pair", "response_maps", "raw_metric")
METRICS_BY_SOURCE = {
    "box_pair": ("ngiou",),
    "response_maps": ("pc", "cg", "sg"),
    "raw_metric": ("raw",),
}


class TraceFormatError(ValueError):
    """Malformed or invalid trace content; message names file and line or frame."""


def _csv_rows(path: Path) -> Iterable[tuple[int, list[str]]]:
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if row[0].lstrip().startswith("#"):
                continue
            if row[0].strip().lower() == "frame":
                continue
            yield lineno, row


def _parse_floats(path: Path, lineno: int, row: list[str], n: int) -> list[float]:
    if len(row) != n:
        raise TraceFormatError(f"{path}:{lineno}: expected {n} columns, got {len(row)}")
    try:
        vals = [float(c) for c in row]
    except ValueError:
        raise TraceFormatError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise TraceFormatError(f"{path}:{lineno}: non-finite field in {row!r}")
    return vals


def _frame(path: Path, lineno: int, value: float, expected: int) -> int:
    if value != int(value):
        raise TraceFormatError(f"{path}:{lineno}: frame index {value!r} is not an integer")
    frame = int(value)
    if frame != expected:
        raise TraceFormatError(f"{path}:{lineno}: expected frame {expected}, got {frame} (frames must be dense from 1)")
    return frame


def read_metric_csv(path) -> list[MetricSample]:
    path = Path(path)
    out = []
    for lineno, row in _csv_rows(path):
        frame, value = _parse_floats(path, lineno, row, 2)
        t = _frame(path, lineno, frame, len(out) + 1)
        if not (0.0 <= value <= 1.0):
            raise TraceFormatError(f"{path}:{lineno}: frame {t} value {value!r} outside [0, 1]")
        out.append(MetricSample(t, value))
    return out


def read_box_csv(path) -> list[BoundingBox]:
    path = Path(path)
    boxes = []
    for lineno, row in _csv_rows(path):
        frame, x, y, w, h = _parse_floats(path, lineno, row, 5)
        _frame(path, lineno, frame, len(boxes) + 1)
        try:
            boxes.append(BoundingBox(x, y, w, h))
        except ValueError as exc:
            raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
    return boxes


def ingest_boxes(pred_path, gt_path) -> list[MetricSample]:
    """NGIoU stream from aligned prediction and ground-truth box traces."""
    pred = read_box_csv(pred_path)
    gt = read_box_csv(gt_path)
    if len(pred) != len(gt):
        raise TraceFormatError(
            f"box traces differ in length: {pred_path} has {len(pred)} frames, {gt_path} has {len(gt)}"
        )
    return [MetricSample(i + 1, ngiou(p, g)) for i, (p, g) in enumerate(zip(pred, gt))]


def read_response_maps(path, normalize: bool = False) -> list[ResponseMap]:
    path = Path(path)
    maps = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise TraceFormatError(f"{path}:{lineno}: expected a JSON object")
            if "t" not in rec:
                if "format_version" in rec:
                    continue
                raise TraceFormatError(f"{path}:{lineno}: record lacks frame index 't'")
            try:
                t, rows, cols, data = int(rec["t"]), int(rec["rows"]), int(rec["cols"]), rec["data"]
            except (KeyError, TypeError, ValueError):
                raise TraceFormatError(f"{path}:{lineno}: record needs integer t, rows, cols and a data list") from None
            if t != len(maps) + 1:
                raise TraceFormatError(f"{path}:{lineno}: expected frame {len(maps) + 1}, got {t} (frames must be dense from 1)")
            try:
                maps.append(ResponseMap.from_raw(data, rows, cols, normalize=normalize))
            except (ValueError, TypeError) as exc:
                raise TraceFormatError(f"{path}:{lineno}: frame {t}: {exc}") from None
    return maps


def ingest_maps(path, metric: str = "sg", sigma: int = 10, normalize: bool = False) -> list[MetricSample]:
    """Unsupervised metric stream (``pc``, ``cg`` or ``sg``) from a response-map trace."""
    compute = ResponseMetric(metric, sigma)
    return [MetricSample(i + 1, compute(cmap)) for i, cmap in enumerate(read_response_maps(path, normalize))]


@dataclass
class TraceBundle:
    """One recorded video: its source kind, frame rate and data files."""

    video_id: str
    source: str
    frame_rate: Optional[float] = None
    files: dict[str, Path] = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise TraceFormatError(f"unknown source kind {self.source!r}; expected one of {SOURCES}")
        if self.frame_rate is not None and not self.frame_rate > 0:
            raise TraceFormatError(f"frame_rate must be positive, got {self.frame_rate!r}")
        need = {"box_pair": ("pred", "gt"), "response_maps": ("maps",), "raw_metric": ("metric",)}[self.source]
        missing = [k for k in need if k not in self.files]
        if missing:
            raise TraceFormatError(f"bundle {self.video_id!r} ({self.source}) lacks files {missing}")


def load_bundle(path) -> TraceBundle:
    path = Path(path)
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{path}: invalid JSON ({exc.msg})") from None
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise TraceFormatError(f"{path}: unsupported format_version {version!r}")
    try:
        files = {k: path.parent / v for k, v in meta["files"].items()}
        return TraceBundle(str(meta["video_id"]), meta["source"], meta.get("frame_rate"), files)
    except KeyError as exc:
        raise TraceFormatError(f"{path}: missing key {exc}") from None


def write_bundle(bundle: TraceBundle, path) -> Path:
    path = Path(path)
    meta = {
        "format_version": FORMAT_VERSION,
        "video_id": bundle.video_id,
        "source": bundle.source,
        "frame_rate": bundle.frame_rate,
        "files": {k: os.path.relpath(v, path.parent) for k, v in bundle.files.items()},
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def check_metric(source: str, metric: str) -> None:
    allowed = METRICS_BY_SOURCE[source]
    if metric not in allowed:
        raise TraceFormatError(f"metric {metric!r} is not available for {source} traces (choose from {allowed})")


def ingest(bundle: TraceBundle, metric: Optional[str] = None, sigma: int = 10,
           normalize: bool = False) -> list[MetricSample]:
    """Metric stream of a bundle; ``metric`` defaults to the source's first metric."""
    metric = metric or METRICS_BY_SOURCE[bundle.source][0]
    check_metric(bundle.source, metric)
    if bundle.source == "box_pair":
        return ingest_boxes(bundle.files["pred"], bundle.files["gt"])
    if bundle.source == "response_maps":
        return ingest_maps(bundle.files["maps"], metric, sigma, normalize)
    return read_metric_csv(bundle.files["metric"])


# --- writers -----------------------------------------------------------------

def _header(fh, kind: str) -> None:
    fh.write(f"# format_version: {FORMAT_VERSION} ({kind})\n")


def write_metric_csv(path, values: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, "metric")
        fh.write("frame,value\n")
        for i, v in enumerate(values, start=1):
            fh.write(f"{i},{float(v)!r}\n")


def write_box_csv(path, boxes: Sequence[BoundingBox]) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, "boxes")
        fh.write("frame,x,y,w,h\n")
        for i, b in enumerate(boxes, start=1):
            fh.write(f"{i},{b.x!r},{b.y!r},{b.w!r},{b.h!r}\n")


def write_response_maps(path, maps: Sequence[ResponseMap]) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"format_version": FORMAT_VERSION, "kind": "response_maps"}) + "\n")
        for i, cmap in enumerate(maps, start=1):
            rec = {"t": i, "rows": cmap.rows, "cols": cmap.cols,
                   "data": [float(v) for v in cmap.values.ravel()]}
            fh.write(json.dumps(rec) + "\n")


def write_events(fh, events, config: Optional[dict] = None) -> None:
    """JSONL event log: a header line, then one record per processed frame."""
    header = {"format_version": FORMAT_VERSION, "kind": "events"}
    if config is not None:
        header["config"] = config
    fh.write(json.dumps(header, sort_keys=True) + "\n")
    for ev in events:
        fh.write(json.dumps(ev.to_record()) + "\n")


def write_summary(path, report, config: dict) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "summary": report.summary(),
        "videos": [{"video_id": v.video_id, "tau_gt": v.tau_gt, "length": v.length}
                   for v in report.per_video],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_trials_csv(path, report) -> None:
    """Flat table, one row per (video, trial), for delay histograms and window ablations."""
    with open(path, "w", newline="") as fh:
        _header(fh, "trials")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "trial", "length", "tau_gt", "tau_hat", "outcome", "delay"])
        for v in report.per_video:
            for tr in v.trials:
                w.writerow([v.video_id, tr.trial, v.length, v.tau_gt,
                            "" if tr.tau_hat is None else tr.tau_hat, tr.outcome,
                            "" if tr.delay is None else tr.delay])
