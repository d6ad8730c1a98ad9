"""Observation CSV parsing, result documents, and plot-series output."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .integrate import Trajectory
from .project import ObservedSeries

__all__ = [
    "ParseError",
    "SchemaError",
    "GridMismatchError",
    "parse_experiment_csv",
    "format_experiment_csv",
    "ResultDocument",
    "write_result",
    "read_result",
    "input_digest",
    "emit_plot_series",
    "parse_plot_series",
    "atomic_write_text",
]


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


# --------------------------------------------------------------------------
# experiment files
# --------------------------------------------------------------------------

_TEXT_KEYS = {"material", "label"}


def _header(line: str, lineno: int) -> tuple[str, str]:
    body = line[1:].strip()
    if "=" not in body:
        raise ParseError(lineno, f"header must look like '# key=value', got {line!r}")
    key, value = (s.strip() for s in body.split("=", 1))
    if key not in {"T", "RH", "RH%"} | _TEXT_KEYS:
        raise ParseError(lineno, f"unknown header key {key!r}")
    if not value:
        raise ParseError(lineno, f"empty value for {key!r}")
    return key, value


def _number(text: str, lineno: int, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(lineno, f"{what} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(lineno, f"{what} must be finite, got {text!r}")
    return v


def parse_experiment_csv(text: str) -> ObservedSeries:
    """Parse ``# key=value`` header lines followed by ``day,index`` rows.

    Required headers: ``T`` (Celsius) and either ``RH`` (fraction) or
    ``RH%`` (percent). Optional: ``material``. Blank lines are ignored.
    """
    headers: dict[str, str] = {}
    days: list[float] = []
    indices: list[int] = []
    first_data = None
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r").strip()
        if not line:
            continue
        if line.startswith("#"):
            if first_data is not None:
                raise ParseError(lineno, "header line after data rows")
            key, value = _header(line, lineno)
            if key in headers or (key.startswith("RH") and any(k.startswith("RH") for k in headers)):
                raise ParseError(lineno, f"duplicate header {key!r}")
            headers[key] = value
            continue
        first_data = first_data or lineno
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ParseError(lineno, f"expected 'day,index', got {line!r}")
        day = _number(parts[0], lineno, "day")
        idx = _number(parts[1], lineno, "index")
        if idx != int(idx):
            raise ParseError(lineno, f"mold index must be an integer, got {parts[1]!r}")
        if not 0 <= idx <= 6:
            raise ParseError(lineno, f"mold index {int(idx)} outside the 0..6 scale")
        if day < 0:
            raise ParseError(lineno, f"negative day {parts[0]!r}")
        if days and day <= days[-1]:
            raise ParseError(lineno, f"day {parts[0]} does not increase")
        days.append(day)
        indices.append(int(idx))

    if not days:
        raise ParseError(max(1, text.count("\n")), "no data rows")
    if "T" not in headers:
        raise ParseError(1, "missing '# T=<celsius>' header")
    temperature = _number(headers["T"], 1, "T")
    if "RH" in headers:
        humidity = _number(headers["RH"], 1, "RH")
    elif "RH%" in headers:
        humidity = _number(headers["RH%"], 1, "RH%") / 100.0
    else:
        raise ParseError(1, "missing '# RH=<fraction>' header")
    if not 0 < humidity <= 1:
        raise ParseError(1, f"relative humidity {humidity} outside (0, 1]")
    return ObservedSeries(
        np.array(days), np.array(indices), humidity, temperature, headers.get("material", "")
    )


def format_experiment_csv(odd: ObservedSeries) -> str:
    lines = []
    if odd.label:
        lines.append(f"# material={odd.label}")
    lines += [f"# T={odd.temperature:.17g}", f"# RH={odd.humidity:.17g}"]
    lines += [f"{t:.17g},{int(i)}" for t, i in zip(odd.times, odd.indices)]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# result documents
# --------------------------------------------------------------------------


@dataclass
class ResultDocument:
    kind: str
    input_digest: str
    params: dict[str, Any]
    residuals: dict[str, Any] = field(default_factory=dict)
    fisher: dict[str, Any] | None = None
    tool_version: str = ""
    extra: dict[str, Any] = field(default_factory=dict)


_DOC_FIELDS = tuple(f.name for f in fields(ResultDocument))
_REQUIRED = ("kind", "input_digest", "params")


def input_digest(*blobs: bytes | str) -> str:
    h = hashlib.sha256()
    for b in blobs:
        data = b.encode("utf-8") if isinstance(b, str) else b
        h.update(len(data).to_bytes(8, "little"))
        h.update(data)
    return h.hexdigest()


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    return obj


def _encode(obj, indent: int) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return "NaN"
        if math.isinf(obj):
            return "Infinity" if obj > 0 else "-Infinity"
        text = f"{obj:.17g}"
        # keep floats recognisable as floats after a round trip
        return text if any(c in text for c in ".eE") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items())
        body = ",\n".join(f"{inner}{json.dumps(k)}: {_encode(v, indent + 1)}" for k, v in items)
        return "{\n" + body + "\n" + pad + "}"
    raise SchemaError(f"cannot serialize value of type {type(obj).__name__}")


def write_result(doc: ResultDocument) -> str:
    """Deterministic JSON text: sorted keys, floats at 17 significant digits."""
    payload = {name: _plain(getattr(doc, name)) for name in _DOC_FIELDS}
    return _encode(payload, 0) + "\n"


def read_result(text: str) -> ResultDocument:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a JSON document: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("result document must be a JSON object")
    unknown = sorted(set(data) - set(_DOC_FIELDS))
    if unknown:
        raise SchemaError(f"unknown field {unknown[0]!r}")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise SchemaError(f"missing field {missing[0]!r}")
    if not isinstance(data["kind"], str) or not isinstance(data["input_digest"], str):
        raise SchemaError("'kind' and 'input_digest' must be strings")
    for name in ("params", "residuals", "extra"):
        if name in data and not isinstance(data[name], dict):
            raise SchemaError(f"field {name!r} must be an object")
    if data.get("fisher") is not None and not isinstance(data["fisher"], dict):
        raise SchemaError("field 'fisher' must be an object or null")
    return ResultDocument(**data)


# --------------------------------------------------------------------------
# plot series
# --------------------------------------------------------------------------


def _check_grids(trajectories: Sequence[Trajectory]) -> np.ndarray:
    if not trajectories:
        raise ValueError("no trajectories to emit")
    t0 = trajectories[0].times
    for tr in trajectories[1:]:
        if tr.times.shape != t0.shape or not np.array_equal(tr.times, t0):
            raise GridMismatchError(f"series {tr.label!r} is on a different time grid")
    return t0


def _svg(times, series, labels, width=720, height=420, max_points=2000) -> str:
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
    ml, mr, mt, mb = 56, 150, 20, 44
    pw, ph = width - ml - mr, height - mt - mb
    t_lo, t_hi = float(times[0]), float(times[-1])
    vals = np.concatenate(series)
    finite = vals[np.isfinite(vals)]
    y_lo = min(0.0, float(finite.min())) if finite.size else 0.0
    y_hi = float(finite.max()) if finite.size else 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    t_span = t_hi - t_lo or 1.0
    stride = max(1, int(math.ceil(len(times) / max_points)))
    idx = np.unique(np.r_[np.arange(0, len(times), stride), len(times) - 1])

    def sx(t):
        return ml + (t - t_lo) / t_span * pw

    def sy(v):
        return mt + ph - (v - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(5):
        tv = t_lo + k * t_span / 4
        yv = y_lo + k * (y_hi - y_lo) / 4
        out.append(f'<text x="{sx(tv):.1f}" y="{mt + ph + 16}" font-size="11" text-anchor="middle">{tv:.4g}</text>')
        out.append(f'<text x="{ml - 6}" y="{sy(yv) + 4:.1f}" font-size="11" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 8}" font-size="12" text-anchor="middle">t (days)</text>')
    for i, (v, lab) in enumerate(zip(series, labels)):
        color = colors[i % len(colors)]
        pts = " ".join(f"{sx(times[j]):.2f},{sy(v[j]):.2f}" for j in idx if np.isfinite(v[j]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        text = str(lab).replace("&", "&amp;").replace("<", "&lt;")
        out.append(f'<text x="{ml + pw + 34}" y="{ly}" font-size="11">{text}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot_series(
    trajectories: Sequence[Trajectory],
    labels: Sequence[str] | None = None,
    metadata: Mapping[str, Any] | None = None,
) -> tuple[str, str]:
    """CSV (time column plus one column per series) and a standalone SVG chart.

    ``metadata`` entries are written as leading ``# key=value`` lines so a
    POD file can carry its temperature and humidity.
    """
    times = _check_grids(trajectories)
    labels = list(labels) if labels is not None else [tr.label or f"series{i}" for i, tr in enumerate(trajectories)]
    if len(labels) != len(trajectories):
        raise ValueError("one label per trajectory is required")
    if len(set(labels)) != len(labels) or "day" in labels:
        raise ValueError("labels must be unique and must not be 'day'")
    buf = _io.StringIO()
    for k, v in (metadata or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["day", *labels])
    cols = [tr.values for tr in trajectories]
    for j, t in enumerate(times):
        w.writerow([f"{t:.17g}", *(f"{c[j]:.17g}" for c in cols)])
    return buf.getvalue(), _svg(times, cols, labels)


def parse_plot_series(text: str) -> tuple[list[Trajectory], dict[str, str]]:
    """Inverse of :func:`emit_plot_series` for the CSV part."""
    meta: dict[str, str] = {}
    body = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise ParseError(lineno, f"header must look like '# key=value', got {line!r}")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append((lineno, line))
    if not body:
        raise ParseError(1, "no series data")
    head = next(csv.reader([body[0][1]]))
    if head[0] != "day" or len(head) < 2:
        raise ParseError(body[0][0], "first row must be 'day,<label>,...'")
    rows = []
    for lineno, line in body[1:]:
        cells = next(csv.reader([line]))
        if len(cells) != len(head):
            raise ParseError(lineno, f"expected {len(head)} columns, got {len(cells)}")
        rows.append([_number(c, lineno, head[i]) for i, c in enumerate(cells)])
    if len(rows) < 2:
        raise ParseError(body[-1][0], "a series needs at least two rows")
    arr = np.array(rows)
    return [Trajectory(arr[:, 0].copy(), arr[:, i].copy(), head[i]) for i in range(1, len(head))], meta


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
