"""CSV and binary time-tag file formats.

Histogram CSV::

    # bin_width_ps=100.0
    # t0_ns=-2.0
    # n_triggers=20000000000
    # background_per_bin=30.0
    bin_start_ns,counts
    -2.000,31
    ...

Header comment lines carry ``key=value`` metadata.  Time-tag files are a
flat sequence of unsigned 64-bit little-endian picosecond timestamps.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .detection import ArrivalHistogram, CoincidenceHistogram
from .errors import FormatError
from .source import KIND_CODES, KIND_NAMES, EmissionStream

TIMETAG_DTYPE = np.dtype("<u8")


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


def _split_header(path):
    meta, rows = {}, []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                body = s[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            rows.append((lineno, s))
    return meta, rows


def _rows(path, expected_header):
    meta, rows = _split_header(path)
    if not rows:
        raise FormatError("file has no header row", path=path)
    lineno, header = rows[0]
    cols = [c.strip() for c in header.split(",")]
    if cols != list(expected_header):
        raise FormatError(f"expected columns {','.join(expected_header)}, got {header}", path=path, line=lineno)
    return meta, rows[1:]


def write_histogram_csv(hist: ArrivalHistogram, path) -> None:
    buf = io.StringIO()
    buf.write(f"# bin_width_ps={hist.bin_width!r}\n")
    buf.write(f"# t0_ns={hist.t0!r}\n")
    buf.write(f"# n_triggers={int(hist.n_triggers)}\n")
    buf.write(f"# background_per_bin={float(hist.background_per_bin)!r}\n")
    for k in sorted(hist.meta):
        v = hist.meta[k]
        if isinstance(v, (int, float, str)) and not isinstance(v, bool):
            buf.write(f"# {k}={v!r}\n" if isinstance(v, float) else f"# {k}={v}\n")
    buf.write("bin_start_ns,counts\n")
    # integer picosecond starts keep the text identical across platforms
    start_ps = np.rint(hist.t0 * 1e3 + hist.bin_width * np.arange(len(hist.counts))).astype(np.int64)
    for s, c in zip(start_ps, hist.counts):
        buf.write(f"{s / 1000:.3f},{int(c)}\n")
    _write(path, buf.getvalue())


def read_histogram_csv(path) -> ArrivalHistogram:
    meta, rows = _rows(path, ("bin_start_ns", "counts"))
    starts, counts = [], []
    for lineno, s in rows:
        parts = s.split(",")
        if len(parts) != 2:
            raise FormatError("expected 2 fields", path=path, line=lineno)
        try:
            start = float(parts[0])
            count = float(parts[1])
        except ValueError as exc:
            raise FormatError(str(exc), path=path, line=lineno) from None
        if count < 0:
            raise FormatError(f"negative count {parts[1]}", path=path, line=lineno)
        if count != int(count):
            raise FormatError(f"non-integer count {parts[1]}", path=path, line=lineno)
        starts.append(start)
        counts.append(int(count))
    if len(counts) < 2:
        raise FormatError("histogram needs at least two bins", path=path)
    starts = np.array(starts)
    steps = np.diff(starts)
    width_ns = float(meta.get("bin_width_ps", steps[0] * 1e3)) * 1e-3
    bad = np.flatnonzero(np.abs(steps - width_ns) > 1e-6 + 1e-6 * abs(width_ns))
    if len(bad):
        raise FormatError("bin starts are not evenly spaced", path=path, line=rows[bad[0] + 1][0])
    extra = {k: v for k, v in meta.items() if k not in ("bin_width_ps", "t0_ns", "n_triggers", "background_per_bin")}
    return ArrivalHistogram(
        width_ns * 1e3,
        np.array(counts, dtype=np.int64),
        t0=float(starts[0]),
        n_triggers=int(float(meta.get("n_triggers", 0))),
        background_per_bin=float(meta.get("background_per_bin", 0.0)),
        meta=extra,
    )


def write_events_csv(stream: EmissionStream, path) -> None:
    buf = io.StringIO()
    buf.write(f"# rep_rate_mhz={stream.rep_rate!r}\n# n_pulses={stream.n_pulses}\n")
    buf.write("pulse_index,timestamp_ns,kind\n")
    names = [KIND_NAMES[k] for k in sorted(KIND_NAMES)]
    buf.writelines(
        f"{i},{t:.6f},{names[k]}\n"
        for i, t, k in zip(stream.pulse_index.tolist(), stream.timestamp.tolist(), stream.kind.tolist())
    )
    _write(path, buf.getvalue())


def read_events_csv(path) -> EmissionStream:
    meta, rows = _rows(path, ("pulse_index", "timestamp_ns", "kind"))
    idx, ts, kinds = [], [], []
    for lineno, s in rows:
        parts = s.split(",")
        try:
            i, t, k = int(parts[0]), float(parts[1]), KIND_CODES[parts[2].strip()]
        except (ValueError, IndexError, KeyError):
            raise FormatError(f"malformed event row {s!r}", path=path, line=lineno) from None
        idx.append(i)
        ts.append(t)
        kinds.append(k)
    n_pulses = int(meta.get("n_pulses", (max(idx) + 1) if idx else 1))
    return EmissionStream(
        np.array(idx, dtype=np.int64), np.array(ts), np.array(kinds, dtype=np.int8),
        float(meta.get("rep_rate_mhz", 80.0)), n_pulses,
    )


def write_timetags(path, times_ns) -> None:
    """Absolute arrival times (ns) as little-endian uint64 picoseconds."""
    ps = np.rint(np.asarray(times_ns, dtype=float) * 1e3)
    if np.any(ps < 0):
        raise ValueError("time tags must be non-negative")
    Path(path).write_bytes(ps.astype(TIMETAG_DTYPE).tobytes())


def read_timetags(path) -> np.ndarray:
    """Time tags in picoseconds (uint64)."""
    raw = Path(path).read_bytes()
    if len(raw) % 8:
        raise FormatError("truncated record", path=path, offset=len(raw) - len(raw) % 8)
    return np.frombuffer(raw, dtype=TIMETAG_DTYPE).copy()


def stream_to_timetags(stream: EmissionStream, path) -> None:
    write_timetags(path, stream.absolute_times())


def write_coincidences_csv(coinc: CoincidenceHistogram, path) -> None:
    buf = io.StringIO()
    buf.write(f"# rep_period_ns={coinc.rep_period!r}\n# bin_width_ns={coinc.bin_ns!r}\n")
    buf.write("delay_ns,counts\n")
    for d, c in zip(coinc.centers, coinc.counts):
        buf.write(f"{d:.4f},{int(c)}\n")
    _write(path, buf.getvalue())


def read_coincidences_csv(path) -> CoincidenceHistogram:
    meta, rows = _rows(path, ("delay_ns", "counts"))
    d, c = [], []
    for lineno, s in rows:
        try:
            a, b = s.split(",")
            d.append(float(a))
            c.append(int(b))
        except ValueError:
            raise FormatError(f"malformed row {s!r}", path=path, line=lineno) from None
        if c[-1] < 0:
            raise FormatError("negative count", path=path, line=lineno)
    d = np.array(d)
    w = float(meta.get("bin_width_ns", d[1] - d[0]))
    edges = np.concatenate([d - w / 2, [d[-1] + w / 2]])
    return CoincidenceHistogram(edges, np.array(c, dtype=np.int64), float(meta["rep_period_ns"]))


def write_trace_csv(trace, path) -> None:
    trace = np.asarray(trace, dtype=float)
    buf = io.StringIO()
    buf.write("scan_sample,intensity\n")
    for x, y in trace:
        buf.write(f"{x:.6g},{y:.9g}\n")
    _write(path, buf.getvalue())


def read_trace_csv(path) -> np.ndarray:
    _meta, rows = _rows(path, ("scan_sample", "intensity"))
    out = []
    for lineno, s in rows:
        try:
            a, b = s.split(",")
            out.append((float(a), float(b)))
        except ValueError:
            raise FormatError(f"malformed row {s!r}", path=path, line=lineno) from None
    return np.array(out)


def write_table_csv(path, header, rows, fmt="{:.9g}") -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt.format(v) if isinstance(v, float) else v for v in row])
    _write(path, buf.getvalue())


def write_fit_dump(path, fit) -> None:
    """(t, data, model, residual) columns of a fit, for plotting."""
    rows = zip(fit.t, fit.data, fit.model, fit.data - fit.model)
    write_table_csv(path, ("t", "data", "model", "residual"), [tuple(float(v) for v in r) for r in rows])


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, entries: list[dict], parameters: dict) -> Path:
    """Manifest of every emitted file with its content hash and generating parameters."""
    out_dir = Path(out_dir)
    files = []
    for e in entries:
        p = out_dir / e["file"]
        files.append({**e, "sha256": sha256(p), "bytes": p.stat().st_size})
    path = out_dir / "manifest.json"
    path.write_text(json.dumps({"parameters": parameters, "files": files}, indent=2) + "\n", encoding="utf-8")
    return path
