"""CSV and SVG exports for traces, batches, correlation matrices and sweeps.

Every function returns bytes and depends only on its arguments, so the same
input always gives the same file. CSV uses commas, LF line endings and a
header row. SVG output is static and has no scripts.
"""
from __future__ import annotations

import csv
import io
import math
from typing import Sequence
from xml.sax.saxutils import escape

from .engine import Trace
from .montecarlo import BatchResult, CorrelationMatrix

TRACE_FORMATS = ("events-csv", "trajectories-csv", "timeline-svg")
MATRIX_FORMATS = ("csv", "heatmap-svg")
EVENT_COLUMNS = ("time", "kind", "transition", "instance", "element", "delta", "detail")

RUNNING = "#2e9d4f"
SUSPENDED = "#e08a1e"
INHIBITED = "#9a9a9a"
UNDEFINED = "#d9d9d9"


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _csv(header: Sequence[str], rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def events_csv(trace: Trace) -> bytes:
    """One row per event; several deltas of one event are joined with ``;``."""
    rows = []
    for e in trace.events:
        rows.append(
            (
                _num(e.time),
                e.kind,
                e.transition or "",
                "" if e.instance is None else str(e.instance),
                ";".join(k for k, _ in e.deltas),
                ";".join(_num(v) for _, v in e.deltas),
                e.detail,
            )
        )
    return _csv(EVENT_COLUMNS, rows)


def trajectories_csv(trace: Trace) -> bytes:
    traj = trace.trajectory
    return _csv(("time", *traj.columns), ([_num(v) for v in row] for row in traj.rows))


# -- timeline ---------------------------------------------------------------


def _intervals(trace: Trace):
    """Per-instance (transition, instance, [(start, end, state)]) plus inhibited spans."""
    end = trace.final_time
    open_seg: dict[int, tuple[float, str]] = {}
    owner: dict[int, str] = {}
    segs: dict[int, list] = {}
    inhibited: dict[str, list] = {}
    inhibited_open: dict[str, float] = {}
    for e in trace.events:
        if e.kind == "fire":
            owner[e.instance] = e.transition
            segs[e.instance] = []
            open_seg[e.instance] = (e.time, "running")
        elif e.kind in ("suspend", "resume", "complete") and e.instance in open_seg:
            start, state = open_seg.pop(e.instance)
            segs[e.instance].append((start, e.time, state))
            if e.kind == "suspend":
                open_seg[e.instance] = (e.time, "suspended")
            elif e.kind == "resume":
                open_seg[e.instance] = (e.time, "running")
        elif e.kind == "inhibited":
            if e.detail == "on":
                inhibited_open[e.transition] = e.time
            elif e.transition in inhibited_open:
                inhibited.setdefault(e.transition, []).append((inhibited_open.pop(e.transition), e.time))
    for inst, (start, state) in open_seg.items():
        segs[inst].append((start, end, state))
    for tid, start in inhibited_open.items():
        inhibited.setdefault(tid, []).append((start, end))
    instances = [(owner[i], i, segs[i]) for i in sorted(segs)]
    return instances, inhibited


def _lanes(instances):
    """Assign each instance of a transition to the first free sub-row."""
    rows: dict[str, list[float]] = {}
    placed = []
    for tid, inst, segs in instances:
        start, stop = segs[0][0], segs[-1][1]
        free = rows.setdefault(tid, [])
        for r, busy_until in enumerate(free):
            if busy_until <= start and not (busy_until == start == stop):
                free[r] = stop
                break
        else:
            r = len(free)
            free.append(stop)
        placed.append((tid, inst, r, segs))
    return placed, {tid: len(v) for tid, v in rows.items()}


def timeline_svg(trace: Trace, transitions: Sequence[str] | None = None, width: int = 900) -> bytes:
    """One lane per transition with a sub-row per concurrent instance.

    Running time is green, suspension orange and spans where the transition
    is inhibited gray. Lanes follow the order of ``transitions`` or, by
    default, sorted transition ids.
    """
    instances, inhibited = _intervals(trace)
    placed, depth = _lanes(instances)
    names = list(transitions) if transitions is not None else sorted(set(depth) | set(inhibited))
    row_h, pad, left, top = 14, 6, 150, 28
    horizon = max(trace.final_time, 1e-9)
    scale = (width - left - 20) / horizon
    y = top
    lane_y = {}
    for tid in names:
        lane_y[tid] = y
        y += max(depth.get(tid, 1), 1) * row_h + pad
    height = y + 30

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="16">outcome: {escape(trace.outcome)}, final time {trace.final_time:.3f}</text>',
    ]
    for tid in names:
        ly = lane_y[tid]
        h = max(depth.get(tid, 1), 1) * row_h
        out.append(f'<text x="4" y="{ly + h / 2 + 4:.2f}">{escape(tid)}</text>')
        out.append(f'<line x1="{left}" y1="{ly + h + pad / 2:.2f}" x2="{width - 20}" y2="{ly + h + pad / 2:.2f}" stroke="#eeeeee"/>')
        for a, b in inhibited.get(tid, []):
            out.append(
                f'<rect class="inhibited" x="{left + a * scale:.2f}" y="{ly:.2f}" width="{max((b - a) * scale, 0.5):.2f}" '
                f'height="{h}" fill="{INHIBITED}" fill-opacity="0.35"/>'
            )
    for tid, inst, r, segs in placed:
        if tid not in lane_y:
            continue
        ry = lane_y[tid] + r * row_h + 2
        for a, b, state in segs:
            colour = RUNNING if state == "running" else SUSPENDED
            out.append(
                f'<rect class="{state}" data-instance="{inst}" x="{left + a * scale:.2f}" y="{ry:.2f}" '
                f'width="{max((b - a) * scale, 0.5):.2f}" height="{row_h - 4}" fill="{colour}"/>'
            )
    axis_y = height - 22
    out.append(f'<line x1="{left}" y1="{axis_y}" x2="{width - 20}" y2="{axis_y}" stroke="black"/>')
    for i in range(6):
        t = horizon * i / 5
        x = left + t * scale
        out.append(f'<line x1="{x:.2f}" y1="{axis_y}" x2="{x:.2f}" y2="{axis_y + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{axis_y + 16}" text-anchor="middle">{t:.1f}</text>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def export_trace(trace: Trace, fmt: str) -> bytes:
    if fmt == "events-csv":
        return events_csv(trace)
    if fmt == "trajectories-csv":
        return trajectories_csv(trace)
    if fmt == "timeline-svg":
        return timeline_svg(trace)
    raise ValueError(f"unknown trace format {fmt!r}; expected one of {', '.join(TRACE_FORMATS)}")


# -- batches, matrices, sweeps ----------------------------------------------


def batch_csv(batch: BatchResult) -> bytes:
    resources = sorted({k for r in batch.runs for k in r.final_levels})
    header = ["run", *batch.input_labels, "outcome", "final_time", "goal_time", "goal", *[f"final:{k}" for k in resources]]
    rows = []
    for r in batch.runs:
        rows.append(
            [
                r.index,
                *[_num(r.inputs[k]) for k in batch.input_labels],
                r.outcome,
                _num(r.final_time),
                _num(r.goal_time),
                r.goal,
                *[_num(r.final_levels.get(k)) for k in resources],
            ]
        )
    return _csv(header, rows)


def _select(matrix: CorrelationMatrix, rows, cols):
    rows = list(rows) if rows is not None else list(matrix.labels)
    cols = list(cols) if cols is not None else list(matrix.labels)
    return rows, cols, matrix.block(rows, cols)


def matrix_csv(matrix: CorrelationMatrix, rows=None, cols=None) -> bytes:
    """Labeled CSV; undefined entries are written as ``nan``."""
    rows, cols, block = _select(matrix, rows, cols)
    return _csv(["", *cols], ([r, *[_num(v) for v in line]] for r, line in zip(rows, block)))


def diverging_colour(r: float) -> str:
    """Blue (-1) through white (0) to red (+1)."""
    if r is None or math.isnan(r):
        return UNDEFINED
    r = max(-1.0, min(1.0, float(r)))
    if r >= 0:
        g = round(255 * (1 - r))
        return f"#ff{g:02x}{g:02x}" if r < 1 else "#ff0000"
    b = round(255 * (1 + r))
    return f"#{b:02x}{b:02x}ff"


def heatmap_svg(matrix: CorrelationMatrix, rows=None, cols=None, title: str = "") -> bytes:
    rows, cols, block = _select(matrix, rows, cols)
    cell, left, top = 46, 130, 110
    width = left + cell * len(cols) + 90
    height = top + cell * len(rows) + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        '<defs><pattern id="undef" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">'
        f'<rect width="6" height="6" fill="{UNDEFINED}"/><line x1="0" y1="0" x2="0" y2="6" stroke="#888888"/></pattern></defs>',
    ]
    if title:
        out.append(f'<text x="4" y="14">{escape(title)}</text>')
    for j, c in enumerate(cols):
        x = left + j * cell + cell / 2
        out.append(f'<text transform="translate({x:.1f},{top - 6}) rotate(-50)">{escape(c)}</text>')
    for i, r in enumerate(rows):
        y = top + i * cell
        out.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4:.1f}" text-anchor="end">{escape(r)}</text>')
        for j, v in enumerate(block[i]):
            x = left + j * cell
            undefined = math.isnan(v)
            fill = "url(#undef)" if undefined else diverging_colour(v)
            label = "n/a" if undefined else f"{v:.2f}"
            out.append(
                f'<rect class="{"undefined" if undefined else "cell"}" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{fill}" stroke="white"/>'
            )
            out.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle">{label}</text>')
    # legend
    lx = left + cell * len(cols) + 20
    steps = 10
    for k in range(steps + 1):
        v = 1 - 2 * k / steps
        ly = top + k * 12
        out.append(f'<rect x="{lx}" y="{ly}" width="14" height="12" fill="{diverging_colour(v)}"/>')
        if k in (0, steps // 2, steps):
            out.append(f'<text x="{lx + 18}" y="{ly + 10}">{v:+.0f}</text>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def export_matrix(matrix: CorrelationMatrix, fmt: str, rows=None, cols=None, title: str = "") -> bytes:
    if fmt == "csv":
        return matrix_csv(matrix, rows, cols)
    if fmt == "heatmap-svg":
        return heatmap_svg(matrix, rows, cols, title)
    raise ValueError(f"unknown matrix format {fmt!r}; expected one of {', '.join(MATRIX_FORMATS)}")


def sweep_csv(points: Sequence[tuple], header=("count", "availability")) -> bytes:
    return _csv(header, ([_num(v) for v in p] for p in points))


def sweep_svg(points: Sequence[tuple], xlabel: str = "count", ylabel: str = "availability") -> bytes:
    """Line chart of a sweep curve."""
    width, height, left, bottom, top = 420, 300, 60, 40, 20
    xs = [float(p[0]) for p in points]
    ys = [float(p[1]) for p in points]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys + [1.0]), max(ys + [1.0])) if ys else (0.0, 1.0)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1e-3

    def px(x):
        return left + (x - x0) / (x1 - x0) * (width - left - 20)

    def py(y):
        return height - bottom - (y - y0) / (y1 - y0) * (height - bottom - top)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - 20}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
        f'<text x="{(width + left) / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text transform="translate(14,{(height - bottom + top) / 2}) rotate(-90)" text-anchor="middle">{escape(ylabel)}</text>',
        f'<text x="{left - 4}" y="{py(y0) + 4:.1f}" text-anchor="end">{y0:.4f}</text>',
        f'<text x="{left - 4}" y="{py(y1) + 4:.1f}" text-anchor="end">{y1:.4f}</text>',
    ]
    if points:
        path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{path}" fill="none" stroke="#1f5fa8" stroke-width="2"/>')
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="#1f5fa8"/>')
            out.append(f'<text x="{px(x):.2f}" y="{height - bottom + 14}" text-anchor="middle">{x:g}</text>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
