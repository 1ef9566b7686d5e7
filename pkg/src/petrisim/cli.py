"""Command-line interface: ``petrisim <command> ...``.

Exit codes: 0 success, 1 model or usage error, 2 I/O error, 3 the simulation
ended without reaching its goal (timeout, deadlock or resource failure).

Output directories have a fixed layout:

  simulate     events.csv, trajectories.csv, timeline.svg, summary.json
  mc           batch.csv, summary.json, [correlation.csv, correlation.svg], [sweep.csv]
  reliability  report.json, [correlation.csv, correlation.svg], [sweep.csv, sweep.svg]
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, export, schemas
from .compose import FusionError, format_levels, levels_report, merge_nets
from .engine import OUTCOMES, SimConfig, simulate
from .fileformat import (
    FormatError,
    load_document,
    load_fusion,
    load_model,
    load_sampling,
    parse_document,
    parse_fusion,
    parse_model,
    parse_sampling,
    serialize_net,
)
from .montecarlo import (
    BatchError,
    Distribution,
    SamplingEntry,
    SamplingSpec,
    Target,
    correlation_matrix,
    run_batch,
    summarize,
)
from .net import InvalidNetError, POLICIES, validate_net
from .reach import reachable_markings
from .reliability import (
    capability_availability,
    check_model,
    effective_reliability,
    mission_availability,
    model_warnings,
    redundancy_sweep,
    reliability_mc,
)

EXIT_OK, EXIT_MODEL, EXIT_IO, EXIT_OUTCOME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_MODEL, f"{self.prog}: error: {message}\n")


def _out(args, text: str = "", data=None):
    if getattr(args, "format", "text") == "json":
        if data is not None:
            print(json.dumps(data, indent=2, sort_keys=True, allow_nan=True))
    elif text:
        print(text)


def _write(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    path.write_bytes(payload)


def _json_bytes(data) -> bytes:
    return (json.dumps(data, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _clean(x):
    """JSON-friendly numbers: NaN and infinities become None."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


# -- validate ---------------------------------------------------------------

_KINDS = {".pnet": "net", ".sampling": "sampling", ".map": "fusion", ".rel": "model"}


def cmd_validate(args) -> int:
    path = Path(args.file)
    text = path.read_text(encoding="utf-8")
    kind = args.kind or _KINDS.get(path.suffix, "net")
    warnings = []
    if kind == "net":
        doc = parse_document(text, str(path))
        warnings = [str(v) for v in validate_net(doc.net) if v.severity == "warning"]
        what = f"net {doc.net.name!r}: {len(doc.net.places)} places, {len(doc.net.resources)} resources, {len(doc.net.transitions)} transitions"
    elif kind == "sampling":
        spec = parse_sampling(text, str(path))
        what = f"sampling spec: {len(spec.entries)} entries"
    elif kind == "fusion":
        fm = parse_fusion(text, str(path))
        what = f"fusion map: {len(fm.places)} place groups, {len(fm.resources)} resource groups"
    else:
        doc = parse_model(text, str(path))
        warnings = model_warnings(doc.model)
        what = f"model {doc.model.name!r}: {len(doc.model.devices)} devices, {len(doc.model.capabilities)} capabilities"
    for w in warnings:
        print(f"{path}: warning: {w}", file=sys.stderr)
    _out(args, f"{path}: ok ({what})", {"file": str(path), "kind": kind, "valid": True, "warnings": warnings})
    return EXIT_OK


# -- simulate ---------------------------------------------------------------


def _config(args) -> SimConfig:
    return SimConfig(
        seed=args.seed,
        max_time=args.max_time,
        policy=args.policy,
        sample_interval=args.sample_interval,
        max_events=args.max_events,
    )


def cmd_simulate(args) -> int:
    doc = load_document(args.net)
    trace = simulate(doc.net, _config(args))
    levels = " ".join(f"{k}={v:.6g}" for k, v in sorted(trace.final_levels.items()))
    line = f"outcome={trace.outcome} time={trace.final_time:.6g}"
    if trace.goal_time is not None and trace.outcome != "success":
        line += f" goal_time={trace.goal_time:.6g}"
    if levels:
        line += " " + levels
    if trace.truncated:
        line += " (truncated)"
    summary = {
        "net": doc.net.name,
        "seed": args.seed,
        "outcome": trace.outcome,
        "final_time": trace.final_time,
        "goal_time": trace.goal_time,
        "final_tokens": trace.final_tokens,
        "final_levels": trace.final_levels,
        "events": len(trace.events),
        "truncated": trace.truncated,
    }
    if args.out_dir:
        out = Path(args.out_dir)
        _write(out / "events.csv", export.events_csv(trace))
        _write(out / "trajectories.csv", export.trajectories_csv(trace))
        _write(out / "timeline.svg", export.timeline_svg(trace))
        _write(out / "summary.json", _json_bytes(_clean(summary)))
    _out(args, line, _clean(summary))
    return EXIT_OK if trace.outcome == "success" else EXIT_OUTCOME


# -- mc ---------------------------------------------------------------------

_INLINE = re.compile(r"^\s*(?P<target>[^=]+?)\s*=\s*(?P<kind>\w+)\s*\((?P<args>[^)]*)\)\s*$")
_PREFIX = {
    "tokens": "initial_tokens",
    "level": "initial_level",
    "duration": "duration_param",
    "rate": "rate",
    "priority": "priority",
    "max_instances": "max_instances",
}


def parse_inline(text: str) -> SamplingEntry:
    """``tokens:robots=integer_uniform(1,4)``, ``duration:t.mean=normal(3,1)`` and so on."""
    m = _INLINE.match(text)
    if not m:
        raise UsageError(f"cannot read sampling entry {text!r}; expected TARGET=DIST(ARGS)")
    target = m["target"]
    if ":" not in target:
        raise UsageError(f"sampling target {target!r} needs a kind prefix ({', '.join(_PREFIX)})")
    prefix, element = target.split(":", 1)
    if prefix not in _PREFIX:
        raise UsageError(f"unknown sampling target kind {prefix!r}")
    detail = None
    if prefix in ("duration", "rate"):
        if "." not in element:
            raise UsageError(f"{prefix} target needs TRANSITION.{'PARAM' if prefix == 'duration' else 'RESOURCE'}")
        element, detail = element.rsplit(".", 1)
    try:
        params = tuple(float(a) for a in m["args"].split(",") if a.strip())
        dist = Distribution(m["kind"], params)
    except ValueError as exc:
        raise UsageError(f"bad distribution in {text!r}: {exc}") from None
    return SamplingEntry(Target(_PREFIX[prefix], element, detail), dist)


def _sampling(args, doc) -> SamplingSpec:
    entries = list(doc.sampling.entries) if doc.sampling else []
    if args.sampling:
        entries = list(load_sampling(args.sampling).entries)
    for item in args.sample or ():
        entry = parse_inline(item)
        entries = [e for e in entries if e.label != entry.label] + [entry]
    return SamplingSpec(entries)


def _sweep(text: str) -> tuple[str, list[int]]:
    m = re.match(r"^([^=]+)=(-?\d+):(-?\d+)$", text)
    if not m or int(m[2]) > int(m[3]):
        raise UsageError(f"--sweep expects PLACE=LO:HI with LO <= HI, got {text!r}")
    return m[1], list(range(int(m[2]), int(m[3]) + 1))


def _summary_line(s) -> str:
    parts = [f"success rate {s.success_rate:.3f} ({s.outcomes['success']}/{s.n_runs})"]
    if s.n_timed:
        p = " ".join(f"p{q}={v:.4g}" for q, v in s.percentiles.items())
        parts.append(f"time mean {s.time_mean:.4g} sd {s.time_sd:.4g} {p} (n={s.n_timed})")
    others = ", ".join(f"{o} {s.outcomes[o]}" for o in OUTCOMES if o != "success" and s.outcomes[o])
    if others:
        parts.append(others)
    return "; ".join(parts)


def cmd_mc(args) -> int:
    doc = load_document(args.net)
    spec = _sampling(args, doc)
    config = _config(args)
    out = Path(args.out_dir) if args.out_dir else None
    method = "spearman" if args.spearman else "pearson"
    if args.sweep:
        place, values = _sweep(args.sweep)
        if place not in doc.net.place_map:
            raise UsageError(f"--sweep names unknown place {place!r}")
        rows, lines, data = [], [], []
        for v in values:
            fixed = SamplingEntry(Target("initial_tokens", place), Distribution("constant", (v,)))
            sweep_spec = SamplingSpec([e for e in spec.entries if e.label != fixed.label] + [fixed])
            batch = run_batch(doc.net, sweep_spec, args.runs, args.seed, config, args.jobs)
            s = summarize(batch, basis=args.time_basis)
            rows.append((v, s.success_rate, s.time_mean, s.time_sd, s.time_se, s.n_timed))
            lines.append(f"{place}={v}: {_summary_line(s)}")
            data.append({"value": v, **s.as_dict(), "time_se": s.time_se})
        if out:
            _write(out / "sweep.csv", export.sweep_csv(rows, (place, "success_rate", "time_mean", "time_sd", "time_se", "n_timed")))
            _write(out / "summary.json", _json_bytes(_clean({"sweep": place, "rows": data})))
        _out(args, "\n".join(lines), _clean({"sweep": place, "rows": data}))
        return EXIT_OK

    batch = run_batch(doc.net, spec, args.runs, args.seed, config, args.jobs)
    s = summarize(batch, basis=args.time_basis)
    data = {**s.as_dict(), "time_se": s.time_se, "seed": args.seed, "inputs": batch.input_labels}
    text = _summary_line(s)
    if args.correlate:
        if not batch.input_labels:
            raise UsageError("--correlate needs at least one sampled input")
        outputs = ["final_time", "goal"] + [f"final:{r.id}" for r in doc.net.resources]
        cm = correlation_matrix(batch, batch.input_labels, outputs, method)
        data["correlation"] = {"method": method, "labels": cm.labels, "values": cm.values.tolist()}
        text += "\n" + _matrix_text(cm)
        if out:
            _write(out / "correlation.csv", export.matrix_csv(cm))
            _write(out / "correlation.svg", export.heatmap_svg(cm, title=f"{method} correlation, {batch.n_runs} runs"))
    if out:
        _write(out / "batch.csv", export.batch_csv(batch))
        _write(out / "summary.json", _json_bytes(_clean(data)))
    _out(args, text, _clean(data))
    return EXIT_OK


def _matrix_text(cm, rows=None, cols=None) -> str:
    rows = rows or cm.labels
    cols = cols or cm.labels
    width = max(len(c) for c in cols) + 1
    head = " " * (max(len(r) for r in rows) + 1) + "".join(f"{c:>{max(width, 8)}}" for c in cols)
    lines = [head]
    block = cm.block(rows, cols)
    for r, vals in zip(rows, block):
        cells = "".join(f"{('n/a' if math.isnan(v) else f'{v:.3f}'):>{max(width, 8)}}" for v in vals)
        lines.append(f"{r:<{max(len(x) for x in rows) + 1}}{cells}")
    return "\n".join(lines)


# -- reliability ------------------------------------------------------------


def _range(text: str) -> list[int]:
    m = re.match(r"^(\d+):(\d+)$", text)
    if not m or int(m[1]) < 1 or int(m[1]) > int(m[2]):
        raise UsageError(f"--range expects LO:HI with 1 <= LO <= HI, got {text!r}")
    return list(range(int(m[1]), int(m[2]) + 1))


def cmd_reliability(args) -> int:
    doc = load_model(args.model)
    model = check_model(doc.model)
    if args.systems:
        model = replace(model, n_systems=args.systems)
    dists = {} if args.fixed else doc.distributions
    # with sampled reliabilities the closed forms use the equivalent fixed value
    reference = replace(
        model,
        devices=tuple(
            replace(d, reliability=effective_reliability(dists[d.id], d.redundancy)) if d.id in dists else d
            for d in model.devices
        ),
    )
    exact = capability_availability(reference)
    exact_mission = mission_availability(reference)
    est = reliability_mc(model, args.trials, args.seed, dists)
    lines = [f"{'capability':<16}{'closed-form':>14}{'monte-carlo':>14}{'abs diff':>12}"]
    rows = {}
    for cid in model.capability_ids:
        a, b = exact[cid], est.availability[cid]
        rows[cid] = {"closed_form": a, "monte_carlo": b, "abs_diff": abs(a - b), "se": est.standard_error[cid]}
        lines.append(f"{cid:<16}{a:>14.6f}{b:>14.6f}{abs(a - b):>12.6f}")
    rows["mission"] = {
        "closed_form": exact_mission,
        "monte_carlo": est.mission,
        "abs_diff": abs(exact_mission - est.mission),
        "se": est.standard_error["mission"],
    }
    lines.append(f"{'mission (N=' + str(model.n_systems) + ')':<16}{exact_mission:>14.6f}{est.mission:>14.6f}{abs(exact_mission - est.mission):>12.6f}")
    if dists:
        lines.append("monte-carlo column samples device reliabilities from the model's distributions")
    report = {"model": model.name, "n_systems": model.n_systems, "trials": args.trials, "seed": args.seed, "rows": rows}
    out = Path(args.out_dir) if args.out_dir else None
    if args.sweep:
        counts = _range(args.range)
        curve = redundancy_sweep(model, args.sweep, counts, args.r if args.sweep == "subsystem" else None)
        label = "k" if args.sweep == "subsystem" else "N"
        lines.append(f"{args.sweep} sweep" + (f" (r={args.r})" if args.sweep == "subsystem" and args.r is not None else ""))
        lines += [f"  {label}={n}: {a:.6f}" for n, a in curve]
        report["sweep"] = {"axis": args.sweep, "reliability": args.r, "points": curve}
        if out:
            _write(out / "sweep.csv", export.sweep_csv(curve, (label, "availability")))
            _write(out / "sweep.svg", export.sweep_svg(curve, f"{args.sweep} redundancy ({label})"))
    if out:
        _write(out / "report.json", _json_bytes(_clean(report)))
        devices, caps = model.device_ids, _caps_by_level(model)
        _write(out / "correlation.csv", export.matrix_csv(est.matrix, caps, devices))
        _write(out / "correlation.svg", export.heatmap_svg(est.matrix, caps, devices, title=f"capability x device, {args.trials} trials"))
    _out(args, "\n".join(lines), _clean(report))
    return EXIT_OK


_LEVEL_RANK = {"mission": 0, "system": 1, "subsystem": 2}


def _caps_by_level(model) -> list[str]:
    caps = sorted(model.capabilities, key=lambda c: (_LEVEL_RANK.get(c.level, 3), c.id))
    return [c.id for c in caps]


# -- compose, reach, helpers ------------------------------------------------


def cmd_compose(args) -> int:
    nets = [load_document(p).net for p in args.nets]
    fusion = load_fusion(args.fusion) if args.fusion else None
    merged = merge_nets(nets, fusion)
    text = serialize_net(merged)
    if args.out:
        _write(Path(args.out), text)
    fused = len(fusion.places) + len(fusion.resources) if fusion else 0
    summary = (
        f"merged {len(nets)} nets into {merged.name!r}: {len(merged.places)} places, "
        f"{len(merged.resources)} resources, {len(merged.transitions)} transitions, {fused} fusion groups"
    )
    report = levels_report(merged)
    _out(
        args,
        summary + "\n" + format_levels(report) + ("" if args.out else "\n" + text.rstrip("\n")),
        {"name": merged.name, "places": len(merged.places), "resources": len(merged.resources),
         "transitions": len(merged.transitions), "fusion_groups": fused, "levels": report},
    )
    return EXIT_OK


def cmd_reach(args) -> int:
    net = load_document(args.net).net
    res = reachable_markings(net, args.max_states)
    lines = [res.summary()]
    for marking in sorted(res.deadlocks):
        lines.append("  deadlock: " + ", ".join(f"{p}={n}" for p, n in zip(res.places, marking) if n) or "  deadlock: (empty)")
    data = {
        "markings": len(res.markings),
        "deadlocks": [dict(zip(res.places, m)) for m in sorted(res.deadlocks)],
        "truncated": res.truncated,
    }
    _out(args, "\n".join(lines), data)
    return EXIT_OK


def cmd_case_models(args) -> int:
    from .casestudy import write_case_models

    paths = write_case_models(args.out)
    _out(args, "\n".join(f"wrote {p}" for p in paths), {"files": [str(p) for p in paths]})
    return EXIT_OK


def cmd_schema(args) -> int:
    out = Path(args.out)
    written = []
    for name, schema in schemas.SCHEMAS.items():
        path = out / f"{name}.schema.json"
        _write(path, _json_bytes(schema))
        written.append(str(path))
    _out(args, "\n".join(f"wrote {p}" for p in written), {"files": written})
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _add_sim_flags(p, seed_help="random seed (default 0)"):
    p.add_argument("--seed", type=int, default=0, help=seed_help)
    p.add_argument("--max-time", type=float, default=1000.0, help="stop the run at this time (default 1000)")
    p.add_argument("--policy", choices=POLICIES, help="override the net's conflict policy")
    p.add_argument("--sample-interval", type=float, default=1.0, help="trajectory sampling step (default 1)")
    p.add_argument("--max-events", type=int, default=100000, help="event bound per run (default 100000)")


def _add_format(p):
    p.add_argument("--format", choices=("text", "json"), default="text", help="summary format on stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="petrisim",
        description="Simulate and analyse stochastic timed Petri nets with resources.",
        epilog="exit codes: 0 ok, 1 model or usage error, 2 I/O error, 3 goal not reached",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a net, sampling, fusion or model file")
    p.add_argument("file")
    p.add_argument("--kind", choices=("net", "sampling", "fusion", "model"), help="file kind (default: from the extension)")
    _add_format(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run one simulation and export the trace")
    p.add_argument("net")
    _add_sim_flags(p)
    p.add_argument("--out-dir", help="write events.csv, trajectories.csv, timeline.svg, summary.json here")
    _add_format(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc", help="Monte Carlo batch with sampled parameters")
    p.add_argument("net")
    p.add_argument("--runs", type=int, default=1000, help="number of runs (default 1000)")
    _add_sim_flags(p, "master seed; run i derives its seeds from (seed, i) (default 0)")
    p.add_argument("--sampling", help="sampling file (replaces any sampling section of the net)")
    p.add_argument(
        "--sample",
        action="append",
        metavar="TARGET=DIST(ARGS)",
        help="inline sampling entry, e.g. tokens:robots=integer_uniform(1,4); repeatable",
    )
    p.add_argument("--sweep", metavar="PLACE=LO:HI", help="one batch per initial token count of PLACE")
    p.add_argument("--correlate", action="store_true", help="correlate sampled inputs with outcomes")
    p.add_argument("--spearman", action="store_true", help="rank correlation instead of Pearson")
    p.add_argument(
        "--time-basis",
        choices=("success", "goal", "all"),
        default="success",
        help="runs used for time statistics: successful (default), goal reached even if late, or all",
    )
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--out-dir", help="write batch.csv, summary.json and correlation or sweep files here")
    _add_format(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("reliability", help="closed-form and Monte Carlo capability availability")
    p.add_argument("model")
    p.add_argument("--trials", type=int, default=100000, help="Monte Carlo trials (default 100000)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--systems", type=int, help="override the number of robots N")
    p.add_argument("--fixed", action="store_true", help="ignore reliability distributions; use the model values")
    p.add_argument("--sweep", choices=("subsystem", "system"), help="redundancy sweep axis")
    p.add_argument("--range", default="1:5", help="sweep counts LO:HI (default 1:5)")
    p.add_argument("--r", type=float, help="device reliability for the subsystem sweep (default: model values)")
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry with mc; trials are vectorised")
    p.add_argument("--out-dir", help="write report.json, correlation and sweep files here")
    _add_format(p)
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("compose", help="merge nets through a fusion map")
    p.add_argument("nets", nargs="+")
    p.add_argument("--fusion", help="fusion map file")
    p.add_argument("--out", help="merged .pnet file (default: print it)")
    _add_format(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("reach", help="untimed reachability and deadlock markings")
    p.add_argument("net")
    p.add_argument("--max-states", type=int, default=10000, help="exploration bound (default 10000)")
    _add_format(p)
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("case-models", help="write the tower-building case-study files")
    p.add_argument("--out", default="case-models", help="output directory (default ./case-models)")
    _add_format(p)
    p.set_defaults(func=cmd_case_models)

    p = sub.add_parser("schema", help="write the JSON Schemas of the file formats")
    p.add_argument("--out", default="schema", help="output directory (default ./schema)")
    _add_format(p)
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, InvalidNetError, FusionError, BatchError, UsageError, ValueError) as exc:
        print(f"petrisim {args.command}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"petrisim {args.command}: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
