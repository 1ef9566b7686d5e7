import csv
import io
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

import handnets
from petrisim import casestudy
from petrisim.engine import Event, SimConfig, Trace, Trajectory, simulate
from petrisim.export import (
    EVENT_COLUMNS,
    batch_csv,
    diverging_colour,
    export_matrix,
    export_trace,
    matrix_csv,
    sweep_csv,
    sweep_svg,
)
from petrisim.montecarlo import CorrelationMatrix, correlate, run_batch
from petrisim.net import Duration, Place, Transition
from petrisim.reliability import reliability_mc

SVG = "{http://www.w3.org/2000/svg}"


def rows(data: bytes):
    return list(csv.reader(io.StringIO(data.decode())))


def empty_trace():
    return Trace([], Trajectory(("p",), []), "deadlock", 0.0, None, {"p": 0}, {}, {"p": 0}, {})


def test_empty_trace_gives_header_only_csvs():
    tr = empty_trace()
    assert export_trace(tr, "events-csv") == (",".join(EVENT_COLUMNS) + "\n").encode()
    assert export_trace(tr, "trajectories-csv") == b"time,p\n"
    ET.fromstring(export_trace(tr, "timeline-svg"))


def test_two_event_trace():
    tr = simulate(handnets.chain())
    tr = replace(tr, events=tr.events[:2])
    table = rows(export_trace(tr, "events-csv"))
    assert table == [
        list(EVENT_COLUMNS),
        ["0.0", "fire", "t", "0", "p1", "-1", ""],
        ["2.0", "complete", "t", "0", "p2", "1", ""],
    ]


def test_events_with_several_deltas():
    tr = simulate(handnets.chain(5.0))
    complete = rows(export_trace(tr, "events-csv"))[2]
    assert complete[4].split(";") == ["E", "E", "p2"] and complete[5].split(";") == ["-1.0", "-1.0", "1"]


def test_trajectories_are_wide():
    table = rows(export_trace(simulate(handnets.chain(5.0)), "trajectories-csv"))
    assert table[0] == ["time", "p1", "p2", "E"]
    assert table[-1] == ["2.0", "0", "1", "3.0"]


def test_line_endings_and_quoting():
    tr = replace(empty_trace(), events=[Event(0, 0.0, "deadlock", detail='a,"b"')])
    data = export_trace(tr, "events-csv")
    assert b"\r" not in data and b'"a,""b"""' in data


def test_unknown_formats():
    with pytest.raises(ValueError):
        export_trace(empty_trace(), "pdf")
    with pytest.raises(ValueError):
        export_matrix(correlate(np.eye(3), list("abc")), "png")


def _system_run():
    net = casestudy.system_net(robots=3)
    for seed in range(50):
        tr = simulate(net, SimConfig(seed=seed, max_time=300.0))
        if tr.success and any(e.kind == "suspend" for e in tr.events):
            return tr
    raise AssertionError("no run with a suspension")


def test_timeline_matches_the_trace():
    tr = _system_run()
    root = ET.fromstring(export_trace(tr, "timeline-svg"))
    rects = root.iter(f"{SVG}rect")
    bars = [r for r in rects if r.get("class") in ("running", "suspended")]
    fired = {e.instance: e.transition for e in tr.events if e.kind == "fire"}
    # one bar per instance, plus one extra per suspend/resume pair
    assert {int(b.get("data-instance")) for b in bars} == set(fired)
    stacking = [i for i, t in fired.items() if t == "release_box"]
    assert len(stacking) == 3
    suspended = [b for b in bars if b.get("class") == "suspended"]
    assert len(suspended) == sum(e.kind == "suspend" for e in tr.events) > 0
    runs = [b for b in bars if b.get("class") == "running"]
    assert len(runs) == len(fired) + sum(e.kind == "resume" for e in tr.events)
    # a suspension splits its instance into running, suspended, running
    for s in suspended:
        inst = s.get("data-instance")
        assert [b.get("class") for b in bars if b.get("data-instance") == inst] == ["running", "suspended", "running"]


def test_inhibited_spans_are_drawn():
    # u becomes ready at 2 while q holds a token (1 to 3), so it waits inhibited until 3
    base = handnets.suspension()
    net = replace(
        base,
        places=base.places + (Place("c", tokens=1), Place("w"), Place("u_done")),
        transitions=base.transitions
        + (
            Transition("h", duration=Duration.constant(2), inputs={"c": 1}, outputs={"w": 1}),
            Transition("u", duration=Duration.constant(1), inputs={"w": 1}, outputs={"u_done": 1}, inhibitors=("q",)),
        ),
        goal=None,
    )
    tr = simulate(net)
    assert [(e.time, e.transition, e.detail) for e in tr.events if e.kind == "inhibited"] == [
        (2.0, "u", "on"),
        (3.0, "u", "off"),
    ]
    root = ET.fromstring(export_trace(tr, "timeline-svg"))
    spans = [r for r in root.iter(f"{SVG}rect") if r.get("class") == "inhibited"]
    assert len(spans) == 1


def test_exports_are_deterministic():
    a = simulate(casestudy.system_net(3), SimConfig(seed=4))
    b = simulate(casestudy.system_net(3), SimConfig(seed=4))
    for fmt in ("events-csv", "trajectories-csv", "timeline-svg"):
        assert export_trace(a, fmt) == export_trace(b, fmt)


def test_single_cell_matrix():
    m = CorrelationMatrix(["x"], np.array([[1.0]]), 10)
    assert matrix_csv(m) == b",x\nx,1.0\n"


def test_symmetric_matrix_csv_is_transpose_equal():
    rng = np.random.default_rng(0)
    m = correlate(rng.normal(size=(50, 3)), ["a", "b", "c"])
    table = rows(export_matrix(m, "csv"))
    body = [r[1:] for r in table[1:]]
    assert table[0][1:] == [r[0] for r in table[1:]]
    assert body == [list(c) for c in zip(*body)]


def test_heatmap_of_case_study_matrix():
    model = casestudy.capability_model()
    est = reliability_mc(model, 300, seed=1, distributions={d: casestudy.RELIABILITY for d in model.device_ids})
    order = {"mission": 0, "system": 1, "subsystem": 2}
    caps = sorted(model.capabilities, key=lambda c: order[c.level])
    svg = export_matrix(est.matrix, "heatmap-svg", [c.id for c in caps], model.device_ids, "capability vs device")
    root = ET.fromstring(svg)
    cells = [r for r in root.iter(f"{SVG}rect") if r.get("class") in ("cell", "undefined")]
    assert len(cells) == len(caps) * len(model.devices)
    labels = [t.text for t in root.iter(f"{SVG}text")]
    assert labels.index("box_stacking") < labels.index("detection") < labels.index("locomotion")


def test_undefined_cells_are_distinct():
    m = correlate(np.column_stack([np.arange(5.0), np.ones(5)]), ["x", "flat"])
    root = ET.fromstring(export_matrix(m, "heatmap-svg"))
    undef = [r for r in root.iter(f"{SVG}rect") if r.get("class") == "undefined"]
    assert len(undef) == 3 and all(r.get("fill") == "url(#undef)" for r in undef)
    assert rows(matrix_csv(m))[2] == ["flat", "nan", "nan"]


def test_diverging_scale():
    assert diverging_colour(1.0) == "#ff0000"
    assert diverging_colour(-1.0) == "#0000ff"
    assert diverging_colour(0.0) == "#ffffff"
    assert diverging_colour(float("nan")) != diverging_colour(0.0)


def test_batch_csv_columns():
    batch = run_batch(casestudy.mission_net(), casestudy.q1_mission_sampling(), 5, master_seed=3)
    table = rows(batch_csv(batch))
    assert table[0] == ["run", "robots", "outcome", "final_time", "goal_time", "goal"]
    assert [r[0] for r in table[1:]] == ["0", "1", "2", "3", "4"]


def test_sweep_exports():
    pts = [(1, 0.5), (2, 0.75), (3, 0.875)]
    assert sweep_csv(pts) == b"count,availability\n1,0.5\n2,0.75\n3,0.875\n"
    root = ET.fromstring(sweep_svg(pts))
    assert len(list(root.iter(f"{SVG}circle"))) == 3
    ET.fromstring(sweep_svg([]))
