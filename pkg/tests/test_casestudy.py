"""Tower-building case study: shipped files, mission behaviour and the capability view."""
from dataclasses import replace

import pytest

from petrisim.casestudy import (
    BOXES,
    CAPABILITIES,
    DEADLINE,
    MISSION_CAPABILITY,
    build_case_models,
    capability_model,
    mission_net,
    robots_fixed,
    shipped_path,
    system_net,
)
from petrisim.compose import merge_nets
from petrisim.engine import SimConfig, simulate
from petrisim.fileformat import load_document, load_fusion, load_model, load_sampling, serialize_net
from petrisim.montecarlo import run_batch, summarize
from petrisim.net import validate_net
from petrisim.reach import reachable_markings
from petrisim.reliability import capability_availability, capability_net

BUNDLE = build_case_models()


@pytest.mark.parametrize("name", sorted(BUNDLE.files))
def test_shipped_file_matches_generator(name):
    assert shipped_path(name).read_text(encoding="utf-8") == BUNDLE.files[name]


def test_shipped_files_load():
    for name in ("mission.pnet", "system.pnet", "capability.pnet"):
        net = load_document(shipped_path(name)).net
        assert not [v for v in validate_net(net) if v.severity == "error"]
    assert len(load_fusion(shipped_path("fusion.map")).places) == len(CAPABILITIES) + 1
    assert load_model(shipped_path("capability.rel")).model.mission == MISSION_CAPABILITY
    assert {e.label for e in load_sampling(shipped_path("q1_system.sampling")).entries} == {"robots", "energy"}


def test_mission_shape():
    net = mission_net()
    assert net.goal.deadline == DEADLINE == 60.0
    assert net.place_map["boxes"].tokens == BOXES == 3
    assert net.transition_map["stack"].name == "Stack Box (t2)"


def test_one_robot_single_run_by_hand():
    # one robot works the boxes strictly one after another
    trace = simulate(mission_net(1), SimConfig(seed=11))
    fires = [e for e in trace.events if e.kind == "fire"]
    assert [e.transition for e in fires] == ["assign"] + ["fetch", "stack"] * BOXES
    assert trace.final_tokens["stacked"] == BOXES or trace.outcome != "success"


@pytest.mark.parametrize("robots, floor", [(1, 0.6), (2, 0.95), (3, 0.9)])
def test_success_rate_by_robot_count(robots, floor):
    s = summarize(run_batch(mission_net(), robots_fixed(robots), 1000, 0, SimConfig()))
    assert s.success_rate >= floor


def test_more_robots_finish_sooner():
    means = [summarize(run_batch(mission_net(), robots_fixed(n), 400, 2, SimConfig())).time_mean for n in (1, 2, 3)]
    assert means[0] > means[1] > means[2]


def test_system_net_reaches_goal_with_energy():
    trace = simulate(system_net(robots=2), SimConfig(seed=4))
    assert trace.outcome == "success"
    assert 10.0 <= trace.final_levels["energy"] < 100.0


def test_system_net_low_energy_fails():
    trace = simulate(system_net(robots=1, energy=11.0), SimConfig(seed=4))
    assert trace.outcome == "resource_failure"


def test_capability_view_all_up():
    model = capability_model()
    trace = simulate(capability_net(model), SimConfig())
    assert trace.outcome == "success"
    for cap in model.capability_ids:
        assert trace.final_tokens[cap] == 1, cap


def test_capability_view_without_gripper():
    model = capability_model()
    trace = simulate(capability_net(model, {"grip_actuator": 0}), SimConfig())
    assert trace.outcome == "deadlock"
    down = {c for c in model.capability_ids if trace.final_tokens[c] == 0}
    assert down == {"gripper", "manipulation", MISSION_CAPABILITY}
    # the token view agrees with the Boolean rollup for this failure set
    broken = replace(model, devices=[replace(d, reliability=0.0) if d.id == "grip_actuator" else d for d in model.devices])
    avail = capability_availability(broken)
    assert {c for c, a in avail.items() if a == 0.0} == down


def test_capability_view_reachability():
    res = reachable_markings(capability_net(capability_model()), 5000)
    assert not res.truncated
    assert len(res.deadlocks) == 1


def test_three_level_merge():
    b = BUNDLE
    merged = merge_nets(b.nets(), b.fusion)
    assert not [v for v in validate_net(merged) if v.severity == "error"]
    for cap in (*CAPABILITIES, MISSION_CAPABILITY):
        assert merged.place_map[cap].tokens == 0
    trace = simulate(merged, SimConfig(seed=1))
    assert trace.outcome == "success"
    assert "mission.stacked" in trace.final_tokens and "system.stacked" in trace.final_tokens
    assert serialize_net(merged) == serialize_net(merge_nets(b.nets(), b.fusion))
