import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import handnets
import netgen
import oracles
from petrisim.engine import (
    ActiveInstance,
    SimConfig,
    SimState,
    detect_termination,
    enabled_instances,
    replay,
    resource_feasible,
    select_firing,
    simulate,
)
from petrisim.export import events_csv, trajectories_csv
from petrisim.net import Duration, Goal, Net, Place, Resource, TokenCondition, Transition


def one(tokens=2, **kw):
    return Net("one", [Place("p1", tokens=tokens), Place("p2")], kw.pop("resources", []), [Transition("t", inputs={"p1": 1}, outputs={"p2": 1}, **kw)])


# enabling -------------------------------------------------------------------


def test_enabled_counts_tokens():
    net = one()
    assert enabled_instances(net, SimState.initial(net)) == [("t", 2)]


def test_enabled_respects_instance_cap():
    net = one(tokens=5, max_instances=3)
    assert enabled_instances(net, SimState.initial(net)) == [("t", 3)]


def test_inhibitor_blocks_enabling():
    net = Net("i", [Place("p1", tokens=2), Place("h", tokens=1)], [], [Transition("t", inputs={"p1": 1}, inhibitors=("h",))])
    assert enabled_instances(net, SimState.initial(net)) == [("t", 0)]


def test_reservation_blocks_enabling():
    net = one(tokens=1, resources=[Resource("E", initial=5.0)], duration=Duration.constant(10), rates={"E": -1})
    assert enabled_instances(net, SimState.initial(net)) == [("t", 0)]


def test_enabling_uses_the_nominal_duration():
    net = one(tokens=3, resources=[Resource("E", initial=10.0)], duration=Duration.normal(4, 2), rates={"E": -1})
    assert enabled_instances(net, SimState.initial(net)) == [("t", 2)]


# reservation projection ------------------------------------------------------


def _energy(level, lo=0.0, hi=math.inf, rate=-1.0):
    net = one(tokens=5, resources=[Resource("E", initial=level, min=lo, max=hi)], rates={"E": rate})
    return net, SimState.initial(net)


def test_single_segment_fits():
    net, st_ = _energy(10.0)
    assert resource_feasible(net, st_, "t", 1, [5.0])


def test_two_concurrent_candidates_overdraw():
    net, st_ = _energy(10.0)
    assert not resource_feasible(net, st_, "t", 2, [6.0, 6.0])
    assert resource_feasible(net, st_, "t", 2, [5.0, 5.0])


def test_producer_would_exceed_the_cap():
    net, st_ = _energy(9.0, hi=10.0, rate=2.0)
    assert not resource_feasible(net, st_, "t", 1, [1.0])
    assert resource_feasible(net, st_, "t", 1, [0.5])


def test_running_instances_enter_the_projection():
    net, st_ = _energy(10.0)
    st_.active.append(ActiveInstance("t", 0, 0.0, 4.0, "running", 4.0))
    # 10 - 4 (running) - 6 (candidate) = 0 fits; 7 would dip below 0
    assert resource_feasible(net, st_, "t", 1, [6.0])
    assert not resource_feasible(net, st_, "t", 1, [7.0])
    # a suspended instance is left out of the projection
    st_.active[0].status = "suspended"
    st_.active[0].remaining = 4.0
    assert resource_feasible(net, st_, "t", 1, [10.0])


def test_feasibility_argument_checks():
    net, st_ = _energy(10.0)
    with pytest.raises(ValueError):
        resource_feasible(net, st_, "t", 0, [])
    with pytest.raises(ValueError):
        resource_feasible(net, st_, "t", 2, [1.0])


# conflict policies ------------------------------------------------------------


def coin_net():
    return handnets.coin()


def test_fixed_priority_picks_highest():
    assert select_firing(coin_net(), [("a", 1), ("b", 1)], "fixed_priority", np.random.default_rng(0)) == "a"


def test_fixed_priority_ties_are_lexicographic():
    net = Net("tie", [Place("p", tokens=1)], [], [Transition("z", inputs={"p": 1}), Transition("m", inputs={"p": 1})])
    assert select_firing(net, ["z", "m"], "fixed_priority", None) == "m"


def test_priority_proportional_frequency():
    rng = np.random.default_rng(123)
    picks = [select_firing(coin_net(), [("a", 1), ("b", 1)], "priority_proportional", rng) for _ in range(100_000)]
    share = picks.count("a") / len(picks)
    assert abs(share - 0.75) <= 0.01


def test_zero_priorities_are_excluded():
    net = Net(
        "z",
        [Place("p", tokens=1)],
        [],
        [Transition("a", inputs={"p": 1}, priority=2), Transition("b", inputs={"p": 1}, priority=0)],
    )
    rng = np.random.default_rng(0)
    assert {select_firing(net, ["a", "b"], "priority_proportional", rng) for _ in range(200)} == {"a"}


def test_all_zero_priorities_fall_back_to_uniform():
    net = Net("z", [Place("p", tokens=1)], [], [Transition("a", inputs={"p": 1}), Transition("b", inputs={"p": 1})])
    rng = np.random.default_rng(0)
    picks = [select_firing(net, ["a", "b"], "priority_proportional", rng) for _ in range(4000)]
    assert abs(picks.count("a") / 4000 - 0.5) < 0.05


@pytest.mark.parametrize("policy", ["fixed_priority", "uniform_random", "priority_proportional"])
def test_singleton_and_empty(policy):
    assert select_firing(coin_net(), [("b", 1)], policy, np.random.default_rng(0)) == "b"
    assert select_firing(coin_net(), [], policy, np.random.default_rng(0)) is None


def test_unknown_policy():
    with pytest.raises(ValueError):
        select_firing(coin_net(), ["a", "b"], "roulette", np.random.default_rng(0))


# whole runs -------------------------------------------------------------------


def test_chain_run():
    tr = simulate(handnets.chain(), SimConfig(seed=7))
    assert tr.outcome == "success" and tr.final_time == 2.0
    assert [(e.time, e.kind) for e in tr.events if e.kind in ("fire", "complete")] == [(0.0, "fire"), (2.0, "complete")]


def test_chain_with_energy():
    tr = simulate(handnets.chain(5.0), SimConfig(seed=7))
    assert tr.outcome == "success" and tr.final_time == 2.0 and tr.final_levels == {"E": 3.0}


def test_suspension_window():
    tr = simulate(handnets.suspension())
    t_events = [(e.time, e.kind) for e in tr.events if e.transition == "t"]
    assert t_events == [(0.0, "fire"), (1.0, "suspend"), (3.0, "resume"), (6.0, "complete")]


def test_suspended_instance_applies_no_rate():
    base = handnets.suspension()
    net = Net(
        base.name,
        base.places,
        [Resource("E", initial=10.0)],
        [replace(t, rates=(("E", -1.0),)) if t.id == "t" else t for t in base.transitions],
        base.goal,
    )
    tr = simulate(net)
    # 4 units of running time, the 2-unit suspension is free
    assert tr.final_levels["E"] == pytest.approx(6.0)
    rows = {row[0]: row[-1] for row in tr.trajectory.rows}
    assert rows[1.0] == pytest.approx(9.0) and rows[2.0] == pytest.approx(9.0) and rows[3.0] == pytest.approx(9.0)


def test_goal_success():
    net = Net("g", [Place("p", tokens=1)], [], [], Goal((TokenCondition("p", ">=", 1),)))
    assert detect_termination(net, SimState.initial(net)) == "success"


def test_timeout_at_max_time():
    net = Net("loop", [Place("p", tokens=1)], [], [Transition("t", duration=Duration.constant(1), inputs={"p": 1}, outputs={"p": 1})], Goal((TokenCondition("p", ">=", 2),)))
    st_ = SimState.initial(net)
    st_.clock = 5.0
    assert detect_termination(net, st_, max_time=5.0) == "timeout"
    tr = simulate(net, SimConfig(max_time=5.0))
    assert tr.outcome == "timeout" and tr.final_time == 5.0
    assert tr.events[-1].kind == "deadline_exceeded"


def test_deadlock():
    net = Net("d", [Place("p")], [], [Transition("t", inputs={"p": 1})], Goal((TokenCondition("p", ">=", 1),)))
    assert detect_termination(net, SimState.initial(net)) == "deadlock"
    tr = simulate(net)
    assert tr.outcome == "deadlock" and tr.events[-1].kind == "deadlock"


def test_no_goal_ends_in_deadlock_when_idle():
    assert simulate(Net("n", [Place("p")], [], [])).outcome == "deadlock"


def test_goal_met_late_is_a_timeout():
    net = handnets.chain()
    late = replace(net, goal=replace(net.goal, deadline=1.0))
    tr = simulate(late)
    assert tr.outcome == "timeout" and tr.goal_time == 2.0
    kinds = [e.kind for e in tr.events]
    assert kinds.index("deadline_exceeded") < kinds.index("goal_reached")


def test_resource_starvation():
    tr = simulate(handnets.overdraw())
    assert tr.outcome == "resource_failure" and tr.final_tokens == {"p": 1, "q": 1}


def test_zeno_net_is_truncated_not_crashed():
    net = Net("zeno", [Place("p")], [], [Transition("t", duration=Duration.constant(0), outputs={"p": 1}, max_instances=1)])
    tr = simulate(net, SimConfig(max_events=50))
    assert tr.truncated and tr.outcome == "timeout" and len(tr.events) == 51
    assert replay(tr) == (tr.final_tokens, tr.final_levels)


def test_config_checks():
    with pytest.raises(ValueError):
        SimConfig(max_time=0)
    with pytest.raises(ValueError):
        SimConfig(sample_interval=0)


def test_same_instant_completions_precede_firings():
    net = Net(
        "tie",
        [Place("a", tokens=1), Place("b"), Place("c")],
        [],
        [
            Transition("first", duration=Duration.constant(1), inputs={"a": 1}, outputs={"b": 1}),
            Transition("second", duration=Duration.constant(1), inputs={"b": 1}, outputs={"c": 1}),
        ],
        Goal((TokenCondition("c", ">=", 1),)),
    )
    kinds = [(e.time, e.kind, e.transition) for e in simulate(net).events]
    assert kinds[:3] == [(0.0, "fire", "first"), (1.0, "complete", "first"), (1.0, "fire", "second")]


# properties -------------------------------------------------------------------

CFG = SimConfig(seed=3, max_time=100.0, max_events=300)


@settings(max_examples=120, deadline=None)
@given(netgen.nets(), st.integers(0, 2**32 - 1))
def test_determinism(net, seed):
    cfg = replace(CFG, seed=seed)
    a, b = simulate(net, cfg), simulate(net, cfg)
    assert events_csv(a) == events_csv(b) and trajectories_csv(a) == trajectories_csv(b)


@settings(max_examples=120, deadline=None)
@given(netgen.nets())
def test_clock_and_sequence_are_monotone(net):
    tr = simulate(net, CFG)
    times = [e.time for e in tr.events]
    assert times == sorted(times)
    assert [e.seq for e in tr.events] == list(range(len(tr.events)))


@settings(max_examples=120, deadline=None)
@given(netgen.nets())
def test_replay_reaches_the_final_state(net):
    tr = simulate(net, CFG)
    assert replay(tr) == (tr.final_tokens, tr.final_levels)


@settings(max_examples=100, deadline=None)
@given(netgen.nets())
def test_suspension_neutrality(net):
    ghost = Place("ghost_never_marked")
    guarded = Net(
        net.name,
        list(net.places) + [ghost],
        net.resources,
        [replace(t, inhibitors=tuple(t.inhibitors) + (ghost.id,)) for t in net.transitions],
        net.goal,
        net.policy,
    )
    plain = Net(net.name, list(net.places) + [ghost], net.resources, net.transitions, net.goal, net.policy)
    a, b = simulate(guarded, CFG), simulate(plain, CFG)
    assert events_csv(a) == events_csv(b)


def test_conservative_transition_keeps_token_total():
    net = Net(
        "c",
        [Place("a", tokens=2), Place("b", tokens=1), Place("c")],
        [],
        [Transition("t", duration=Duration.uniform(1, 3), inputs={"a": 2, "b": 1}, outputs={"c": 3})],
        Goal((TokenCondition("c", ">=", 3),)),
    )
    tr = simulate(net)
    assert sum(tr.initial_tokens.values()) == sum(tr.final_tokens.values()) == 3


@st.composite
def dags(draw):
    n = draw(st.integers(1, 6))
    durations = {f"t{i}": float(draw(st.integers(0, 20))) / 2 for i in range(n)}
    edges = [(f"t{i}", f"t{j}") for j in range(n) for i in range(j) if draw(st.booleans())]
    return durations, edges


def dag_net(durations, edges):
    places, transitions = [], []
    for tid, d in durations.items():
        preds = [a for a, b in edges if b == tid]
        succs = [b for a, b in edges if a == tid]
        ins = {f"{a}_{tid}": 1 for a in preds}
        if not preds:
            places.append(Place(f"start_{tid}", tokens=1))
            ins = {f"start_{tid}": 1}
        outs = {f"{tid}_{b}": 1 for b in succs}
        outs[f"done_{tid}"] = 1
        places += [Place(p) for p in outs]
        transitions.append(Transition(tid, duration=Duration.constant(d), inputs=ins, outputs=outs))
    goal = Goal(tuple(TokenCondition(f"done_{t}", ">=", 1) for t in durations))
    return Net("dag", places, [], transitions, goal)


@settings(max_examples=150, deadline=None)
@given(dags())
def test_dag_completion_matches_longest_path(dag):
    durations, edges = dag
    tr = simulate(dag_net(durations, edges))
    assert tr.outcome == "success"
    assert tr.final_time == pytest.approx(oracles.dag_completion(durations, edges), abs=1e-9)


def test_trajectory_shows_end_of_instant_state():
    tr = simulate(handnets.chain(), SimConfig(sample_interval=1.0))
    assert tr.trajectory.columns == ("p1", "p2")
    assert tr.trajectory.rows[0] == (0.0, 0, 0)
    assert tr.trajectory.rows[-1] == (2.0, 0, 1)
