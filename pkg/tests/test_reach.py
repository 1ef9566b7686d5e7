import numpy as np
from hypothesis import given, settings

import netgen
import oracles
from petrisim.net import Net, Place, Transition
from petrisim.reach import reachable_markings


def chain():
    return Net("c", [Place("p1", tokens=1), Place("p2")], [], [Transition("t", inputs={"p1": 1}, outputs={"p2": 1})])


def cycle():
    return Net(
        "cy",
        [Place("p1", tokens=1), Place("p2")],
        [],
        [
            Transition("t1", inputs={"p1": 1}, outputs={"p2": 1}),
            Transition("t2", inputs={"p2": 1}, outputs={"p1": 1}),
        ],
    )


def test_two_state_chain():
    res = reachable_markings(chain())
    assert res.marking_set == {(1, 0), (0, 1)}
    assert res.deadlocks == {(0, 1)}
    assert res.summary() == "2 markings, 1 deadlock"


def test_live_cycle():
    res = reachable_markings(cycle())
    assert len(res.markings) == 2 and not res.deadlocks
    assert res.summary() == "2 markings, 0 deadlocks"


def producer_consumer(n=3):
    return Net(
        "pc",
        [Place("raw", tokens=n), Place("buffer"), Place("done")],
        [],
        [
            Transition("produce", inputs={"raw": 1}, outputs={"buffer": 1}),
            Transition("consume", inputs={"buffer": 1}, outputs={"done": 1}),
        ],
    )


def test_producer_consumer_matches_enumeration():
    net = producer_consumer()
    res = reachable_markings(net)
    places, reach, dead, escaped = oracles.box_reachability(net, 3)
    assert not escaped
    assert res.places == places and res.marking_set == reach and res.deadlocks == dead
    # 3 tokens over 3 places: every split is reachable
    assert len(reach) == oracles.chain_count_bound(3, 3)


def test_truncation_flag():
    net = Net("grow", [Place("p", tokens=1)], [], [Transition("t", inputs={"p": 1}, outputs={"p": 2})])
    res = reachable_markings(net, max_states=10)
    assert res.truncated and len(res.markings) == 10
    assert "truncated" in res.summary()


def test_inhibitor_dominates_input():
    net = Net("i", [Place("p", tokens=1), Place("q")], [], [Transition("t", inputs={"p": 1}, outputs={"q": 1}, inhibitors=("p",))])
    res = reachable_markings(net)
    assert res.marking_set == {(1, 0)} and res.deadlocks == {(1, 0)}


def test_resources_and_durations_are_ignored():
    from petrisim.net import Duration, Resource

    net = Net(
        "r",
        [Place("p1", tokens=1), Place("p2")],
        [Resource("E", initial=0.0)],
        [Transition("t", duration=Duration.normal(5, 1), inputs={"p1": 1}, outputs={"p2": 1}, rates={"E": -1})],
    )
    assert reachable_markings(net).marking_set == {(1, 0), (0, 1)}


@settings(max_examples=80, deadline=None)
@given(netgen.nets(resources=False))
def test_conservative_nets_respect_the_count_bound(net):
    # make every transition conservative and unweighted: one token in, one out
    trans = []
    pids = [p.id for p in net.places]
    for i, t in enumerate(net.transitions):
        src = t.inputs[0][0] if t.inputs else pids[i % len(pids)]
        dst = t.outputs[0][0] if t.outputs else pids[(i + 1) % len(pids)]
        trans.append(Transition(t.id, inputs={src: 1}, outputs={dst: 1}, inhibitors=t.inhibitors))
    cons = Net(net.name, net.places, [], trans)
    n = sum(p.tokens for p in cons.places)
    res = reachable_markings(cons, max_states=5000)
    assert not res.truncated
    assert len(res.markings) <= oracles.chain_count_bound(len(cons.places), n)
    assert all(sum(m) == n for m in res.markings)


@settings(max_examples=60, deadline=None)
@given(netgen.nets(resources=False))
def test_declaration_order_does_not_matter(net):
    rev = Net(net.name, net.places, [], net.transitions[::-1], net.goal, net.policy)
    a = reachable_markings(net, max_states=300)
    b = reachable_markings(rev, max_states=300)
    if not (a.truncated or b.truncated):
        assert a.marking_set == b.marking_set and a.deadlocks == b.deadlocks


def test_random_small_nets_against_box_oracle():
    rng = np.random.default_rng(77)
    for _ in range(50):
        net = netgen.untimed_net(rng, max_places=3, max_transitions=3)
        res = reachable_markings(net, max_states=60)
        if res.truncated:
            continue
        bound = max(max(m) for m in res.markings) + 1
        _, reach, dead, escaped = oracles.box_reachability(net, bound)
        assert not escaped and reach == res.marking_set and dead == res.deadlocks
