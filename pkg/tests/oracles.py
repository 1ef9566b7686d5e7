"""Independent reference computations used by the tests.

Nothing here imports the code under test beyond the plain data classes.
"""
from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np
from scipy import stats


# -- reachability -------------------------------------------------------------


def _fire(net, m: tuple, index: dict):
    """All successor markings of ``m`` under atomic untimed firing."""
    out = []
    for t in net.transitions:
        if any(m[index[p]] > 0 for p in t.inhibitors):
            continue
        if any(m[index[p]] < w for p, w in t.inputs):
            continue
        nxt = list(m)
        for p, w in t.inputs:
            nxt[index[p]] -= w
        for p, w in t.outputs:
            nxt[index[p]] += w
        out.append(tuple(nxt))
    return out


def box_reachability(net, bound: int):
    """Reachable markings found by enumerating every marking in [0, bound]^k.

    The firing relation is built over the whole box as a graph, with one extra
    node for markings that leave the box; the answer is the set of box
    descendants of the initial marking. Returns (places, markings, deadlocks,
    escaped), where ``escaped`` says the box was too small.
    """
    places = [p.id for p in net.places]
    index = {p: i for i, p in enumerate(places)}
    g = nx.DiGraph()
    outside = "outside"
    box = list(itertools.product(range(bound + 1), repeat=len(places)))
    dead = set()
    for m in box:
        g.add_node(m)
        succ = _fire(net, m, index)
        if not succ:
            dead.add(m)
        for n in succ:
            g.add_edge(m, n if max(n, default=0) <= bound else outside)
    m0 = tuple(p.tokens for p in net.places)
    reach = nx.descendants(g, m0) | {m0}
    escaped = outside in reach
    reach.discard(outside)
    return tuple(places), reach, reach & dead, escaped


def chain_count_bound(k: int, n: int) -> int:
    """Markings of k places holding exactly n tokens: C(n+k-1, k-1)."""
    return math.comb(n + k - 1, k - 1)


# -- timing -------------------------------------------------------------------


def dag_completion(durations: dict, edges: list[tuple[str, str]]) -> float:
    """Finish time of the last transition of a DAG of constant-duration steps."""
    g = nx.DiGraph()
    g.add_nodes_from(durations)
    g.add_edges_from(edges)
    finish = {}
    for node in nx.topological_sort(g):
        start = max((finish[p] for p in g.predecessors(node)), default=0.0)
        finish[node] = start + durations[node]
    return max(finish.values())


# -- reliability --------------------------------------------------------------


def robot_enumeration(model) -> float:
    """Availability of one robot by enumerating the state of every device copy."""
    copies = [(d.id, d.reliability) for d in model.devices for _ in range(d.redundancy)]
    caps = {c.id: c for c in model.capabilities}
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(copies)):
        weight = 1.0
        up = {d.id: False for d in model.devices}
        for (did, p), b in zip(copies, bits):
            weight *= p if b else 1.0 - p
            up[did] = up[did] or bool(b)
        if weight == 0.0:
            continue

        def value(node):
            if node in up:
                return up[node]
            c = caps[node]
            kids = [value(r) for r in c.requires]
            return all(kids) if c.combinator == "all_of" else any(kids)

        if value(model.mission):
            total += weight
    return total


def fleet_enumeration(a: float, n: int) -> float:
    """Probability that at least one of n independent robots is up, by enumeration."""
    total = 0.0
    for bits in itertools.product((0, 1), repeat=n):
        if any(bits):
            total += math.prod(a if b else 1.0 - a for b in bits)
    return total


def device_enumeration(p: float, k: int) -> float:
    """P(at least one of k copies works), by enumeration."""
    return sum(
        math.prod(p if b else 1.0 - p for b in bits) for bits in itertools.product((0, 1), repeat=k) if any(bits)
    )


def clamped_normal_mean(mu: float, sd: float) -> float:
    """E[min(max(X, 0), 1)] for X ~ N(mu, sd), in closed form."""
    a, b = (0.0 - mu) / sd, (1.0 - mu) / sd
    inside = mu * (stats.norm.cdf(b) - stats.norm.cdf(a)) + sd * (stats.norm.pdf(a) - stats.norm.pdf(b))
    return float(inside + stats.norm.sf(b))


def truth_table(model, device_states: dict) -> dict:
    """Recursive evaluation of every capability for one device assignment."""
    caps = {c.id: c for c in model.capabilities}

    def value(node):
        if node in device_states:
            return bool(device_states[node])
        c = caps[node]
        kids = [value(r) for r in c.requires]
        return all(kids) if c.combinator == "all_of" else any(kids)

    return {c: value(c) for c in caps}


def bernoulli_mc(p: float, k: int, n: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    return float((rng.random((n, k)) < p).any(axis=1).mean())
