"""Untimed reachability and deadlock analysis over token markings."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .net import Net, untimed_skeleton


@dataclass
class ReachabilityResult:
    places: tuple[str, ...]
    markings: list[tuple[int, ...]]  # breadth-first discovery order
    deadlocks: set[tuple[int, ...]] = field(default_factory=set)
    truncated: bool = False
    edges: int = 0

    @property
    def marking_set(self) -> set[tuple[int, ...]]:
        return set(self.markings)

    def as_dicts(self) -> list[dict[str, int]]:
        return [dict(zip(self.places, m)) for m in self.markings]

    def summary(self) -> str:
        n, d = len(self.markings), len(self.deadlocks)
        text = f"{n} marking{'s' if n != 1 else ''}, {d} deadlock{'s' if d != 1 else ''}"
        if self.truncated:
            text += " (truncated)"
        return text


def _compile(net: Net):
    index = {p.id: i for i, p in enumerate(net.places)}
    compiled = []
    for t in net.transitions:
        pre = [(index[p], w) for p, w in t.inputs]
        post = [(index[p], w) for p, w in t.outputs]
        inhib = [index[p] for p in t.inhibitors]
        compiled.append((pre, post, inhib))
    return compiled


def reachable_markings(net: Net, max_states: int = 10_000) -> ReachabilityResult:
    """Breadth-first exploration of the untimed skeleton of ``net``.

    Firing is atomic. An inhibitor arc disables its transition whenever its
    place holds at least one token, even if that place is also an input.
    Exploration stops once ``max_states`` distinct markings are known, in
    which case ``truncated`` is set. Every listed marking is still expanded,
    so its deadlock flag is exact.
    """
    if max_states < 1:
        raise ValueError("max_states must be positive")
    skel = untimed_skeleton(net)
    places = tuple(p.id for p in skel.places)
    compiled = _compile(skel)
    m0 = tuple(p.tokens for p in skel.places)

    seen = {m0}
    order = [m0]
    queue = deque([m0])
    result = ReachabilityResult(places, order)
    while queue:
        m = queue.popleft()
        enabled = False
        for pre, post, inhib in compiled:
            if any(m[i] > 0 for i in inhib) or any(m[i] < w for i, w in pre):
                continue
            enabled = True
            nxt = list(m)
            for i, w in pre:
                nxt[i] -= w
            for i, w in post:
                nxt[i] += w
            nxt = tuple(nxt)
            result.edges += 1
            if nxt not in seen:
                if len(seen) >= max_states:
                    result.truncated = True
                    continue
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
        if not enabled:
            result.deadlocks.add(m)
    return result
