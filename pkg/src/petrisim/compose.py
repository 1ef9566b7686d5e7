"""Hierarchical composition: merge per-level nets by fusing shared places and resources."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .net import Goal, Net, Place, Resource, ResourceCondition, TokenCondition, Transition, check_net

LEVEL_ORDER = ("mission", "system", "subsystem", "capability")


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class FusionGroup:
    canonical: str
    members: tuple  # (net name, local id) pairs
    authority: str | None = None  # net whose initial value wins on disagreement

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(tuple(m) for m in self.members))


@dataclass(frozen=True)
class FusionMap:
    places: tuple = ()
    resources: tuple = ()
    separator: str = "."
    goal: str | None = None  # keep only this net's goal; None means all goals must hold
    policy: str | None = None
    name: str = "merged"

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "resources", tuple(self.resources))


def _meta(element, net: Net, **extra) -> dict:
    meta = dict(element.metadata)
    net_meta = dict(net.metadata)
    if "level" not in meta and "level" in net_meta:
        meta["level"] = net_meta["level"]
    meta.setdefault("source_net", net.name)
    meta.setdefault("source_id", element.id)
    meta.update(extra)
    return meta


def _pick(group: FusionGroup, values: dict, what: str):
    distinct = set(values.values())
    if len(distinct) == 1:
        return next(iter(distinct))
    if group.authority is None:
        detail = ", ".join(f"{n}:{v}" for n, v in sorted(values.items()))
        raise FusionError(f"fused {what} {group.canonical!r} disagree ({detail}) and no authority is set")
    return values[group.authority]


def merge_nets(nets: Sequence[Net], fusion: FusionMap | None = None) -> Net:
    """Disjoint union of ``nets`` with the fusion groups collapsed.

    Unfused places, resources and every transition are renamed to
    ``<net name><separator><local id>``. Every element records its source net
    and original id in its metadata.
    """
    fusion = fusion or FusionMap()
    sep = fusion.separator
    by_name = {}
    for net in nets:
        check_net(net)
        if net.name in by_name:
            raise FusionError(f"two nets are named {net.name!r}")
        by_name[net.name] = net

    def resolve(groups, kind):
        owner = {}
        for g in groups:
            if not g.members:
                raise FusionError(f"fusion group {g.canonical!r} has no members")
            if g.authority is not None and g.authority not in {n for n, _ in g.members}:
                raise FusionError(f"authority {g.authority!r} of {g.canonical!r} is not a member net")
            for net_name, local in g.members:
                net = by_name.get(net_name)
                if net is None:
                    raise FusionError(f"fusion group {g.canonical!r} names unknown net {net_name!r}")
                table = net.place_map if kind == "place" else net.resource_map
                if local not in table:
                    raise FusionError(f"net {net_name!r} has no {kind} {local!r}")
                if (net_name, local) in owner:
                    raise FusionError(f"{kind} {net_name}{sep}{local} is in more than one fusion group")
                owner[(net_name, local)] = g
        return owner

    place_owner = resolve(fusion.places, "place")
    res_owner = resolve(fusion.resources, "resource")

    def rename(net, local, owner):
        g = owner.get((net.name, local))
        return g.canonical if g else f"{net.name}{sep}{local}"

    places: list[Place] = []
    resources: list[Resource] = []
    transitions: list[Transition] = []
    taken: dict[str, str] = {}

    def claim(ident, what):
        if ident in taken:
            raise FusionError(f"id collision after renaming: {ident!r} ({taken[ident]} and {what})")
        taken[ident] = what

    done = set()
    for net in nets:
        for p in net.places:
            g = place_owner.get((net.name, p.id))
            if g is None:
                ident = rename(net, p.id, place_owner)
                claim(ident, f"place of {net.name}")
                places.append(replace(p, id=ident, metadata=_meta(p, net)))
                continue
            if g.canonical in done:
                continue
            done.add(g.canonical)
            claim(g.canonical, "fused place")
            members = {n: by_name[n].place_map[i] for n, i in g.members}
            tokens = _pick(g, {n: m.tokens for n, m in members.items()}, "initial tokens")
            lead_net = g.authority or g.members[0][0]
            lead = members[lead_net]
            sources = ",".join(f"{n}{sep}{i}" for n, i in g.members)
            meta = _meta(lead, by_name[lead_net], fused=sources)
            places.append(replace(lead, id=g.canonical, tokens=tokens, metadata=meta))
        for r in net.resources:
            g = res_owner.get((net.name, r.id))
            if g is None:
                ident = rename(net, r.id, res_owner)
                claim(ident, f"resource of {net.name}")
                resources.append(replace(r, id=ident, metadata=_meta(r, net)))
                continue
            if g.canonical in done:
                continue
            done.add(g.canonical)
            claim(g.canonical, "fused resource")
            members = {n: by_name[n].resource_map[i] for n, i in g.members}
            initial = _pick(g, {n: m.initial for n, m in members.items()}, "initial levels")
            lo = _pick(g, {n: m.min for n, m in members.items()}, "minimum levels")
            hi = _pick(g, {n: m.max for n, m in members.items()}, "maximum levels")
            lead_net = g.authority or g.members[0][0]
            sources = ",".join(f"{n}{sep}{i}" for n, i in g.members)
            meta = _meta(members[lead_net], by_name[lead_net], fused=sources)
            resources.append(replace(members[lead_net], id=g.canonical, initial=initial, min=lo, max=hi, metadata=meta))

    for net in nets:
        for t in net.transitions:
            ident = f"{net.name}{sep}{t.id}"
            claim(ident, f"transition of {net.name}")
            transitions.append(
                replace(
                    t,
                    id=ident,
                    inputs=tuple((rename(net, p, place_owner), w) for p, w in t.inputs),
                    outputs=tuple((rename(net, p, place_owner), w) for p, w in t.outputs),
                    inhibitors=tuple(rename(net, p, place_owner) for p in t.inhibitors),
                    rates=tuple((rename(net, r, res_owner), v) for r, v in t.rates),
                    metadata=_meta(t, net),
                )
            )

    goal = _merge_goals(nets, fusion, lambda net, p: rename(net, p, place_owner), lambda net, r: rename(net, r, res_owner))

    policies = {n.policy for n in nets}
    if fusion.policy:
        policy = fusion.policy
    elif len(policies) <= 1:
        policy = nets[0].policy if nets else "fixed_priority"
    else:
        raise FusionError(f"nets use different conflict policies {sorted(policies)}; set one in the fusion map")

    merged = Net(
        fusion.name,
        places=places,
        resources=resources,
        transitions=transitions,
        goal=goal,
        policy=policy,
        metadata={"sources": ",".join(n.name for n in nets)},
    )
    return check_net(merged)


def _merge_goals(nets, fusion, place_name, res_name) -> Goal | None:
    chosen = nets
    if fusion.goal is not None:
        chosen = [n for n in nets if n.name == fusion.goal]
        if not chosen:
            raise FusionError(f"goal net {fusion.goal!r} is not among the merged nets")
    goals = [(n, n.goal) for n in chosen if n.goal is not None]
    if not goals:
        return None
    tokens, levels, deadlines = [], [], []
    for net, g in goals:
        tokens += [TokenCondition(place_name(net, c.place), c.op, c.count) for c in g.tokens]
        levels += [ResourceCondition(res_name(net, c.resource), c.op, c.level) for c in g.resources]
        if g.deadline is not None:
            deadlines.append(g.deadline)
    # identical conditions from fused places collapse
    tokens = list(dict.fromkeys(tokens))
    levels = list(dict.fromkeys(levels))
    return Goal(tokens, levels, min(deadlines) if deadlines else None)


def levels_report(net: Net) -> dict[str, dict[str, list[str]]]:
    """Places and transitions grouped by their ``level`` metadata tag."""
    groups: dict[str, dict[str, list[str]]] = {}
    for kind, items in (("places", net.places), ("transitions", net.transitions)):
        for item in items:
            level = dict(item.metadata).get("level", "untagged")
            groups.setdefault(level, {"places": [], "transitions": []})[kind].append(item.id)

    def order(level):
        if level in LEVEL_ORDER:
            return (0, LEVEL_ORDER.index(level), level)
        return (1 if level != "untagged" else 2, 0, level)

    return {lvl: {k: sorted(v) for k, v in groups[lvl].items()} for lvl in sorted(groups, key=order)}


def format_levels(report: dict[str, dict[str, list[str]]]) -> str:
    lines = []
    for level, parts in report.items():
        lines.append(f"[{level}] {len(parts['places'])} places, {len(parts['transitions'])} transitions")
        for kind in ("places", "transitions"):
            if parts[kind]:
                lines.append(f"  {kind}: {', '.join(parts[kind])}")
    return "\n".join(lines)
