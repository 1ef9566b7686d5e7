"""Structural model of a stochastic timed Petri net with continuous resources.

A :class:`Net` is immutable. Places hold integer tokens, resources hold
non-negative real levels, and transitions are timed actions that consume
input tokens when they fire and deposit output tokens when they finish.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

POLICIES = ("fixed_priority", "uniform_random", "priority_proportional")
COMPARATORS = (">=", "=", "<=")
DURATION_KINDS = {"constant": ("value",), "normal": ("mean", "sd"), "uniform": ("low", "high")}


def _pairs(items) -> tuple:
    if items is None:
        return ()
    if isinstance(items, Mapping):
        items = items.items()
    return tuple((k, v) for k, v in items)


def _frozen_map(items) -> tuple:
    if items is None:
        return ()
    if isinstance(items, Mapping):
        items = items.items()
    return tuple(sorted((str(k), str(v)) for k, v in items))


@dataclass(frozen=True)
class Duration:
    """Distribution of a transition's execution time.

    ``params`` follows the order in ``DURATION_KINDS``. Samples below zero
    are clamped to zero.
    """

    kind: str = "constant"
    params: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @classmethod
    def constant(cls, value: float) -> "Duration":
        return cls("constant", (value,))

    @classmethod
    def normal(cls, mean: float, sd: float) -> "Duration":
        return cls("normal", (mean, sd))

    @classmethod
    def uniform(cls, low: float, high: float) -> "Duration":
        return cls("uniform", (low, high))

    def param(self, name: str) -> float:
        return self.params[DURATION_KINDS[self.kind].index(name)]

    def with_param(self, name: str, value: float) -> "Duration":
        names = DURATION_KINDS[self.kind]
        if name not in names:
            raise KeyError(f"{self.kind} duration has no parameter {name!r}")
        params = list(self.params)
        params[names.index(name)] = value
        return Duration(self.kind, tuple(params))

    def problems(self) -> list[str]:
        if self.kind not in DURATION_KINDS:
            return [f"unknown duration kind {self.kind!r}"]
        if len(self.params) != len(DURATION_KINDS[self.kind]):
            return [f"{self.kind} duration takes {len(DURATION_KINDS[self.kind])} parameter(s)"]
        if not all(math.isfinite(p) for p in self.params):
            return ["duration parameters must be finite"]
        if self.kind == "constant" and self.params[0] < 0:
            return ["constant duration is negative"]
        if self.kind == "normal" and self.params[1] < 0:
            return ["normal duration has negative standard deviation"]
        if self.kind == "uniform" and self.params[0] > self.params[1]:
            return ["uniform duration has low > high"]
        return []

    def nominal(self) -> float:
        """Expected duration, used when reserving resources ahead of sampling."""
        if self.kind == "constant":
            return max(self.params[0], 0.0)
        if self.kind == "normal":
            return max(self.params[0], 0.0)
        return max(0.5 * (self.params[0] + self.params[1]), 0.0)

    def sample(self, rng) -> float:
        # constant durations draw nothing from the stream
        if self.kind == "constant":
            return max(self.params[0], 0.0)
        if self.kind == "normal":
            return max(float(rng.normal(self.params[0], self.params[1])), 0.0)
        return max(float(rng.uniform(self.params[0], self.params[1])), 0.0)


@dataclass(frozen=True)
class Place:
    id: str
    name: str = ""
    tokens: int = 0
    metadata: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "metadata", _frozen_map(self.metadata))


@dataclass(frozen=True)
class Resource:
    id: str
    name: str = ""
    initial: float = 0.0
    min: float = 0.0
    max: float = math.inf
    metadata: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "initial", float(self.initial))
        object.__setattr__(self, "min", float(self.min))
        object.__setattr__(self, "max", math.inf if self.max is None else float(self.max))
        object.__setattr__(self, "metadata", _frozen_map(self.metadata))


@dataclass(frozen=True)
class Transition:
    id: str
    name: str = ""
    duration: Duration = field(default_factory=Duration)
    inputs: tuple = ()
    outputs: tuple = ()
    inhibitors: tuple = ()
    rates: tuple = ()
    priority: int = 0
    max_instances: int | None = None
    metadata: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", _pairs(self.inputs))
        object.__setattr__(self, "outputs", _pairs(self.outputs))
        object.__setattr__(self, "inhibitors", tuple(self.inhibitors or ()))
        object.__setattr__(self, "rates", tuple((k, float(v)) for k, v in _pairs(self.rates)))
        object.__setattr__(self, "metadata", _frozen_map(self.metadata))


@dataclass(frozen=True)
class TokenCondition:
    place: str
    op: str
    count: int


@dataclass(frozen=True)
class ResourceCondition:
    resource: str
    op: str
    level: float


@dataclass(frozen=True)
class Goal:
    tokens: tuple = ()
    resources: tuple = ()
    deadline: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "resources", tuple(self.resources))

    def holds(self, tokens: Mapping[str, int], levels: Mapping[str, float]) -> bool:
        return all(compare(tokens[c.place], c.op, c.count) for c in self.tokens) and all(
            compare(levels[c.resource], c.op, c.level) for c in self.resources
        )


def compare(value, op: str, bound) -> bool:
    if op == ">=":
        return value >= bound
    if op == "<=":
        return value <= bound
    return value == bound


@dataclass(frozen=True)
class Net:
    name: str = "net"
    places: tuple = ()
    resources: tuple = ()
    transitions: tuple = ()
    goal: Goal | None = None
    policy: str = "fixed_priority"
    metadata: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "resources", tuple(self.resources))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "metadata", _frozen_map(self.metadata))

    @cached_property
    def place_map(self) -> dict[str, Place]:
        return {p.id: p for p in self.places}

    @cached_property
    def resource_map(self) -> dict[str, Resource]:
        return {r.id: r for r in self.resources}

    @cached_property
    def transition_map(self) -> dict[str, Transition]:
        return {t.id: t for t in self.transitions}

    def initial_marking(self) -> dict[str, int]:
        return {p.id: p.tokens for p in self.places}

    def initial_levels(self) -> dict[str, float]:
        return {r.id: r.initial for r in self.resources}

    def canonical(self) -> "Net":
        """Same net with every collection sorted by id."""
        return replace(
            self,
            places=tuple(sorted(self.places, key=lambda p: p.id)),
            resources=tuple(sorted(self.resources, key=lambda r: r.id)),
            transitions=tuple(
                replace(
                    t,
                    inputs=tuple(sorted(t.inputs)),
                    outputs=tuple(sorted(t.outputs)),
                    inhibitors=tuple(sorted(t.inhibitors)),
                    rates=tuple(sorted(t.rates)),
                )
                for t in sorted(self.transitions, key=lambda t: t.id)
            ),
            goal=None
            if self.goal is None
            else replace(
                self.goal,
                tokens=tuple(sorted(self.goal.tokens, key=lambda c: (c.place, c.op, c.count))),
                resources=tuple(
                    sorted(self.goal.resources, key=lambda c: (c.resource, c.op, c.level))
                ),
            ),
        )

    def same_structure(self, other: "Net") -> bool:
        return self.canonical() == other.canonical()


@dataclass(frozen=True)
class Violation:
    """One broken invariant. ``path`` mirrors the net document layout."""

    path: tuple
    message: str
    severity: str = "error"

    def __str__(self):
        where = "/".join(str(p) for p in self.path)
        return f"{where}: {self.message}" if where else self.message


class InvalidNetError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate_net(net: Net) -> list[Violation]:
    """Return every structural problem in ``net``; an empty list means valid.

    Duplicate element names are reported as warnings only.
    """
    out: list[Violation] = []

    def err(path, msg):
        out.append(Violation(tuple(path), msg))

    if net.policy not in POLICIES:
        err(("policy",), f"unknown conflict policy {net.policy!r}")

    seen: dict[str, str] = {}
    names: dict[tuple, str] = {}

    def check_id(section, i, ident):
        if not isinstance(ident, str) or not ident:
            err((section, i, "id"), "identifier must be a non-empty string")
            return
        if ident in seen:
            err((section, i, "id"), f"duplicate id {ident!r} (already a {seen[ident]})")
        else:
            seen[ident] = section[:-1]

    def check_name(section, i, name):
        if name:
            key = (section, name)
            if key in names:
                out.append(
                    Violation((section, i, "name"), f"duplicate name {name!r}", "warning")
                )
            else:
                names[key] = name

    for i, p in enumerate(net.places):
        check_id("places", i, p.id)
        check_name("places", i, p.name)
        if not _is_int(p.tokens) or p.tokens < 0:
            err(("places", i, "tokens"), "initial tokens must be a non-negative integer")

    for i, r in enumerate(net.resources):
        check_id("resources", i, r.id)
        check_name("resources", i, r.name)
        if not (math.isfinite(r.min) and math.isfinite(r.initial)) or math.isnan(r.max):
            err(("resources", i), "resource levels must be finite (max may be unbounded)")
            continue
        if r.min < 0:
            err(("resources", i, "min"), "minimum level is negative")
        if r.initial < r.min:
            err(("resources", i, "initial"), "initial below minimum")
        if r.initial > r.max:
            err(("resources", i, "initial"), "initial above maximum")
        if r.min > r.max:
            err(("resources", i, "max"), "maximum below minimum")

    places = {p.id for p in net.places}
    resources = {r.id for r in net.resources}

    for i, t in enumerate(net.transitions):
        check_id("transitions", i, t.id)
        check_name("transitions", i, t.name)
        for msg in t.duration.problems():
            err(("transitions", i, "duration"), msg)
        for kind in ("inputs", "outputs"):
            dup = set()
            for pid, w in getattr(t, kind):
                path = ("transitions", i, kind, pid)
                if pid not in places:
                    err(path, f"unresolved place reference {pid!r}")
                if pid in dup:
                    err(path, f"more than one {kind[:-1]} arc to place {pid!r}")
                dup.add(pid)
                if not _is_int(w) or w < 1:
                    err(path, "arc weight must be a positive integer")
        dup = set()
        for j, pid in enumerate(t.inhibitors):
            if pid not in places:
                err(("transitions", i, "inhibitors", j), f"unresolved place reference {pid!r}")
            if pid in dup:
                err(("transitions", i, "inhibitors", j), f"more than one inhibitor arc to {pid!r}")
            dup.add(pid)
        dup = set()
        for rid, rate in t.rates:
            path = ("transitions", i, "rates", rid)
            if rid not in resources:
                err(path, f"unresolved resource reference {rid!r}")
            if rid in dup:
                err(path, f"resource {rid!r} listed more than once")
            dup.add(rid)
            if not math.isfinite(rate):
                err(path, "rate must be finite")
        if not _is_int(t.priority) or t.priority < 0:
            err(("transitions", i, "priority"), "priority must be a non-negative integer")
        if t.max_instances is not None and (not _is_int(t.max_instances) or t.max_instances < 1):
            err(("transitions", i, "max_instances"), "max_instances must be a positive integer")

    if net.goal is not None:
        g = net.goal
        for j, c in enumerate(g.tokens):
            if c.place not in places:
                err(("goal", "tokens", j, "place"), f"unresolved place reference {c.place!r}")
            if c.op not in COMPARATORS:
                err(("goal", "tokens", j, "op"), f"unknown comparator {c.op!r}")
            if not _is_int(c.count) or c.count < 0:
                err(("goal", "tokens", j, "count"), "token count must be a non-negative integer")
        for j, c in enumerate(g.resources):
            if c.resource not in resources:
                err(
                    ("goal", "resources", j, "resource"),
                    f"unresolved resource reference {c.resource!r}",
                )
            if c.op not in COMPARATORS:
                err(("goal", "resources", j, "op"), f"unknown comparator {c.op!r}")
        if g.deadline is not None and not g.deadline >= 0:
            err(("goal", "deadline"), "deadline must be non-negative")
    return out


def errors(violations: Iterable[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity == "error"]


def check_net(net: Net) -> Net:
    """Raise :class:`InvalidNetError` if ``net`` has any error-level violation."""
    bad = errors(validate_net(net))
    if bad:
        raise InvalidNetError(bad)
    return net


def untimed_skeleton(net: Net) -> Net:
    check_net(net)
    zero = Duration.constant(0.0)
    goal = net.goal
    if goal is not None:
        goal = replace(goal, resources=())
    return replace(
        net,
        resources=(),
        transitions=tuple(replace(t, duration=zero, rates=()) for t in net.transitions),
        goal=goal,
    )
