"""Capability availability under device redundancy and robot redundancy.

Devices are leaves of a capability DAG. A device with per-copy reliability
``p`` and ``k`` redundant copies is up with probability ``1 - (1 - p)**k``
(one working copy suffices). A robot is up when its root capability is up,
and the mission is up when at least one of ``N`` identical, independent
robots is up.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .montecarlo import CorrelationMatrix, Distribution, correlate
from .net import Duration, Goal, Net, Place, TokenCondition, Transition

COMBINATORS = ("all_of", "any_of")
MAX_EXACT_DEVICES = 22
GUARD_PREFIX = "unmarked_"


@dataclass(frozen=True)
class Device:
    id: str
    reliability: float
    redundancy: int = 1
    level: str = "subsystem"


@dataclass(frozen=True)
class Capability:
    id: str
    requires: tuple
    combinator: str = "all_of"
    level: str = "system"

    def __post_init__(self):
        object.__setattr__(self, "requires", tuple(self.requires))


@dataclass(frozen=True)
class AvailabilityModel:
    devices: tuple
    capabilities: tuple
    mission: str
    n_systems: int = 1
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        object.__setattr__(self, "capabilities", tuple(self.capabilities))

    @property
    def device_ids(self) -> list[str]:
        return [d.id for d in self.devices]

    @property
    def capability_ids(self) -> list[str]:
        return [c.id for c in self.capabilities]

    def device(self, did: str) -> Device:
        return next(d for d in self.devices if d.id == did)

    def topo_order(self) -> list[Capability]:
        """Capabilities ordered so that every child precedes its parents."""
        caps = {c.id: c for c in self.capabilities}
        order, state = [], {}

        def visit(cid, stack):
            if state.get(cid) == "done":
                return
            if state.get(cid) == "open":
                raise ValueError(f"capability cycle through {' -> '.join(stack + [cid])}")
            state[cid] = "open"
            for child in caps[cid].requires:
                if child in caps:
                    visit(child, stack + [cid])
            state[cid] = "done"
            order.append(caps[cid])

        for c in self.capabilities:
            visit(c.id, [])
        return order

    def closure(self, cid: str) -> set[str]:
        """Devices reachable below capability ``cid``."""
        caps = {c.id: c for c in self.capabilities}
        out, todo = set(), [cid]
        while todo:
            node = todo.pop()
            if node in caps:
                todo.extend(caps[node].requires)
            else:
                out.add(node)
        return out

    def is_series(self) -> bool:
        """True when the root needs every device through all_of combinators only."""
        caps = {c.id: c for c in self.capabilities}
        seen, todo = set(), [self.mission]
        while todo:
            node = todo.pop()
            if node in caps:
                if caps[node].combinator != "all_of":
                    return False
                todo.extend(caps[node].requires)
            else:
                seen.add(node)
        return seen == set(self.device_ids)


def validate_model(model: AvailabilityModel) -> list[str]:
    out = []
    ids = [d.id for d in model.devices] + [c.id for c in model.capabilities]
    dup = {i for i in ids if ids.count(i) > 1}
    out += [f"duplicate id {i!r}" for i in sorted(dup)]
    for d in model.devices:
        if not 0.0 <= d.reliability <= 1.0:
            out.append(f"device {d.id!r}: reliability outside [0, 1]")
        if not isinstance(d.redundancy, int) or d.redundancy < 1:
            out.append(f"device {d.id!r}: redundancy must be an integer >= 1")
    known = set(ids)
    for c in model.capabilities:
        if c.combinator not in COMBINATORS:
            out.append(f"capability {c.id!r}: unknown combinator {c.combinator!r}")
        if not c.requires:
            out.append(f"capability {c.id!r}: requires nothing")
        for r in c.requires:
            if r not in known:
                out.append(f"capability {c.id!r}: unresolved reference {r!r}")
    if model.mission not in {c.id for c in model.capabilities}:
        out.append(f"mission capability {model.mission!r} is not a capability")
    if not isinstance(model.n_systems, int) or model.n_systems < 1:
        out.append("n_systems must be an integer >= 1")
    if out:
        return out
    try:
        model.topo_order()
    except ValueError as exc:
        return [str(exc)]
    return out


def model_warnings(model: AvailabilityModel) -> list[str]:
    """Devices and capabilities that cannot influence the mission root."""
    out = []
    used = model.closure(model.mission)
    reach = _below(model, model.mission)
    for c in model.capabilities:
        if c.id not in reach:
            out.append(f"capability {c.id!r} is orphaned (not below {model.mission!r})")
    for d in model.devices:
        if d.id not in used:
            out.append(f"device {d.id!r} is orphaned (not below {model.mission!r})")
    return out


def _below(model: AvailabilityModel, root: str) -> set[str]:
    caps = {c.id: c for c in model.capabilities}
    out, todo = set(), [root]
    while todo:
        node = todo.pop()
        if node in out:
            continue
        out.add(node)
        if node in caps:
            todo.extend(caps[node].requires)
    return out


def check_model(model: AvailabilityModel) -> AvailabilityModel:
    problems = validate_model(model)
    if problems:
        raise ValueError("; ".join(problems))
    return model


# -- closed forms -----------------------------------------------------------


def device_availability(p: float, k: int = 1) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("reliability must lie in [0, 1]")
    if k < 1 or int(k) != k:
        raise ValueError("redundancy must be an integer >= 1")
    if k == 1:
        return float(p)
    # 1 - (1 - p)**k, written to stay accurate for p near 0
    return -math.expm1(int(k) * math.log1p(-p)) if p < 1.0 else 1.0


def system_redundancy(a: float, n: int) -> float:
    """Availability of ``n`` independent identical systems when one suffices."""
    return 1.0 - (1.0 - a) ** n


def capability_rollup(model: AvailabilityModel, device_state: Mapping[str, bool]) -> dict[str, bool]:
    """Evaluate every capability bottom-up for one device up/down assignment."""
    value = {d: bool(device_state[d]) for d in model.device_ids}
    for cap in model.topo_order():
        kids = [value[r] for r in cap.requires]
        value[cap.id] = all(kids) if cap.combinator == "all_of" else any(kids)
    return {c: value[c] for c in model.capability_ids}


def _rollup_arrays(model: AvailabilityModel, up: np.ndarray) -> dict[str, np.ndarray]:
    # up: trials x devices, boolean
    value = {d: up[:, j] for j, d in enumerate(model.device_ids)}
    for cap in model.topo_order():
        kids = np.column_stack([value[r] for r in cap.requires])
        value[cap.id] = kids.all(axis=1) if cap.combinator == "all_of" else kids.any(axis=1)
    return {c: value[c] for c in model.capability_ids}


def capability_availability(model: AvailabilityModel) -> dict[str, float]:
    """Exact per-robot availability of every capability.

    Devices are independent, so each device contributes its redundancy-adjusted
    availability; the combined probability is summed over all device states.
    """
    check_model(model)
    ids = model.device_ids
    if len(ids) > MAX_EXACT_DEVICES:
        raise ValueError(f"exact evaluation limited to {MAX_EXACT_DEVICES} devices")
    q = np.array([device_availability(d.reliability, d.redundancy) for d in model.devices])
    states = np.array(list(itertools.product((True, False), repeat=len(ids))), dtype=bool).reshape(-1, len(ids))
    weight = np.prod(np.where(states, q, 1.0 - q), axis=1)
    caps = _rollup_arrays(model, states)
    return {c: float(weight[v].sum()) for c, v in caps.items()}


def robot_availability(model: AvailabilityModel) -> float:
    check_model(model)
    if model.is_series():
        # independent devices in series: product rule
        return math.prod(device_availability(d.reliability, d.redundancy) for d in model.devices)
    return capability_availability(model)[model.mission]


def mission_availability(model: AvailabilityModel) -> float:
    """``1 - (1 - a)**N`` with ``a`` the availability of one robot."""
    return system_redundancy(robot_availability(model), model.n_systems)


def effective_reliability(dist: Distribution, k: int = 1) -> float:
    """Per-copy reliability that gives the same device availability as ``dist``.

    A trial draws one reliability ``p`` (clamped to [0, 1]) shared by the
    ``k`` copies, so the device is up with probability ``E[1 - (1 - p)**k]``.
    The returned value ``r`` satisfies ``1 - (1 - r)**k`` equal to that.
    """
    from scipy import integrate, stats

    def miss(p):
        return (1.0 - min(max(p, 0.0), 1.0)) ** k

    if dist.kind == "constant":
        m = miss(dist.params[0])
    elif dist.kind == "integer_uniform":
        lo, hi = int(dist.params[0]), int(dist.params[1])
        m = sum(miss(v) for v in range(lo, hi + 1)) / (hi - lo + 1)
    elif dist.kind == "uniform":
        lo, hi = dist.params
        if hi == lo:
            m = miss(lo)
        else:
            inner, _ = integrate.quad(miss, max(lo, 0.0), min(hi, 1.0)) if lo < 1 and hi > 0 else (0.0, 0)
            below = max(0.0, min(hi, 0.0) - lo)
            m = (inner + below) / (hi - lo)
    else:
        mu, sd = dist.params
        if sd == 0:
            m = miss(mu)
        else:
            law = stats.norm(mu, sd)
            inner, _ = integrate.quad(lambda p: miss(p) * law.pdf(p), 0.0, 1.0, points=[min(max(mu, 0.0), 1.0)])
            m = law.cdf(0.0) + inner
    return 1.0 - m ** (1.0 / k)


# -- Monte Carlo ------------------------------------------------------------


@dataclass
class ReliabilityEstimate:
    availability: dict[str, float]
    mission: float
    n_trials: int
    matrix: CorrelationMatrix
    standard_error: dict[str, float] = field(default_factory=dict)


def reliability_mc(
    model: AvailabilityModel,
    n_trials: int,
    seed: int = 0,
    distributions: Mapping[str, Distribution] | None = None,
    correlate_on: str = "state",
) -> ReliabilityEstimate:
    """Estimate capability availability by sampling device states.

    Each trial draws a reliability per device (from ``distributions`` when
    given, clamped to [0, 1], otherwise the model value), then a Bernoulli
    state per redundant copy, and rolls the DAG up for each of the
    ``n_systems`` robots. Correlations relate device variables to capability
    flags of the first robot; ``correlate_on`` picks device up/down flags
    (``"state"``) or the drawn reliabilities (``"reliability"``).
    """
    check_model(model)
    if n_trials < 3:
        raise ValueError("need at least 3 trials")
    distributions = dict(distributions or {})
    unknown = set(distributions) - set(model.device_ids)
    if unknown:
        raise ValueError(f"distributions for unknown devices: {sorted(unknown)}")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_dev = len(model.devices)
    rel = np.empty((n_trials, n_dev))
    for j, d in enumerate(model.devices):
        dist = distributions.get(d.id)
        if dist is None:
            rel[:, j] = d.reliability
        elif dist.kind == "normal":
            rel[:, j] = rng.normal(dist.params[0], dist.params[1], n_trials)
        elif dist.kind == "uniform":
            rel[:, j] = rng.uniform(dist.params[0], dist.params[1], n_trials)
        else:
            rel[:, j] = [dist.draw(rng) for _ in range(n_trials)]
    np.clip(rel, 0.0, 1.0, out=rel)

    robots_up = np.zeros(n_trials, dtype=bool)
    first = None
    first_state = None
    for _ in range(model.n_systems):
        up = np.zeros((n_trials, n_dev), dtype=bool)
        for j, d in enumerate(model.devices):
            copies = rng.random((n_trials, d.redundancy)) < rel[:, [j]]
            up[:, j] = copies.any(axis=1)
        caps = _rollup_arrays(model, up)
        robots_up |= caps[model.mission]
        if first is None:
            first, first_state = caps, up

    availability = {c: float(v.mean()) for c, v in first.items()}
    se = {c: math.sqrt(a * (1 - a) / n_trials) for c, a in availability.items()}
    mission = float(robots_up.mean())
    se["mission"] = math.sqrt(mission * (1 - mission) / n_trials)

    dev_cols = first_state.astype(float) if correlate_on == "state" else rel
    labels = list(model.device_ids) + list(model.capability_ids)
    data = np.column_stack([dev_cols] + [first[c].astype(float) for c in model.capability_ids])
    return ReliabilityEstimate(availability, mission, n_trials, correlate(data, labels), se)


# -- sweeps -----------------------------------------------------------------


def redundancy_sweep(
    model: AvailabilityModel,
    axis: str,
    counts: Sequence[int],
    reliability: float | None = None,
) -> list[tuple[int, float]]:
    """Mission availability as redundancy grows along one axis.

    ``subsystem`` sets every device's copy count to each value in
    ``counts``, with every device reliability replaced by ``reliability``
    when given. ``system`` sets the number of robots.
    """
    check_model(model)
    out = []
    for n in counts:
        if axis == "subsystem":
            devs = tuple(
                replace(d, redundancy=int(n), reliability=d.reliability if reliability is None else reliability)
                for d in model.devices
            )
            m = replace(model, devices=devs)
        elif axis == "system":
            m = replace(model, n_systems=int(n))
        else:
            raise ValueError(f"unknown sweep axis {axis!r}")
        out.append((int(n), mission_availability(m)))
    return out


# -- Petri net view ---------------------------------------------------------


def capability_net(model: AvailabilityModel, device_tokens: Mapping[str, int] | None = None, name: str = "capability") -> Net:
    """Executable net equivalent to the capability DAG of one robot.

    Device places hold one token per working copy. Each capability gets a
    place and zero-duration transitions that read their inputs (consume and
    give back) and mark the capability; any_of capabilities get one
    transition per alternative. A one-token guard place per capability
    makes sure it is marked at most once, even while a parent is reading
    it. The goal is a token in the root's place.
    """
    check_model(model)
    tokens = {d.id: d.redundancy for d in model.devices}
    if device_tokens:
        tokens.update(device_tokens)
    places = [
        Place(d.id, name=d.id, tokens=int(tokens[d.id]), metadata={"level": d.level, "role": "device"})
        for d in model.devices
    ]
    places += [Place(c.id, name=c.id, metadata={"level": c.level, "role": "capability"}) for c in model.capabilities]
    places += [
        Place(f"{GUARD_PREFIX}{c.id}", tokens=1, metadata={"level": c.level, "role": "guard"})
        for c in model.capabilities
    ]
    transitions = []
    zero = Duration.constant(0.0)
    for c in model.capabilities:
        groups = [c.requires] if c.combinator == "all_of" else [(r,) for r in c.requires]
        for i, group in enumerate(groups):
            tid = f"enable_{c.id}" if len(groups) == 1 else f"enable_{c.id}_via_{group[0]}"
            transitions.append(
                Transition(
                    tid,
                    duration=zero,
                    inputs={**{r: 1 for r in group}, f"{GUARD_PREFIX}{c.id}": 1},
                    outputs={**{r: 1 for r in group}, c.id: 1},
                    metadata={"level": c.level},
                )
            )
    return Net(
        name,
        places=places,
        transitions=transitions,
        goal=Goal(tokens=(TokenCondition(model.mission, ">=", 1),)),
        metadata={"level": "capability"},
    )
