"""Event-driven execution of a single run of a net.

Semantics in brief:

* firing consumes input tokens immediately and samples a duration;
* output tokens are deposited when the instance completes;
* running instances change resource levels continuously at constant rates;
* an instance may start only if the piecewise-linear projection of every
  resource, over all running instances plus the newcomer, stays in bounds;
* a token in an inhibitor place blocks new firings and suspends running
  instances of that transition until the place empties again.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .net import Goal, Net, Transition, check_net

OUTCOMES = ("success", "timeout", "deadlock", "resource_failure")
EVENT_KINDS = (
    "fire",
    "complete",
    "suspend",
    "resume",
    "inhibited",
    "deadlock",
    "goal_reached",
    "deadline_exceeded",
    "resource_exhausted",
)

# relative slack for resource bound checks
LEVEL_TOL = 1e-9
# cap reported for transitions with no input places and no instance limit
UNBOUNDED_REPORT = 1


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(eq=False)
class ActiveInstance:
    transition: str
    instance_id: int
    start_time: float
    duration: float
    status: str = "running"
    end_time: float = 0.0  # meaningful while running
    remaining: float = 0.0  # meaningful while suspended

    def remaining_at(self, clock: float) -> float:
        return self.end_time - clock if self.status == "running" else self.remaining

    def elapsed_at(self, clock: float) -> float:
        return self.duration - self.remaining_at(clock)

    def reserved(self, net: Net, clock: float) -> list[tuple[str, float]]:
        """Planned resource change still ahead of this instance."""
        left = self.remaining_at(clock)
        return [(rid, rate * left) for rid, rate in net.transition_map[self.transition].rates]


@dataclass
class SimState:
    clock: float
    tokens: dict[str, int]
    levels: dict[str, float]
    active: list[ActiveInstance] = field(default_factory=list)
    rng: np.random.Generator | None = None
    next_instance: int = 0

    @classmethod
    def initial(cls, net: Net, seed=0) -> "SimState":
        return cls(0.0, net.initial_marking(), net.initial_levels(), [], make_rng(seed))

    def running(self) -> list[ActiveInstance]:
        return [a for a in self.active if a.status == "running"]

    def count_active(self, tid: str) -> int:
        return sum(1 for a in self.active if a.transition == tid)


@dataclass(frozen=True)
class Event:
    seq: int
    time: float
    kind: str
    transition: str | None = None
    instance: int | None = None
    deltas: tuple = ()
    detail: str = ""


@dataclass
class Trajectory:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)


@dataclass
class Trace:
    events: list[Event]
    trajectory: Trajectory
    outcome: str
    final_time: float
    goal_time: float | None
    initial_tokens: dict[str, int]
    initial_levels: dict[str, float]
    final_tokens: dict[str, int]
    final_levels: dict[str, float]
    truncated: bool = False

    @property
    def success(self) -> bool:
        return self.outcome == "success"


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    max_time: float = 1000.0
    policy: str | None = None
    sample_interval: float = 1.0
    max_events: int = 100_000

    def __post_init__(self):
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")
        if self.max_events < 1:
            raise ValueError("max_events must be positive")


def replay(trace: Trace) -> tuple[dict[str, int], dict[str, float]]:
    """Apply every event delta to the initial marking, in order."""
    tokens = dict(trace.initial_tokens)
    levels = dict(trace.initial_levels)
    for ev in trace.events:
        for key, delta in ev.deltas:
            if key in tokens:
                tokens[key] += delta
            else:
                levels[key] += delta
    return tokens, levels


# -- enabling ---------------------------------------------------------------


def _tol(*bounds: float) -> float:
    scale = max([1.0] + [abs(b) for b in bounds if math.isfinite(b)])
    return LEVEL_TOL * scale


def _projection_ok(net: Net, levels: dict[str, float], segments: list[tuple[float, tuple]]) -> bool:
    # segments: (time left, rates); rates are constant so checking the
    # level at every breakpoint is exact for a piecewise-linear path
    touched: dict[str, list[tuple[float, float]]] = {}
    for left, rates in segments:
        for rid, rate in rates:
            if rate != 0.0:
                touched.setdefault(rid, []).append((left, rate))
    for rid, segs in touched.items():
        res = net.resource_map[rid]
        tol = _tol(res.min, res.max)
        segs.sort()
        rate = sum(r for _, r in segs)
        level = levels[rid]
        prev = 0.0
        for left, r in segs:
            level += rate * (left - prev)
            if level < res.min - tol or level > res.max + tol:
                return False
            rate -= r
            prev = left
    return True


def resource_feasible(
    net: Net,
    state: SimState,
    transition_id: str,
    k: int,
    sampled_durations: Sequence[float],
) -> bool:
    """Whether ``k`` new instances with the given durations fit the resource bounds.

    Only running instances contribute to the projection; suspended ones are
    ignored until they resume.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(sampled_durations) != k:
        raise ValueError("need one sampled duration per candidate instance")
    t = net.transition_map[transition_id]
    if not t.rates:
        return True
    segments = [(a.end_time - state.clock, net.transition_map[a.transition].rates) for a in state.running()]
    segments += [(float(d), t.rates) for d in sampled_durations]
    return _projection_ok(net, state.levels, segments)


def _structural_room(net: Net, state: SimState, t: Transition) -> float:
    """Instances allowed by tokens and the instance cap, ignoring inhibitors and resources."""
    room = math.inf
    for pid, w in t.inputs:
        room = min(room, state.tokens[pid] // w)
    if t.max_instances is not None:
        room = min(room, t.max_instances - state.count_active(t.id))
    return max(room, 0)


def _inhibited(state: SimState, t: Transition) -> bool:
    return any(state.tokens[p] > 0 for p in t.inhibitors)


def _resource_room(net: Net, state: SimState, t: Transition, bound: float) -> int:
    if bound == 0:
        return 0
    if not t.rates:
        return UNBOUNDED_REPORT if math.isinf(bound) else int(bound)
    d = t.duration.nominal()

    def ok(k):
        return resource_feasible(net, state, t.id, k, [d] * k)

    if math.isinf(bound):
        return 1 if ok(1) else 0
    lo, hi = 0, int(bound)
    # feasibility is monotone in k for identical candidates
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def enabled_instances(net: Net, state: SimState) -> list[tuple[str, int]]:
    """Number of additional instances each transition could start right now.

    Resource projections for not-yet-sampled instances use the nominal
    (expected) duration. A transition with no input places and no instance
    cap reports 1.
    """
    out = []
    for t in net.transitions:
        if _inhibited(state, t):
            out.append((t.id, 0))
            continue
        room = _structural_room(net, state, t)
        out.append((t.id, _resource_room(net, state, t, room)))
    return out


def select_firing(net: Net, enabled: Iterable, policy: str, rng) -> str | None:
    """Pick one transition among ``enabled`` (ids or ``(id, count)`` pairs)."""
    ids = sorted({c if isinstance(c, str) else c[0] for c in enabled})
    if not ids:
        return None
    if len(ids) == 1:
        return ids[0]
    tmap = net.transition_map
    if policy == "fixed_priority":
        return min(ids, key=lambda i: (-tmap[i].priority, i))
    if policy == "uniform_random":
        return ids[int(rng.integers(len(ids)))]
    if policy == "priority_proportional":
        weights = [tmap[i].priority for i in ids]
        total = sum(weights)
        if total == 0:
            return ids[int(rng.integers(len(ids)))]
        u = float(rng.random()) * total
        acc = 0
        for i, w in zip(ids, weights):
            acc += w
            if w > 0 and u < acc:
                return i
        return [i for i, w in zip(ids, weights) if w > 0][-1]
    raise ValueError(f"unknown conflict policy {policy!r}")


def _resource_only_blocked(net: Net, state: SimState, rejected: frozenset) -> bool:
    for t in net.transitions:
        if _inhibited(state, t):
            continue
        if _structural_room(net, state, t) >= 1:
            return True  # tokens and instance room are there, so resources are what is missing
    return bool(rejected)


def detect_termination(
    net: Net,
    state: SimState,
    max_time: float = math.inf,
    rejected: Iterable[str] = (),
) -> str | None:
    """Classify the run at an event point, or return None to keep going.

    ``rejected`` lists transitions refused at this instant because their
    sampled duration did not fit the resource bounds.
    """
    goal = net.goal
    if goal is not None and goal.holds(state.tokens, state.levels):
        if goal.deadline is not None and state.clock > goal.deadline:
            return "timeout"
        return "success"
    if state.clock >= max_time:
        return "timeout"
    if state.running():
        return None
    rejected = frozenset(rejected)
    if any(k > 0 and tid not in rejected for tid, k in enabled_instances(net, state)):
        return None
    # a stall with only suspended instances left is a deadlock unless some
    # uninhibited transition is held back by resources alone
    return "resource_failure" if _resource_only_blocked(net, state, rejected) else "deadlock"


# -- the run loop -----------------------------------------------------------


class _Truncated(Exception):
    pass


class _Run:
    def __init__(self, net: Net, config: SimConfig):
        self.net = net
        self.cfg = config
        self.policy = config.policy or net.policy
        self.state = SimState.initial(net, config.seed)
        self.events: list[Event] = []
        self.pending: list[tuple[str, float]] = []
        self.inhibited: set[str] = set()
        self.inhibitable = {t.id for t in net.transitions if t.inhibitors}
        self.deadline_noted = False
        self.goal_time: float | None = None
        self.columns = tuple(net.place_map) + tuple(net.resource_map)
        self.rows: list[tuple] = []
        self.sample_index = 0
        self.sample_due = True

    # events and samples

    def emit(self, kind, transition=None, instance=None, deltas=(), detail=""):
        if len(self.events) >= self.cfg.max_events:
            raise _Truncated
        deltas = tuple(self.pending) + tuple(deltas)
        self.pending = []
        self.events.append(
            Event(len(self.events), self.state.clock, kind, transition, instance, deltas, detail)
        )

    def next_sample_time(self) -> float:
        return self.sample_index * self.cfg.sample_interval

    def sample(self):
        st = self.state
        row = (st.clock, *[st.tokens[p] for p in self.net.place_map], *[st.levels[r] for r in self.net.resource_map])
        if self.rows and self.rows[-1][0] == st.clock:
            self.rows[-1] = row
        else:
            self.rows.append(row)

    # state changes

    def complete_due(self):
        st = self.state
        due = sorted(
            (a for a in st.active if a.status == "running" and a.end_time <= st.clock),
            key=lambda a: (a.end_time, a.instance_id),
        )
        for a in due:
            t = self.net.transition_map[a.transition]
            self.emit("complete", t.id, a.instance_id, tuple((p, w) for p, w in t.outputs))
            st.active.remove(a)
            for pid, w in t.outputs:
                st.tokens[pid] += w

    def update_suspensions(self):
        st = self.state
        tmap = self.net.transition_map
        cache: dict[str, bool] = {}
        for a in st.active:
            if a.transition not in self.inhibitable:
                continue
            blocked = cache.get(a.transition)
            if blocked is None:
                blocked = cache[a.transition] = _inhibited(st, tmap[a.transition])
            if a.status == "running" and blocked:
                self.emit("suspend", a.transition, a.instance_id)
                a.status = "suspended"
                a.remaining = a.end_time - st.clock
            elif a.status == "suspended" and not blocked:
                self.emit("resume", a.transition, a.instance_id)
                a.status = "running"
                a.end_time = st.clock + a.remaining

    def note_inhibited(self):
        st = self.state
        now = {
            t.id
            for t in self.net.transitions
            if t.inhibitors and _inhibited(st, t) and _structural_room(self.net, st, t) >= 1
        }
        for tid in sorted(now - self.inhibited):
            self.emit("inhibited", tid, detail="on")
        for tid in sorted(self.inhibited - now):
            self.emit("inhibited", tid, detail="off")
        self.inhibited = now

    def fire_loop(self) -> frozenset:
        st = self.state
        net = self.net
        rejected: set[str] = set()
        while True:
            self.update_suspensions()
            cands = [(tid, k) for tid, k in enabled_instances(net, st) if k > 0 and tid not in rejected]
            if not cands:
                break
            tid = select_firing(net, cands, self.policy, st.rng)
            t = net.transition_map[tid]
            d = t.duration.sample(st.rng)
            if not resource_feasible(net, st, tid, 1, [d]):
                rejected.add(tid)
                self.emit("resource_exhausted", tid, detail="admission")
                continue
            inst = ActiveInstance(tid, st.next_instance, st.clock, d, "running", st.clock + d)
            self.emit("fire", tid, inst.instance_id, tuple((p, -w) for p, w in t.inputs))
            for pid, w in t.inputs:
                st.tokens[pid] -= w
            st.next_instance += 1
            st.active.append(inst)
        self.note_inhibited()
        return frozenset(rejected)

    def rates(self) -> dict[str, float]:
        total: dict[str, float] = {}
        tmap = self.net.transition_map
        for a in self.state.running():
            for rid, rate in tmap[a.transition].rates:
                total[rid] = total.get(rid, 0.0) + rate
        return total

    def move_levels(self, dt: float, rates: dict[str, float], pin: dict[str, float] | None = None):
        st = self.state
        for rid in self.net.resource_map:
            rate = rates.get(rid, 0.0)
            if rate == 0.0:
                continue
            res = self.net.resource_map[rid]
            old = st.levels[rid]
            target = pin[rid] if pin and rid in pin else old + rate * dt
            target = min(max(target, res.min), res.max)
            delta = target - old
            # keep old + delta inside the bounds so replay lands on the same float
            while old + delta < res.min:
                delta = math.nextafter(delta, math.inf)
            while old + delta > res.max:
                delta = math.nextafter(delta, -math.inf)
            st.levels[rid] = old + delta
            self.pending.append((rid, delta))

    def advance(self) -> bool:
        """Move the clock to the next event. False if a resource bound is hit first."""
        st = self.state
        running = st.running()
        cands = [a.end_time for a in running]
        cands.append(self.next_sample_time())
        cands.append(self.cfg.max_time)
        deadline = self.net.goal.deadline if self.net.goal else None
        if deadline is not None and not self.deadline_noted:
            cands.append(deadline)
        t_next = min(c for c in cands if c >= st.clock)
        dt = t_next - st.clock
        rates = self.rates()

        hit_dt, hit = math.inf, {}
        for rid, rate in rates.items():
            res = self.net.resource_map[rid]
            level = st.levels[rid]
            tol = _tol(res.min, res.max)
            if rate < 0 and level + rate * dt < res.min - tol:
                when, bound = (level - res.min) / -rate, res.min
            elif rate > 0 and level + rate * dt > res.max + tol:
                when, bound = (res.max - level) / rate, res.max
            else:
                continue
            if when < hit_dt:
                hit_dt, hit = when, {rid: bound}
            elif when == hit_dt:
                hit[rid] = bound
        if hit:
            self.move_levels(hit_dt, rates, pin=hit)
            st.clock = st.clock + hit_dt
            for rid in sorted(hit):
                self.emit("resource_exhausted", detail=f"bound:{rid}")
            return False
        self.move_levels(dt, rates)
        st.clock = t_next
        if t_next == self.next_sample_time():
            self.sample_due = True
        return True

    def step_samples(self):
        # a row shows the state once everything at its instant has happened
        if self.rows and self.rows[-1][0] == self.state.clock:
            self.sample()
        if self.sample_due:
            self.sample()
            self.sample_due = False
            while self.next_sample_time() <= self.state.clock:
                self.sample_index += 1

    def finish(self, outcome: str, detail: str = "") -> str:
        st = self.state
        if outcome == "deadlock":
            self.emit("deadlock", detail=detail)
        elif outcome == "timeout" and self.goal_time is None:
            self.emit("deadline_exceeded", detail=detail or "max_time")
        elif outcome == "resource_failure" and not (self.events and self.events[-1].kind == "resource_exhausted"):
            self.emit("resource_exhausted", detail="starved")
        return outcome

    def check(self, rejected=()) -> str | None:
        st = self.state
        outcome = detect_termination(self.net, st, self.cfg.max_time, rejected)
        if outcome is None:
            return None
        goal = self.net.goal
        if goal is not None and goal.holds(st.tokens, st.levels):
            self.goal_time = st.clock
            self.emit("goal_reached")
        return self.finish(outcome, "suspended" if outcome == "deadlock" and st.active else "")

    def run(self) -> Trace:
        st = self.state
        truncated = False
        outcome = None
        try:
            while True:
                self.complete_due()
                self.update_suspensions()
                deadline = self.net.goal.deadline if self.net.goal else None
                goal_met = self.net.goal is not None and self.net.goal.holds(st.tokens, st.levels)
                if deadline is not None and not self.deadline_noted and st.clock >= deadline:
                    self.deadline_noted = True
                    if not goal_met:
                        self.emit("deadline_exceeded", detail="goal_deadline")
                outcome = self.check()
                if outcome:
                    break
                rejected = self.fire_loop()
                outcome = self.check(rejected)
                if outcome:
                    break
                self.step_samples()
                if not self.advance():
                    outcome = "resource_failure"
                    break
        except _Truncated:
            truncated = True
            outcome = "timeout"
            # one event past the bound so pending resource deltas still replay
            self.events.append(
                Event(len(self.events), st.clock, "deadline_exceeded", deltas=tuple(self.pending), detail="max_events")
            )
            self.pending = []
        self.sample_due = True
        self.step_samples()
        return Trace(
            events=self.events,
            trajectory=Trajectory(self.columns, self.rows),
            outcome=outcome,
            final_time=st.clock,
            goal_time=self.goal_time,
            initial_tokens=self.net.initial_marking(),
            initial_levels=self.net.initial_levels(),
            final_tokens=dict(st.tokens),
            final_levels=dict(st.levels),
            truncated=truncated,
        )


def simulate(net: Net, config: SimConfig | None = None) -> Trace:
    """Run ``net`` once. Identical ``(net, config)`` pairs give identical traces."""
    check_net(net)
    return _Run(net, config or SimConfig()).run()
