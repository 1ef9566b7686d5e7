"""Monte Carlo batches: sample net parameters, run many seeded simulations,
aggregate outcomes and correlate inputs with outputs."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .engine import OUTCOMES, SimConfig, simulate
from .net import DURATION_KINDS, InvalidNetError, Net, check_net

DIST_KINDS = {"constant": 1, "uniform": 2, "normal": 2, "integer_uniform": 2}
TARGET_KINDS = ("initial_tokens", "initial_level", "duration_param", "rate", "priority", "max_instances")
# lower bounds for integer-valued targets
_INT_FLOOR = {"initial_tokens": 0, "priority": 0, "max_instances": 1}


@dataclass(frozen=True)
class Distribution:
    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise ValueError(f"unknown distribution {self.kind!r}")
        if len(self.params) != DIST_KINDS[self.kind]:
            raise ValueError(f"{self.kind} takes {DIST_KINDS[self.kind]} parameter(s)")
        lo_hi = self.kind in ("uniform", "integer_uniform")
        if lo_hi and self.params[0] > self.params[1]:
            raise ValueError(f"{self.kind} needs low <= high")
        if self.kind == "normal" and self.params[1] < 0:
            raise ValueError("normal needs sd >= 0")
        if self.kind == "integer_uniform" and any(int(p) != p for p in self.params):
            raise ValueError("integer_uniform bounds must be integers")

    @property
    def integral(self) -> bool:
        return self.kind == "integer_uniform"

    def draw(self, rng: np.random.Generator) -> float:
        p = self.params
        if self.kind == "constant":
            return p[0]
        if self.kind == "uniform":
            return float(rng.uniform(p[0], p[1]))
        if self.kind == "normal":
            return float(rng.normal(p[0], p[1]))
        return int(rng.integers(int(p[0]), int(p[1]), endpoint=True))

    def mean(self) -> float:
        if self.kind == "constant":
            return float(self.params[0])
        if self.kind == "normal":
            return float(self.params[0])
        return 0.5 * (self.params[0] + self.params[1])


@dataclass(frozen=True)
class Target:
    """What a sampled value replaces.

    ``element`` is the place, resource or transition id. ``detail`` is the
    duration parameter name for ``duration_param`` and the resource id for
    ``rate``.
    """

    kind: str
    element: str
    detail: str | None = None

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ValueError(f"unknown sampling target {self.kind!r}")

    def default_label(self) -> str:
        short = {
            "initial_tokens": "tokens",
            "initial_level": "level",
            "duration_param": "duration",
            "rate": "rate",
            "priority": "priority",
            "max_instances": "max_instances",
        }[self.kind]
        if self.detail:
            return f"{short}:{self.element}.{self.detail}"
        return f"{short}:{self.element}"


@dataclass(frozen=True)
class SamplingEntry:
    target: Target
    dist: Distribution
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or self.target.default_label()


@dataclass(frozen=True)
class SamplingSpec:
    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        labels = [e.label for e in self.entries]
        if len(set(labels)) != len(labels):
            raise ValueError("sampling labels must be unique")

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.entries]


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _resolve(net: Net, target: Target) -> list[str]:
    problems = []
    if target.kind == "initial_tokens" and target.element not in net.place_map:
        problems.append(f"unknown place {target.element!r}")
    elif target.kind == "initial_level" and target.element not in net.resource_map:
        problems.append(f"unknown resource {target.element!r}")
    elif target.kind in ("duration_param", "rate", "priority", "max_instances"):
        t = net.transition_map.get(target.element)
        if t is None:
            problems.append(f"unknown transition {target.element!r}")
        elif target.kind == "duration_param" and target.detail not in DURATION_KINDS.get(t.duration.kind, ()):
            problems.append(f"{t.duration.kind} duration of {t.id!r} has no parameter {target.detail!r}")
        elif target.kind == "rate" and target.detail not in net.resource_map:
            problems.append(f"unknown resource {target.detail!r}")
    return problems


def check_spec(net: Net, spec: SamplingSpec) -> list[str]:
    out = []
    for e in spec.entries:
        out += [f"{e.label}: {p}" for p in _resolve(net, e.target)]
    return out


def _apply(net: Net, target: Target, value) -> Net:
    k = target.kind
    if k == "initial_tokens":
        places = tuple(replace(p, tokens=value) if p.id == target.element else p for p in net.places)
        return replace(net, places=places)
    if k == "initial_level":
        res = tuple(replace(r, initial=value) if r.id == target.element else r for r in net.resources)
        return replace(net, resources=res)

    def edit(t):
        if t.id != target.element:
            return t
        if k == "duration_param":
            return replace(t, duration=t.duration.with_param(target.detail, value))
        if k == "rate":
            rates = dict(t.rates)
            rates[target.detail] = value
            return replace(t, rates=tuple(rates.items()))
        if k == "priority":
            return replace(t, priority=value)
        return replace(t, max_instances=value)

    return replace(net, transitions=tuple(edit(t) for t in net.transitions))


def instantiate(template: Net, spec: SamplingSpec, rng) -> tuple[Net, dict[str, float]]:
    """Draw every entry of ``spec`` once and substitute it into a copy of ``template``.

    Integer targets are rounded half away from zero and floored at their
    lower bound; the recorded value is the one actually used.
    """
    problems = check_spec(template, spec)
    if problems:
        raise ValueError("; ".join(problems))
    net = template
    record: dict[str, float] = {}
    for e in spec.entries:
        value = e.dist.draw(rng)
        if e.target.kind in _INT_FLOOR:
            value = max(round_half_away(value), _INT_FLOOR[e.target.kind])
        else:
            value = float(value)
        net = _apply(net, e.target, value)
        record[e.label] = value
    return net, record


# -- batches ----------------------------------------------------------------


class BatchError(ValueError):
    pass


@dataclass(frozen=True)
class RunRecord:
    index: int
    inputs: dict
    outcome: str
    final_time: float
    goal_time: float | None
    final_levels: dict
    goal: int  # 1 iff the run succeeded

    def value(self, name: str) -> float:
        if name in self.inputs:
            return float(self.inputs[name])
        if name == "final_time":
            return self.final_time
        if name == "goal":
            return float(self.goal)
        if name == "goal_time":
            return math.nan if self.goal_time is None else self.goal_time
        if name.startswith("final:"):
            return self.final_levels[name[len("final:"):]]
        raise KeyError(name)


@dataclass
class BatchResult:
    runs: list[RunRecord]
    n_runs: int
    master_seed: int
    input_labels: list[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.value(name) for r in self.runs], dtype=float)


def run_seeds(master_seed: int, index: int) -> tuple[np.random.SeedSequence, int]:
    """Parameter stream and simulation seed for run ``index`` of a batch."""
    params, sim = np.random.SeedSequence(master_seed, spawn_key=(index,)).spawn(2)
    return params, int(sim.generate_state(1, np.uint64)[0])


def _one_run(args) -> RunRecord:
    template, spec, master_seed, index, config = args
    params_ss, sim_seed = run_seeds(master_seed, index)
    net, record = instantiate(template, spec, np.random.Generator(np.random.PCG64(params_ss)))
    try:
        check_net(net)
    except InvalidNetError as exc:
        raise BatchError(f"run {index} with inputs {record} is invalid: {exc}") from exc
    trace = simulate(net, replace(config, seed=sim_seed))
    return RunRecord(
        index=index,
        inputs=record,
        outcome=trace.outcome,
        final_time=trace.final_time,
        goal_time=trace.goal_time,
        final_levels=dict(trace.final_levels),
        goal=int(trace.outcome == "success"),
    )


def run_batch(
    template: Net,
    spec: SamplingSpec | None,
    n_runs: int,
    master_seed: int = 0,
    config: SimConfig | None = None,
    jobs: int = 1,
) -> BatchResult:
    """Simulate ``n_runs`` independently sampled instances of ``template``.

    Run ``i`` draws its parameters and its simulation stream from seeds
    derived from ``(master_seed, i)`` only, so the result does not depend on
    ``jobs`` or on execution order.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    spec = spec or SamplingSpec()
    check_net(template)
    problems = check_spec(template, spec)
    if problems:
        raise ValueError("; ".join(problems))
    config = config or SimConfig()
    work = [(template, spec, master_seed, i, config) for i in range(n_runs)]
    if jobs > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_one_run, work, chunksize=max(1, n_runs // (4 * jobs))))
    else:
        runs = [_one_run(w) for w in work]
    runs.sort(key=lambda r: r.index)
    return BatchResult(runs, n_runs, master_seed, spec.labels)


# -- statistics -------------------------------------------------------------


def nearest_rank(sorted_values: Sequence[float], q: float) -> float:
    if not sorted_values:
        return math.nan
    rank = max(1, math.ceil(q / 100.0 * len(sorted_values)))
    return sorted_values[rank - 1]


@dataclass
class Summary:
    n_runs: int
    success_rate: float
    outcomes: dict[str, int]
    n_timed: int
    time_mean: float
    time_sd: float
    percentiles: dict[int, float]

    def as_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "success_rate": self.success_rate,
            "outcomes": dict(self.outcomes),
            "n_timed": self.n_timed,
            "time_mean": self.time_mean,
            "time_sd": self.time_sd,
            "percentiles": {str(k): v for k, v in self.percentiles.items()},
        }

    @property
    def time_se(self) -> float:
        return self.time_sd / math.sqrt(self.n_timed) if self.n_timed > 1 else math.nan


def summarize(
    batch: BatchResult, include_censored: bool = False, percentiles=(5, 50, 95), basis: str | None = None
) -> Summary:
    """Success rate, outcome histogram and completion-time statistics.

    ``basis`` picks the runs that enter the time statistics: ``"success"``
    (the default) uses successful runs, ``"goal"`` uses the goal time of every
    run that reached the goal, late or not, and ``"all"`` uses every run's
    final time, censored ones included. ``include_censored=True`` is shorthand
    for ``"all"``. The standard deviation uses ``n - 1``; percentiles use the
    nearest-rank rule.
    """
    if not batch.runs:
        raise ValueError("empty batch")
    basis = basis or ("all" if include_censored else "success")
    if basis not in ("success", "goal", "all"):
        raise ValueError(f"unknown time basis {basis!r}")
    hist = {o: 0 for o in OUTCOMES}
    for r in batch.runs:
        hist[r.outcome] += 1
    n = len(batch.runs)
    if basis == "goal":
        times = sorted(r.goal_time for r in batch.runs if r.goal_time is not None)
    else:
        times = sorted(r.final_time for r in batch.runs if basis == "all" or r.outcome == "success")
    m = len(times)
    mean = sum(times) / m if m else math.nan
    sd = math.sqrt(sum((t - mean) ** 2 for t in times) / (m - 1)) if m > 1 else (0.0 if m == 1 else math.nan)
    return Summary(
        n_runs=n,
        success_rate=hist["success"] / n,
        outcomes=hist,
        n_timed=m,
        time_mean=mean,
        time_sd=sd,
        percentiles={q: nearest_rank(times, q) for q in percentiles},
    )


@dataclass
class CorrelationMatrix:
    labels: list[str]
    values: np.ndarray  # NaN where undefined
    n_samples: int

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.labels.index(a), self.labels.index(b)])

    def block(self, rows: Sequence[str], cols: Sequence[str]) -> np.ndarray:
        ri = [self.labels.index(r) for r in rows]
        ci = [self.labels.index(c) for c in cols]
        return self.values[np.ix_(ri, ci)]


def _rank(col: np.ndarray) -> np.ndarray:
    from scipy.stats import rankdata

    return rankdata(col)


def correlate(data: np.ndarray, labels: Sequence[str], method: str = "pearson") -> CorrelationMatrix:
    """Pairwise correlation of the columns of ``data`` (samples x variables).

    Entries involving a zero-variance column are NaN (undefined) rather than 0.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(labels):
        raise ValueError("data must be samples x len(labels)")
    if data.shape[0] < 3:
        raise ValueError("need at least 3 samples")
    if method == "spearman":
        data = np.column_stack([_rank(data[:, j]) for j in range(data.shape[1])])
    elif method != "pearson":
        raise ValueError(f"unknown correlation method {method!r}")
    centered = data - data.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    scale = np.max(np.abs(data), axis=0)
    flat = norms <= 1e-12 * np.maximum(scale, 1.0) * math.sqrt(data.shape[0])
    safe = np.where(flat, 1.0, norms)
    z = centered / safe
    values = np.clip(z.T @ z, -1.0, 1.0)
    np.fill_diagonal(values, 1.0)
    values[flat, :] = np.nan
    values[:, flat] = np.nan
    return CorrelationMatrix(list(labels), values, data.shape[0])


def correlation_matrix(
    batch: BatchResult,
    inputs: Sequence[str],
    outputs: Sequence[str] = ("final_time", "goal"),
    method: str = "pearson",
) -> CorrelationMatrix:
    labels = list(inputs) + list(outputs)
    data = np.column_stack([batch.column(v) for v in labels])
    return correlate(data, labels, method)
