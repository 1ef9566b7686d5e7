"""Reading and writing net documents, sampling specs, fusion maps and availability models.

Documents are YAML. Parsing is strict: the text is checked against the
published JSON Schema and every diagnostic carries the line and column of
the offending node. Serialization is canonical (sorted keys and ids, floats
with 9 significant digits), so equal structures give identical text.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from . import schemas
from .compose import FusionGroup, FusionMap
from .montecarlo import Distribution, SamplingEntry, SamplingSpec, Target
from .net import (
    Duration,
    Goal,
    Net,
    Place,
    Resource,
    ResourceCondition,
    TokenCondition,
    Transition,
    errors,
    validate_net,
)
from .reliability import AvailabilityModel, Capability, Device, validate_model

_Loader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str
    path: tuple = ()
    source: str = "<string>"

    def __str__(self):
        return f"{self.source}:{self.line}:{self.column}: {self.message}"


class FormatError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = sorted(diagnostics, key=lambda d: (d.line, d.column, d.message))
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# -- reading ----------------------------------------------------------------


class _Located:
    """Plain data plus a map from document paths to source positions."""

    def __init__(self, source: str):
        self.source = source
        self.value_pos: dict[tuple, tuple[int, int]] = {}
        self.key_pos: dict[tuple, tuple[int, int]] = {}
        self.problems: list[Diagnostic] = []

    def where(self, path: tuple, key: bool = False) -> tuple[int, int]:
        path = tuple(path)
        table = self.key_pos if key else self.value_pos
        while path:
            if path in table:
                return table[path]
            if path in self.value_pos:
                return self.value_pos[path]
            path = path[:-1]
        return self.value_pos.get((), (1, 1))

    def diag(self, path, message, key=False) -> Diagnostic:
        line, col = self.where(path, key)
        return Diagnostic(line, col, message, tuple(path), self.source)


def _mark(node) -> tuple[int, int]:
    return node.start_mark.line + 1, node.start_mark.column + 1


def _load(text: str, source: str) -> tuple[Any, _Located]:
    loc = _Located(source)
    loader = _Loader(text)
    try:
        try:
            node = loader.get_single_node()
        except yaml.MarkedYAMLError as exc:
            mark = exc.problem_mark or exc.context_mark
            line, col = (mark.line + 1, mark.column + 1) if mark else (1, 1)
            raise FormatError([Diagnostic(line, col, f"syntax error: {exc.problem}", (), source)]) from None
        except yaml.YAMLError as exc:
            raise FormatError([Diagnostic(1, 1, f"syntax error: {exc}", (), source)]) from None
        if node is None:
            raise FormatError([Diagnostic(1, 1, "empty document", (), source)])

        def walk(n, path):
            loc.value_pos[path] = _mark(n)
            if isinstance(n, yaml.MappingNode):
                out = {}
                for k, v in n.value:
                    key = walk(k, path + ("<key>",))
                    if not isinstance(key, (str, int, float, bool)) or key is None:
                        loc.problems.append(Diagnostic(*_mark(k), "mapping keys must be scalars", path, source))
                        continue
                    if key in out:
                        loc.problems.append(Diagnostic(*_mark(k), f"duplicate key {key!r}", path, source))
                        continue
                    loc.key_pos[path + (key,)] = _mark(k)
                    out[key] = walk(v, path + (key,))
                loc.value_pos.pop(path + ("<key>",), None)
                return out
            if isinstance(n, yaml.SequenceNode):
                return [walk(v, path + (i,)) for i, v in enumerate(n.value)]
            return loader.construct_object(n, deep=True)

        data = walk(node, ())
    finally:
        loader.dispose()
    if loc.problems:
        raise FormatError(loc.problems)
    return data, loc


def _schema_check(data, loc: _Located, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    diags = []
    for err in validator.iter_errors(data):
        diags.extend(_explain(err, loc))
    if diags:
        raise FormatError(diags)


def _explain(err, loc: _Located) -> list[Diagnostic]:
    path = tuple(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra and isinstance(err.schema.get("additionalProperties"), bool):
            return [loc.diag(path + (k,), f"unknown field {k!r}", key=True) for k in extra]
    if err.validator in ("oneOf", "anyOf") and err.context:
        best = jsonschema.exceptions.best_match(err.context)
        if best is not None and best.validator not in ("maxProperties", "required"):
            return _explain(best, loc)
        keys = sorted(err.instance) if isinstance(err.instance, dict) else err.instance
        return [loc.diag(path, f"invalid combination of fields {keys!r}")]
    if err.validator == "required":
        return [loc.diag(path, err.message)]
    if err.validator in ("minProperties", "maxProperties") and isinstance(err.instance, dict):
        return [loc.diag(path, f"expected exactly one of {sorted(err.schema.get('properties', {}))}")]
    where = "/".join(str(p) for p in path) or "document"
    return [loc.diag(path, f"{where}: {err.message}", key=False)]


def _dist(d: dict) -> Distribution:
    (kind, params), = d.items()
    if kind == "constant":
        return Distribution("constant", (params,))
    return Distribution(kind, tuple(params))


def _dist_doc(dist: Distribution) -> dict:
    if dist.kind == "constant":
        return {"constant": dist.params[0]}
    return {dist.kind: list(dist.params)}


def _target(t: dict) -> Target:
    if "tokens" in t:
        return Target("initial_tokens", t["tokens"])
    if "level" in t:
        return Target("initial_level", t["level"])
    if "duration" in t:
        return Target("duration_param", t["duration"], t["param"])
    if "rate" in t:
        return Target("rate", t["rate"], t["resource"])
    if "priority" in t:
        return Target("priority", t["priority"])
    return Target("max_instances", t["max_instances"])


def _target_doc(t: Target) -> dict:
    if t.kind == "initial_tokens":
        return {"tokens": t.element}
    if t.kind == "initial_level":
        return {"level": t.element}
    if t.kind == "duration_param":
        return {"duration": t.element, "param": t.detail}
    if t.kind == "rate":
        return {"rate": t.element, "resource": t.detail}
    return {t.kind: t.element}


def _sampling(items: list, loc: _Located, base: tuple) -> SamplingSpec:
    entries = []
    diags = []
    for i, item in enumerate(items):
        try:
            entries.append(SamplingEntry(_target(item["target"]), _dist(item["dist"]), item.get("name")))
        except ValueError as exc:
            diags.append(loc.diag(base + (i, "dist"), str(exc)))
    if diags:
        raise FormatError(diags)
    try:
        return SamplingSpec(entries)
    except ValueError as exc:
        raise FormatError([loc.diag(base, str(exc))]) from None


def _fusion(doc: dict) -> FusionMap:
    def groups(items):
        return tuple(
            FusionGroup(g["canonical"], tuple(g["members"].items()), g.get("authority")) for g in items or ()
        )

    return FusionMap(
        places=groups(doc.get("places")),
        resources=groups(doc.get("resources")),
        separator=doc.get("separator", "."),
        goal=doc.get("goal"),
        policy=doc.get("policy"),
        name=doc.get("name", "merged"),
    )


def _duration(d: dict | None) -> Duration:
    if d is None:
        return Duration.constant(0.0)
    (kind, params), = d.items()
    if kind == "constant":
        return Duration("constant", (params,))
    return Duration(kind, tuple(params))


def _int(x):
    return None if x is None else int(x)


def _net(doc: dict) -> Net:
    places = [
        Place(p["id"], p.get("name", ""), _int(p.get("tokens", 0)), p.get("metadata", {})) for p in doc.get("places", [])
    ]
    resources = []
    for r in doc.get("resources", []):
        hi = r.get("max")
        resources.append(
            Resource(
                r["id"],
                r.get("name", ""),
                float(r.get("initial", 0.0)),
                float(r.get("min", 0.0)),
                math.inf if hi is None else float(hi),
                r.get("metadata", {}),
            )
        )
    transitions = [
        Transition(
            t["id"],
            t.get("name", ""),
            _duration(t.get("duration")),
            {k: int(v) for k, v in t.get("inputs", {}).items()},
            {k: int(v) for k, v in t.get("outputs", {}).items()},
            tuple(t.get("inhibitors", ())),
            t.get("rates", {}),
            int(t.get("priority", 0)),
            _int(t.get("max_instances")),
            t.get("metadata", {}),
        )
        for t in doc.get("transitions", [])
    ]
    goal = None
    if "goal" in doc:
        g = doc["goal"]
        goal = Goal(
            tuple(TokenCondition(c["place"], c["op"], int(c["count"])) for c in g.get("tokens", [])),
            tuple(ResourceCondition(c["resource"], c["op"], float(c["level"])) for c in g.get("resources", [])),
            None if g.get("deadline") is None else float(g["deadline"]),
        )
    return Net(
        doc.get("name", "net"),
        places,
        resources,
        transitions,
        goal,
        doc.get("policy", "fixed_priority"),
        doc.get("metadata", {}),
    )


@dataclass
class NetDocument:
    net: Net
    sampling: SamplingSpec | None = None
    fusion: FusionMap | None = None
    format_version: int = schemas.FORMAT_VERSION


def _version_gate(data, loc):
    if isinstance(data, dict) and "format_version" in data and data["format_version"] != schemas.FORMAT_VERSION:
        raise FormatError(
            [
                loc.diag(
                    ("format_version",),
                    f"unsupported format_version {data['format_version']!r} (this build reads {schemas.FORMAT_VERSION})",
                )
            ]
        )


def parse_document(text: str, source: str = "<string>") -> NetDocument:
    data, loc = _load(text, source)
    _version_gate(data, loc)
    _schema_check(data, loc, schemas.NET_SCHEMA)
    net = _net(data)
    bad = errors(validate_net(net))
    if bad:
        raise FormatError([loc.diag(v.path, v.message, key=True) for v in bad])
    sampling = _sampling(data["sampling"], loc, ("sampling",)) if "sampling" in data else None
    fusion = _fusion(data["fusion"]) if "fusion" in data else None
    return NetDocument(net, sampling, fusion)


def parse_net(text: str, source: str = "<string>") -> Net:
    """Parse a net document; raise :class:`FormatError` with located diagnostics."""
    return parse_document(text, source).net


def parse_sampling(text: str, source: str = "<string>") -> SamplingSpec:
    data, loc = _load(text, source)
    _version_gate(data, loc)
    _schema_check(data, loc, schemas.SAMPLING_SCHEMA)
    return _sampling(data["sampling"], loc, ("sampling",))


def parse_fusion(text: str, source: str = "<string>") -> FusionMap:
    data, loc = _load(text, source)
    _version_gate(data, loc)
    _schema_check(data, loc, schemas.FUSION_SCHEMA)
    return _fusion(data["fusion"])


@dataclass
class ModelDocument:
    model: AvailabilityModel
    distributions: dict  # device id -> Distribution


def parse_model(text: str, source: str = "<string>") -> ModelDocument:
    data, loc = _load(text, source)
    _version_gate(data, loc)
    _schema_check(data, loc, schemas.MODEL_SCHEMA)
    default = _dist(data["reliability_dist"]) if "reliability_dist" in data else None
    devices, dists = [], {}
    for d in data["devices"]:
        devices.append(Device(d["id"], float(d["reliability"]), int(d.get("redundancy", 1)), d.get("level", "subsystem")))
        if "reliability_dist" in d:
            dists[d["id"]] = _dist(d["reliability_dist"])
        elif default is not None:
            dists[d["id"]] = default
    caps = [
        Capability(c["id"], tuple(c["requires"]), c.get("combinator", "all_of"), c.get("level", "system"))
        for c in data["capabilities"]
    ]
    model = AvailabilityModel(devices, caps, data["mission"], int(data.get("n_systems", 1)), data.get("name", "model"))
    problems = validate_model(model)
    if problems:
        raise FormatError([loc.diag(("capabilities",), p) for p in problems])
    return ModelDocument(model, dists)


def _read(path) -> tuple[str, str]:
    path = Path(path)
    return path.read_text(encoding="utf-8"), str(path)


def load_document(path) -> NetDocument:
    return parse_document(*_read(path))


def load_net(path) -> Net:
    return parse_net(*_read(path))


def load_sampling(path) -> SamplingSpec:
    return parse_sampling(*_read(path))


def load_fusion(path) -> FusionMap:
    return parse_fusion(*_read(path))


def load_model(path) -> ModelDocument:
    return parse_model(*_read(path))


# -- writing ----------------------------------------------------------------


def format_float(x: float) -> str:
    if math.isnan(x):
        return ".nan"
    if math.isinf(x):
        return ".inf" if x > 0 else "-.inf"
    s = f"{x:.9g}"
    if "e" in s:
        mant, exp = s.split("e")
        if "." not in mant:
            mant += ".0"
        e = int(exp)
        return f"{mant}e{'+' if e >= 0 else '-'}{abs(e):02d}"
    if "." not in s:
        s += ".0"
    return s


class _Dumper(yaml.SafeDumper):
    pass


_Dumper.add_representer(float, lambda d, v: d.represent_scalar("tag:yaml.org,2002:float", format_float(v)))


def _emit(doc: dict) -> str:
    return yaml.dump(doc, Dumper=_Dumper, sort_keys=True, default_flow_style=False, allow_unicode=True, width=1 << 16)


def _prune(d: dict, defaults: dict) -> dict:
    return {k: v for k, v in d.items() if not (k in defaults and v == defaults[k])}


def _duration_doc(d: Duration):
    if d.kind == "constant":
        return {"constant": d.params[0]}
    return {d.kind: list(d.params)}


def net_to_doc(net: Net, sampling: SamplingSpec | None = None, fusion: FusionMap | None = None) -> dict:
    net = net.canonical()
    doc: dict = {"format_version": schemas.FORMAT_VERSION, "name": net.name, "policy": net.policy}
    if net.metadata:
        doc["metadata"] = dict(net.metadata)
    if net.places:
        doc["places"] = [
            _prune(
                {"id": p.id, "name": p.name, "tokens": p.tokens, "metadata": dict(p.metadata)},
                {"name": "", "tokens": 0, "metadata": {}},
            )
            for p in net.places
        ]
    if net.resources:
        doc["resources"] = [
            _prune(
                {
                    "id": r.id,
                    "name": r.name,
                    "initial": r.initial,
                    "min": r.min,
                    "max": None if math.isinf(r.max) else r.max,
                    "metadata": dict(r.metadata),
                },
                {"name": "", "min": 0.0, "max": None, "metadata": {}},
            )
            for r in net.resources
        ]
    if net.transitions:
        doc["transitions"] = [
            _prune(
                {
                    "id": t.id,
                    "name": t.name,
                    "duration": _duration_doc(t.duration),
                    "inputs": dict(t.inputs),
                    "outputs": dict(t.outputs),
                    "inhibitors": list(t.inhibitors),
                    "rates": dict(t.rates),
                    "priority": t.priority,
                    "max_instances": t.max_instances,
                    "metadata": dict(t.metadata),
                },
                {
                    "name": "",
                    "inputs": {},
                    "outputs": {},
                    "inhibitors": [],
                    "rates": {},
                    "priority": 0,
                    "max_instances": None,
                    "metadata": {},
                },
            )
            for t in net.transitions
        ]
    if net.goal is not None:
        g = net.goal
        doc["goal"] = _prune(
            {
                "tokens": [{"place": c.place, "op": c.op, "count": c.count} for c in g.tokens],
                "resources": [{"resource": c.resource, "op": c.op, "level": float(c.level)} for c in g.resources],
                "deadline": None if g.deadline is None else float(g.deadline),
            },
            {"tokens": [], "resources": [], "deadline": None},
        )
    if sampling is not None and sampling.entries:
        doc["sampling"] = sampling_to_list(sampling)
    if fusion is not None:
        doc["fusion"] = fusion_to_doc(fusion)
    return doc


def sampling_to_list(spec: SamplingSpec) -> list:
    out = []
    for e in spec.entries:
        item = {"target": _target_doc(e.target), "dist": _dist_doc(e.dist)}
        if e.name:
            item["name"] = e.name
        out.append(item)
    return out


def fusion_to_doc(fm: FusionMap) -> dict:
    def groups(gs):
        out = []
        for g in sorted(gs, key=lambda g: g.canonical):
            item = {"canonical": g.canonical, "members": dict(g.members)}
            if g.authority:
                item["authority"] = g.authority
            out.append(item)
        return out

    doc = {"name": fm.name, "separator": fm.separator}
    if fm.places:
        doc["places"] = groups(fm.places)
    if fm.resources:
        doc["resources"] = groups(fm.resources)
    if fm.goal:
        doc["goal"] = fm.goal
    if fm.policy:
        doc["policy"] = fm.policy
    return doc


def serialize_net(net: Net, sampling: SamplingSpec | None = None, fusion: FusionMap | None = None) -> str:
    """Canonical text for ``net``: sorted ids and keys, defaults omitted."""
    return _emit(net_to_doc(net, sampling, fusion))


def serialize_sampling(spec: SamplingSpec) -> str:
    # entry order is meaningful (draw order), so it is kept
    return _emit({"format_version": schemas.FORMAT_VERSION, "sampling": sampling_to_list(spec)})


def serialize_fusion(fm: FusionMap) -> str:
    return _emit({"format_version": schemas.FORMAT_VERSION, "fusion": fusion_to_doc(fm)})


def serialize_model(model: AvailabilityModel, distributions: dict | None = None) -> str:
    distributions = distributions or {}
    shared = set(distributions.values())
    doc: dict = {
        "format_version": schemas.FORMAT_VERSION,
        "name": model.name,
        "mission": model.mission,
        "n_systems": model.n_systems,
    }
    common = None
    if len(shared) == 1 and len(distributions) == len(model.devices):
        common = next(iter(shared))
        doc["reliability_dist"] = _dist_doc(common)
    devices = []
    for d in sorted(model.devices, key=lambda d: d.id):
        item = {"id": d.id, "reliability": float(d.reliability), "redundancy": d.redundancy, "level": d.level}
        if d.id in distributions and common is None:
            item["reliability_dist"] = _dist_doc(distributions[d.id])
        devices.append(item)
    doc["devices"] = devices
    doc["capabilities"] = [
        {"id": c.id, "requires": list(c.requires), "combinator": c.combinator, "level": c.level}
        for c in sorted(model.capabilities, key=lambda c: c.id)
    ]
    return _emit(doc)
