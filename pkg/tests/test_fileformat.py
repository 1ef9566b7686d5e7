import json
import math
from pathlib import Path

import jsonschema
import pytest
from hypothesis import given, settings

import netgen
from petrisim import casestudy, schemas
from petrisim.fileformat import (
    FormatError,
    format_float,
    load_net,
    parse_document,
    parse_fusion,
    parse_model,
    parse_net,
    parse_sampling,
    serialize_fusion,
    serialize_model,
    serialize_net,
    serialize_sampling,
)
from petrisim.net import Duration, Net, Place, Transition, validate_net

MINIMAL = """\
format_version: 1
name: tiny
places:
  - id: p
    tokens: 1
transitions:
  - id: t
    inputs: {p: 1}
"""


def diag(text):
    with pytest.raises(FormatError) as info:
        parse_net(text, "doc.pnet")
    return info.value.diagnostics


def test_minimal_document():
    net = parse_net(MINIMAL)
    assert net.place_map["p"].tokens == 1 and dict(net.transition_map["t"].inputs) == {"p": 1}
    assert validate_net(net) == []
    assert net.transition_map["t"].duration == Duration.constant(0.0)


def test_negative_weight_is_located():
    (d,) = diag(MINIMAL.replace("{p: 1}", "{p: -1}"))
    assert (d.line, d.column) == (8, 17)
    assert str(d).startswith("doc.pnet:8:17:")


def test_unknown_field_is_located_at_its_key():
    (d,) = diag(MINIMAL + "    colour: red\n")
    assert (d.line, d.column) == (9, 5) and "colour" in d.message


def test_unknown_top_level_field():
    (d,) = diag("bogus: 1\n" + MINIMAL)
    assert (d.line, d.column) == (1, 1)


def test_semantic_errors_are_located():
    (d,) = diag(MINIMAL.replace("{p: 1}", "{q: 1}"))
    assert d.line == 8 and "unresolved place reference" in d.message


def test_syntax_error():
    (d,) = diag("format_version: 1\nplaces: [\n")
    assert d.line >= 2 and d.column >= 1


def test_duplicate_keys_are_rejected():
    (d,) = diag(MINIMAL + "name: again\n")
    assert d.line == 9 and "duplicate" in d.message


def test_version_gate():
    (d,) = diag(MINIMAL.replace("format_version: 1", "format_version: 2"))
    assert d.line == 1 and "format_version" in d.message
    assert diag(MINIMAL.replace("format_version: 1\n", ""))


def test_several_diagnostics_are_sorted():
    text = MINIMAL.replace("tokens: 1", "tokens: -1").replace("{p: 1}", "{p: 0}")
    ds = diag(text)
    assert len(ds) == 2 and [d.line for d in ds] == sorted(d.line for d in ds)


def test_shipped_mission_file():
    net = load_net(casestudy.shipped_path("mission.pnet"))
    assert net.place_map["boxes"].tokens == 3
    assert net.goal.deadline == 60.0
    assert net.transition_map["stack"].name == "Stack Box (t2)"


@settings(max_examples=300, deadline=None)
@given(netgen.documents())
def test_round_trip(net):
    text = serialize_net(net)
    back = parse_net(text)
    assert back.canonical() == net.canonical()
    assert serialize_net(back) == text


def test_declaration_order_does_not_change_text():
    a = Net("n", [Place("b"), Place("a")], [], [Transition("y", inputs={"b": 1, "a": 1}), Transition("x")])
    b = Net("n", [Place("a"), Place("b")], [], [Transition("x"), Transition("y", inputs={"a": 1, "b": 1})])
    assert serialize_net(a) == serialize_net(b)


def test_defaults_are_omitted():
    text = serialize_net(parse_net(MINIMAL))
    assert "max_instances:" not in text and " priority:" not in text and "outputs:" not in text
    # the conflict policy and durations are always spelled out
    assert "policy: fixed_priority" in text and "constant: 0.0" in text


@pytest.mark.parametrize(
    "x, s",
    [(1.0, "1.0"), (0.1, "0.1"), (123456789012.0, "1.23456789e+11"), (1e-7, "1.0e-07"), (-2.5, "-2.5"), (math.inf, ".inf")],
)
def test_float_format(x, s):
    assert format_float(x) == s


def test_unbounded_maximum_round_trips():
    text = MINIMAL + "resources:\n  - id: E\n    initial: 5\n    max: null\n"
    net = parse_net(text)
    assert math.isinf(net.resource_map["E"].max)
    assert parse_net(serialize_net(net)).resource_map["E"].max == math.inf


def test_embedded_sampling_and_fusion():
    text = MINIMAL + (
        "sampling:\n  - target: {tokens: p}\n    dist: {integer_uniform: [1, 4]}\n    name: pcount\n"
        "fusion:\n  places:\n    - canonical: p\n      members: {tiny: p}\n"
    )
    doc = parse_document(text)
    assert doc.sampling.labels == ["pcount"]
    assert doc.fusion.places[0].members == (("tiny", "p"),)
    again = parse_document(serialize_net(doc.net, doc.sampling, doc.fusion))
    assert again.sampling == doc.sampling and again.fusion == doc.fusion


def test_sampling_target_must_be_one_kind():
    bad = "format_version: 1\nsampling:\n  - target: {tokens: p, level: E}\n    dist: {constant: 1}\n"
    with pytest.raises(FormatError) as info:
        parse_sampling(bad)
    assert info.value.diagnostics[0].line == 3


@pytest.mark.parametrize("name", sorted(casestudy.build_case_models().files))
def test_case_files_round_trip(name):
    text = casestudy.shipped_path(name).read_text(encoding="utf-8")
    if name.endswith(".pnet"):
        assert serialize_net(parse_net(text)) == text
    elif name.endswith(".sampling"):
        assert serialize_sampling(parse_sampling(text)) == text
    elif name.endswith(".map"):
        assert serialize_fusion(parse_fusion(text)) == text
    else:
        doc = parse_model(text)
        assert serialize_model(doc.model, doc.distributions) == text


def test_model_errors_are_reported():
    text = casestudy.shipped_path("capability.rel").read_text().replace("mission: box_stacking", "mission: nothing")
    with pytest.raises(FormatError, match="not a capability"):
        parse_model(text)


def test_published_schemas_are_current():
    root = Path(__file__).resolve().parents[1] / "docs" / "schema"
    for kind, schema in schemas.SCHEMAS.items():
        jsonschema.Draft202012Validator.check_schema(schema)
        assert json.loads((root / f"{kind}.schema.json").read_text()) == schema
