"""JSON Schemas for the document formats (net, sampling, fusion map, availability model).

The same dictionaries are published under ``docs/schema`` by
``petrisim schema --out docs/schema``.
"""
from __future__ import annotations

FORMAT_VERSION = 1
DRAFT = "https://json-schema.org/draft/2020-12/schema"

_number = {"type": "number"}
_pair = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}
_int_pair = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}

DEFS = {
    "id": {"type": "string", "minLength": 1},
    "text": {"type": "string"},
    "metadata": {"type": "object", "additionalProperties": {"type": "string"}},
    "count": {"type": "integer", "minimum": 0},
    "weight": {"type": "integer", "minimum": 1},
    "op": {"enum": [">=", "=", "<="]},
    "place": {
        "type": "object",
        "additionalProperties": False,
        "required": ["id"],
        "properties": {
            "id": {"$ref": "#/$defs/id"},
            "name": {"$ref": "#/$defs/text"},
            "tokens": {"$ref": "#/$defs/count"},
            "metadata": {"$ref": "#/$defs/metadata"},
        },
    },
    "resource": {
        "type": "object",
        "additionalProperties": False,
        "required": ["id"],
        "properties": {
            "id": {"$ref": "#/$defs/id"},
            "name": {"$ref": "#/$defs/text"},
            "initial": _number,
            "min": {"type": "number", "minimum": 0},
            "max": {"type": ["number", "null"]},
            "metadata": {"$ref": "#/$defs/metadata"},
        },
    },
    "duration": {
        "type": "object",
        "minProperties": 1,
        "maxProperties": 1,
        "additionalProperties": False,
        "properties": {"constant": _number, "normal": _pair, "uniform": _pair},
    },
    "arcs": {"type": "object", "additionalProperties": {"$ref": "#/$defs/weight"}},
    "transition": {
        "type": "object",
        "additionalProperties": False,
        "required": ["id"],
        "properties": {
            "id": {"$ref": "#/$defs/id"},
            "name": {"$ref": "#/$defs/text"},
            "duration": {"$ref": "#/$defs/duration"},
            "inputs": {"$ref": "#/$defs/arcs"},
            "outputs": {"$ref": "#/$defs/arcs"},
            "inhibitors": {"type": "array", "items": {"$ref": "#/$defs/id"}},
            "rates": {"type": "object", "additionalProperties": _number},
            "priority": {"$ref": "#/$defs/count"},
            "max_instances": {"type": ["integer", "null"], "minimum": 1},
            "metadata": {"$ref": "#/$defs/metadata"},
        },
    },
    "goal": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "tokens": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["place", "op", "count"],
                    "properties": {
                        "place": {"$ref": "#/$defs/id"},
                        "op": {"$ref": "#/$defs/op"},
                        "count": {"$ref": "#/$defs/count"},
                    },
                },
            },
            "resources": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["resource", "op", "level"],
                    "properties": {
                        "resource": {"$ref": "#/$defs/id"},
                        "op": {"$ref": "#/$defs/op"},
                        "level": _number,
                    },
                },
            },
            "deadline": {"type": ["number", "null"], "minimum": 0},
        },
    },
    "dist": {
        "type": "object",
        "minProperties": 1,
        "maxProperties": 1,
        "additionalProperties": False,
        "properties": {
            "constant": _number,
            "uniform": _pair,
            "normal": _pair,
            "integer_uniform": _int_pair,
        },
    },
    "target": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "tokens": {"$ref": "#/$defs/id"},
            "level": {"$ref": "#/$defs/id"},
            "duration": {"$ref": "#/$defs/id"},
            "param": {"enum": ["value", "mean", "sd", "low", "high"]},
            "rate": {"$ref": "#/$defs/id"},
            "resource": {"$ref": "#/$defs/id"},
            "priority": {"$ref": "#/$defs/id"},
            "max_instances": {"$ref": "#/$defs/id"},
        },
        "oneOf": [
            {"required": ["tokens"], "maxProperties": 1},
            {"required": ["level"], "maxProperties": 1},
            {"required": ["duration", "param"], "maxProperties": 2},
            {"required": ["rate", "resource"], "maxProperties": 2},
            {"required": ["priority"], "maxProperties": 1},
            {"required": ["max_instances"], "maxProperties": 1},
        ],
    },
    "sample": {
        "type": "object",
        "additionalProperties": False,
        "required": ["target", "dist"],
        "properties": {
            "name": {"$ref": "#/$defs/id"},
            "target": {"$ref": "#/$defs/target"},
            "dist": {"$ref": "#/$defs/dist"},
        },
    },
    "sampling": {"type": "array", "items": {"$ref": "#/$defs/sample"}},
    "fusion_group": {
        "type": "object",
        "additionalProperties": False,
        "required": ["canonical", "members"],
        "properties": {
            "canonical": {"$ref": "#/$defs/id"},
            "members": {
                "type": "object",
                "minProperties": 1,
                "additionalProperties": {"$ref": "#/$defs/id"},
            },
            "authority": {"$ref": "#/$defs/id"},
        },
    },
    "fusion": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "name": {"$ref": "#/$defs/id"},
            "separator": {"type": "string", "minLength": 1},
            "goal": {"$ref": "#/$defs/id"},
            "policy": {"enum": ["fixed_priority", "uniform_random", "priority_proportional"]},
            "places": {"type": "array", "items": {"$ref": "#/$defs/fusion_group"}},
            "resources": {"type": "array", "items": {"$ref": "#/$defs/fusion_group"}},
        },
    },
}

_version = {"const": FORMAT_VERSION}


def _doc(title: str, properties: dict, required=("format_version",)) -> dict:
    return {
        "$schema": DRAFT,
        "title": title,
        "type": "object",
        "additionalProperties": False,
        "required": list(required),
        "properties": {"format_version": _version, **properties},
        "$defs": DEFS,
    }


NET_SCHEMA = _doc(
    "petrisim net document (.pnet)",
    {
        "name": {"$ref": "#/$defs/id"},
        "policy": {"enum": ["fixed_priority", "uniform_random", "priority_proportional"]},
        "metadata": {"$ref": "#/$defs/metadata"},
        "places": {"type": "array", "items": {"$ref": "#/$defs/place"}},
        "resources": {"type": "array", "items": {"$ref": "#/$defs/resource"}},
        "transitions": {"type": "array", "items": {"$ref": "#/$defs/transition"}},
        "goal": {"$ref": "#/$defs/goal"},
        "sampling": {"$ref": "#/$defs/sampling"},
        "fusion": {"$ref": "#/$defs/fusion"},
    },
)

SAMPLING_SCHEMA = _doc(
    "petrisim sampling document (.sampling)",
    {"sampling": {"$ref": "#/$defs/sampling"}},
    required=("format_version", "sampling"),
)

FUSION_SCHEMA = _doc(
    "petrisim fusion map (.map)",
    {"fusion": {"$ref": "#/$defs/fusion"}},
    required=("format_version", "fusion"),
)

MODEL_SCHEMA = _doc(
    "petrisim availability model (.rel)",
    {
        "name": {"$ref": "#/$defs/id"},
        "mission": {"$ref": "#/$defs/id"},
        "n_systems": {"type": "integer", "minimum": 1},
        "reliability_dist": {"$ref": "#/$defs/dist"},
        "devices": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "reliability"],
                "properties": {
                    "id": {"$ref": "#/$defs/id"},
                    "reliability": {"type": "number", "minimum": 0, "maximum": 1},
                    "redundancy": {"type": "integer", "minimum": 1},
                    "level": {"$ref": "#/$defs/text"},
                    "reliability_dist": {"$ref": "#/$defs/dist"},
                },
            },
        },
        "capabilities": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "requires"],
                "properties": {
                    "id": {"$ref": "#/$defs/id"},
                    "requires": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/id"}},
                    "combinator": {"enum": ["all_of", "any_of"]},
                    "level": {"$ref": "#/$defs/text"},
                },
            },
        },
    },
    required=("format_version", "mission", "devices", "capabilities"),
)

SCHEMAS = {
    "net": NET_SCHEMA,
    "sampling": SAMPLING_SCHEMA,
    "fusion": FUSION_SCHEMA,
    "model": MODEL_SCHEMA,
}
