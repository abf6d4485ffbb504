"""Bundled JSON schemas for the CLI's machine-readable outputs.

``validate(obj, name)`` checks an output dict against the shipped
schema.  When the ``jsonschema`` package is importable it does the
checking; otherwise a small built-in walker enforces the same core
(type / required / properties / items / enum), which keeps the
runtime dependency optional.
"""

from __future__ import annotations

import json
from importlib import resources

from ..errors import DataError

__all__ = ["SCHEMA_NAMES", "load_schema", "validate"]

SCHEMA_NAMES = (
    "cost_report",
    "sweep",
    "simulate_summary",
    "cascade_report",
    "widen_report",
)

_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
    "null": type(None),
}


def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise DataError(f"no schema {name!r}; shipped: {SCHEMA_NAMES}")
    text = resources.files(__package__).joinpath(f"{name}.json").read_text()
    return json.loads(text)


def _check(obj, schema, path: str):
    t = schema.get("type")
    if t is not None:
        types = t if isinstance(t, list) else [t]
        ok = False
        for tn in types:
            if tn == "number":
                ok = ok or (isinstance(obj, (int, float)) and not isinstance(obj, bool))
            elif tn == "integer":
                ok = ok or (isinstance(obj, int) and not isinstance(obj, bool))
            else:
                ok = ok or isinstance(obj, _TYPES[tn])
        if not ok:
            raise DataError(f"{path}: expected {t}, got {type(obj).__name__}")
    if "enum" in schema and obj not in schema["enum"]:
        raise DataError(f"{path}: {obj!r} not in {schema['enum']}")
    if isinstance(obj, dict):
        for req in schema.get("required", ()):
            if req not in obj:
                raise DataError(f"{path}: missing required key {req!r}")
        props = schema.get("properties", {})
        for key, val in obj.items():
            if key in props:
                _check(val, props[key], f"{path}.{key}")
            elif schema.get("additionalProperties") is False:
                raise DataError(f"{path}: unexpected key {key!r}")
    if isinstance(obj, list) and "items" in schema:
        for i, val in enumerate(obj):
            _check(val, schema["items"], f"{path}[{i}]")


def validate(obj: dict, name: str) -> None:
    """Raise :class:`DataError` if ``obj`` does not match schema ``name``."""
    schema = load_schema(name)
    try:
        import jsonschema
    except ImportError:
        _check(obj, schema, "$")
        return
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as e:
        raise DataError(f"output fails schema {name}: {e.message}") from e
