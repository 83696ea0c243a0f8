"""Versioned JSON report envelope and schema."""

from __future__ import annotations

import datetime as _dt
import json
import math
from pathlib import Path

SCHEMA_VERSION = "chiralbounds-report/1.0"

_BOUND_REPORT = {
    "type": "object",
    "required": ["inequality", "parameters", "constant", "tolerance", "margins", "exact_checks", "passed"],
    "properties": {
        "inequality": {"type": "string"},
        "parameters": {"type": "object"},
        "constant": {"type": ["number", "null"]},
        "tolerance": {"type": "number"},
        "margins": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["level", "margin"],
                "properties": {"level": {"type": "integer"}, "margin": {"type": "number"}},
            },
        },
        "exact_checks": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "diagnostics": {"type": "object"},
        "passed": {"type": "boolean"},
    },
}

_CHECK = {
    "type": "object",
    "required": ["name", "passed", "theorem_backed"],
    "properties": {
        "name": {"type": "string"},
        "passed": {"type": "boolean"},
        "theorem_backed": {"type": "boolean"},
        "detail": {},
    },
}

_RATIONAL = {"type": "string", "pattern": r"^-?[0-9]+/[0-9]+$"}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "https://example.invalid/chiralbounds/report.schema.json",
    "title": "chiralbounds suite report",
    "version": SCHEMA_VERSION,
    "type": "object",
    "required": ["schema_version", "suite", "generated_at", "config", "passed", "checks", "reports", "data"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "suite": {"type": "string"},
        "generated_at": {"type": "string"},
        "config": {"type": "object", "additionalProperties": {"type": ["string", "number", "array", "null"]}},
        "passed": {"type": "boolean"},
        "checks": {"type": "array", "items": {"$ref": "#/$defs/check"}},
        "reports": {"type": "array", "items": {"$ref": "#/$defs/bound_report"}},
        "data": {"type": "object"},
    },
    "$defs": {
        "check": _CHECK,
        "bound_report": _BOUND_REPORT,
        "rational": _RATIONAL,
        "summary": {
            "type": "object",
            "required": ["schema_version", "generated_at", "suites", "passed"],
            "properties": {
                "schema_version": {"const": SCHEMA_VERSION},
                "generated_at": {"type": "string"},
                "suites": {"type": "object", "additionalProperties": {"type": "boolean"}},
                "passed": {"type": "boolean"},
            },
        },
    },
}

SUMMARY_SCHEMA = dict(SCHEMA["$defs"]["summary"], **{"$schema": SCHEMA["$schema"]})


def timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def envelope(suite: str, config: dict, checks: list[dict], reports: list[dict], data: dict) -> dict:
    passed = all(c["passed"] for c in checks if c["theorem_backed"])
    return {
        "schema_version": SCHEMA_VERSION,
        "suite": suite,
        "generated_at": timestamp(),
        "config": config,
        "passed": passed,
        "checks": checks,
        "reports": reports,
        "data": data,
    }


def check(name: str, passed: bool, theorem_backed: bool = True, detail=None) -> dict:
    out = {"name": name, "passed": bool(passed), "theorem_backed": theorem_backed}
    if detail is not None:
        out["detail"] = detail
    return out


def clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(clean(doc), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def write(path: Path, doc: dict) -> None:
    path.write_text(dumps(doc), encoding="utf-8")


def validate(doc: dict, summary: bool = False) -> None:
    import jsonschema

    jsonschema.validate(doc, SUMMARY_SCHEMA if summary else SCHEMA)
