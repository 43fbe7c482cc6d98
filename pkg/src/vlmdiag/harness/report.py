"""JSON schemas for report files and a plain-text rendering of them."""

from __future__ import annotations

import jsonschema

_num = {"type": ["number", "null"]}
_source = {
    "type": "object",
    "required": ["path", "sha256", "config_hash", "seed", "policy_tag"],
    "properties": {
        "path": {"type": ["string", "null"]},
        "sha256": {"type": ["string", "null"]},
        "config_hash": {"type": ["string", "null"]},
        "seed": {"type": ["integer", "null"]},
        "policy_tag": {"type": ["string", "null"]},
    },
}
_malformed = {
    "type": "array",
    "items": {"type": "object", "required": ["line", "message"], "properties": {"line": {"type": "integer"}}},
}

DIAGNOSE_SCHEMA = {
    "type": "object",
    "required": ["report", "source", "counts", "accuracy", "coupling", "surrogates", "objectives"],
    "properties": {
        "report": {"const": "diagnose"},
        "source": _source,
        "counts": {
            "type": "object",
            "required": ["records", "scored", "errors", "parse_errors", "malformed"],
            "properties": {"malformed": _malformed},
        },
        "accuracy": {
            "type": "object",
            "required": ["end_to_end", "perception", "conditional_reasoning", "counterfactual_reasoning"],
            "additionalProperties": _num,
        },
        "coupling": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["reward_field", "r_reward_perception", "r_reward_reasoning", "sample_count"],
                "properties": {
                    "r_reward_perception": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
                    "r_reward_reasoning": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
                    "sample_count": {"type": "integer", "minimum": 2},
                },
            },
        },
        "surrogates": {
            "type": "array",
            "items": {"type": "object", "required": ["field", "r", "sample_count", "degenerate"]},
        },
        "objectives": {"type": "object"},
    },
}

SWEEP_SCHEMA = {
    "type": "object",
    "required": ["report", "parameter", "source", "rows"],
    "properties": {
        "report": {"const": "sweep"},
        "parameter": {"enum": ["alpha", "lambda"]},
        "source": _source,
        "malformed": _malformed,
        "rows": {"type": "array", "minItems": 1, "items": {"type": "object"}},
    },
}


def validate_report(report: dict) -> None:
    """Raise jsonschema.ValidationError if the report does not match its schema."""
    schema = DIAGNOSE_SCHEMA if report.get("report") == "diagnose" else SWEEP_SCHEMA
    jsonschema.validate(report, schema)


def _pct(x) -> str:
    return "   n/a" if x is None else f"{x:6.1f}"


def _r(x) -> str:
    # correlations are kept in [-1, 1] in the JSON and shown x100 here
    return "  degen" if x is None else f"{100 * x:7.1f}"


def format_report(report: dict) -> str:
    lines = []
    if report["report"] == "diagnose":
        acc = report["accuracy"]
        lines.append("accuracy (%)        a    a_p   a_r~    a_r")
        lines.append(
            f"{'':14}{_pct(acc['end_to_end'])} {_pct(acc['perception'])} "
            f"{_pct(acc['conditional_reasoning'])} {_pct(acc['counterfactual_reasoning'])}"
        )
        lines.append("coupling r x100      vs a_p  vs a_r~")
        for row in report["coupling"]:
            lines.append(f"  {row['reward_field']:<18}{_r(row['r_reward_perception'])} {_r(row['r_reward_reasoning'])}")
        for row in report["surrogates"]:
            lines.append(f"surrogate {row['field']:<20} r x100 {_r(row['r'])}")
        counts = report["counts"]
        lines.append(f"records {counts['records']}  errors {counts['errors']}  malformed {len(counts['malformed'])}")
    else:
        key = report["parameter"]
        for row in report["rows"]:
            lines.append(f"{key}={row[key]}: " + ", ".join(f"{k}={v}" for k, v in row.items() if k != key))
    return "\n".join(lines)
