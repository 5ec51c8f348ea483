"""JSON Schema documents for every JSON artifact the CLI writes."""

from __future__ import annotations

_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}}
_STRING_ARRAY = {"type": "array", "items": {"type": "string"}}
_INT_ARRAY = {"type": "array", "items": {"type": "integer"}}

RULE_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {"type": {"const": "top_s"}, "s": {"type": "integer", "minimum": 1}},
            "required": ["type", "s"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "type": {"const": "threshold"},
                "kappa": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["type", "kappa"],
            "additionalProperties": False,
        },
    ],
}

SELECTION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "selection",
    "type": "object",
    "properties": {
        "selected": _STRING_ARRAY,
        "selected_indices": _INT_ARRAY,
        "scores": _NUMBER_ARRAY,
        "k1": {"type": "integer", "minimum": 1},
        "rule": RULE_SCHEMA,
        "eigenvalues": _NUMBER_ARRAY,
        "warning": {"type": "string"},
    },
    "required": ["selected", "scores", "k1", "rule", "eigenvalues"],
    "additionalProperties": False,
}

TRACE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "screening trace",
    "type": "object",
    "properties": {
        "rounds": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "size": {"type": "integer", "minimum": 1},
                    "kept": _STRING_ARRAY,
                    "kept_indices": _INT_ARRAY,
                },
                "required": ["size", "kept"],
                "additionalProperties": False,
            },
        },
        "final": _STRING_ARRAY,
        "final_indices": _INT_ARRAY,
    },
    "required": ["rounds", "final"],
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "refit model",
    "type": "object",
    "properties": {
        "architecture": {
            "type": "object",
            "properties": {
                "hidden": _INT_ARRAY,
                "activation": {"const": "relu"},
                "n_inputs": {"type": "integer", "minimum": 1},
                "n_features_full": {"type": "integer", "minimum": 1},
            },
            "required": ["hidden", "activation", "n_inputs", "n_features_full"],
        },
        "weights": {"type": "array", "items": {"type": "array", "items": _NUMBER_ARRAY}},
        "biases": {"type": "array", "items": _NUMBER_ARRAY},
        "standardization": {
            "type": "object",
            "properties": {"mean": _NUMBER_ARRAY, "sd": _NUMBER_ARRAY},
            "required": ["mean", "sd"],
        },
        "selected_indices": _INT_ARRAY,
        "selected_ids": _STRING_ARRAY,
        "response_column": {"type": "string"},
        "config": {"type": "object"},
    },
    "required": ["architecture", "weights", "biases", "standardization", "selected_indices", "selected_ids", "config"],
    "additionalProperties": False,
}

TRUTH_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "simulation ground truth",
    "type": "object",
    "properties": {
        "support": _INT_ARRAY,
        "support_ids": _STRING_ARRAY,
        "w1": {"oneOf": [{"type": "null"}, {"type": "array", "items": _NUMBER_ARRAY}]},
        "a": {"oneOf": [{"type": "null"}, _NUMBER_ARRAY]},
        "spec": {"type": "object"},
    },
    "required": ["support", "support_ids", "w1", "a"],
    "additionalProperties": False,
}

EIGENGAP_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "eigengap report",
    "type": "object",
    "properties": {
        "abs_eigenvalues": _NUMBER_ARRAY,
        "gaps": _NUMBER_ARRAY,
        "k": _INT_ARRAY,
        "ratios": _NUMBER_ARRAY,
        "k1_hat": {"type": "integer", "minimum": 1},
        "gamma_reg": {"type": "number"},
        "rule": {"enum": ["ratio-minus-one", "ratio"]},
    },
    "required": ["abs_eigenvalues", "gaps", "k", "ratios", "k1_hat", "gamma_reg", "rule"],
    "additionalProperties": False,
}

BIC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "bic report",
    "type": "object",
    "properties": {
        "candidates": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "s": {"type": "integer", "minimum": 1},
                    "train_mse": {"type": "number"},
                    "bic": {"type": "number"},
                    "selected_indices": _INT_ARRAY,
                },
                "required": ["s", "train_mse", "bic"],
                "additionalProperties": False,
            },
        },
        "s_hat": {"type": "integer", "minimum": 1},
        "lambda_rule": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
    },
    "required": ["candidates", "s_hat", "lambda_rule", "n"],
    "additionalProperties": False,
}

SCHEMAS = {
    "selection": SELECTION_SCHEMA,
    "trace": TRACE_SCHEMA,
    "model": MODEL_SCHEMA,
    "truth": TRUTH_SCHEMA,
    "eigengap": EIGENGAP_SCHEMA,
    "bic": BIC_SCHEMA,
}
