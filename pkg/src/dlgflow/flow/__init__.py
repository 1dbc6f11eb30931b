from .model import (
    ALWAYS,
    Condition,
    DialogFlow,
    EntityDef,
    FlowEdge,
    FlowNode,
    OptionValue,
    placeholders,
)
from .parser import flow_to_dict, parse_flow, serialize_flow
from .validate import ValidationIssue, validate_flow

__all__ = [
    "ALWAYS",
    "Condition",
    "DialogFlow",
    "EntityDef",
    "FlowEdge",
    "FlowNode",
    "OptionValue",
    "ValidationIssue",
    "flow_to_dict",
    "parse_flow",
    "placeholders",
    "serialize_flow",
    "validate_flow",
]
