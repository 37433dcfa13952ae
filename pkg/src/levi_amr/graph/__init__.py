"""AMR graph data model, Penman I/O, Levi transformation and linearization."""

from .levi import from_levi, to_levi
from .linearize import OrphanLabelWarning, linearize, restore, traversal_order
from .penman import PenmanError, PenmanRecord, dumps_penman, emit_penman, loads_penman, parse_penman, read_penman
from .types import (
    AmrEdge,
    AmrGraph,
    Concept,
    CyclicGraphWarning,
    Entry,
    GraphError,
    LeviGraph,
    LeviNode,
    MalformedLevi,
    Mode,
    NodeKind,
    NodeSequence,
    isomorphic,
    reverse_label,
    strip_reversal,
)

__all__ = [
    "AmrEdge",
    "AmrGraph",
    "Concept",
    "CyclicGraphWarning",
    "Entry",
    "GraphError",
    "LeviGraph",
    "LeviNode",
    "MalformedLevi",
    "Mode",
    "NodeKind",
    "NodeSequence",
    "OrphanLabelWarning",
    "PenmanError",
    "PenmanRecord",
    "dumps_penman",
    "emit_penman",
    "from_levi",
    "isomorphic",
    "linearize",
    "loads_penman",
    "parse_penman",
    "read_penman",
    "restore",
    "reverse_label",
    "strip_reversal",
    "to_levi",
    "traversal_order",
]
