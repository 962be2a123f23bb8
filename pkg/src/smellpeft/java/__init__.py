"""Java source analysis: lexing, method extraction, metrics and smell heuristics."""

from smellpeft.java.detect import (
    Provenance,
    SmellKind,
    SmellLabel,
    SmellThresholds,
    detect_smells,
    detection_records,
    scan_paths,
)
from smellpeft.java.lexer import JavaToken, LexError, TokenKind, tokenize_java
from smellpeft.java.methods import ExtractionError, MethodUnit, extract_methods
from smellpeft.java.metrics import ConditionStat, condition_clauses, cyclomatic_complexity
from smellpeft.java.subtokens import count_tokens, pipeline_tokens

__all__ = [
    "ConditionStat",
    "ExtractionError",
    "JavaToken",
    "LexError",
    "MethodUnit",
    "Provenance",
    "SmellKind",
    "SmellLabel",
    "SmellThresholds",
    "TokenKind",
    "condition_clauses",
    "count_tokens",
    "cyclomatic_complexity",
    "detect_smells",
    "detection_records",
    "extract_methods",
    "pipeline_tokens",
    "scan_paths",
    "tokenize_java",
]
