"""Schema-driven orchestration and evaluation harness for LLM-based
task-oriented dialog systems."""

from .calls import ApiCall, ParamTriple, canonicalize, extract_api_call, serialize
from .metrics import EvalReport, aggregate, diversity, score_call
from .schema import DomainSchema, SchemaRegistry, build_registry, load_schema, resolve_intent
from .session import SearchProvider, SessionOptions, run_session
from .simulator import UserGoal, next_user_turn
from .transcript import DialogTranscript, Turn
from .validator import ValidationVerdict, feedback_message, validate

__version__ = "0.1.0"

__all__ = [
    "ApiCall", "ParamTriple", "canonicalize", "extract_api_call", "serialize",
    "EvalReport", "aggregate", "diversity", "score_call",
    "DomainSchema", "SchemaRegistry", "build_registry", "load_schema",
    "resolve_intent", "SearchProvider", "SessionOptions", "run_session",
    "UserGoal", "next_user_turn", "DialogTranscript", "Turn",
    "ValidationVerdict", "feedback_message", "validate", "__version__",
]
