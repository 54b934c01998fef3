"""Model-language frontend: parser, validator, pretty-printer."""

from .ast import Program
from .lexer import DslError
from .parser import parse_program
from .pretty import format_program
from .validate import Model, validate

__all__ = ["Program", "DslError", "parse_program", "format_program", "Model", "validate"]


def load_model(source: str, source_name: str = "<string>") -> Model:
    """Parse and validate model source in one step."""
    return validate(parse_program(source, source_name))
