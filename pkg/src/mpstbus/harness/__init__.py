"""Scenario language, executor, built-in scenarios, fuzzer and CLI."""
from .dsl import Op, Scenario, SessionDecl, ThreadScript, parse_scenario
from .executor import Report, run
from .scenarios import builtin
