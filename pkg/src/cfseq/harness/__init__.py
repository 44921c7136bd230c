"""Experiment pipeline and CLI."""

from .config import ConfigError, RunConfig, load_config, parse_config
from .pipeline import MethodSummary, ResultsTable, run_pipeline, summarize
from .report import ReportError, report

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "MethodSummary",
           "ResultsTable", "run_pipeline", "summarize", "ReportError", "report"]
