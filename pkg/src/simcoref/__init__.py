"""Span-ranking coreference resolution with a pluggable token encoder."""

__version__ = "0.1.0"
