"""Candidate selection on metric spaces: mechanisms, exact evaluation and audits."""
__version__ = "0.1.0"
