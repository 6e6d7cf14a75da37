"""cnrank: tournament-based evaluation of counter-narrative generators.

Pairwise "A vs B" tournaments adjudicated by an LLM judge or human
annotators, traditional text metrics, and agreement statistics between
all ranking methods.
"""

__version__ = "0.1.0"
