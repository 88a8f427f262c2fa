"""Toolkit for auditing search-engine query suggestions.

Collects autocomplete suggestions for a set of search subjects, clusters
them by word-embedding similarity, regresses per-subject topic
distributions on subject metadata to surface systematic biases, and
measures long-term ranking stability with rank-biased overlap.
"""

__version__ = "0.1.0"
