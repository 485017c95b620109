"""Phenotype knowledge graph, retrieval and diagnosis-benchmark toolkit for rare diseases."""

__version__ = "0.1.0"
