"""Respiratory audio analysis: dataset ingest, breathing segmentation,
multi-scale CNN classification, a questionnaire knowledge base and
counterfactual explanations over it."""

__version__ = "0.1.0"
