"""Earnings-call analysis pipeline.

Subpackages cover price-derived labels, transcript ingestion and
tokenization, lexicon sentiment scoring, graph-of-words construction, a
gated graph network classifier with document-embedding features, baseline
classifiers, analyst-recommendation variables, and fixed-effects logistic
regressions with BIC model selection. The ``ecpipe`` command drives
everything over file-based inputs.
"""

__version__ = "0.1.0"
