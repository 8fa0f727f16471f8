"""Sentence-level completeness checking of data processing agreements.

A DPA is complete with respect to a provision catalog when every provision
has at least one sentence that satisfies it. The package covers the whole
path from raw agreement text to a completeness report: preprocessing,
sentence embedding, imbalance handling, classifier training, few-shot
adaptation, checking, and evaluation.
"""

__version__ = "0.1.0"
