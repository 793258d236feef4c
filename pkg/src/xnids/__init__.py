"""Explainable network intrusion detection toolkit.

Ingests NSL-KDD flow records, trains a feed-forward attack/normal
classifier, and explains it with five independently implemented
algorithms: KernelSHAP, LIME, contrastive explanations (pertinent
negatives/positives), prototype selection, and Boolean DNF rules
learned by LP column generation.
"""

__version__ = "0.1.0"

from .errors import DataError, NumericalError

__all__ = ["DataError", "NumericalError", "__version__"]
