"""Video memorability attention pipeline.

A spatio-temporal transformer memorability predictor with extractable
CLS-token attention, human fixation-density map construction, a saliency
metric suite (AUC-Judd, NSS, CC, KLD, AUC-Percentile), panoptic
stuff/things attention analysis, temporal-attention tooling with a
frame-reversal control, a nearest-neighbor leakage audit, and
experiment-design utilities.
"""

__version__ = "0.1.0"
