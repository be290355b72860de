"""Far-field speaker verification toolkit.

Mines noise from far-field recordings by threshold masking, augments clean
enrollment audio at controlled SNR, extracts and averages speaker
embeddings, scores trials with cosine dissimilarity, and reports EER and
minDCF. See the `farvox` CLI for the pipeline stages.
"""

__version__ = "0.1.0"
