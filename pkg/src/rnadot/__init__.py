"""RNA dot-plot imaging and family-pair classification.

Converts RNA sequences into base-pairing probability dot-plot images,
composes pairs of sequences into single composite images, builds
family-disjoint same/different classification datasets, and trains a
small from-scratch convolutional classifier on them.
"""

__version__ = "0.1.0"
