"""Few-shot keyword spotting toolkit.

Pipeline: seeded audio augmentation expands a handful of keyword
recordings into an eight-subclass corpus, MFCC features feed a tiny
1D-convolutional classifier selected by constrained random search on
parent-class F1, a sliding-window detector triggers on summed keyword
probability, and the chosen model exports to a compact checksummed blob
for embedded runtimes.
"""

__version__ = "0.1.0"
