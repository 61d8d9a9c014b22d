"""Hierarchical emotion-distribution toolkit for prosody control.

Extracts per-segment emotion intensities at utterance, word, and phoneme
level, predicts them from text, renders prosody contours conditioned on
them, and exposes interactive editing over a CLI and a small HTTP service.
"""

from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
