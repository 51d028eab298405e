"""Generative carving toolkit.

Slices bitmap files into known/missing fragment pairs, continues the missing part with
a byte-level predictor, measures how close the continuation is to the truth, and ranks
it against pools of decoy fragments.
"""

__version__ = "0.1.0"
