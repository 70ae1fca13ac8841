"""Desk-scale list-wise RL recommendation lab.

Pipeline: session logs (`data`) -> item embeddings (`embed`) -> offline
interaction simulator (`sim`) -> actor-critic agent (`agent`, `net`) ->
metrics and protocol (`evaluation`) -> orchestration (`cli`). The hot
greedy-scoring kernel lives in `kernels`, compiled when available.
"""

from .config import Config

__all__ = ["Config"]
__version__ = "0.1.0"
