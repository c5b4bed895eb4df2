"""Desk-scale video-guided machine translation toolkit.

Subpackages cover the full experimental loop: building a parallel corpus from
timed bilingual subtitles (``corpus``), quality-estimation filtering
(``scoring``), corpus diversity profiling (``diversity``), terminology-targeted
evaluation metrics (``metrics``), and a video-guided Transformer trained with a
cross-modal contrastive objective (``model``).  ``cli`` ties everything into a
single command-line entry point.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, VmtError

__all__ = ["ConfigError", "DataError", "VmtError", "__version__"]
