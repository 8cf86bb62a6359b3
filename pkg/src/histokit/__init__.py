"""histokit: computational-pathology toolkit.

Nucleus instance segmentation from blob/border masks, DICE_1/DICE_2 scoring,
Reinhard stain normalization, patch-dataset generation and probability-map
whole-slide classification. See the ``histokit`` CLI for batch workflows.
"""

__version__ = "0.1.0"

from .imaging import HistokitError

__all__ = ["HistokitError", "__version__"]
