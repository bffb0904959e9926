"""Block-permuted sparse JL sketches with a tiled, deterministic CPU apply."""

__version__ = "0.1.0"

from .layout import BlockLayout, IntraMode, Precision, SketchParams, make_layout
from .wiring import AffineMap, Wiring, iterated_wiring, sample_uniform_wiring, validate_full_cycle
from .operator import (SketchOperator, apply_blockrow, apply_sliced, apply_tiled, build_operator,
                       materialize)

__all__ = [
    "BlockLayout", "IntraMode", "Precision", "SketchParams", "make_layout",
    "AffineMap", "Wiring", "iterated_wiring", "sample_uniform_wiring", "validate_full_cycle",
    "SketchOperator", "apply_blockrow", "apply_sliced", "apply_tiled", "build_operator",
    "materialize", "__version__",
]
