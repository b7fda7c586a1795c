"""UniST: a desk-scale unified saliency transformer for video saliency
prediction (VSP) and video salient object detection (VSOD), built on a
minimal numpy autodiff engine so every block is gradient-checkable."""

import os as _os

# Cap kernel parallelism before numpy initializes its BLAS. Only effective
# when this package is imported before numpy elsewhere in the process.
_threads = _os.environ.get("UNIST_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)
del _os, _threads

from . import engine
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DegenerateInputError,
    FormatError,
    MetricUndefinedError,
    NumericError,
    ShapeError,
    UnistError,
    UsageError,
)

__version__ = "0.1.0"
