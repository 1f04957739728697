"""barlab: action-filtered persistence and barcode-growth experiments.

The package bundles four layers that the command line ties together:

* :mod:`barlab.persistence` — filtered complexes over F2, barcodes, and
  bar statistics (counts above a threshold, depth, total length, spectral
  edges).
* :mod:`barlab.entropy` — growth-rate estimators over barcode sequences,
  threshold schedules, and the inequality checkers used by the reports.
* :mod:`barlab.twist` / :mod:`barlab.gridfilt` — a kicked twist map on
  the torus: periodic-orbit search, curve iteration, and sublevel-filtered
  cube complexes of the discrete action.
* :mod:`barlab.crofton` / :mod:`barlab.synthetic` — translate-family
  crossing integrals and closed-form barcode models for calibration.

Hot kernels are JIT-compiled when ``numba`` is available; set
``BARLAB_DISABLE_NUMBA=1`` to force the pure-NumPy fallback.
"""

from ._kernels import backend_name
from .entropy import (
    BarcodeSequence,
    Schedule,
    barcode_entropy,
    epsilon_entropy,
    sequential_entropy,
)
from .persistence import (
    Barcode,
    FilteredComplex,
    Generator,
    SpectralPair,
    b_eps,
    barcode,
    boundary_depth,
    build_complex,
    spectral_edges,
    total_bar_length,
)
from .twist import TwistMapSpec

__version__ = "0.1.0"

__all__ = [
    "Barcode",
    "BarcodeSequence",
    "FilteredComplex",
    "Generator",
    "Schedule",
    "SpectralPair",
    "TwistMapSpec",
    "b_eps",
    "backend_name",
    "barcode",
    "barcode_entropy",
    "boundary_depth",
    "build_complex",
    "epsilon_entropy",
    "sequential_entropy",
    "spectral_edges",
    "total_bar_length",
    "__version__",
]
