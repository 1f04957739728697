"""Exception and warning types shared across the package.

Errors fall into three groups: construction-time validation of complexes and
barcodes, argument validation for estimators and checks, and resource guards
for grid/curve jobs.  Soft conditions that should not abort a batch run are
warnings instead (see :class:`NonSubexponentialSchedule`).
"""


class BarlabError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------------------
# filtered complexes / barcodes
# ---------------------------------------------------------------------------

class DuplicateId(BarlabError):
    """Two generators share an id."""


class FiltrationViolation(BarlabError):
    """A boundary entry points from a generator to one of equal or larger action."""


class BoundarySquareNonzero(BarlabError):
    """The boundary operator does not square to zero over F2."""


class AcyclicComplex(BarlabError):
    """An operation that needs at least one infinite bar got a complex without one."""


class DegenerateInput(BarlabError):
    """Input curve or complex is degenerate for the requested operation."""


# ---------------------------------------------------------------------------
# estimator / check arguments
# ---------------------------------------------------------------------------

class NonpositiveEpsilon(BarlabError):
    """A length threshold must be > 0."""


class NonpositiveAlpha(BarlabError):
    """A weight exponent must be > 0."""


class EmptySchedule(BarlabError):
    """A threshold schedule has no entries."""


class EmptyGrid(BarlabError):
    """A threshold grid has no entries."""


class WindowTooSmall(BarlabError):
    """A fit window covers fewer than three iterate indices."""


class ScheduleRangeMismatch(BarlabError):
    """An explicit schedule does not cover the requested iterate range."""


class RangeMismatch(BarlabError):
    """Two series passed to a check do not cover the same iterate range."""


class TooShort(BarlabError):
    """A sequence is too short to classify."""


class NotIncreasing(BarlabError):
    """An index list that must be strictly increasing is not."""


class CoverageGap(BarlabError):
    """A barcode sequence is missing iterates required by a check."""


class NonDyadicGrid(BarlabError):
    """A threshold grid expected to halve at every step does not."""


class ParameterOutOfRange(BarlabError):
    """A model or map parameter lies outside its admissible range."""


class ConfigParse(BarlabError):
    """A run configuration file could not be parsed or fails validation."""


# ---------------------------------------------------------------------------
# dynamics / resource guards
# ---------------------------------------------------------------------------

class NewtonDivergence(BarlabError):
    """A Newton solve left the basin (reported per seed, never fatal in batch)."""


class DegenerateHessian(BarlabError):
    """A second-variation matrix is singular beyond recovery for the solver."""


class BudgetExceeded(BarlabError):
    """A grid job asks for more cells than the configured budget allows."""

    def __init__(self, message: str, max_feasible_n: int | None = None):
        super().__init__(message)
        self.max_feasible_n = max_feasible_n


class BudgetExhausted(BarlabError):
    """A refinement loop ran out of vertex budget (partial results carry a flag)."""


class QuadratureUnstable(BarlabError):
    """Crossing counts oscillate across adjacent quadrature nodes.

    The message carries refinement advice (a larger node count or a finer
    curve tolerance).
    """


# ---------------------------------------------------------------------------
# warnings
# ---------------------------------------------------------------------------

class BarlabWarning(UserWarning):
    """Base class for package warnings."""


class NonSubexponentialSchedule(BarlabWarning):
    """A schedule failed its subexponential-decay test; results are still produced."""
