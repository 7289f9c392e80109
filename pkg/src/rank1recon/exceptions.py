"""Exception hierarchy shared by all modules."""


class Rank1ReconError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(Rank1ReconError, ValueError):
    """Array shapes or lengths are inconsistent with the embedding geometry."""


class ParameterError(Rank1ReconError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DegenerateModelError(Rank1ReconError):
    """The rank-1 model has no support on the observed samples.

    Raised by the scale update when the reconstruction with unit scale is
    identically zero on the observation set; the restart that produced it
    cannot continue.
    """


class SolverError(Rank1ReconError):
    """A linear solve broke down (for example, a singular operator)."""


class CGConvergenceWarning(RuntimeWarning):
    """Conjugate gradient stopped at its iteration cap before reaching tolerance."""
