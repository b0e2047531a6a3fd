"""Exception types shared across the package."""


class SinhGordonError(Exception):
    """Base class for all package errors."""


class OutOfRangeGamma(SinhGordonError):
    """Coupling gamma outside the open interval (0, 2)."""


class NonPositive(SinhGordonError):
    """A parameter that must be strictly positive is not."""


class EmptyGrid(SinhGordonError):
    """Time grid with zero steps."""


class IndexOutOfRange(SinhGordonError):
    """Time index or mode index outside the sampled range."""


class NegativeTime(SinhGordonError):
    """Negative time passed where t >= 0 is required."""


class CoincidentPoints(SinhGordonError):
    """Covariance kernel requested at a log-divergent coincident pair."""


class EpsilonGridMismatch(SinhGordonError):
    """Circle-average radius is not an integer multiple of the grid step."""


class RegionOutsideGrid(SinhGordonError):
    """Integration region not contained in the sampled time span."""


class EmptyRegion(SinhGordonError):
    """Region with zero area."""


class IncompatibleGrids(SinhGordonError):
    """Region cannot be represented at both scales of a scaling check."""


class NonPositiveTime(SinhGordonError):
    """Propagator time must be strictly positive."""


class TailTolNotMet(SinhGordonError):
    """Mode truncation too coarse for the requested tail tolerance."""


class GridSpanMismatch(SinhGordonError):
    """Time grid does not span the interval required by the estimator."""


class DegenerateFit(SinhGordonError):
    """Fit input collinear, constant, or with too few points."""


class SignalLost(SinhGordonError):
    """Covariances consistent with zero; no decay rate can be fitted."""


class InadmissibleInsertions(SinhGordonError):
    """Insertion set with a weight at or beyond the admissibility bound."""


class InadmissibleAlpha(SinhGordonError):
    """Single vertex weight outside (-Q, Q)."""


class WindowOutsideCylinder(SinhGordonError):
    """Observable window or insertion outside the finite cylinder."""


class QuadratureFailure(SinhGordonError):
    """Requested quadrature tolerance could not be certified."""


class FingerprintMismatch(SinhGordonError):
    """Attempt to merge estimates produced under different parameters."""


class ConfigError(SinhGordonError):
    """Malformed or invalid run configuration."""
