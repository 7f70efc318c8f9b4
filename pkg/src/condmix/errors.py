"""Exception hierarchy shared by every module of the package."""


class CondMixError(Exception):
    """Base class for all package errors."""


class DomainError(CondMixError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class SingularError(CondMixError):
    """A matrix factorisation met a (possibly) zero pivot column."""


class InitError(CondMixError):
    """A segment could not be initialised (degenerate endpoints)."""


class StabilityError(CondMixError):
    """Enclosure widths grew past the configured stability threshold."""


class TransversalityError(StabilityError):
    """The rotated singular line became too steep to cut reliably."""


class BranchAmbiguityError(CondMixError):
    """An enclosure straddles the singular line and no branch can be certified."""


class OverlapError(CondMixError):
    """The uniform draw landed inside the cut-parameter enclosure."""


class EscapeError(CondMixError):
    """An orbit or segment left the attractor bounding box."""


class EmptyEstimate(CondMixError):
    """A ratio estimator was asked for a value with zero total weight."""


class FitError(CondMixError):
    """Too few usable points for a regression."""


class EmptyError(CondMixError):
    """A grid cover without occupied cells was passed to a distance routine."""


class DegeneratePosteriorError(CondMixError):
    """Every particle received zero posterior weight."""


class ConfigError(CondMixError):
    """An experiment configuration failed validation."""
