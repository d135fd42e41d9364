"""Exception types shared across the package."""


class FoamlabError(Exception):
    """Base class for package-specific errors."""


class DomainError(FoamlabError, ValueError):
    """An argument lies outside an operation's documented domain."""


class SamplingBudgetError(FoamlabError, RuntimeError):
    """The shared-stream sampler exhausted its round budget.

    This is always raised rather than silently falling back to some other
    selection rule: a fallback would break the coupling guarantees that the
    whole construction rests on.
    """


class CalibrationError(FoamlabError, RuntimeError):
    """A calibration run did not reach its required precision."""


class StateSpaceError(FoamlabError, ValueError):
    """Exact enumeration was requested for a state space too large to walk."""
