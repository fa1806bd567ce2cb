"""Exception hierarchy shared by every module of the package."""


class HybridObserverError(Exception):
    """Base class for all errors raised by :mod:`hybrid_observer`."""


class NumericsError(HybridObserverError):
    """A dense linear-algebra routine failed or got invalid input."""


class ConfigError(HybridObserverError):
    """A scenario configuration is malformed.

    ``field`` names the offending entry (dotted path) when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class AssumptionViolation(HybridObserverError):
    """One of the standing assumptions of the observer does not hold.

    ``assumption`` is a short machine-readable tag such as
    ``"nonzero_channel"``, ``"joint_observability"``,
    ``"strong_connectivity"`` or ``"positive_rate"``.
    """

    def __init__(self, assumption, message):
        self.assumption = assumption
        super().__init__(f"[{assumption}] {message}")


class DesignError(HybridObserverError):
    """Synthesized matrices fail their post-conditions."""
