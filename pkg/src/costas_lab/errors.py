"""Exception types shared across the package."""


class CostasLabError(Exception):
    """Base class for all package errors."""


class ParameterError(CostasLabError, ValueError):
    """A constructor or config value is out of its documented range."""


class LayoutError(CostasLabError, ValueError):
    """A state vector does not match the layout required by the model kind."""


class ConfigError(CostasLabError, ValueError):
    """A run configuration is malformed; `key` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


class IntegrationError(CostasLabError, RuntimeError):
    """Base class for integration failures."""


class DivergenceError(IntegrationError):
    """State became non-finite; `last_good_time` is the last finite sample."""

    def __init__(self, last_good_time):
        super().__init__(f"state became non-finite after t={last_good_time:.6g} s")
        self.last_good_time = last_good_time


class StepUnderflowError(IntegrationError):
    """Adaptive step collapsed below 1e-15 * t_end (stiffness failure)."""

    def __init__(self, time):
        super().__init__(f"adaptive step underflow at t={time:.6g} s")
        self.time = time


class InsufficientDataError(CostasLabError, ValueError):
    """A trajectory is too short for the requested analysis."""
