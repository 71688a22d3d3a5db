class InvalidParameterError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


class BlowupError(RuntimeError):
    """Raised when an integrator produces a non-finite state."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state after step {step}")


class DegenerateSampleError(ValueError):
    pass


class ConfigError(ValueError):
    """Configuration problem; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
