"""Exception types shared across modules."""


class CFLError(ValueError):
    """Time step violates the explicit-scheme stability bound."""


class InstabilityError(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class InsufficientDataError(ValueError):
    """Too few usable points for a regression."""


class ConfigError(ValueError):
    """Run configuration failed validation."""
