"""Exception types raised across the package."""


class LiquidSimError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(LiquidSimError, ValueError):
    pass


class ConvexityError(InvalidParameterError):
    """Raised when the adjusted temporary impact slope is not positive."""


class InvalidTrajectoryError(LiquidSimError, ValueError):
    pass


class InvalidScenarioError(LiquidSimError, ValueError):
    pass


class ConstructionError(LiquidSimError, ValueError):
    pass


class EpisodeFinishedError(LiquidSimError, RuntimeError):
    pass


class InvalidActionError(LiquidSimError, ValueError):
    pass


class IncompleteEpisodeError(LiquidSimError, RuntimeError):
    pass


class UnknownAgentError(LiquidSimError, KeyError):
    pass


class UnsupportedConfigurationError(LiquidSimError, ValueError):
    pass


class ShapeError(LiquidSimError, ValueError):
    pass


class TrainingDivergenceError(LiquidSimError, FloatingPointError):
    pass


class ConfigError(LiquidSimError, ValueError):
    """Invalid experiment configuration; ``key`` holds the dotted path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
