"""Exception types shared across panelflow."""


class PanelflowError(Exception):
    """Base class for all panelflow errors."""


class ConfigurationError(PanelflowError, ValueError):
    """Invalid grid, model or scenario configuration."""


class NumericError(PanelflowError, RuntimeError):
    """A linear solve or iteration failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")
        self.residual = residual
