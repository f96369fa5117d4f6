"""Exception types shared across the package."""


class SplitShieldError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SplitShieldError):
    """Tensor/layer shape mismatch. Carries the offending layer index when known."""

    def __init__(self, message: str, layer: int | None = None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer


class NonFiniteError(SplitShieldError):
    """A forward activation, gradient, or objective stopped being finite."""


class LinkDownError(SplitShieldError):
    """Transmission requested over a link with non-positive rate."""


class NoInformativeFiltersError(SplitShieldError):
    """Every filter at the split layer has rank zero; no budget can be allocated."""


class ModelSpecError(SplitShieldError):
    """Invalid model specification file."""


class ScenarioError(SplitShieldError):
    """Invalid scenario configuration. Carries the config path of the bad field."""

    def __init__(self, message: str, field: str | None = None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
