"""Exception types shared across the package."""


class ModelError(ValueError):
    """Invalid model parameters, or an operation evaluated outside its domain."""


class ConfigError(ValueError):
    """Malformed or incomplete experiment configuration."""


class GateViolation(RuntimeError):
    """An experiment was requested for a model that fails its analytic gate."""


class EmbeddingError(RuntimeError):
    """Circulant embedding failed to produce a nonnegative spectrum."""


class RefinementError(RuntimeError):
    """Crossing-count refinement did not stabilize within the halving budget."""


class NumericalError(RuntimeError):
    """A quadrature or estimator failed to reach its accuracy contract."""
