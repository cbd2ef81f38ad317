"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(ValueError):
    """A structural precondition was violated (lengths, weights, schedules)."""


class ConstructionError(ValueError):
    """A density spec cannot be turned into a valid handle."""


class DegenerateInputError(ValueError):
    """Inputs make an identity or reparameterization numerically meaningless."""


class CapabilityError(RuntimeError):
    """The operation needs a capability (sampler, normalization) the handle lacks."""


class RoutingError(ValueError):
    """alpha = +/-1 must go through kl_unnormalized, not alpha_divergence."""


class MassCaptureError(ValueError):
    """The quadrature grid does not cover the effective support of a density."""


class TrajectoryDivergedError(RuntimeError):
    """A leapfrog trajectory hit a non-finite gradient or state."""


class NumericalFailureError(RuntimeError):
    """Too many chains went invalid; the run result cannot be trusted."""


class ConfigError(ValueError):
    """An experiment config failed validation; the message names the field."""
