"""Exception taxonomy shared by all pulsekit modules."""
from __future__ import annotations


class PulsekitError(Exception):
    """Base class for all package errors."""


class ConfigInvalid(PulsekitError):
    """A configuration file or parameter set failed validation.

    Carries the offending field path so callers can report it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SignConditionViolated(PulsekitError):
    """kappa2 - kappa3 - kappa4 >= 0: the background cubic may have several roots."""


class NoFiniteWavenumber(PulsekitError):
    """The critical-wavenumber radicand is not positive."""


class BlowUp(PulsekitError):
    """A spectral coefficient exceeded the blow-up bound during time stepping."""

    def __init__(self, time: float, magnitude: float):
        self.time = time
        self.magnitude = magnitude
        super().__init__(f"solution blew up at t={time:.6g} (max |coeff| = {magnitude:.3e})")


class NoPulse(PulsekitError):
    """The u field has no localized peak that stands above its oscillatory tail."""


class NoConvergence(PulsekitError):
    """Newton iteration failed to reach the residual target."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")


class SingularPhaseCondition(PulsekitError):
    """The phase-condition anchor derivative vanished; the Newton system is rank deficient."""


class ArnoldiBreakdown(PulsekitError):
    """The Arnoldi iteration failed; retry with a fresh random start vector."""


class DeadEnd(PulsekitError):
    """Both continuation parameterizations failed at the minimum step size."""


class FellBack(PulsekitError):
    """Branch switching converged back onto the parent branch."""


class TailTooShort(PulsekitError):
    """Fewer than the required number of resolved tail oscillations."""


class TauOutOfRange(PulsekitError):
    """tau outside (tau_c, 2 tau_c): off-axis equilibria are possible, analysis invalid."""


class BudgetExceeded(PulsekitError):
    """An arclength or time budget ran out before the computation resolved."""


class MissingInput(PulsekitError):
    """An export was asked for data that was never produced."""


class NoMatch(PulsekitError):
    """A terminal PDE state matched no stable branch point in the atlas."""
