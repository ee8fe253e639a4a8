"""Exception types shared across the package."""


class IwalabError(Exception):
    """Base class for all package errors."""


class PrecisionExhausted(IwalabError):
    """A sign decision for a float-valued slope could not be resolved at
    the working precision."""


class DegenerateField(IwalabError):
    """The two asymptotic flux phases coincide (b+ - b- in 2*pi*Z), so the
    interface projections are undefined."""


class IrrationalFlux(IwalabError):
    """A Bloch-matrix construction was requested for a flux that is not an
    exact rational multiple of 2*pi."""


class IrrationalSlope(IwalabError):
    """An interface-translation construction was requested for a slope
    without a rational direction vector."""


class NonHermitianPerturbation(IwalabError):
    """A Hamiltonian perturbation failed the Hermiticity check."""


class EmptyGap(IwalabError):
    """The requested energy interval does not separate spectrum on both
    sides, so no gap unitary exists."""


class GapClosed(IwalabError):
    """The chemical potential touches a Bloch band (or a band degeneracy
    crosses it), so the Fermi projection is not gapped."""


class NotProjection(IwalabError):
    """An operator expected to be an orthogonal projection is not one to
    the required tolerance."""


class NotInterfaceLocalized(IwalabError):
    """A slab trace was requested for an operator whose diagonal has not
    decayed at the normal cutoff of the trace region."""


class SlabExceedsWindow(IwalabError):
    """The requested slab length does not fit in the operator window with
    the required margins."""


class EmptyInterior(IwalabError):
    """The requested margin leaves no interior sites in the window."""


class NoCommonGap(IwalabError):
    """The two bulk band structures share no open spectral gap."""

    def __init__(self, message, gaps_plus=None, gaps_minus=None):
        super().__init__(message)
        self.gaps_plus = gaps_plus
        self.gaps_minus = gaps_minus


class ConfigError(IwalabError):
    """A run configuration failed validation; message carries the field
    diagnostic."""
