"""Exception types shared across the library."""


class MoelabError(Exception):
    """Base class for all library errors."""


class NonPhysicalState(MoelabError):
    """A matrix meant to be a state has an eigenvalue below the PSD tolerance."""


class BoundaryState(MoelabError):
    """A logarithm-requiring operation received a rank-deficient state.

    States with a numerical kernel sit on the boundary of the state space,
    where entropy rates diverge; callers that want the divergence should
    mix toward the interior first (see ``variational.boundary_rate``).
    """


class PositivityLoss(MoelabError):
    """A channel map produced an output with eigenvalue below -1e-10."""


class TruncationBreach(MoelabError):
    """Quadrature renormalization drifted beyond the space's tail tolerance."""


class UnreachableTarget(MoelabError):
    """An entropy target lies outside the attainable range (0, ln d)."""


class NotAProjector(MoelabError):
    """Input to a projector check fails P == P^2 == P^dagger at 1e-12."""


class GramSingular(MoelabError):
    """Constraint gradients are numerically parallel; projection undefined."""


class TruncationWarning(UserWarning):
    """Non-fatal diagnostic: truncation leakage exceeded the tail tolerance."""
