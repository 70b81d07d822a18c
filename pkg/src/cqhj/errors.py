"""Exception hierarchy.

Every error raised by the library derives from :class:`CQHJError`, so the
CLI can report any of them as a single machine-readable line.
"""


class CQHJError(Exception):
    """Base class for all library errors."""


class PoleProximity(CQHJError):
    """A field was requested at (or numerically at) a node of the wave function."""

    def __init__(self, z, t, psi_abs, threshold):
        self.z = z
        self.t = t
        self.psi_abs = psi_abs
        self.threshold = threshold
        super().__init__(
            f"|psi|={psi_abs:.3e} <= {threshold:.3e} at z={z!r}, t={t!r}: evaluation at a QMF pole"
        )


class ScenarioShape(CQHJError):
    """The superposition is not the symmetric two-packet collision."""


class DegenerateScenario(CQHJError):
    """Closed-form quantity undefined for this scenario (e.g. x0 = 0)."""


class NoConvergence(CQHJError):
    """Newton refinement did not reach the residual tolerance."""


class ConvergedToNode(CQHJError):
    """Stagnation refinement landed on a zero of the wave function itself."""


class ContourThroughPole(CQHJError):
    """A circulation contour passes too close to a node."""


class PoleEncounter(CQHJError):
    """A trajectory came within the pole guard of a node.

    ``trajectory`` holds the partial result up to the last accepted step.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepUnderflow(CQHJError):
    """Adaptive step size fell below the minimum allowed step."""


class NotStagnation(CQHJError):
    """The expansion point is not a stagnation point of the QMF."""


class AlphaZero(CQHJError):
    """The linearised trajectory formula is singular for alpha = 0."""


class TooShort(CQHJError):
    """Trajectory does not cover the detected wrapping region."""


class EmptyEnsemble(CQHJError):
    """No valid wrapping records to average."""


class NeverEnters(CQHJError):
    """The nodal line never reaches the requested entry angle."""


class GridTooLarge(CQHJError):
    """Requested sampling grid exceeds the configured point budget."""


class IoFailure(CQHJError):
    """Reading or writing a data file failed."""


class ScenarioError(CQHJError):
    """Malformed scenario configuration."""
