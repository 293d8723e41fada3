"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Vector dimensions do not agree."""


class SamplingFailed(RuntimeError):
    """Rejection sampling found no member within the trial cap."""


class BarrierSingularity(ValueError):
    """Barrier gradient/Hessian evaluated at a singular point."""


class UnsafeAnchor(RuntimeError):
    """Corridor requested at a state with a negative barrier value."""


class NotHurwitz(ValueError):
    """A + B K has an eigenvalue with nonnegative real part."""


class SingularBlock(ValueError):
    """The [A B; C 0] block matrix is rank deficient."""


class PreconditionViolated(RuntimeError):
    """A documented operation precondition does not hold."""


class NonFiniteDerivative(RuntimeError):
    """Integration encountered a non-finite state derivative."""


class GoalLost(RuntimeError):
    """No path point is a member of the current corridor."""


class PathUnreachable(RuntimeError):
    """No grid path exists between start and goal cells."""


class PoseOutOfBounds(ValueError):
    """Pose lies outside the occupancy grid."""


class PoseInObstacle(ValueError):
    """Pose lies in a non-free cell."""


class WorldFormatError(ValueError):
    """Malformed world/map text."""


class ExplorationStuck(RuntimeError):
    """Consecutive exploration cycles made zero map progress."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class ScenarioError(ValueError):
    """Invalid scenario configuration."""
