"""Exception types shared across the package."""


class CrepError(Exception):
    """Base class for every error raised by this package."""


class NetworkParseError(CrepError):
    """Network file is malformed: bad JSON, wrong types, unknown fields."""


class NetworkValidationError(CrepError):
    """Network violates a model invariant; the message names the invariant."""


class SynchronousStateError(CrepError):
    """No admissible synchronous state was found for these parameters."""


class NoConvergence(SynchronousStateError):
    """Newton iteration exhausted its budget without meeting the tolerance."""


class OutOfDomain(SynchronousStateError):
    """Converged phases violate the security domain on at least one line."""


class DegenerateSystemError(CrepError):
    """The reduced system is marginally stable; the invariant variance is undefined."""


class LyapunovSolveError(CrepError):
    """Lyapunov residual exceeded tolerance (near-singular reduced system)."""


class AllCensoredError(CrepError):
    """No Monte-Carlo trajectory exited before the horizon; mean undefined."""


class InfeasibleSpecError(CrepError):
    """Decision specification is infeasible or inconsistent with the network."""


class NoFeasiblePointError(CrepError):
    """Every candidate evaluated by the search lacked an admissible state."""
