"""Exception types; the CLI maps each family to its exit code."""


class ChannelError(ValueError):
    """Invalid channel data: not CPTP, malformed input, unknown fixture."""


class PreconditionError(ValueError):
    """An operation's precondition does not hold for the given input."""


class ConvergenceError(RuntimeError):
    """A numerical search stopped without meeting its tolerance.

    ``best`` carries the best iterate found, when there is one.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EigenSolverError(RuntimeError):
    pass
