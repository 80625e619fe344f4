"""Exception types raised across the toolkit."""


class JumpCtlError(Exception):
    """Base class for all toolkit errors."""


class NonFiniteState(JumpCtlError):
    """A simulated state left the representable range."""

    def __init__(self, message, path_index=None):
        super().__init__(message)
        self.path_index = path_index


class EmptyBundle(JumpCtlError):
    pass


class ZeroJump(JumpCtlError):
    """A listed breakpoint has equal one-sided limits (removable)."""

    def __init__(self, message, breakpoints=()):
        super().__init__(message)
        self.breakpoints = tuple(breakpoints)


class NoValidC(JumpCtlError):
    pass


class NoConvergence(JumpCtlError):
    pass


class MissingNoise(JumpCtlError):
    pass


class RankDeficient(JumpCtlError):
    pass
