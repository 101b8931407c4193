"""Exception hierarchy shared by every subpackage."""


class DeigError(Exception):
    """Base class for all library errors."""


class NonConvergence(DeigError):
    """An iterative solver hit its iteration cap.

    ``index`` is the root (or eigenvalue) being solved; ``node`` and ``t`` are
    filled in by the tracker when the failure happens inside a network step.
    """

    def __init__(self, message, index=None, node=None, t=None):
        super().__init__(message)
        self.index = index
        self.node = node
        self.t = t

    def tagged(self, node=None, t=None):
        return NonConvergence(
            f"{self.args[0]} (node={node}, t={t})", index=self.index, node=node, t=t
        )


class InvalidBracket(DeigError):
    """Secular problem is not deflated (repeated poles or zero weights)."""


class NotHermitian(DeigError):
    pass


class IsolatedNode(DeigError):
    pass


class Disconnected(DeigError):
    pass


class InfeasibleParameters(DeigError):
    pass


class ConnectivityRetryExhausted(DeigError):
    pass


class StepSizeTooLarge(DeigError):
    pass


class ZeroWeight(DeigError):
    pass


class IllConditionedFit(DeigError):
    pass


class SingularC(DeigError):
    pass


class AngleOutOfRange(DeigError):
    pass


class LocalityViolation(DeigError):
    """A node tried to address or read a non-neighbor."""


class ParseError(DeigError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(DeigError):
    def __init__(self, message, key):
        super().__init__(f"{key}: {message}")
        self.key = key
