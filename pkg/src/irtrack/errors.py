"""Exception types shared across the package.

All of them subclass ``ValueError`` so that callers which only care about
"bad input" can catch one thing.
"""


class IrtrackError(ValueError):
    exit_code = 1


class InvalidArgument(IrtrackError):
    pass


class DegenerateGeometry(IrtrackError):
    exit_code = 4


class BehindCamera(InvalidArgument):
    pass


class RangeError(InvalidArgument):
    pass


class AmbiguousCorrespondence(IrtrackError):
    pass


class DefinitionFailed(IrtrackError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateFit(DegenerateGeometry):
    pass


class DegeneratePivot(DegenerateGeometry):
    pass


class PathNotFound(IrtrackError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "path not found"


class MalformedInput(IrtrackError):
    exit_code = 3
