class CmdnlsError(Exception):
    pass


class ConfigError(CmdnlsError, ValueError):
    pass


class GridMismatchError(CmdnlsError, ValueError):
    pass


class HierarchyDepthError(CmdnlsError, ValueError):
    pass


class ClassificationError(CmdnlsError, ValueError):
    pass


class DecompositionError(CmdnlsError):
    """
    Raised when a field cannot be written as a modulated soliton plus a small remainder

    params (tuple): last (lambda, gamma, x) iterate, if any
    """

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class NoConvergenceError(DecompositionError):
    pass


class SmallnessError(DecompositionError):
    pass


class NonPositiveScaleError(DecompositionError):
    pass


class BlowupError(CmdnlsError):
    """
    Raised when an integration produces non-finite values or trips a growth ceiling

    partial: whatever trajectory had been recorded before the abort
    """

    def __init__(self, message, partial=None, time=None):
        super().__init__(message)
        self.partial = partial
        self.time = time
