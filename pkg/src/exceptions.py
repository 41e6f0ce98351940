"""
Error types shared by the cost model, simulator, planner and CLI
"""


class D2DRegenError(Exception):
    """Base class for all D2DRegen errors"""


class InvalidParameterError(D2DRegenError, ValueError):
    """A parameter violates a model invariant (the message names it)"""


class TruncationError(InvalidParameterError):
    """A tail sum cannot be truncated safely"""


class NoRequestsError(D2DRegenError, ValueError):
    """No requests are ever made (omega = 0); the cost is 0 by convention"""


class UnderSampledError(D2DRegenError, RuntimeError):
    """The simulation horizon is too short to form the requested batches"""


class NoCrossingError(D2DRegenError, RuntimeError):
    """No switching threshold could be located anywhere on a surface"""
