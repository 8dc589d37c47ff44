"""Exception hierarchy. Anything deriving from DataError maps to CLI exit code 2."""


class DataError(Exception):
    """Input data violates a documented format or invariant."""


class CorpusError(DataError):
    pass


class AnnotationError(DataError):
    pass


class ZeroVarianceError(DataError):
    """Fleiss' kappa is undefined: every rating falls into one category."""


class SplitError(DataError):
    pass


class FeatureFormatError(DataError):
    pass


class CheckpointError(DataError):
    pass


class ShapeError(ValueError):
    pass


class MaskError(ValueError):
    """An attention row admits no position."""


class NonDeterministicError(RuntimeError):
    pass
