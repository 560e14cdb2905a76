"""Exception types shared by the numerical and combinatorial modules."""


class ExpRaysError(Exception):
    """Base class for every error raised by this package."""


class NumericFailure(ExpRaysError):
    """A numerical procedure could not produce a trustworthy answer.

    The command line maps every subclass to exit status 2.
    """


class NoConvergence(NumericFailure):
    pass


class SingularObstruction(NumericFailure):
    """A pullback step came too close to the asymptotic value c."""

    def __init__(self, t, level, distance):
        super().__init__(f"pullback at potential {t!r} hits the singular value "
                         f"at level {level} (distance {distance:.3g})")
        self.t = t
        self.level = level
        self.distance = distance


class ContinuationBreak(NumericFailure):
    def __init__(self, t, reason=""):
        super().__init__(f"continuation failed at t={t!r}" + (f": {reason}" if reason else ""))
        self.t = t


class BranchAmbiguity(NumericFailure):
    pass


class LandingFailure(NumericFailure):
    def __init__(self, address, status):
        super().__init__(f"ray {address} did not land ({status})")
        self.address = address
        self.status = status


class ParabolicVertex(NumericFailure):
    def __init__(self, address, multiplier):
        super().__init__(f"ray {address} lands at a non-repelling point "
                         f"(|multiplier| = {abs(multiplier):.6g})")
        self.address = address
        self.multiplier = multiplier


class AmbiguousCrossing(NumericFailure):
    pass


class OnBoundary(NumericFailure):
    def __init__(self, z, distance):
        super().__init__(f"point {z!r} lies within {distance:.3g} of a puzzle boundary")
        self.z = z
        self.distance = distance


class OrbitEscape(NumericFailure):
    def __init__(self, j, value):
        super().__init__(f"orbit escapes at iterate {j} (|z| = {abs(value):.3g})")
        self.j = j
        self.value = value


class EscapingSample(NumericFailure):
    pass


class Undecidable(ExpRaysError):
    """A comparison of truncated addresses is not determined by the known entries."""


class NotForwardInvariant(ExpRaysError):
    def __init__(self, missing):
        super().__init__("address set is not closed under the shift; missing "
                         + ", ".join(str(a) for a in missing))
        self.missing = tuple(missing)
