"""Exception types shared across the library.

Every numerical guard raises a subclass of FroblabError so callers can
distinguish "bad input" from "the computation itself refused".
"""


class FroblabError(Exception):
    """Base class for all library errors."""


class InvalidTau(FroblabError):
    """tau is not in the upper half-plane (or too close to the real axis)."""


class SeriesDivergence(FroblabError):
    """A theta series would need more terms than the hard cap allows."""


class OnLattice(FroblabError):
    """Argument sits (numerically) on the period lattice."""


class OnPoleDivisor(FroblabError):
    """Evaluation point collides with a pole of the superpotential."""


class NonConvergent(FroblabError):
    """Contour quadrature did not stabilise under node doubling."""


class BranchObstruction(FroblabError):
    """A fractional power cannot be continued single-valuedly along the contour."""


class InvalidGroupElement(FroblabError):
    """Group element violates its defining constraints (det, lattice condition)."""


class IllConditioned(FroblabError):
    """A linear solve or Jacobian is numerically singular."""


class NearDiscriminant(FroblabError):
    """Point is too close to the discriminant (colliding critical points)."""


class RootCountMismatch(FroblabError):
    """Critical-point search found an unexpected number of roots."""

    def __init__(self, found: int, expected: int, msg: str = ""):
        self.found = found
        self.expected = expected
        super().__init__(msg or f"found {found} critical points, expected {expected}")
