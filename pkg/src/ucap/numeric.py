"""Floating-point tolerance helpers shared across modules.

The package-wide tolerance is 1e-9: relative where magnitudes exceed 1,
absolute otherwise.
"""

REL_TOL = 1e-9


def bound_tol(scale: float, rel: float = REL_TOL) -> float:
    """Tolerance for a comparison against a bound of the given magnitude."""
    return rel * max(1.0, abs(scale))


def nearly_eq(a: float, b: float, rel: float = REL_TOL) -> bool:
    """True if a and b agree within the package tolerance."""
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))
