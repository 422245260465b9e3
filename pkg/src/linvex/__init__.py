"""Exact arithmetic for linear involutions without flips.

Construct and iterate band exchanges on a pair of intervals, run Rauzy
induction with its integer matrix cocycle, enumerate induction diagrams,
build cyclic tower certificates and rigidity times, track column norms
modulo a prime, and run seeded statistical experiments.
"""

from .errors import LinvexError
from .exchange import Exchange, Point, Side, build
from .genperm import GeneralizedPermutation, Orientation, validate

__version__ = "0.1.0"

__all__ = [
    "Exchange",
    "GeneralizedPermutation",
    "LinvexError",
    "Orientation",
    "Point",
    "Side",
    "build",
    "validate",
    "__version__",
]
