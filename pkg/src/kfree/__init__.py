"""Free-probability toolkit for unitary ensembles.

Combinatorial core (set partitions, the non-crossing lattice, the symmetric
group and its Cayley geodesics), exact Weingarten calculus over the
rationals, the moment / free-cumulant engine, k-fold twirling channels,
Monte Carlo ensemble laboratories, and exact-diagonalization machinery for
thermal free cumulants and long-time averages.
"""

__version__ = "0.1.0"

from .errors import RegimeError

__all__ = ["RegimeError", "__version__"]
