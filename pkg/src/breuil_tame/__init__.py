"""Mod p reductions of potentially Barsotti-Tate lattices with tame descent data.

The layers, from the bottom up:

    coeff_rings        O_E and its truncated families, k_E, finite coefficient algebras
    dp_series          truncated divided-power series over S with phi, N and descent
    special_elements   the fixed-point series V, U, V', U', W, X
    filtered_modules   rank-two filtered (phi, N)-modules and weak admissibility
    sdm_lattices       strongly divisible lattices and their axiom checks
    breuil             Breuil modules mod p, morphisms and rank-one scans
    reduction_engine   reduction reports, classification and the descent check
    cli                the breuil-tame command
"""

__version__ = "0.1.0"

from .errors import (BreuilError, DegenerateCase, InadmissibleParameters, NoRootInE,  # noqa: F401
                     PrecisionExhausted)
