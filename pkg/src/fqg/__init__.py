"""Numerical workbench for free orthogonal and unitary discrete quantum groups.

Everything here is finite-dimensional linear algebra: irreducible blocks are
indexed by nonnegative integers (orthogonal case) or words in two letters
(unitary case), with Chebyshev-polynomial dimensions.  The workbench builds
the category data (projections, fusion isometries), the convolution algebra
with its dimension-weighted trace and L_q norms, and numerical verifiers for
the rapid-decay, positive-definiteness and trace-rigidity estimates.
"""

from .params import QGParams, identity_params, symplectic_params
from .chebyshev import chebyshev_dim, rho, threshold, fusion_range
from .algebra import BlockElement

__all__ = [
    "QGParams",
    "identity_params",
    "symplectic_params",
    "chebyshev_dim",
    "rho",
    "threshold",
    "fusion_range",
    "BlockElement",
]

__version__ = "0.1.0"
