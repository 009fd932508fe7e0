"""spop: spectral-power matrix optimizers and heavy-tail diagnostics.

Subpackages
-----------
matcore   dense SVD / symmetric eigenvalues / Schatten norms / MAT1 files
specfun   Newton-Schulz orthogonalizer and fractional root, spectral power
          transform, Schatten-constrained steepest descent
optim     optimizer steppers (sgdm/adam/adamw, the muon family, normuon)
esd       empirical spectral density and power-law exponent fitting
bench     desk-scale problems, training loop, gradient checks, flop model
cli       the ``spop`` command line front end
"""

from .backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
