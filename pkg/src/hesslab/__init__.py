"""hesslab: blockwise Hessian spectrum estimation and optimizer comparison.

Building blocks:

* ``operators`` — matrix-free symmetric operators and block partitions.
* ``lanczos`` — tridiagonalization with full reorthogonalization.
* ``slq`` — stochastic Lanczos quadrature: trace estimates and spectral
  densities from random probes.
* ``spectra`` — Gaussian-blurred densities, Jensen-Shannon distances and the
  pairwise heterogeneity report.
* ``quadlab`` — block-diagonal quadratic benchmarks with gradient descent and
  Adam runners plus rate-bound verifiers.
* ``nnlab`` — small MLPs with analytic Hessian-vector products to feed the
  estimators, and the associated training experiments.
* ``cli`` — ``hesslab`` command-line front end.
"""

from . import lanczos, nnlab, operators, quadlab, slq, spectra
from .errors import HesslabError, InputError, NumericalError

__version__ = "0.1.0"

__all__ = [
    "operators",
    "lanczos",
    "slq",
    "spectra",
    "quadlab",
    "nnlab",
    "HesslabError",
    "InputError",
    "NumericalError",
    "__version__",
]
