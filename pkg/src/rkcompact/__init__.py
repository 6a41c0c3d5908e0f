"""Localization and compactness diagnostics for operators on Bergman and Fock spaces.

Modules
-------
geometry      Mobius maps, metrics, coverings.
kernels       Reproducing kernels, normalizations, translations.
quadrature    Ball and plane rules, pullbacks, tail integrals.
operators     Truncated operator matrices, Toeplitz compressions, correlations.
localization  Localization integrals, Rudin-Forelli checks, Schur bounds, certificates.
diagnostics   Essential-norm proxy, Berezin profiles, decomposition defect, reports.
cli           Batch runner.
"""

__version__ = "0.1.0"

from ._validation import DomainError, NumericalError  # noqa: E402
from .spaces import SpaceDescriptor  # noqa: E402

__all__ = ["DomainError", "NumericalError", "SpaceDescriptor", "__version__"]
