"""Reproducing kernels, their normalizations and the translation operators.

Bergman space of the ball (normalized volume ``v(B_n) = 1``)::

    K_z(w) = (1 - <w, z>)^{-(n+1)},     ||K_z|| = (1 - |z|^2)^{-(n+1)/2}

Fock space with weight ``alpha |z|^2 / 2`` and inner product
``(alpha/pi)^n int f conj(g) exp(-alpha |z|^2) dv``::

    K_z(w) = exp(alpha <w, z>),          ||K_z|| = exp(alpha |z|^2 / 2)
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._validation import DomainError, NumericalError
from .geometry import mobius
from .spaces import SpaceDescriptor

__all__ = [
    "FockWeight",
    "GaussianWeight",
    "kernel_eval",
    "kernel_norm",
    "log_kernel_norm",
    "correlation_closed_form",
    "KernelVector",
    "normalized_kernel",
    "p_normalized_kernel",
    "translate",
    "user_view",
]

_EXP_MAX = 700.0


def user_view(pts: np.ndarray) -> np.ndarray:
    """Drop the trailing axis for ``n = 1`` so callables see plain complex arrays."""
    return pts[..., 0] if pts.shape[-1] == 1 else pts


def _inner(w, z):
    return np.sum(w * np.conj(z), axis=-1)


class FockWeight(ABC):
    """Pluggable weight ``phi`` for generalized Fock spaces.

    Only the radial Gaussian family is implemented; the interface records
    what a non-radial weight would need to supply.
    """

    @abstractmethod
    def value(self, z: np.ndarray) -> np.ndarray:
        """Weight ``phi(z)`` for points of shape ``(..., n)``."""

    @abstractmethod
    def log_kernel(self, z: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``log K_z(w)`` (complex)."""

    @abstractmethod
    def log_basis_norm_sq(self, multi_index: np.ndarray) -> np.ndarray:
        """``log ||z^m||^2`` for an orthogonal monomial basis, or raise if none exists."""


@dataclass(frozen=True)
class GaussianWeight(FockWeight):
    """``phi(z) = alpha |z|^2 / 2``."""

    alpha: float = 1.0

    def value(self, z):
        return 0.5 * self.alpha * np.sum(np.abs(z) ** 2, axis=-1)

    def log_kernel(self, z, w):
        return self.alpha * _inner(w, z)

    def log_basis_norm_sq(self, multi_index):
        m = np.asarray(multi_index)
        return np.sum(gammaln(m + 1.0), axis=-1) - np.sum(m, axis=-1) * np.log(self.alpha)


def _log_k(space: SpaceDescriptor, zp, wp):
    """Complex ``log K_z(w)`` on broadcast point arrays."""
    if space.is_bergman:
        return -(space.n + 1) * np.log(1.0 - _inner(wp, zp))
    return GaussianWeight(space.alpha).log_kernel(zp, wp)


def _log_norm_from_sq(space: SpaceDescriptor, r2):
    if space.is_bergman:
        return -0.5 * (space.n + 1) * np.log1p(-r2)
    return 0.5 * space.alpha * r2


def log_kernel_norm(space: SpaceDescriptor, z) -> np.ndarray:
    """``log ||K_z||``, finite for every admissible point."""
    _, r2 = space.points(z)
    return _log_norm_from_sq(space, r2)


def _safe_exp(x, what):
    if np.any(np.real(x) > _EXP_MAX):
        raise NumericalError(f"{what} overflows double precision")
    return np.exp(x)


def kernel_eval(space: SpaceDescriptor, z, w) -> np.ndarray:
    """Reproducing kernel ``K_z(w)``.

    Examples
    --------
    >>> float(kernel_eval(SpaceDescriptor.bergman(), 0.5, 0.5).real)
    1.7777777777777777
    """
    zp, _ = space.points(z)
    wp, _ = space.points(w)
    return _safe_exp(_log_k(space, zp, wp), "kernel value")


def kernel_norm(space: SpaceDescriptor, z) -> np.ndarray:
    """``||K_z|| = sqrt(K_z(z))`` in closed form."""
    return _safe_exp(log_kernel_norm(space, z), "kernel norm")


def correlation_closed_form(space: SpaceDescriptor, z, w) -> np.ndarray:
    """``<k_z, k_w> = K_z(w) / (||K_z|| ||K_w||)`` without forming the unnormalized values."""
    zp, z2 = space.points(z)
    wp, w2 = space.points(w)
    log_val = _log_k(space, zp, wp) - _log_norm_from_sq(space, z2) - _log_norm_from_sq(space, w2)
    return np.exp(log_val)


@dataclass(frozen=True)
class KernelVector:
    """A reproducing kernel at `base` with one of three normalizations.

    ``normalization`` is ``"unnormalized"`` (``K_z``), ``"normalized"``
    (``k_z = K_z / ||K_z||``) or ``"p"`` (``k_z^{(p)} = K_z / ||K_z||^{2/p'}``).
    """

    space: SpaceDescriptor
    base: np.ndarray
    normalization: str = "normalized"
    p: float = 2.0

    def __post_init__(self):
        if self.normalization not in ("unnormalized", "normalized", "p"):
            raise DomainError(f"unknown normalization {self.normalization!r}")
        pts, _ = self.space.points(self.base)
        if pts.shape != (self.space.n,):
            raise DomainError("a kernel vector needs a single base point")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "base", pts)
        if not (1.0 < float(self.p) < np.inf):
            raise DomainError(f"exponent p must lie in (1, inf), got {self.p!r}")

    @property
    def log_scale(self) -> float:
        """``log`` of the factor dividing ``K_z``."""
        ln = float(log_kernel_norm(self.space, self.base))
        if self.normalization == "unnormalized":
            return 0.0
        if self.normalization == "normalized":
            return ln
        p_conj = self.p / (self.p - 1.0)
        return 2.0 * ln / p_conj

    def __call__(self, w) -> np.ndarray:
        wp, _ = self.space.points(w)
        return _safe_exp(_log_k(self.space, self.base, wp) - self.log_scale, "kernel value")

    def norm(self) -> float:
        """Closed-form norm in the Hilbert space (``A^2`` or ``F^2``)."""
        return float(np.exp(float(log_kernel_norm(self.space, self.base)) - self.log_scale))


def normalized_kernel(space: SpaceDescriptor, z) -> KernelVector:
    """``k_z``."""
    return KernelVector(space, z, "normalized")


def p_normalized_kernel(space: SpaceDescriptor, z, p: float | None = None) -> KernelVector:
    """``k_z^{(p)} = K_z / ||K_z||^{2/p'}``; equals ``k_z`` when ``p = 2``."""
    return KernelVector(space, z, "p", space.p if p is None else float(p))


def translate(space: SpaceDescriptor, z, f, p: float | None = None):
    """Translation operator at `z`.

    Bergman: ``U_z^{(p)} f(w) = f(phi_z(w)) k_z(w)^{2/p}``. The power uses the
    principal logarithm of ``1 - <w, z>``, which stays in the right half
    plane, so no branch cut is crossed. Fock: ``U_z f(w) = f(z - w) k_z(w)``.

    Parameters
    ----------
    space : SpaceDescriptor
    z : point
    f : callable
        Receives points shaped like the inputs (plain complex arrays for
        ``n = 1``).
    p : float, optional
        Exponent; defaults to ``space.p``. Unused for the Fock family.

    Returns
    -------
    callable
    """
    zp, z2 = space.points(z)
    if zp.shape != (space.n,):
        raise DomainError("translate needs a single base point")
    p = space.p if p is None else float(p)
    if not (1.0 < p < np.inf):
        raise DomainError(f"exponent p must lie in (1, inf), got {p!r}")
    log_nz = float(_log_norm_from_sq(space, z2))

    if space.is_bergman:
        def U(w):
            wp, _ = space.points(w)
            moved = mobius(zp, wp, space.n)
            moved = moved[..., None] if space.n == 1 else moved
            log_k = _log_k(space, zp, wp) - log_nz
            return np.asarray(f(user_view(moved))) * np.exp((2.0 / p) * log_k)
    else:
        def U(w):
            wp, _ = space.points(w)
            log_k = _log_k(space, zp, wp) - log_nz
            return np.asarray(f(user_view(zp - wp))) * _safe_exp(log_k, "kernel value")
    return U
