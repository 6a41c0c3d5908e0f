"""Function-space descriptors for the Bergman space of the ball and the Fock space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, as_points, check_in_ball

__all__ = ["SpaceDescriptor", "BERGMAN", "FOCK"]

BERGMAN = "bergman"
FOCK = "fock"


@dataclass(frozen=True)
class SpaceDescriptor:
    """Which space an object lives on.

    Parameters
    ----------
    family : {"bergman", "fock"}
        Bergman space of the unit ball or Gaussian-weighted Fock space.
    n : int
        Complex dimension.
    p : float
        Integrability exponent, ``1 < p < inf``.
    alpha : float
        Weight parameter of the Fock weight ``alpha |z|^2 / 2``. Ignored for
        the Bergman family, where it must stay at its default.
    """

    family: str
    n: int = 1
    p: float = 2.0
    alpha: float = 1.0

    def __post_init__(self):
        fam = str(self.family).lower()
        if fam not in (BERGMAN, FOCK):
            raise DomainError(f"unknown family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"dimension n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        p = float(self.p)
        if not (1.0 < p < np.inf):
            raise DomainError(f"exponent p must lie in (1, inf), got {self.p!r}")
        object.__setattr__(self, "p", p)
        alpha = float(self.alpha)
        if not (alpha > 0 and np.isfinite(alpha)):
            raise DomainError(f"alpha must be positive and finite, got {self.alpha!r}")
        if fam == BERGMAN and alpha != 1.0:
            raise DomainError("alpha applies to the Fock family only")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def bergman(cls, n: int = 1, p: float = 2.0) -> "SpaceDescriptor":
        return cls(BERGMAN, n, p)

    @classmethod
    def fock(cls, n: int = 1, p: float = 2.0, alpha: float = 1.0) -> "SpaceDescriptor":
        return cls(FOCK, n, p, alpha)

    @property
    def is_bergman(self) -> bool:
        return self.family == BERGMAN

    @property
    def p_conj(self) -> float:
        """Conjugate exponent ``p / (p - 1)``."""
        return self.p / (self.p - 1.0)

    def with_p(self, p: float) -> "SpaceDescriptor":
        return SpaceDescriptor(self.family, self.n, p, self.alpha)

    def points(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Validate domain points; return ``(pts, |pts|^2)`` with ``pts`` of shape ``(..., n)``."""
        pts = as_points(z, self.n)
        if self.is_bergman:
            return pts, check_in_ball(pts)
        return pts, np.sum(np.abs(pts) ** 2, axis=-1)

    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "p": self.p, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceDescriptor":
        return cls(d["family"], d.get("n", 1), d.get("p", 2.0), d.get("alpha", 1.0))
