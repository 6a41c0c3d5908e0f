"""Error types and small input-validation helpers shared by all modules."""

from __future__ import annotations

import numpy as np

__all__ = [
    "DomainError",
    "NumericalError",
    "as_points",
    "check_in_ball",
    "check_finite",
    "check_positive_int",
]


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


class NumericalError(ArithmeticError):
    """Raised when a computation produces non-finite values or fails to converge."""


def as_points(z, n: int) -> np.ndarray:
    """Coerce `z` to a complex array of shape ``(..., n)``.

    For ``n == 1`` a scalar or an array without a trailing axis of length 1 is
    read as a batch of one-dimensional points, so ``0.5`` and ``[0.5, 0.2]``
    are both accepted.
    """
    arr = np.asarray(z, dtype=complex)
    if n == 1:
        if arr.ndim == 0 or arr.shape[-1] != 1:
            arr = arr[..., None]
    elif arr.ndim == 0 or arr.shape[-1] != n:
        raise DomainError(f"expected points with trailing dimension {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("points must have finite coordinates")
    return arr


def check_in_ball(pts: np.ndarray) -> np.ndarray:
    """Return ``|z|^2`` for points of shape ``(..., n)`` after checking ``|z| < 1``."""
    r2 = np.sum(np.abs(pts) ** 2, axis=-1)
    if np.any(r2 >= 1.0):
        bad = np.unravel_index(np.argmax(r2), r2.shape)
        raise DomainError(f"point outside the open unit ball (|z|^2={r2[bad]!r} at index {bad})")
    return r2


def check_finite(values: np.ndarray, what: str, nodes: np.ndarray | None = None) -> np.ndarray:
    """Raise `NumericalError` naming the first offending node if `values` is not finite."""
    values = np.asarray(values)
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        where = "" if nodes is None else f" at node {np.asarray(nodes)[tuple(idx[:1])]!r}"
        raise NumericalError(f"non-finite {what} (index {tuple(int(i) for i in idx)}){where}")
    return values


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or int(value) < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
