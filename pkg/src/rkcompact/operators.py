"""Truncated operator matrices in orthonormal monomial bases.

Matrices use the convention ``M[k, j] = <T e_j, e_k>``, so for coefficient
vectors ``v_z = (<k_z, e_j>)_j`` the kernel correlation of the compression
is ``<T k_z, k_w> = v_w^H M v_z``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.special import betainc, gammainc, gammaln, roots_legendre

from ._validation import DomainError, NumericalError, check_finite, check_positive_int
from .kernels import user_view
from .quadrature import QuadratureRule, build_ball_rule, build_plane_rule
from .spaces import SpaceDescriptor

__all__ = [
    "Symbol",
    "SymbolBoundError",
    "MonomialBasis",
    "monomial_basis",
    "kernel_coefficients",
    "coefficient_tail",
    "sub_degree",
    "TruncatedOperator",
    "identity",
    "zero",
    "toeplitz",
    "correlation",
    "berezin",
    "compose",
    "adjoint",
    "combine",
    "operator_norm",
    "singular_values",
]


class SymbolBoundError(DomainError):
    """A symbol exceeded its declared sup bound at a quadrature node."""


@dataclass(frozen=True)
class Symbol:
    """Bounded function ``u`` with a declared sup-norm bound.

    Parameters
    ----------
    func : callable
        Evaluated on points (plain complex array for ``n = 1``, shape
        ``(..., n)`` otherwise).
    sup_bound : float
        Declared ``||u||_inf``; checked at every node where `func` is used.
    label : str
    radial : callable, optional
        ``g`` with ``u(z) = g(|z|)``; enables the diagonal fast path.
    breakpoints : tuple of float
        Radii where `radial` is not smooth; quadrature panels split there.
    spec : dict, optional
        Serializable description (name and parameters) for reports.
    """

    func: Callable
    sup_bound: float
    label: str
    radial: Callable | None = None
    breakpoints: tuple = ()
    spec: dict | None = field(default=None, hash=False)

    def __post_init__(self):
        b = float(self.sup_bound)
        if not b > 0:
            raise DomainError(f"sup_bound must be positive, got {self.sup_bound!r}")
        object.__setattr__(self, "sup_bound", b)
        object.__setattr__(self, "breakpoints", tuple(float(x) for x in self.breakpoints))

    def __call__(self, z) -> np.ndarray:
        return np.asarray(self.func(z), dtype=complex)

    def checked(self, values: np.ndarray, nodes=None) -> np.ndarray:
        """Return `values` after enforcing the declared bound (hard error on violation)."""
        check_finite(values, f"value of symbol {self.label!r}", nodes)
        mag = np.abs(values)
        if np.any(mag > self.sup_bound * (1 + 1e-12)):
            i = int(np.argmax(mag))
            where = "" if nodes is None else f" at node {np.asarray(nodes).reshape(mag.size, -1)[i].tolist()}"
            raise SymbolBoundError(
                f"symbol {self.label!r} reaches {float(mag.flat[i])!r} > sup_bound {self.sup_bound!r}{where}")
        return values

    def eval_checked(self, z) -> np.ndarray:
        return self.checked(self(z), z)

    def eval_radial_checked(self, r) -> np.ndarray:
        vals = np.asarray(self.radial(np.asarray(r, dtype=float)), dtype=complex)
        return self.checked(np.broadcast_to(vals, np.shape(r)), r)


# ---------------------------------------------------------------------------
# bases and kernel coefficients


def _multi_indices(n: int, D: int) -> np.ndarray:
    """Multi-indices of total degree <= D, ordered by degree then lexicographically descending."""
    out = []
    for deg in range(D + 1):
        if n == 1:
            out.append([deg])
            continue
        stack = [((), deg)]
        level = []
        while stack:
            head, rest = stack.pop()
            if len(head) == n - 1:
                level.append(head + (rest,))
                continue
            for first in range(rest + 1):
                stack.append((head + (first,), rest - first))
        level.sort(reverse=True)
        out.extend(list(m) for m in level)
    return np.array(out, dtype=int).reshape(-1, n)


@dataclass(frozen=True)
class MonomialBasis:
    """Orthonormal monomial basis ``e_m = z^m / ||z^m||`` up to total degree `degree`.

    Attributes
    ----------
    space : SpaceDescriptor
    degree : int
    indices : ndarray, shape (dim, n)
    log_norms : ndarray, shape (dim,)
        ``log ||z^m||``.
    """

    space: SpaceDescriptor
    degree: int
    indices: np.ndarray = field(repr=False)
    log_norms: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.indices)

    @property
    def degrees(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    @property
    def constants(self) -> np.ndarray:
        """Normalization constants ``1 / ||z^m||`` (``sqrt(k+1)`` for Bergman ``n = 1``)."""
        return np.exp(-self.log_norms)

    def prefix(self, degree: int) -> int:
        """Number of basis elements of total degree <= `degree`."""
        return int(np.sum(self.degrees <= degree))

    def evaluate(self, z, log_weight=None) -> np.ndarray:
        """Values ``e_m(z)``, shape ``(..., dim)``.

        `log_weight` (broadcast against the point shape) is added in the log
        domain before exponentiation, which keeps weighted Fock values finite.
        """
        pts, _ = self.space.points(z)
        logmag, phase = _log_monomials(pts, self.indices)
        logmag = logmag - self.log_norms
        if log_weight is not None:
            logmag = logmag + np.asarray(log_weight)[..., None]
        return np.exp(logmag + 1j * phase)


def _log_monomials(pts, indices):
    """``log|z^m|`` and ``arg z^m`` for points ``(..., n)`` and indices ``(dim, n)``."""
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(pts))
    ph = np.angle(pts)
    m = indices.astype(float)
    with np.errstate(invalid="ignore"):
        terms = np.where(m[None, :, :] > 0, la.reshape(-1, 1, pts.shape[-1]) * m[None, :, :], 0.0)
    logmag = terms.sum(axis=-1).reshape(pts.shape[:-1] + (len(indices),))
    phase = (ph.reshape(-1, pts.shape[-1]) @ m.T).reshape(pts.shape[:-1] + (len(indices),))
    return logmag, phase


def _log_norm_sq(space: SpaceDescriptor, indices: np.ndarray) -> np.ndarray:
    n = space.n
    deg = indices.sum(axis=1)
    fact = np.sum(gammaln(indices + 1.0), axis=1)
    if space.is_bergman:
        return gammaln(n + 1.0) + fact - gammaln(n + deg + 1.0)
    return fact - deg * math.log(space.alpha)


def monomial_basis(space: SpaceDescriptor, D: int) -> MonomialBasis:
    """Orthonormal monomial basis of total degree <= D.

    Bergman: ``||z^m||^2 = n! m! / (n + |m|)!``; Fock: ``||z^m||^2 = m! / alpha^|m|``.

    Examples
    --------
    >>> b = monomial_basis(SpaceDescriptor.bergman(), 3)
    >>> float(b.constants[3])
    2.0
    """
    D = check_positive_int(D, "D", 0)
    idx = _multi_indices(space.n, D)
    idx.setflags(write=False)
    ln = 0.5 * _log_norm_sq(space, idx)
    ln.setflags(write=False)
    return MonomialBasis(space, D, idx, ln)


def kernel_coefficients(space: SpaceDescriptor, z, D: int | MonomialBasis, gap=None) -> np.ndarray:
    """Coefficients ``<k_z, e_m> = conj(e_m(z)) / ||K_z||`` in closed form.

    Parameters
    ----------
    space : SpaceDescriptor
    z : point or array of points
    D : int or MonomialBasis
    gap : array_like, optional
        ``1 - |z|^2`` supplied by the caller (Bergman), avoiding cancellation
        for points close to the sphere.

    Returns
    -------
    ndarray, shape (..., dim)
    """
    basis = D if isinstance(D, MonomialBasis) else monomial_basis(space, D)
    pts, r2 = space.points(z)
    if space.is_bergman:
        g = 1.0 - r2 if gap is None else np.asarray(gap, dtype=float)
        log_nk = -0.5 * (space.n + 1) * np.log(g)
    else:
        log_nk = 0.5 * space.alpha * r2
    if space.n == 1:
        fast = _powers_n1(pts[..., 0], basis, log_nk)
        if fast is not None:
            return fast
    logmag, phase = _log_monomials(pts, basis.indices)
    return np.exp(logmag - basis.log_norms - np.asarray(log_nk)[..., None] - 1j * phase)


def _powers_n1(z, basis, log_nk):
    """``conj(z)^k / ||z^k|| / ||K_z||`` by repeated multiplication, or None if it could overflow."""
    D = basis.degree
    zmax = float(np.max(np.abs(z), initial=0.0))
    if zmax > 1.0 and D * math.log(zmax) > 600.0:
        return None
    zc = np.conj(z).ravel()
    out = np.empty((D + 1, zc.size), dtype=complex)
    out[0] = np.exp(-np.asarray(log_nk, dtype=float)).ravel() * np.ones(zc.size)
    for k in range(1, D + 1):
        np.multiply(out[k - 1], zc, out=out[k])
    out *= basis.constants[:, None]
    return out.T.reshape(z.shape + (D + 1,))


def coefficient_tail(space: SpaceDescriptor, z, D: int) -> np.ndarray:
    """Squared norm of the part of ``k_z`` beyond degree D, in closed form.

    Bergman: regularized incomplete beta ``I_{|z|^2}(D+1, n+1)``;
    Fock: regularized lower incomplete gamma ``P(D+1, alpha |z|^2)``.
    """
    _, r2 = space.points(z)
    if space.is_bergman:
        return betainc(D + 1.0, space.n + 1.0, r2)
    return gammainc(D + 1.0, space.alpha * r2)


def sub_degree(D: int) -> int:
    """Degree of the comparison compression used for a-posteriori truncation bars."""
    return int(round(2 * D / 3))


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class TruncatedOperator:
    """Compression ``P_D T P_D`` stored as ``M[k, j] = <T e_j, e_k>``."""

    space: SpaceDescriptor
    degree: int
    matrix: np.ndarray = field(repr=False)
    provenance: str = "matrix"

    def __post_init__(self):
        M = np.array(self.matrix, dtype=complex)
        dim = len(_multi_indices(self.space.n, self.degree))
        if M.shape != (dim, dim):
            raise DomainError(f"matrix shape {M.shape} does not match dim {dim} for degree {self.degree}")
        check_finite(M, "matrix entry")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def basis(self) -> MonomialBasis:
        return monomial_basis(self.space, self.degree)

    def adjoint(self) -> "TruncatedOperator":
        return adjoint(self)

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "degree": self.degree,
            "provenance": self.provenance,
            "matrix": [[[float(x.real), float(x.imag)] for x in row] for row in self.matrix],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TruncatedOperator":
        M = np.array([[complex(a, b) for a, b in row] for row in d["matrix"]])
        return cls(SpaceDescriptor.from_dict(d["space"]), int(d["degree"]), M, d.get("provenance", "matrix"))

    @classmethod
    def from_json(cls, text: str) -> "TruncatedOperator":
        return cls.from_dict(json.loads(text))


def _dim(space, D):
    return len(_multi_indices(space.n, D))


def identity(space: SpaceDescriptor, D: int) -> TruncatedOperator:
    return TruncatedOperator(space, D, np.eye(_dim(space, D), dtype=complex), "identity")


def zero(space: SpaceDescriptor, D: int) -> TruncatedOperator:
    d = _dim(space, D)
    return TruncatedOperator(space, D, np.zeros((d, d), dtype=complex), "zero")


def _same_frame(A, B):
    if A.space != B.space or A.degree != B.degree:
        raise DomainError("operators live on different spaces or degrees")


def compose(A: TruncatedOperator, B: TruncatedOperator) -> TruncatedOperator:
    """Matrix of ``A B``."""
    _same_frame(A, B)
    return TruncatedOperator(A.space, A.degree, A.matrix @ B.matrix, f"compose({A.provenance}, {B.provenance})")


def adjoint(A: TruncatedOperator) -> TruncatedOperator:
    """Matrix of ``A*`` (conjugate transpose)."""
    prov = A.provenance[len("adjoint("):-1] if A.provenance.startswith("adjoint(") and A.provenance.endswith(")") \
        else f"adjoint({A.provenance})"
    return TruncatedOperator(A.space, A.degree, A.matrix.conj().T, prov)


def combine(c1: complex, A: TruncatedOperator, c2: complex, B: TruncatedOperator) -> TruncatedOperator:
    """Matrix of ``c1 A + c2 B``."""
    _same_frame(A, B)
    return TruncatedOperator(A.space, A.degree, c1 * A.matrix + c2 * B.matrix,
                             f"combine({c1!r}, {A.provenance}, {c2!r}, {B.provenance})")


def singular_values(T: TruncatedOperator) -> np.ndarray:
    """Singular values in descending order (LAPACK ``gesdd``)."""
    try:
        return scipy.linalg.svdvals(T.matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"singular value decomposition did not converge: {exc}") from exc


def operator_norm(T: TruncatedOperator) -> float:
    """Largest singular value."""
    s = singular_values(T)
    return float(s[0]) if len(s) else 0.0


# ---------------------------------------------------------------------------
# Toeplitz compressions


def _fock_s_max(N: int) -> float:
    """Upper limit in ``s = alpha r^2`` beyond which Gamma(N) tails are below 1e-16."""
    return N + 40.0 * math.sqrt(N) + 50.0


def _radial_diagonal(space: SpaceDescriptor, u: Symbol, basis: MonomialBasis, nodes: int) -> np.ndarray:
    """Diagonal of ``T_u`` for radial ``u(z) = g(|z|)``, indexed by ``N = n + |m|``."""
    n = space.n
    Ns = np.arange(n, n + basis.degree + 1)
    x, w = roots_legendre(nodes)
    if space.is_bergman:
        # d_N = N int_0^1 s^{N-1} g(sqrt s) ds
        edges = [0.0] + sorted({b * b for b in u.breakpoints if 0 < b < 1}) + [1.0]
        total = np.zeros(len(Ns), dtype=complex)
        for a, b in zip(edges[:-1], edges[1:]):
            s = 0.5 * (b - a) * x + 0.5 * (b + a)
            ws = 0.5 * (b - a) * w
            g = u.eval_radial_checked(np.sqrt(s))
            logk = np.log(Ns)[:, None] + (Ns[:, None] - 1) * np.log(s)[None, :]
            total += np.exp(logk) @ (ws * g)
        diag = total
    else:
        # d_N = int_0^inf s^{N-1} e^{-s} / (N-1)! g(sqrt(s / alpha)) ds
        alpha = space.alpha
        top = _fock_s_max(int(Ns[-1]))
        edges = [0.0] + sorted({alpha * b * b for b in u.breakpoints if 0 < alpha * b * b < top}) + [top]
        total = np.zeros(len(Ns), dtype=complex)
        for a, b in zip(edges[:-1], edges[1:]):
            s = 0.5 * (b - a) * x + 0.5 * (b + a)
            ws = 0.5 * (b - a) * w
            g = u.eval_radial_checked(np.sqrt(s / alpha))
            logk = (Ns[:, None] - 1) * np.log(s)[None, :] - s[None, :] - gammaln(Ns)[:, None]
            total += np.exp(logk) @ (ws * g)
        diag = total
    return diag[basis.degrees]


def default_toeplitz_rule(space: SpaceDescriptor, D: int, u: Symbol | None = None,
                          radial_nodes: int | None = None, angular_nodes: int | None = None) -> QuadratureRule:
    """Full-dimensional rule adequate for Toeplitz entries up to degree D."""
    breaks = tuple(u.breakpoints) if u is not None else ()
    if space.n == 1:
        ang = angular_nodes or 256
    else:
        ang = angular_nodes or 2 * (2 * D // 2 + 2)
    if space.is_bergman:
        rad = radial_nodes or (400 if space.n == 1 else 100)
        return build_ball_rule(space.n, rad, ang, 1.0, breaks=[b for b in breaks if 0 < b < 1])
    rad = radial_nodes or (200 if space.n == 1 else 100)
    top = math.sqrt(_fock_s_max(D + space.n) / space.alpha)
    return build_plane_rule(space.n, space.alpha, top, rad, ang, breaks=[b for b in breaks if 0 < b < top])


def toeplitz(space: SpaceDescriptor, u: Symbol, D: int, rule: QuadratureRule | None = None, *,
             radial_nodes: int = 400, chunk: int = 16384) -> TruncatedOperator:
    """Toeplitz compression ``M[k, j] = <u e_j, e_k>``.

    Radial symbols (``u.radial`` set) use a one-dimensional rule per
    diagonal entry unless an explicit `rule` is passed; other symbols use
    the full product rule (default: `default_toeplitz_rule`).

    Parameters
    ----------
    space : SpaceDescriptor
    u : Symbol
    D : int
        Truncation degree.
    rule : QuadratureRule, optional
        Ball rule for the Lebesgue measure (Bergman) or plane rule for the
        Gaussian measure with the same alpha (Fock).
    radial_nodes : int
        Gauss-Legendre nodes per panel on the radial fast path.
    chunk : int
        Node block size for the full-dimensional path.
    """
    D = check_positive_int(D, "D", 0)
    basis = monomial_basis(space, D)
    if u.radial is not None and rule is None:
        diag = _radial_diagonal(space, u, basis, radial_nodes)
        return TruncatedOperator(space, D, np.diag(diag), f"toeplitz({u.label})")

    if rule is None:
        rule = default_toeplitz_rule(space, D, u)
    expected = "ball-lebesgue" if space.is_bergman else "plane-gaussian"
    if rule.domain != expected or rule.n != space.n:
        raise DomainError(f"Toeplitz entries need a {expected} rule in dimension {space.n}, got {rule.domain}")
    if not space.is_bergman and float(rule.params["alpha"]) != space.alpha:
        raise DomainError("plane rule alpha differs from the space alpha")
    M = np.zeros((basis.dim, basis.dim), dtype=complex)
    for start in range(0, rule.size, chunk):
        nodes = rule.nodes[start:start + chunk]
        wts = rule.weights[start:start + chunk]
        uv = u.checked(np.broadcast_to(u(user_view(nodes)), wts.shape), nodes)
        A = basis.evaluate(nodes, log_weight=0.5 * np.log(wts))
        M += A.conj().T @ (uv[:, None] * A)
    return TruncatedOperator(space, D, M, f"toeplitz({u.label})")


# ---------------------------------------------------------------------------
# correlations


def _bilinear(T: TruncatedOperator, vz, vw, k=None):
    M = T.matrix if k is None else T.matrix[:k, :k]
    if k is not None:
        vz, vw = vz[..., :k], vw[..., :k]
    return np.einsum("...k,...k->...", vw.conj(), vz @ M.T)


def correlation(T: TruncatedOperator, z, w, return_error: bool = False):
    """``<T k_z, k_w>`` of the compression, from closed-form kernel coefficients.

    With ``return_error`` also returns the a-posteriori truncation bar: the
    change of the value when the compression degree drops to ``2D/3``.
    """
    vz = kernel_coefficients(T.space, z, T.basis)
    vw = kernel_coefficients(T.space, w, T.basis)
    val = _bilinear(T, vz, vw)
    if not return_error:
        return val
    k = T.basis.prefix(sub_degree(T.degree))
    return val, np.abs(val - _bilinear(T, vz, vw, k))


def berezin(T: TruncatedOperator, z, return_error: bool = False):
    """Berezin transform ``<T k_z, k_z>`` of the compression."""
    return correlation(T, z, z, return_error)
