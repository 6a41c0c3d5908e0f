"""Localization integrals, Rudin-Forelli checks, Schur bounds and certificates.

Bergman integrals are taken against the invariant measure after the change
of variables ``w = phi_z(u)``; in ``t = 1 - |u|^2`` the integrand of a
compression behaves exactly like ``t^s`` times a smooth function with
``s = (n+1)(a-1)/2``, which the Gauss-Jacobi boundary panel absorbs. Radial
panels split at ``tanh(r)`` for every requested radius, so all tails are
exact partial sums of one rule. Fock integrals use Lebesgue measure after
``w = z + u``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import hyp2f1, roots_legendre

from ._validation import DomainError, NumericalError, check_finite
from .operators import TruncatedOperator, kernel_coefficients, sub_degree
from .quadrature import QuadratureRule, build_ball_rule, build_plane_rule, pullback
from .spaces import SpaceDescriptor

__all__ = [
    "LocalizationParams",
    "Thresholds",
    "default_z_grid",
    "DEFAULT_RADII",
    "localization_rule",
    "localization_profile",
    "LocalizationProfile",
    "bergman_localization_integral",
    "bergman_localization_tail",
    "fock_localization_integral",
    "fock_localization_tail",
    "RudinForelliResult",
    "rudin_forelli_check",
    "rudin_forelli_tail",
    "SchurBound",
    "schur_bound",
    "LocalizationCertificate",
    "certify",
    "fit_exponential_rate",
]

DEFAULT_RADII = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
BERGMAN_SHELLS = (0.0, 0.3, 0.6, 0.8, 0.9, 0.95)
FOCK_SHELLS = (0.0, 1.0, 2.0, 3.0, 4.0)


@dataclass(frozen=True)
class LocalizationParams:
    """Exponent ``p``, ``0 < delta < min(p, p')`` and the derived exponents.

    ``a_T = 1 - 2 delta / (p' (n+1))`` and ``a_T* = 1 - 2 delta / (p (n+1))``
    must both lie in ``((n-1)/(n+1), 1)``.
    """

    p: float = 2.0
    delta: float = 1.0
    n: int = 1

    def __post_init__(self):
        p, d = float(self.p), float(self.delta)
        if not 1 < p < math.inf:
            raise DomainError(f"p must lie in (1, inf), got {self.p!r}")
        q = p / (p - 1)
        if not 0 < d < min(p, q):
            raise DomainError(f"delta must lie in (0, min(p, p')) = (0, {min(p, q)!r}), got {self.delta!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "delta", d)
        lo = (self.n - 1) / (self.n + 1)
        for a in (self.a_T, self.a_T_star):
            if not lo < a < 1:
                raise DomainError(f"derived exponent {a!r} outside ({lo}, 1)")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1)

    @property
    def a_T(self) -> float:
        return 1.0 - 2.0 * self.delta / (self.p_conj * (self.n + 1))

    @property
    def a_T_star(self) -> float:
        return 1.0 - 2.0 * self.delta / (self.p * (self.n + 1))

    @property
    def kappa(self) -> float:
        """Rudin-Forelli threshold ``2n / (n+1)``."""
        return 2.0 * self.n / (self.n + 1)

    def to_dict(self) -> dict:
        return {"p": self.p, "delta": self.delta, "n": self.n, "a_T": self.a_T, "a_T_star": self.a_T_star}


@dataclass(frozen=True)
class Thresholds:
    """Certificate thresholds: ``full`` on the sup of the integral, ``tail_fraction`` of it for the tail."""

    full: float = 50.0
    tail_fraction: float = 0.05

    def scaled(self, factor: float) -> "Thresholds":
        return Thresholds(self.full * factor, self.tail_fraction * factor)

    def to_dict(self) -> dict:
        return {"full": self.full, "tail_fraction": self.tail_fraction}


def default_z_grid(space: SpaceDescriptor, shells=None, angles: int = 8) -> np.ndarray:
    """Radial shells times equally spaced angles (origin once), shape ``(K, n)``.

    For ``n > 1`` the angles rotate the first coordinate only.
    """
    shells = (BERGMAN_SHELLS if space.is_bergman else FOCK_SHELLS) if shells is None else shells
    pts = []
    for rad in shells:
        if rad == 0:
            pts.append(0j)
            continue
        pts.extend(rad * np.exp(2j * np.pi * np.arange(angles) / angles))
    pts = np.array(pts, dtype=complex)
    out = np.zeros((len(pts), space.n), dtype=complex)
    out[:, 0] = pts
    space.points(out)
    return out


def _angular_default(n: int, one_dim: int) -> int:
    """Angular count per circle: `one_dim` for n = 1, a small torus product for n = 2."""
    return one_dim if n == 1 else 16


def _rf_exponent(n: int, a: float) -> float:
    return 0.5 * (n + 1) * (a - 1.0)


def localization_rule(space: SpaceDescriptor, a: float | None = None, radii=DEFAULT_RADII,
                      radial_nodes: int = 48, angular_nodes: int | None = None,
                      range_R: float | None = None) -> QuadratureRule:
    """Centred rule with panel edges at every tail radius.

    Bergman: invariant measure with a Gauss-Jacobi boundary panel of
    exponent ``(n+1)(a-1)/2``. Fock: Lebesgue measure up to `range_R`
    (default ``max(radii) + 2``, at least 8).
    """
    radii = [float(r) for r in radii if r > 0]
    angular_nodes = angular_nodes or _angular_default(space.n, 256)
    if space.is_bergman:
        if a is None:
            raise DomainError("Bergman localization rules need the exponent a")
        s = _rf_exponent(space.n, a)
        if not s > -1:
            raise DomainError(f"exponent a={a!r} is outside the integrable range ((n-1)/(n+1), inf)")
        return build_ball_rule(space.n, radial_nodes, angular_nodes, 1.0, measure="invariant",
                               boundary_exponent=s, breaks=[math.tanh(r) for r in radii])
    R = max(max(radii, default=6.0) + 2.0, 8.0) if range_R is None else float(range_R)
    return build_plane_rule(space.n, space.alpha, R, radial_nodes, angular_nodes, measure="lebesgue",
                            breaks=[r for r in radii if r < R])


@dataclass(frozen=True)
class LocalizationProfile:
    """Integrals and tails of ``|<T k_z, k_w>|`` weights at a set of centres.

    Arrays have shape ``(num_z, 1 + num_radii)``; column 0 is the full
    integral, column ``i`` the tail outside ``D(z, radii[i-1])``.
    """

    z: np.ndarray = field(repr=False)
    radii: tuple
    values: np.ndarray = field(repr=False)
    quad_error: np.ndarray = field(repr=False)
    trunc_error: np.ndarray = field(repr=False)
    truncation_bound: float = 0.0

    @property
    def full(self) -> np.ndarray:
        return self.values[:, 0]

    def tail(self, i: int) -> np.ndarray:
        return self.values[:, i + 1]

    @property
    def sup(self) -> np.ndarray:
        """Sup over centres of the full integral and each tail."""
        return self.values.max(axis=0)

    @property
    def sup_error(self) -> np.ndarray:
        return (self.quad_error + self.trunc_error).max(axis=0)


def _edge_indices(rule, radii, space):
    edges = np.asarray(rule.panel_edges)
    idx = []
    for r in radii:
        inner = math.tanh(r) if space.is_bergman else r
        if inner <= edges[0]:
            idx.append(0)
            continue
        k = int(np.argmin(np.abs(edges - inner)))
        if abs(edges[k] - inner) > 1e-12:
            raise DomainError(f"radius {r!r} is not a panel edge of the supplied rule")
        idx.append(k)
    return idx


def _centre_sums(T_mats, space, basis, k_sub, z, rule, a):
    """Panel-wise sums for one centre and a list of matrices.

    Returns an array ``(len(T_mats), 3, num_panels)`` holding the fine
    rule, the coarse rule and the degree-``2D/3`` compression.
    """
    w, wt, wc, gap_w = pullback(rule, z, space.n)
    vz = kernel_coefficients(space, z, basis)
    Vw = kernel_coefficients(space, w, basis, gap=gap_w)
    if space.is_bergman:
        gap_z = 1.0 - float(np.sum(np.abs(z) ** 2))
        factor = (gap_w / gap_z) ** (0.5 * a * (space.n + 1))
    else:
        factor = 1.0
    n_panels = len(rule.panel_edges) - 1
    out = np.zeros((len(T_mats), 3, n_panels))
    for i, M in enumerate(T_mats):
        # |conj(Vw) x| = |Vw conj(x)| avoids conjugating the node matrix
        corr = Vw @ (M @ vz).conj()
        sub = Vw[:, :k_sub] @ (M[:k_sub, :k_sub] @ vz[:k_sub]).conj()
        f_full = np.abs(corr) * factor
        f_sub = np.abs(sub) * factor
        check_finite(f_full, "localization integrand", w)
        out[i, 0] = np.bincount(rule.panel, weights=f_full * wt, minlength=n_panels)
        out[i, 1] = np.bincount(rule.panel, weights=f_full * wc, minlength=n_panels)
        out[i, 2] = np.bincount(rule.panel, weights=f_sub * wt, minlength=n_panels)
    return out


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def localization_profile(T: TruncatedOperator, z_points, radii=DEFAULT_RADII, a: float | None = None,
                         rule: QuadratureRule | None = None, adjoint: bool = False,
                         threads: int = 1) -> LocalizationProfile | tuple:
    """Full integrals and tails at each centre.

    Parameters
    ----------
    T : TruncatedOperator
    z_points : array_like
        Centres, shape ``(K, n)`` (or 1-d for ``n = 1``).
    radii : sequence of float
        Tail radii (Bergman metric for the ball, Euclidean for the plane).
    a : float
        Exponent of the Bergman weight ``(||K_z|| / ||K_w||)^a``.
    rule : QuadratureRule, optional
        Centred rule whose panel edges include every radius.
    adjoint : bool
        Also compute the profile of ``T*``; a pair is returned.
    threads : int
        Worker threads for the sweep over centres.
    """
    space = T.space
    pts, _ = space.points(z_points)
    pts = pts.reshape(-1, space.n)
    radii = tuple(float(r) for r in radii)
    if rule is None:
        rule = localization_rule(space, a, radii)
    edge_idx = _edge_indices(rule, radii, space)
    mats = [T.matrix] + ([T.matrix.conj().T] if adjoint else [])
    k_sub = T.basis.prefix(sub_degree(T.degree))
    sums = np.array(_map(lambda z: _centre_sums(mats, space, T.basis, k_sub, z, rule, a), list(pts), threads))
    # sums: (K, mats, 3, panels) -> tails by reverse cumulative sums
    rev = np.cumsum(sums[..., ::-1], axis=-1)[..., ::-1]
    cols = [0] + edge_idx
    vals = rev[..., cols]  # (K, mats, 3, 1 + R)
    profiles = []
    for i in range(len(mats)):
        fine, coarse, sub = vals[:, i, 0], vals[:, i, 1], vals[:, i, 2]
        profiles.append(LocalizationProfile(pts, radii, fine, np.abs(fine - coarse), np.abs(fine - sub),
                                            rule.truncation_bound))
    return tuple(profiles) if adjoint else profiles[0]


def _single(T, z, radius, a, rule, return_error):
    space = T.space
    pts, _ = space.points(z)
    if pts.shape != (space.n,):
        raise DomainError("a single centre is expected")
    radii = () if radius == 0 else (radius,)
    if rule is None:
        rule = localization_rule(space, a, radii)
    else:
        try:
            _edge_indices(rule, radii, space)
        except DomainError:
            inner = math.tanh(radius) if space.is_bergman else radius
            rule = rule.annulus(inner)
            radii = ()
    prof = localization_profile(T, pts[None, :], radii, a, rule)
    col = -1
    val = float(prof.values[0, col])
    if return_error:
        return val, float(prof.quad_error[0, col] + prof.trunc_error[0, col])
    return val


def bergman_localization_integral(T: TruncatedOperator, z, a: float, rule: QuadratureRule | None = None,
                                  return_error: bool = False):
    """``int |<T k_z, k_w>| (||K_z|| / ||K_w||)^a dlambda(w)`` over the ball."""
    _check_a(T.space, a)
    return _single(T, z, 0.0, a, rule, return_error)


def bergman_localization_tail(T: TruncatedOperator, z, r: float, a: float, rule: QuadratureRule | None = None,
                              return_error: bool = False):
    """Same integrand over the complement of the Bergman disk ``D(z, r)``."""
    _check_a(T.space, a)
    if r < 0:
        raise DomainError("tail radius must be nonnegative")
    return _single(T, z, float(r), a, rule, return_error)


def fock_localization_integral(T: TruncatedOperator, z, rule: QuadratureRule | None = None,
                               return_error: bool = False):
    """``int |<T k_z, k_w>| dv(w)`` over the quadrature range."""
    if T.space.is_bergman:
        raise DomainError("Fock localization needs a Fock-space operator")
    return _single(T, z, 0.0, None, rule, return_error)


def fock_localization_tail(T: TruncatedOperator, z, r: float, rule: QuadratureRule | None = None,
                           return_error: bool = False):
    """Same integrand over ``{|w - z| > r}``."""
    if T.space.is_bergman:
        raise DomainError("Fock localization needs a Fock-space operator")
    if r < 0:
        raise DomainError("tail radius must be nonnegative")
    return _single(T, z, float(r), None, rule, return_error)


def _check_a(space, a):
    if not space.is_bergman:
        raise DomainError("Bergman localization needs a Bergman-space operator")
    lo = (space.n - 1) / (space.n + 1)
    if not lo < a < 1:
        raise DomainError(f"exponent a must lie in ({lo}, 1), got {a!r}")


# ---------------------------------------------------------------------------
# Rudin-Forelli


def _rf_values(space, a, pts, rule, radii=()):
    """Rudin-Forelli integrals of the identity correlation at each centre, plus tails and coarse values."""
    n = space.n
    edge_idx = _edge_indices(rule, radii, space)
    out, err = [], []
    for z in pts:
        w, wt, wc, gap_w = pullback(rule, z, n)
        if space.is_bergman:
            gap_z = 1.0 - float(np.sum(np.abs(z) ** 2))
            inner = w @ np.conj(z)
            corr = (gap_z * gap_w) ** (0.5 * (n + 1)) / np.abs(1.0 - inner) ** (n + 1)
            f = corr * (gap_w / gap_z) ** (0.5 * a * (n + 1))
        else:
            f = np.exp(-0.5 * space.alpha * np.sum(np.abs(w - z) ** 2, axis=-1))
        check_finite(f, "Rudin-Forelli integrand", w)
        n_p = len(rule.panel_edges) - 1
        fine = np.cumsum(np.bincount(rule.panel, weights=f * wt, minlength=n_p)[::-1])[::-1]
        coarse = np.cumsum(np.bincount(rule.panel, weights=f * wc, minlength=n_p)[::-1])[::-1]
        cols = [0] + edge_idx
        out.append(fine[cols])
        err.append(np.abs(fine[cols] - coarse[cols]))
    return np.array(out), np.array(err)


def _rf_boundary_sequence(n, a, depths=range(1, 9)):
    """Rudin-Forelli integral at ``1 - |z|^2 = 10^-k`` with the ball truncated at ``1 - |w|^2 >= 10^(-2k-2)``.

    The angular average of ``|1 - <w, z>|^{-(n+1)}`` over the sphere is
    ``2F1(c, c; n; |w|^2 |z|^2)`` with ``c = (n+1)/2``, which reduces the
    integral to one radial dimension, evaluated with Gauss-Legendre panels
    per decade of ``log t``.
    """
    c = 0.5 * (n + 1)
    beta = 0.5 * (n + 1) * (a - 1)
    x, wg = roots_legendre(24)
    vals = []
    for k in depths:
        gap_z = 10.0 ** (-k)
        x2 = 1.0 - gap_z
        lo = -(2 * k + 2) * math.log(10)
        edges = np.linspace(lo, 0.0, 2 * k + 3)
        total = 0.0
        for e0, e1 in zip(edges[:-1], edges[1:]):
            y = 0.5 * (e1 - e0) * x + 0.5 * (e1 + e0)
            t = np.exp(y)
            g = n * (1 - t) ** (n - 1) * t ** beta * hyp2f1(c, c, n, (1 - t) * x2)
            total += float(np.sum(0.5 * (e1 - e0) * wg * g * t))
        vals.append(gap_z ** (-beta) * total)
    return np.array(vals)


@dataclass(frozen=True)
class RudinForelliResult:
    """Outcome of `rudin_forelli_check`."""

    a: float
    values: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)
    sup: float
    refined_sup: float | None
    relative_change: float | None
    stable: bool
    boundary_sequence: np.ndarray = field(repr=False)
    divergent: bool
    truncation_bound: float

    def to_dict(self) -> dict:
        return {
            "a": self.a, "sup": self.sup, "refined_sup": self.refined_sup,
            "relative_change": self.relative_change, "stable": self.stable,
            "divergent": self.divergent, "truncation_bound": self.truncation_bound,
            "values": [float(v) for v in self.values], "errors": [float(e) for e in self.errors],
            "boundary_sequence": [float(v) for v in self.boundary_sequence],
        }


def _as_space(space_or_n, alpha=1.0):
    if isinstance(space_or_n, SpaceDescriptor):
        return space_or_n
    return SpaceDescriptor.bergman(int(space_or_n))


def rudin_forelli_check(space_or_n, a: float = 0.5, z_grid=None, rule: QuadratureRule | None = None,
                        refine: bool = True, resolution=None) -> RudinForelliResult:
    """Evaluate ``int |<k_z, k_w>| (||K_z|| / ||K_w||)^a dlambda(w)`` on a grid of centres.

    Parameters
    ----------
    space_or_n : int or SpaceDescriptor
        Ball dimension, or a Fock space (then `a` is ignored and the integral
        is ``int |<k_z, k_w>| dv``).
    a : float
    z_grid : array_like, optional
        Centres; defaults to the standard shells times 8 angles.
    rule : QuadratureRule, optional
    refine : bool
        Recompute with doubled resolution and report the relative change of the sup.
    resolution : (int, int), optional
        Radial nodes per panel and angular nodes of the ball rule; default
        ``(64, 128)`` for ``n = 1``.

    Returns
    -------
    RudinForelliResult
        ``divergent`` is set when integrals along a boundary-approaching
        sequence keep growing without contraction, which happens for ``a``
        outside ``((n-1)/(n+1), 1)``.
    """
    space = _as_space(space_or_n)
    n = space.n
    pts = default_z_grid(space) if z_grid is None else space.points(z_grid)[0].reshape(-1, n)
    a = float(a)
    rad, ang = resolution or (64, _angular_default(n, 128))
    if space.is_bergman:
        s = _rf_exponent(n, a)
        if rule is None:
            if s > -1:
                rule = build_ball_rule(n, rad, ang, 1.0, measure="invariant", boundary_exponent=s,
                                       breaks=[0.5, 0.9, 0.99, 0.999])
            else:
                # not integrable up to the sphere: truncated rule, flagged below
                rule = build_ball_rule(n, rad, ang, 1.0 - 1e-6, measure="invariant",
                                       breaks=[0.5, 0.9, 0.99, 0.999])
    elif rule is None:
        rule = localization_rule(space, None, ())
    vals, errs = _rf_values(space, a, pts, rule)
    vals, errs = vals[:, 0], errs[:, 0]
    sup = float(vals.max())
    refined = rel = None
    stable = True
    if refine:
        r2 = rule.refined(2)
        refined = float(_rf_values(space, a, pts, r2)[0][:, 0].max())
        rel = abs(refined - sup) / max(abs(refined), 1e-300)
        stable = rel <= 0.01
    if space.is_bergman:
        seq = _rf_boundary_sequence(n, a)
        inc = np.diff(seq)
        ratios = inc[1:] / np.where(inc[:-1] != 0, inc[:-1], np.inf)
        growing = inc[-1] > 1e-9 * abs(seq[-1])
        divergent = bool(growing and np.all(ratios[-2:] >= 0.995)) or not np.isfinite(seq).all()
        divergent = divergent or not (_rf_exponent(n, a) > -1) and growing
    else:
        seq = np.array([])
        divergent = False
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite Rudin-Forelli value")
    return RudinForelliResult(a, vals, errs, sup, refined, rel, stable, seq, divergent, rule.truncation_bound)


def rudin_forelli_tail(space_or_n, a: float = 0.5, R_list=DEFAULT_RADII, z_grid=None,
                       rule: QuadratureRule | None = None):
    """Sup over centres of the Rudin-Forelli tail outside ``D(z, R)`` for each R.

    Returns a list of ``(R, sup_tail, error_bar)`` starting with ``R = 0``
    (the full integral).
    """
    space = _as_space(space_or_n)
    n = space.n
    pts = default_z_grid(space) if z_grid is None else space.points(z_grid)[0].reshape(-1, n)
    radii = tuple(float(r) for r in R_list if r > 0)
    if rule is None:
        if space.is_bergman:
            rule = build_ball_rule(n, 48, _angular_default(n, 256), 1.0, measure="invariant",
                                   boundary_exponent=_rf_exponent(n, a),
                                   breaks=[math.tanh(r) for r in radii])
        else:
            rule = localization_rule(space, None, radii)
    vals, errs = _rf_values(space, float(a), pts, rule, radii)
    sup = vals.max(axis=0)
    err = errs.max(axis=0) + rule.truncation_bound
    return [(0.0, float(sup[0]), float(err[0]))] + [(r, float(v), float(e)) for r, v, e in
                                                      zip(radii, sup[1:], err[1:])]


# ---------------------------------------------------------------------------
# Schur test


@dataclass(frozen=True)
class SchurBound:
    """Two Schur integrals and the bound they give.

    ``row = sup_z int k(z, w) h(w)^{p'} dmu(w) / h(z)^{p'}`` and
    ``col = sup_w int k(z, w) h(z)^p dmu(z) / h(w)^p``; ``value`` is their
    maximum and ``norm_bound = row^{1/p'} col^{1/p}`` bounds the operator norm on ``L^p``.
    """

    value: float
    row: float
    col: float
    norm_bound: float

    def to_dict(self) -> dict:
        return {"value": self.value, "row": self.row, "col": self.col, "norm_bound": self.norm_bound}


def schur_bound(kernel, h, rule: QuadratureRule, p: float = 2.0, points=None, centered: bool = False,
                threads: int = 1) -> SchurBound:
    """Schur test for a nonnegative kernel on the measure of `rule`.

    Parameters
    ----------
    kernel : callable
        ``kernel(z, W)`` for one point `z` (shape ``(n,)``) and nodes `W`
        (shape ``(N, n)``), returning ``N`` nonnegative values.
    h : callable
        Positive test function on arrays of points ``(N, n)``.
    rule : QuadratureRule
    p : float
    points : array_like, optional
        Where the suprema are taken; defaults to the rule nodes (which makes
        the bound dominate the norm of the node-discretized operator).
    centered : bool
        Treat `rule` as centred at the origin and move it to each point (Möbius
        map for the ball, translation for the plane) before integrating.
    """
    p = float(p)
    q = p / (p - 1)
    n = rule.n
    pts = rule.nodes if points is None else np.asarray(points, dtype=complex).reshape(-1, n)

    def nodes_at(z):
        if centered:
            w, wt, _, _ = pullback(rule, z, n)
            return w, wt
        return rule.nodes, rule.weights

    def one(z):
        w, wt = nodes_at(z)
        hz = float(np.asarray(h(z[None, :]))[0])
        hw = np.asarray(h(w), dtype=float)
        if hz <= 0 or np.any(hw <= 0):
            raise DomainError("Schur test function must be positive at every node")
        k_row = np.asarray(kernel(z, w), dtype=float)
        k_col = np.asarray(_transpose(kernel)(z, w), dtype=float)
        if np.any(k_row < 0) or np.any(k_col < 0):
            raise DomainError("Schur kernel must be nonnegative")
        row = float(np.sum(k_row * hw ** q * wt)) / hz ** q
        col = float(np.sum(k_col * hw ** p * wt)) / hz ** p
        return row, col

    res = np.array(_map(one, list(pts), threads)).reshape(-1, 2)
    row, col = (float(res[:, 0].max()), float(res[:, 1].max())) if len(res) else (0.0, 0.0)
    return SchurBound(max(row, col), row, col, row ** (1 / q) * col ** (1 / p))


def _transpose(kernel):
    if hasattr(kernel, "transpose"):
        return kernel.transpose
    return lambda z, W: np.array([float(np.asarray(kernel(wi, z[None, :])).ravel()[0]) for wi in W])


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class LocalizationCertificate:
    """Numerical weak-localization evidence for a compression and its adjoint."""

    provenance: str
    space: SpaceDescriptor
    params: LocalizationParams | None
    radii: tuple
    z_grid: np.ndarray = field(repr=False)
    full_sup: float = 0.0
    tail_profile: tuple = ()
    full_sup_T: float = 0.0
    full_sup_T_star: float = 0.0
    tail_profile_T: tuple = ()
    tail_profile_T_star: tuple = ()
    error_bars: tuple = ()
    thresholds: Thresholds = Thresholds()
    passed_T: bool = False
    passed_T_star: bool = False
    quadrature: dict = field(default_factory=dict)
    degree: int = 0

    @property
    def passed(self) -> bool:
        return self.passed_T and self.passed_T_star

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "space": self.space.to_dict(),
            "degree": self.degree,
            "params": None if self.params is None else self.params.to_dict(),
            "radii": list(self.radii),
            "z_grid": [[[float(c.real), float(c.imag)] for c in z] for z in self.z_grid],
            "full_sup": self.full_sup,
            "full_sup_T": self.full_sup_T,
            "full_sup_T_star": self.full_sup_T_star,
            "tail_profile": [list(t) for t in self.tail_profile],
            "tail_profile_T": [list(t) for t in self.tail_profile_T],
            "tail_profile_T_star": [list(t) for t in self.tail_profile_T_star],
            "thresholds": self.thresholds.to_dict(),
            "passed": self.passed,
            "passed_T": self.passed_T,
            "passed_T_star": self.passed_T_star,
            "quadrature": self.quadrature,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def tail_csv(self) -> str:
        """Plot-ready profile (``shell_or_r, value, error_bar``); ``r = 0`` is the full integral."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["shell_or_r", "value", "error_bar"])
        for r, v, e in self.tail_profile:
            wr.writerow([repr(float(r)), repr(float(v)), repr(float(e))])
        return buf.getvalue()


def _passes(full_sup, tails, thr):
    if not full_sup < thr.full:
        return False
    return any(t <= thr.tail_fraction * full_sup for t in tails)


def certify(T: TruncatedOperator, params: LocalizationParams | None = None, r_list=DEFAULT_RADII,
            z_grid=None, rule: QuadratureRule | None = None, thresholds: Thresholds | None = None,
            resolution: dict | None = None, threads: int = 1) -> LocalizationCertificate:
    """Check the weak-localization conditions for `T` and its adjoint on a grid.

    Bergman: ``T`` uses exponent ``a_T`` and ``T*`` uses ``a_T*``. Fock: plain
    Lebesgue integrals of the correlations. The certificate passes when, for
    both operators, the sup of the full integral stays below
    ``thresholds.full`` and the sup of the tail drops to at most
    ``thresholds.tail_fraction`` times that sup at some radius in `r_list`.

    Parameters
    ----------
    resolution : dict, optional
        ``{"radial_nodes": ..., "angular_nodes": ...}`` for the centred rules.
    """
    space = T.space
    thr = thresholds or Thresholds()
    radii = tuple(float(r) for r in r_list)
    pts = default_z_grid(space) if z_grid is None else space.points(z_grid)[0].reshape(-1, space.n)
    res = dict(resolution or {})
    if space.is_bergman:
        params = params or LocalizationParams(space.p, 1.0, space.n)
        if params.n != space.n:
            raise DomainError("localization params and space disagree on the dimension")
        if abs(params.a_T - params.a_T_star) < 1e-15:
            rl = rule or localization_rule(space, params.a_T, radii, **res)
            prof_T, prof_S = localization_profile(T, pts, radii, params.a_T, rl, adjoint=True, threads=threads)
            rules = [rl]
        else:
            rl_T = rule or localization_rule(space, params.a_T, radii, **res)
            rl_S = rule or localization_rule(space, params.a_T_star, radii, **res)
            prof_T = localization_profile(T, pts, radii, params.a_T, rl_T, threads=threads)
            prof_S = localization_profile(T.adjoint(), pts, radii, params.a_T_star, rl_S, threads=threads)
            rules = [rl_T, rl_S]
    else:
        params = None
        rl = rule or localization_rule(space, None, radii, **res)
        prof_T, prof_S = localization_profile(T, pts, radii, None, rl, adjoint=True, threads=threads)
        rules = [rl]

    def table(prof):
        sup, err = prof.sup, prof.sup_error + prof.truncation_bound
        return tuple((r, float(v), float(e)) for r, v, e in zip((0.0,) + radii, sup, err))

    tab_T, tab_S = table(prof_T), table(prof_S)
    combined = tuple((r, max(v1, v2), max(e1, e2)) for (r, v1, e1), (_, v2, e2) in zip(tab_T, tab_S))
    full_T, full_S = tab_T[0][1], tab_S[0][1]
    quad = {"rules": [rl.to_dict() for rl in rules], "degree": T.degree,
            "truncation_bar": "change of the value under compression to degree round(2D/3)"}
    return LocalizationCertificate(
        provenance=T.provenance, space=space, params=params, radii=radii, z_grid=pts,
        full_sup=max(full_T, full_S), tail_profile=combined,
        full_sup_T=full_T, full_sup_T_star=full_S, tail_profile_T=tab_T, tail_profile_T_star=tab_S,
        error_bars=tuple(e for _, _, e in combined), thresholds=thr,
        passed_T=_passes(full_T, [v for _, v, _ in tab_T[1:]], thr),
        passed_T_star=_passes(full_S, [v for _, v, _ in tab_S[1:]], thr),
        quadrature=quad, degree=T.degree,
    )


def fit_exponential_rate(radii, values, lo: float = 1.0, hi: float = 6.0) -> float:
    """Least-squares rate ``c`` in ``values ~ C exp(-c r)`` over ``lo <= r <= hi``."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = (r >= lo) & (r <= hi) & (v > 0)
    if sel.sum() < 2:
        raise DomainError("need at least two positive values in the fitting window")
    slope, _ = np.polyfit(r[sel], np.log(v[sel]), 1)
    return float(-slope)
