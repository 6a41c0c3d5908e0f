"""Compactness diagnostics for truncated operators.

Everything here is measured on the compression ``P_D T P_D``; the
quantities are consistency checks at a recorded resolution, never proofs.
Kernel correlations near the boundary carry the truncation bar of
`rkcompact.operators.correlation` (change under compression to degree
``round(2D/3)``).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._validation import DomainError, check_finite
from .geometry import Covering, bergman_metric, build_covering, euclidean_distance, mobius
from .kernels import (correlation_closed_form, kernel_eval, kernel_norm, log_kernel_norm, p_normalized_kernel,
                      user_view)
from .localization import (BERGMAN_SHELLS, DEFAULT_RADII, FOCK_SHELLS, LocalizationCertificate,
                           LocalizationParams, SchurBound, Thresholds, certify, default_z_grid,
                           localization_rule, schur_bound)
from .operators import TruncatedOperator, _multi_indices, correlation, kernel_coefficients, sub_degree
from .quadrature import build_ball_rule, build_plane_rule
from .spaces import SpaceDescriptor

__all__ = [
    "TAU_B",
    "TAU_E",
    "TAU_NC",
    "REFUSE_RATIO",
    "essential_norm_proxy",
    "MeasuredValue",
    "theorem_rhs",
    "BerezinProfile",
    "berezin_boundary_profile",
    "DecompositionError",
    "decomposition_error",
    "EquivalenceProbe",
    "equivalence_probe",
    "ReportConfig",
    "CompactnessReport",
    "compactness_report",
    "verdict",
    "profile_csv",
    "random_ball_points",
    "kernel_identity_suite",
    "reproducing_error",
]

TAU_B = 0.05
TAU_E = 0.1
TAU_NC = 0.5
# a shell is refused when its truncation bar exceeds this fraction of the value
REFUSE_RATIO = 0.1


def profile_csv(rows, header=("shell_or_r", "value", "error_bar")) -> str:
    """Plot-ready CSV text with LF line endings and round-trip float formatting."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(list(header))
    for row in rows:
        wr.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def _default_shells(space: SpaceDescriptor):
    return BERGMAN_SHELLS if space.is_bergman else FOCK_SHELLS


def _shell_points(space: SpaceDescriptor, shell: float, angles: int) -> np.ndarray:
    return default_z_grid(space, [float(shell)], angles)


# ---------------------------------------------------------------------------
# identity suite


def random_ball_points(rng: np.random.Generator, size: int, n: int, radius: float = 1.0) -> np.ndarray:
    """Uniform points in the Euclidean ball of `radius` in ``C^n``, shape ``(size, n)``."""
    v = rng.standard_normal((size, n)) + 1j * rng.standard_normal((size, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    rad = radius * rng.random(size) ** (1.0 / (2 * n))
    return v * rad[:, None]


def _check(name, err, tol):
    err = float(err)
    return {"check": name, "max_error": err, "tolerance": tol, "passed": bool(err <= tol)}


def reproducing_error(space: SpaceDescriptor, degree: int, pts: np.ndarray) -> float:
    """Max over monomials of degree <= `degree` of ``|int f conj(K_z) dmu - f(z)|``."""
    n = space.n
    if space.is_bergman:
        rule = build_ball_rule(n, 60 if n == 1 else 20, 64 if n == 1 else 32, 1.0)
    else:
        rule = build_plane_rule(n, space.alpha, 6.0 + 12.0 / math.sqrt(space.alpha), 120 if n == 1 else 40,
                                64 if n == 1 else 32)
    idx = _multi_indices(n, degree)
    W = rule.nodes
    mono_w = np.prod(W[:, None, :] ** idx[None, :, :], axis=-1)  # (N, M)
    worst = 0.0
    for z in pts:
        Kz = kernel_eval(space, z if n > 1 else z[0], user_view(W))
        lhs = (np.conj(Kz) * rule.weights) @ mono_w
        rhs = np.prod(z[None, :] ** idx, axis=-1)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def kernel_identity_suite(space: SpaceDescriptor, pairs: int = 1000, points: int = 20, degree: int = 10,
                          seed: int = 0) -> list:
    """Closed-form identities of the kernels and the automorphisms on seeded random samples.

    Returns a list of ``{"check", "max_error", "tolerance", "passed"}``.
    Ball: ``|<k_z, k_w>| ||K_{phi_z(w)}|| = 1``, the involution
    ``phi_z(phi_z(w)) = w``, the endpoints of ``phi_z``, symmetry of the
    Bergman metric. Plane: ``|<k_z, k_w>| = exp(-alpha |z - w|^2 / 2)``.
    Both: ``K_z(z) = ||K_z||^2`` and the reproducing property for
    monomials of degree ``<= degree`` at `points` interior points.
    """
    rng = np.random.default_rng(seed)
    n = space.n
    out = []
    if space.is_bergman:
        Z = random_ball_points(rng, pairs, n, 0.9)
        W = random_ball_points(rng, pairs, n, 0.9)
        corr = np.abs(correlation_closed_form(space, Z, W))
        phi = mobius(Z, W, n).reshape(-1, n)
        nk = kernel_norm(space, phi)
        out.append(_check("kernel_mobius_identity", np.max(np.abs(corr * nk - 1.0)), 1e-10))
        back = mobius(Z, phi, n).reshape(-1, n)
        out.append(_check("mobius_involution", np.max(np.abs(back - W)), 1e-10))
        ends = max(np.max(np.abs(mobius(Z, np.zeros_like(Z), n).reshape(-1, n) - Z)),
                   np.max(np.abs(mobius(Z, Z, n))))
        out.append(_check("mobius_endpoints", ends, 1e-12))
        out.append(_check("bergman_metric_symmetry", np.max(np.abs(bergman_metric(Z, W, n) - bergman_metric(W, Z, n))), 1e-10))
        # the sphere rule for n > 1 is a product rule; keep its angular demand modest
        pts = random_ball_points(rng, points, n, 0.7 if n == 1 else 0.5)
    else:
        Z = random_ball_points(rng, pairs, n, 4.0)
        W = random_ball_points(rng, pairs, n, 4.0)
        corr = np.abs(correlation_closed_form(space, Z, W))
        ref = np.exp(-0.5 * space.alpha * np.sum(np.abs(Z - W) ** 2, axis=-1))
        out.append(_check("kernel_translation_identity", np.max(np.abs(corr - ref)), 1e-10))
        pts = random_ball_points(rng, points, n, (1.5 if n == 1 else 1.0) / math.sqrt(space.alpha))
    diag = kernel_eval(space, Z, Z)
    nk2 = kernel_norm(space, Z) ** 2
    out.append(_check("kernel_diagonal_norm", np.max(np.abs(diag.real / nk2 - 1.0)), 1e-12))
    out.append(_check("reproducing_property", reproducing_error(space, degree, pts), 1e-6))
    return out


# ---------------------------------------------------------------------------
# essential norm proxy


def essential_norm_proxy(T: TruncatedOperator, m: int | None = None) -> float:
    """``max(||T Q_m||, ||Q_m T||)`` with ``Q_m`` the projection onto degrees ``>= m``.

    Parameters
    ----------
    T : TruncatedOperator
    m : int, optional
        Cut-off degree, default ``round(2D/3)``; must satisfy ``0 <= m <= D``.

    Examples
    --------
    >>> from rkcompact.operators import identity
    >>> essential_norm_proxy(identity(SpaceDescriptor.bergman(), 10), 5)
    1.0
    """
    m = sub_degree(T.degree) if m is None else m
    if isinstance(m, bool) or int(m) != m or not 0 <= int(m) <= T.degree:
        raise DomainError(f"cut-off degree m must be an integer in [0, {T.degree}], got {m!r}")
    tail = T.basis.degrees >= int(m)
    M = T.matrix
    return max(_spectral_norm(M[:, tail]), _spectral_norm(M[tail, :]))


def _spectral_norm(A: np.ndarray) -> float:
    return float(scipy.linalg.svdvals(A)[0]) if A.size else 0.0


# ---------------------------------------------------------------------------
# sup of correlations near the boundary


@dataclass(frozen=True)
class MeasuredValue:
    """A measured quantity with its error bar and where it was attained."""

    value: float
    error_bar: float
    z: complex | tuple = 0j
    w: complex | tuple = 0j

    def to_dict(self) -> dict:
        return {"value": self.value, "error_bar": self.error_bar,
                "z": _point_json(self.z), "w": _point_json(self.w)}


def _point_json(p):
    arr = np.atleast_1d(np.asarray(p, dtype=complex))
    return [[float(c.real), float(c.imag)] for c in arr]


def _directions(n: int, angular: int) -> np.ndarray:
    """Unit vectors in ``C^n``: equally spaced phases for n = 1, a fixed seeded set otherwise."""
    if n == 1:
        return np.exp(2j * np.pi * np.arange(angular) / angular)[:, None]
    rng = np.random.default_rng(12345)
    v = rng.standard_normal((angular, n)) + 1j * rng.standard_normal((angular, n))
    v = np.concatenate([np.eye(n, dtype=complex), v])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _disk_offsets(space: SpaceDescriptor, r: float, disk) -> np.ndarray:
    """Offsets ``u`` with ``|u| <= tanh r`` (ball) or ``|u| <= r`` (plane), origin included."""
    radial, angular = disk
    top = math.tanh(r) if space.is_bergman else r
    radii = top * np.arange(1, radial + 1) / radial
    dirs = _directions(space.n, angular)
    u = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, space.n)
    return np.concatenate([np.zeros((1, space.n), dtype=complex), u])


def _disk_around(space: SpaceDescriptor, z: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    if space.is_bergman:
        w = mobius(z, offsets, space.n)
        return w[:, None] if space.n == 1 else w
    return z[None, :] + offsets


def _p_correlations(T: TruncatedOperator, z, W, p: float):
    """``|<T k_z^(p), k_w^(p')>|`` (Bergman) or ``|<T k_z, k_w>|`` (Fock) with truncation bars."""
    space = T.space
    val, err = correlation(T, user_view(z[None, :])[0] if space.n == 1 else z, user_view(W), True)
    val, err = np.abs(val), np.asarray(err)
    if space.is_bergman and p != 2.0:
        e = 2.0 / p - 1.0
        scale = np.exp(e * (float(log_kernel_norm(space, z)) - log_kernel_norm(space, W)))
        val, err = val * scale, err * scale
    return val, err


def _shell_sup(T, shell, r, p, angles, disk):
    space = T.space
    offs = _disk_offsets(space, r, disk)
    best, bar, where = -1.0, 0.0, (0j, 0j)
    for z in _shell_points(space, shell, angles):
        W = _disk_around(space, z, offs)
        val, err = _p_correlations(T, z, W, p)
        check_finite(val, "kernel correlation", W)
        i = int(np.argmax(val))
        bar = max(bar, float(err.max()))
        if val[i] > best:
            best, where = float(val[i]), (_as_point(z), _as_point(W[i]))
    return MeasuredValue(best, bar, *where)


def _as_point(p):
    p = np.asarray(p, dtype=complex)
    return complex(p[0]) if p.shape == (1,) else tuple(complex(c) for c in p)


def theorem_rhs(T: TruncatedOperator, r: float = 1.0, shells=None, p: float | None = None,
                angles: int = 8, disk=(6, 16)) -> MeasuredValue:
    """Sup of kernel correlations over ``w in D(z, r)`` for ``z`` on the outermost shell.

    Bergman: ``|<T k_z^(p), k_w^(p')>|`` with p-normalized kernels; Fock:
    ``|<T k_z, k_w>|``. The disk ``D(z, r)`` is sampled as the image of a
    polar grid (``disk = (radial, angular)`` counts) under ``phi_z``
    (ball) or the translation by ``z`` (plane).

    Returns
    -------
    MeasuredValue
        The sup, the largest truncation bar over the sampled pairs, and the
        maximizing pair.
    """
    space = T.space
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    shells = _default_shells(space) if shells is None else tuple(float(s) for s in shells)
    if not shells:
        raise DomainError("need at least one shell")
    p = space.p if p is None else float(p)
    return _shell_sup(T, max(shells), float(r), p, angles, disk)


# ---------------------------------------------------------------------------
# Berezin profile


@dataclass(frozen=True)
class BerezinProfile:
    """Per-shell sup of ``|T~(z)|`` over angular samples, with truncation bars.

    A shell is refused when its bar exceeds ``REFUSE_RATIO`` times the value.
    """

    shells: tuple
    values: tuple
    error_bars: tuple
    refused: tuple

    @property
    def rows(self):
        return tuple(zip(self.shells, self.values, self.error_bars))

    @property
    def outermost(self) -> tuple:
        i = int(np.argmax(self.shells))
        return self.shells[i], self.values[i], self.error_bars[i], self.refused[i]

    def to_dict(self) -> dict:
        return {"shells": list(self.shells), "values": list(self.values),
                "error_bars": list(self.error_bars), "refused": list(self.refused)}

    def csv(self) -> str:
        return profile_csv(self.rows)


def _refused(value, bar):
    return bool(bar > REFUSE_RATIO * value and bar > 1e-14)


def berezin_boundary_profile(T: TruncatedOperator, shells=None, angles: int = 8) -> BerezinProfile:
    """Sup of ``|<T k_z, k_z>|`` over ``angles`` points on each shell.

    Examples
    --------
    >>> from rkcompact.operators import identity
    >>> prof = berezin_boundary_profile(identity(SpaceDescriptor.bergman(), 40), [0.0, 0.5])
    >>> [round(v, 12) for v in prof.values]
    [1.0, 1.0]
    """
    space = T.space
    shells = _default_shells(space) if shells is None else tuple(float(s) for s in shells)
    vals, bars = [], []
    for s in shells:
        pts = user_view(_shell_points(space, s, angles))
        v, e = correlation(T, pts, pts, True)
        vals.append(float(np.max(np.abs(v))))
        bars.append(float(np.max(e)))
    return BerezinProfile(tuple(shells), tuple(vals), tuple(bars),
                          tuple(_refused(v, e) for v, e in zip(vals, bars)))


# ---------------------------------------------------------------------------
# localized decomposition defect


class _DefectKernel:
    """``k(z, w) = 1[d(z, w) > r] |<T K_w, K_z>|`` against ``dv``, evaluated in scaled form.

    Bergman nodes come from an invariant-measure rule, so the factor
    ``dv / dlambda = (1 - |w|^2)^(n+1)`` is folded in. Fock kernels act on
    ``L^p(dv)`` after the isometry ``f -> f e^{-alpha |z|^2 / 2}``, which
    turns the integral kernel into ``|<T k_w, k_z>|``.
    """

    def __init__(self, T: TruncatedOperator, r: float):
        self.T = T
        self.r = float(r)
        self.space = T.space

    def _values(self, M, z, W):
        space = self.space
        vz = kernel_coefficients(space, z, self.T.basis)[0]
        if space.is_bergman:
            gap_w = 1.0 - np.sum(np.abs(W) ** 2, axis=-1)
            Vw = kernel_coefficients(space, W, self.T.basis, gap=gap_w)
            corr = np.abs(Vw @ (M @ vz).conj())
            log_scale = float(log_kernel_norm(space, z).ravel()[0]) + 0.5 * (space.n + 1) * np.log(gap_w)
            out = corr * np.exp(log_scale)
            far = bergman_metric(z, W, space.n) > self.r
        else:
            Vw = kernel_coefficients(space, W, self.T.basis)
            out = np.abs(Vw @ (M @ vz).conj())
            far = euclidean_distance(z, W, space.n) > self.r
        return np.where(far, out, 0.0)

    def __call__(self, z, W):
        # |<T K_w, K_z>| = |<T* K_z, K_w>|
        return self._values(self.T.matrix.conj().T, z[None, :], W)

    def transpose(self, z, W):
        return self._values(self.T.matrix, z[None, :], W)


def _schur_weight(space: SpaceDescriptor, params: LocalizationParams):
    if not space.is_bergman:
        return lambda W: np.ones(len(W))
    c = 2.0 * params.delta / (params.p * params.p_conj * (space.n + 1))

    def h(W):
        r2 = np.sum(np.abs(W) ** 2, axis=-1)
        return np.exp(-0.5 * c * (space.n + 1) * np.log1p(-r2))
    return h


def _test_functions(space: SpaceDescriptor, p: float):
    n = space.n

    def first(z):
        return np.asarray(z)[..., 0]

    if space.is_bergman:
        centres = (0.5, 0.8j, -0.9)
        funcs = [("1", lambda z: np.ones(len(z), dtype=complex)), ("z^2", lambda z: first(z) ** 2)]
    else:
        centres = (1.0, 2.0j, -3.0)
        funcs = [("1", lambda z: np.ones(len(z), dtype=complex)), ("z", first)]
    for c in centres:
        pt = np.zeros(n, dtype=complex)
        pt[0] = c
        kv = p_normalized_kernel(space, pt if n > 1 else c, p)
        funcs.append((f"k^(p)_{c}", lambda z, kv=kv: kv(z if n > 1 else z[:, 0])))
    return funcs


@dataclass(frozen=True)
class DecompositionError:
    """Schur bound of the decomposition defect and the test-function defect ratios."""

    r: float
    schur: SchurBound
    ratios: tuple = ()
    region: dict = field(default_factory=dict)

    @property
    def bound(self) -> float:
        return self.schur.norm_bound

    @property
    def max_ratio(self) -> float:
        return max((q for _, q in self.ratios), default=0.0)

    def to_dict(self) -> dict:
        return {"r": self.r, "bound": self.bound, "schur": self.schur.to_dict(),
                "test_ratios": [{"f": name, "ratio": q} for name, q in self.ratios],
                "max_ratio": self.max_ratio, "region": self.region}


def _region_rule(space: SpaceDescriptor, size: float, resolution):
    rad, ang = resolution
    if space.is_bergman:
        return build_ball_rule(space.n, rad, ang, math.tanh(size), measure="lebesgue")
    return build_plane_rule(space.n, space.alpha, size, rad, ang, measure="lebesgue")


def _cell_distance(space, nodes, cell_of):
    """``d(w_l, F_j)`` approximated by the minimum over region nodes lying in ``F_j``."""
    dist_fn = bergman_metric if space.is_bergman else euclidean_distance
    order = np.argsort(cell_of, kind="stable")
    cells, starts = np.unique(cell_of[order], return_index=True)
    d = dist_fn(nodes[order][:, None, :], nodes[None, :, :], space.n)
    per_cell = np.minimum.reduceat(d, starts, axis=0)
    lookup = np.searchsorted(cells, cell_of)
    return per_cell[lookup]


def _test_ratios(T: TruncatedOperator, covering: Covering, p: float, size: float, resolution):
    space = T.space
    rule = _region_rule(space, size, resolution)
    Z, wt = rule.nodes, rule.weights
    member = covering.membership(user_view(Z) if space.n == 1 else Z)
    if not np.all(member.any(axis=1)):
        raise DomainError("the covering does not contain the test region; enlarge its region")
    cell_of = np.argmax(member, axis=1)
    far = _cell_distance(space, Z, cell_of) >= covering.r
    V = kernel_coefficients(space, Z, T.basis)
    # K[i, l] = <T k_{w_l}, k_{z_i}>
    K = V.conj() @ T.matrix @ V.T
    if space.is_bergman:
        lk = log_kernel_norm(space, Z)
        K = K * np.exp(lk[:, None] + lk[None, :])
        weight_f = np.ones(len(Z))
    else:
        weight_f = np.exp(-0.5 * space.alpha * np.sum(np.abs(Z) ** 2, axis=-1))
    S = np.where(far, K, 0.0) * wt[None, :]
    out = []
    for name, f in _test_functions(space, p):
        g = np.asarray(f(Z), dtype=complex) * weight_f
        Sg = S @ g
        num = np.sum(np.abs(Sg) ** p * wt) ** (1 / p)
        den = np.sum(np.abs(g) ** p * wt) ** (1 / p)
        out.append((name, float(num / den)))
    return tuple(out)


def decomposition_error(T: TruncatedOperator, covering: Covering, params: LocalizationParams | None = None,
                        *, z_grid=None, resolution=(32, 128), test_functions: bool = True,
                        region: float | None = None, region_resolution=(40, 64),
                        threads: int = 1) -> DecompositionError:
    """Bound on the norm of the defect ``TP - sum_j M_{1_F_j} T P M_{1_G_j}``.

    The defect is an integral operator whose kernel is supported where
    ``w`` lies outside the ``r``-enlargement of the cell containing ``z``, so
    it is dominated by ``1[d(z, w) > r] |<T K_w, K_z>|``. Its Schur bound
    uses ``h(w) = ||K_w||^{2 delta / (p p' (n+1))}`` on the ball and
    ``h = 1`` on the plane, with suprema over `z_grid`.

    With ``test_functions`` the defect operator of the actual covering is
    discretized on a region (Bergman radius 2, Euclidean radius 4 by
    default) and applied to five fixed functions; their ``L^p`` ratios
    ``||Sf|| / ||f||`` are reported.

    Parameters
    ----------
    resolution : (int, int)
        Radial nodes per panel and angular nodes of the centred Schur rule.
    region_resolution : (int, int)
        Radial and angular nodes of the test-region rule.
    """
    space = T.space
    if covering.space.family != space.family or covering.space.n != space.n:
        raise DomainError("covering and operator live on different spaces")
    r = float(covering.r)
    if space.is_bergman:
        params = params or LocalizationParams(space.p, 1.0, space.n)
        p = params.p
    else:
        p = space.p
    pts = default_z_grid(space) if z_grid is None else space.points(z_grid)[0].reshape(-1, space.n)
    kernel = _DefectKernel(T, r)
    h = _schur_weight(space, params) if space.is_bergman else _schur_weight(space, None)
    rad, ang = resolution
    if space.is_bergman:
        rule_row = localization_rule(space, params.a_T_star, (r,), rad, ang)
        sb = schur_bound(kernel, h, rule_row, p, points=pts, centered=True, threads=threads)
        if abs(params.a_T - params.a_T_star) > 1e-15:
            rule_col = localization_rule(space, params.a_T, (r,), rad, ang)
            sc = schur_bound(kernel, h, rule_col, p, points=pts, centered=True, threads=threads)
            q = p / (p - 1)
            sb = SchurBound(max(sb.row, sc.col), sb.row, sc.col, sb.row ** (1 / q) * sc.col ** (1 / p))
    else:
        rule = localization_rule(space, None, (r,), rad, ang, range_R=max(r + 8.0, 10.0))
        sb = schur_bound(kernel, h, rule, p, points=pts, centered=True, threads=threads)
    ratios = ()
    size = (2.0 if space.is_bergman else 4.0) if region is None else float(region)
    if test_functions:
        ratios = _test_ratios(T, covering, p, size, region_resolution)
    reg = {"metric": covering.metric, "radius": size, "resolution": list(region_resolution),
           "schur_resolution": [rad, ang]}
    return DecompositionError(r, sb, ratios, reg)


# ---------------------------------------------------------------------------
# equivalence probe


@dataclass(frozen=True)
class EquivalenceProbe:
    """Boundary profiles of the three quantities that vanish together.

    (a) sup over ``r`` in `r_list` of the correlation sup on ``D(z, r)``;
    (b) the same for one fixed radius; (c) the Berezin sup. Each row is
    ``(shell, a, a_err, b, b_err, c, c_err)``.
    """

    r_list: tuple
    fixed_r: float
    rows: tuple

    def at_shell(self, shell: float) -> tuple:
        for row in self.rows:
            if abs(row[0] - shell) < 1e-12:
                return row
        raise DomainError(f"shell {shell!r} was not probed")

    def to_dict(self) -> dict:
        keys = ("shell", "a", "a_error", "b", "b_error", "c", "c_error")
        return {"r_list": list(self.r_list), "fixed_r": self.fixed_r,
                "rows": [dict(zip(keys, row)) for row in self.rows]}

    def csv(self) -> str:
        return profile_csv(self.rows, ("shell", "a", "a_error_bar", "b", "b_error_bar", "c", "c_error_bar"))


def equivalence_probe(T: TruncatedOperator, r_list=(0.5, 1.0, 2.0), shells=None, fixed_r: float = 1.0,
                      p: float | None = None, angles: int = 8, disk=(6, 16)) -> EquivalenceProbe:
    """Quantities (a), (b), (c) per shell, side by side."""
    space = T.space
    shells = _default_shells(space) if shells is None else tuple(float(s) for s in shells)
    r_list = tuple(float(r) for r in r_list)
    if not r_list or min(r_list) <= 0:
        raise DomainError("r_list must contain positive radii")
    p = space.p if p is None else float(p)
    prof_c = berezin_boundary_profile(T, shells, angles)
    rows = []
    for s, c, c_err in prof_c.rows:
        per_r = [_shell_sup(T, s, r, p, angles, disk) for r in r_list]
        best = max(per_r, key=lambda m: m.value)
        b = _shell_sup(T, s, float(fixed_r), p, angles, disk)
        rows.append((s, best.value, max(m.error_bar for m in per_r), b.value, b.error_bar, c, c_err))
    return EquivalenceProbe(r_list, float(fixed_r), tuple(rows))


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class ReportConfig:
    """Grids, radii and thresholds for `compactness_report`."""

    shells: tuple | None = None
    angles: int = 8
    rhs_r: float = 1.0
    m: int | None = None
    delta: float = 1.0
    r_list: tuple = DEFAULT_RADII
    thresholds: Thresholds = Thresholds()
    tau_B: float = TAU_B
    tau_e: float = TAU_E
    tau_nc: float = TAU_NC
    covering_r: float | None = 1.0
    covering_region: float | None = None
    localization_resolution: tuple = (48, 256)
    schur_resolution: tuple = (32, 128)
    region_resolution: tuple = (40, 64)
    disk: tuple = (6, 16)
    z_grid: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "shells": None if self.shells is None else list(self.shells),
            "angles": self.angles, "rhs_r": self.rhs_r, "m": self.m, "delta": self.delta,
            "r_list": list(self.r_list), "thresholds": self.thresholds.to_dict(),
            "tau_B": self.tau_B, "tau_e": self.tau_e, "tau_nc": self.tau_nc,
            "covering_r": self.covering_r, "covering_region": self.covering_region,
            "localization_resolution": list(self.localization_resolution),
            "schur_resolution": list(self.schur_resolution),
            "region_resolution": list(self.region_resolution), "disk": list(self.disk),
            "z_grid": None if self.z_grid is None else [_point_json(z) for z in self.z_grid],
        }


def verdict(certificate_passed: bool, berezin_sup: float, proxy: float,
            tau_B: float = TAU_B, tau_e: float = TAU_E, tau_nc: float = TAU_NC) -> str:
    """Pure verdict rule.

    ``compact-consistent`` when the certificate passes, the boundary Berezin
    sup is below ``tau_B`` and the proxy is below ``tau_e``;
    ``non-compact-consistent`` when the proxy exceeds ``tau_nc``;
    ``inconclusive`` otherwise.
    """
    if certificate_passed and berezin_sup < tau_B and proxy < tau_e:
        return "compact-consistent"
    if proxy > tau_nc:
        return "non-compact-consistent"
    return "inconclusive"


@dataclass(frozen=True)
class CompactnessReport:
    """All diagnostics for one operator and the verdict derived from them."""

    provenance: str
    degree: int
    berezin_boundary_sup: float
    berezin_boundary_error: float
    berezin_profile: BerezinProfile
    certificate: LocalizationCertificate
    essnorm_proxy: float
    m: int
    theorem_rhs: float
    theorem_rhs_error: float
    decomposition_error_bound: float | None
    decomposition: DecompositionError | None
    verdict: str
    config: ReportConfig

    @property
    def proxy_rhs_ratio(self) -> float | None:
        """Empirical constant ``proxy / theorem_rhs`` (reported, never asserted)."""
        return self.essnorm_proxy / self.theorem_rhs if self.theorem_rhs > 0 else None

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "degree": self.degree,
            "berezin_boundary_sup": self.berezin_boundary_sup,
            "berezin_boundary_error": self.berezin_boundary_error,
            "berezin_profile": self.berezin_profile.to_dict(),
            "certificate": self.certificate.to_dict(),
            "certificate_passed": self.certificate.passed,
            "essnorm_proxy": self.essnorm_proxy,
            "m": self.m,
            "theorem_rhs": self.theorem_rhs,
            "theorem_rhs_error": self.theorem_rhs_error,
            "proxy_rhs_ratio": self.proxy_rhs_ratio,
            "decomposition_error_bound": self.decomposition_error_bound,
            "decomposition": None if self.decomposition is None else self.decomposition.to_dict(),
            "verdict": self.verdict,
            "config": self.config.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def compactness_report(T: TruncatedOperator, config: ReportConfig | None = None,
                       threads: int = 1) -> CompactnessReport:
    """Run every diagnostic on `T` and derive the verdict.

    Raises
    ------
    DomainError
        If the outermost shell is refused (truncation bar above 10% of the
        Berezin value); raise the degree or pull the shell inward.
    """
    cfg = config or ReportConfig()
    space = T.space
    shells = _default_shells(space) if cfg.shells is None else tuple(float(s) for s in cfg.shells)
    params = LocalizationParams(space.p, cfg.delta, space.n) if space.is_bergman else None
    m = sub_degree(T.degree) if cfg.m is None else int(cfg.m)
    rad, ang = cfg.localization_resolution

    def run_cert():
        return certify(T, params, cfg.r_list, cfg.z_grid, None, cfg.thresholds,
                       {"radial_nodes": rad, "angular_nodes": ang})

    def run_decomp():
        if cfg.covering_r is None:
            return None
        region = cfg.covering_region or (3.0 if space.is_bergman else 5.0)
        cov = build_covering(space, cfg.covering_r, region)
        return decomposition_error(T, cov, params, z_grid=cfg.z_grid, resolution=tuple(cfg.schur_resolution),
                                   region_resolution=tuple(cfg.region_resolution))

    jobs = {
        "profile": lambda: berezin_boundary_profile(T, shells, cfg.angles),
        "cert": run_cert,
        "proxy": lambda: essential_norm_proxy(T, m),
        "rhs": lambda: theorem_rhs(T, cfg.rhs_r, shells, None, cfg.angles, tuple(cfg.disk)),
        "decomp": run_decomp,
    }
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futures = {k: ex.submit(f) for k, f in jobs.items()}
            res = {k: fut.result() for k, fut in futures.items()}
    else:
        res = {k: f() for k, f in jobs.items()}

    prof = res["profile"]
    shell, b_val, b_err, refused = prof.outermost
    if refused:
        raise DomainError(f"shell {shell!r} refused: truncation bar {b_err:.3g} exceeds "
                          f"{REFUSE_RATIO:g} x value {b_val:.3g}; raise the degree D")
    cert, proxy, rhs, dec = res["cert"], res["proxy"], res["rhs"], res["decomp"]
    return CompactnessReport(
        provenance=T.provenance, degree=T.degree,
        berezin_boundary_sup=b_val, berezin_boundary_error=b_err, berezin_profile=prof,
        certificate=cert, essnorm_proxy=proxy, m=m,
        theorem_rhs=rhs.value, theorem_rhs_error=rhs.error_bar,
        decomposition_error_bound=None if dec is None else dec.bound, decomposition=dec,
        verdict=verdict(cert.passed, b_val, proxy, cfg.tau_B, cfg.tau_e, cfg.tau_nc),
        config=cfg,
    )
