"""Möbius automorphisms, invariant metrics and metric coverings.

The ball automorphism is the standard involution

    phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>),   s_a = sqrt(1 - |a|^2),

with ``P_a`` the orthogonal projection onto ``span(a)`` and ``Q_a = I - P_a``.
For ``n = 1`` it reduces to ``(a - z) / (1 - conj(a) z)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, as_points, check_in_ball
from .spaces import SpaceDescriptor

__all__ = [
    "RHO_CLAMP",
    "mobius",
    "mobius_gap",
    "pseudo_hyperbolic",
    "bergman_metric",
    "euclidean_distance",
    "Cell",
    "Covering",
    "CoveringReport",
    "build_covering",
    "verify_covering",
]

# Largest pseudo-hyperbolic distance used before taking artanh.
RHO_CLAMP = 1.0 - 1e-15


def _inner(z, w):
    """Hermitian inner product ``<z, w> = sum z_i conj(w_i)`` over the last axis."""
    return np.sum(z * np.conj(w), axis=-1)


def _ball_pair(z, w, n):
    if n is None:
        zz = np.asarray(z, dtype=complex)
        n = 1 if zz.ndim == 0 else zz.shape[-1]
    zp = as_points(z, n)
    wp = as_points(w, n)
    return zp, wp, check_in_ball(zp), check_in_ball(wp)


def mobius(z, w, n: int | None = None) -> np.ndarray:
    """Evaluate the involutive automorphism ``phi_z(w)``.

    Parameters
    ----------
    z, w : array_like
        Points of the unit ball, shape ``(..., n)``. For ``n = 1`` plain
        complex scalars or 1-d arrays are accepted.
    n : int, optional
        Dimension; inferred from the trailing axis of `z` when omitted
        (a scalar `z` means ``n = 1``).

    Returns
    -------
    ndarray
        ``phi_z(w)`` with shape ``(..., n)``; for ``n = 1`` the trailing axis
        is dropped.

    Examples
    --------
    >>> complex(mobius(0.5, 0.2))
    (0.3333333333333333+0j)
    """
    zp, wp, z2, _ = _ball_pair(z, w, n)
    dim = zp.shape[-1]
    zw = _inner(wp, zp)
    if dim == 1:
        out = (zp - wp) / (1.0 - zw)[..., None]
        return out[..., 0]
    s = np.sqrt(1.0 - z2)
    # projection <w, u> u onto u = z/|z|, scaled first so tiny |z| cannot underflow
    m = np.max(np.abs(zp), axis=-1, keepdims=True)
    ok = m > 1e-300
    safe = np.where(ok, m, 1.0)
    u = np.where(ok, zp.real / safe + 1j * (zp.imag / safe), 0.0)
    u = u / np.where(ok, np.sqrt(np.sum(np.abs(u) ** 2, axis=-1, keepdims=True)), 1.0)
    proj = _inner(wp, u)[..., None] * u
    out = (zp - proj - s[..., None] * (wp - proj)) / (1.0 - zw)[..., None]
    return out


def mobius_gap(z, w, n: int | None = None) -> np.ndarray:
    """Return ``1 - |phi_z(w)|^2`` via the cancellation-free product formula.

    ``1 - |phi_z(w)|^2 = (1 - |z|^2)(1 - |w|^2) / |1 - <w, z>|^2``.
    """
    zp, wp, z2, w2 = _ball_pair(z, w, n)
    return (1.0 - z2) * (1.0 - w2) / np.abs(1.0 - _inner(wp, zp)) ** 2


def pseudo_hyperbolic(z, w, n: int | None = None) -> np.ndarray:
    """Pseudo-hyperbolic distance ``rho(z, w) = |phi_z(w)|``.

    Small distances come from ``|phi_z(w)|`` itself; near the sphere the
    cancellation-free gap ``1 - rho^2`` is used instead.
    """
    gap = mobius_gap(z, w, n)
    far = np.sqrt(np.clip(1.0 - gap, 0.0, 1.0))
    phi = np.asarray(mobius(z, w, n))
    if phi.ndim > np.ndim(gap):
        phi = np.sqrt(np.sum(np.abs(phi) ** 2, axis=-1))
    return np.where(gap > 0.5, np.abs(phi), far)


def bergman_metric(z, w, n: int | None = None) -> np.ndarray:
    """Bergman distance ``beta = artanh(rho)``, with ``rho`` clamped at `RHO_CLAMP`."""
    return np.arctanh(np.minimum(pseudo_hyperbolic(z, w, n), RHO_CLAMP))


def euclidean_distance(z, w, n: int | None = None) -> np.ndarray:
    """Euclidean distance on ``C^n``."""
    if n is None:
        zz = np.asarray(z, dtype=complex)
        n = 1 if zz.ndim == 0 else zz.shape[-1]
    zp, wp = as_points(z, n), as_points(w, n)
    return np.sqrt(np.sum(np.abs(zp - wp) ** 2, axis=-1))


# ---------------------------------------------------------------------------
# coverings


@dataclass(frozen=True)
class Cell:
    """One cell ``F_j`` of a covering.

    ``kind == "annular_sector"`` has params ``beta_lo, beta_hi, theta_lo,
    theta_hi`` (Bergman radius from the origin and argument, half-open in both).
    ``kind == "cube"`` has params ``center`` (real coordinates in ``R^{2n}``)
    and ``side``; cubes are half-open ``[c - s/2, c + s/2)``.
    """

    kind: str
    params: dict = field(hash=False)

    def to_dict(self) -> dict:
        return {"type": self.kind, "params": dict(self.params)}


@dataclass(frozen=True)
class Covering:
    """Disjoint cells of bounded diameter covering a bounded metric ball.

    Attributes
    ----------
    space : SpaceDescriptor
    metric : {"bergman", "euclidean"}
    r : float
        Covering radius; cells have diameter at most ``2 r`` and the
        enlargements are ``G_j = {x : d(x, F_j) <= r}``.
    region : dict
        ``{"shape": "ball", "radius": R}`` (metric ball about the origin) or
        ``{"shape": "cube", "half_width": H}`` (plane only).
    cells : tuple of Cell
    overlap_bound : int
        Upper bound ``N`` on the number of enlargements containing any point.
    """

    space: SpaceDescriptor
    metric: str
    r: float
    region: dict = field(hash=False)
    cells: tuple = field(hash=False)
    overlap_bound: int = 1

    @property
    def N(self) -> int:
        return self.overlap_bound

    def __len__(self) -> int:
        return len(self.cells)

    def without_cell(self, j: int) -> "Covering":
        """Copy with cell `j` removed (used as a negative control)."""
        cells = self.cells[:j] + self.cells[j + 1:]
        return Covering(self.space, self.metric, self.r, self.region, cells, self.overlap_bound)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "r": self.r,
            "N": self.overlap_bound,
            "region": dict(self.region),
            "space": self.space.to_dict(),
            "cells": [c.to_dict() for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Covering":
        cells = tuple(Cell(c["type"], dict(c["params"])) for c in d["cells"])
        return cls(SpaceDescriptor.from_dict(d["space"]), d["metric"], float(d["r"]),
                   dict(d["region"]), cells, int(d["N"]))

    @classmethod
    def from_json(cls, text: str) -> "Covering":
        return cls.from_dict(json.loads(text))

    # membership -----------------------------------------------------------
    def membership(self, pts) -> np.ndarray:
        """Boolean matrix ``(num_points, num_cells)`` of ``x in F_j``."""
        if self.metric == "bergman":
            zp = as_points(pts, 1)[..., 0].ravel()
            b = np.arctanh(np.minimum(np.abs(zp), RHO_CLAMP))
            th = np.mod(np.angle(zp), 2 * np.pi)
            lo, hi, tlo, thi = _sector_arrays(self.cells)
            outer = float(self.region["radius"])
            # the outermost boundary of the region is closed
            hi_ok = (b[:, None] < hi) | ((hi == outer) & (b[:, None] <= outer))
            return (b[:, None] >= lo) & hi_ok & (th[:, None] >= tlo) & (th[:, None] < thi)
        x = _real_coords(pts, self.space.n)
        centers, side = _cube_arrays(self.cells)
        rel = x[:, None, :] - centers[None, :, :]
        return np.all((rel >= -side / 2) & (rel < side / 2), axis=-1)


def _sector_arrays(cells):
    lo = np.array([c.params["beta_lo"] for c in cells])
    hi = np.array([c.params["beta_hi"] for c in cells])
    tlo = np.array([c.params["theta_lo"] for c in cells])
    thi = np.array([c.params["theta_hi"] for c in cells])
    return lo, hi, tlo, thi


def _cube_arrays(cells):
    centers = np.array([c.params["center"] for c in cells], dtype=float)
    side = float(cells[0].params["side"]) if cells else 1.0
    return centers, side


def _real_coords(pts, n):
    zp = as_points(pts, n).reshape(-1, n)
    return np.concatenate([zp.real, zp.imag], axis=-1)


def _polar(b, th):
    return np.tanh(b) * np.exp(1j * th)


def _sector_boundary(lo, hi, tlo, thi, h):
    """Boundary samples of an annular sector, spaced at most about `h` in the Bergman metric."""
    pieces = []
    width = thi - tlo
    full = np.isclose(width, 2 * np.pi)
    for b in (lo, hi):
        if b == 0.0:
            pieces.append(np.zeros(1, dtype=complex))
            continue
        length = width * math.sinh(2 * b) / 2
        m = max(8, int(math.ceil(length / h)))
        m += m % 2  # even counts keep antipodal points on full circles
        th = tlo + 2 * np.pi * np.arange(m) / m if full else np.linspace(tlo, thi, m)
        pieces.append(_polar(b, th))
    if not full:
        k = max(2, int(math.ceil((hi - lo) / h)) + 1)
        bs = np.linspace(lo, hi, k)
        pieces.append(_polar(bs, tlo))
        pieces.append(_polar(bs, thi))
    return np.concatenate(pieces)


def _pairwise_beta(a, b):
    """Bergman distances between two 1-d arrays of disc points."""
    gap = (1 - np.abs(a[:, None]) ** 2) * (1 - np.abs(b[None, :]) ** 2) \
        / np.abs(1 - a[:, None] * np.conj(b[None, :])) ** 2
    rho = np.sqrt(np.clip(1 - gap, 0, 1))
    return np.arctanh(np.minimum(rho, RHO_CLAMP))


def _sector_diameter(lo, hi, tlo, thi, h, bound=None):
    """Bergman diameter of an annular sector from boundary samples.

    With `bound` given, cheap lower bounds (corner distances, a coarse
    sample) are tried first and returned as soon as they exceed `bound`.
    """
    width = thi - tlo
    if width >= 2 * np.pi - 1e-15:
        # a full annulus or disc: antipodal points on the outer circle
        return 2.0 * hi
    corners = _polar(np.array([lo, lo, hi, hi]), np.array([tlo, thi, tlo, thi]))
    low = float(np.max(_pairwise_beta(corners, corners)))
    if bound is not None and low > bound:
        return low
    if bound is not None:
        coarse = _sector_boundary(lo, hi, tlo, thi, 8 * h)
        low = float(np.max(_pairwise_beta(coarse, coarse)))
        if low > bound:
            return low
    pts = _sector_boundary(lo, hi, tlo, thi, h)
    best = 0.0
    for start in range(0, len(pts), 2048):
        best = max(best, float(np.max(_pairwise_beta(pts[start:start + 2048], pts))))
    return best


def _angular_reach(b1, b2, d, grid=33):
    """Largest angle between points with Bergman radii in ``b1`` and ``b2`` (intervals) at distance <= d.

    Returns pi when the whole circle is within reach.
    """
    r1 = np.tanh(np.linspace(b1[0], b1[1], grid))[:, None]
    r2 = np.tanh(np.linspace(b2[0], b2[1], grid))[None, :]
    q = (1 - r1 ** 2) * (1 - r2 ** 2) / (1 - math.tanh(d) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        s2 = (q - (1 - r1 * r2) ** 2) / (4 * r1 * r2)
    s2 = np.where(r1 * r2 == 0, np.where(q >= 1, 1.0, -1.0), s2)
    if np.max(s2) >= 1.0:
        return math.pi
    if np.max(s2) < 0:
        return -1.0
    ang = 2 * np.arcsin(np.sqrt(np.clip(np.max(s2), 0, 1)))
    # the grid maximum is refined by a relative safety margin
    return min(math.pi, ang * 1.02 + 1e-9)


def _count_window(width, m):
    """Upper bound on the number of equal sectors (m per circle) meeting an arc of length `width`."""
    if width >= 2 * np.pi:
        return m
    return min(m, int(math.ceil(width * m / (2 * np.pi))) + 1)


def _ball_covering(space, r, radius):
    if space.n != 1:
        raise DomainError("Bergman-metric coverings are implemented for n = 1 only")
    half = r / 2.0
    h = r / 20.0
    target = 2.0 * r * (1.0 - 1e-9)
    edges = [0.0]
    while edges[-1] < radius:
        edges.append(min(radius, edges[-1] + half))
    annuli = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == 0.0:
            annuli.append((lo, hi, 1))
            continue

        def ok(m):
            return _sector_diameter(lo, hi, 0.0, 2 * np.pi / m, h, bound=target) <= target

        m_hi = 1
        while not ok(m_hi):
            m_hi *= 2
        m_lo = m_hi // 2
        while m_hi - m_lo > 1:
            mid = (m_lo + m_hi) // 2
            if ok(mid):
                m_hi = mid
            else:
                m_lo = mid
        annuli.append((lo, hi, max(1, m_hi)))

    cells = []
    for lo, hi, m in annuli:
        for i in range(m):
            cells.append(Cell("annular_sector", {
                "beta_lo": lo, "beta_hi": hi,
                "theta_lo": 2 * np.pi * i / m, "theta_hi": 2 * np.pi * (i + 1) / m,
            }))

    # N: for a representative sector of each annulus, count sectors of every
    # annulus that can meet its r-enlargement (radial gap and angular window)
    overlap = 1
    for k, (lo_k, hi_k, m_k) in enumerate(annuli):
        total = 0
        for lo_l, hi_l, m_l in annuli:
            if max(0.0, lo_l - hi_k, lo_k - hi_l) > r:
                continue
            reach = _angular_reach((lo_k, hi_k), (lo_l, hi_l), r)
            if reach < 0:
                continue
            total += _count_window(2 * np.pi / m_k + 2 * reach, m_l)
        overlap = max(overlap, total)
    return tuple(cells), overlap


def _plane_covering(space, r, region):
    n = space.n
    side = 2.0 * r / math.sqrt(2 * n)
    if region["shape"] == "cube":
        reach = float(region["half_width"])
    else:
        reach = float(region["radius"])
    k = int(math.ceil(reach / side - 0.5 - 1e-12))
    k = max(k, 0)
    axis = np.arange(-k, k + 1)
    grid = np.stack(np.meshgrid(*([axis] * (2 * n)), indexing="ij"), axis=-1).reshape(-1, 2 * n)
    centers = grid * side
    if region["shape"] == "ball":
        excess = np.maximum(np.abs(centers) - side / 2, 0.0)
        keep = np.sqrt(np.sum(excess ** 2, axis=1)) <= reach
        centers = centers[keep]
    cells = tuple(Cell("cube", {"center": [float(c) for c in row], "side": side}) for row in centers)
    # exact lattice count: cubes whose distance to a fixed cube is <= r
    m = int(math.ceil(r / side)) + 1
    offs = np.arange(-m, m + 1)
    lattice = np.stack(np.meshgrid(*([offs] * (2 * n)), indexing="ij"), axis=-1).reshape(-1, 2 * n)
    gap = side * np.sqrt(np.sum(np.maximum(np.abs(lattice) - 1, 0) ** 2, axis=1))
    overlap = int(np.sum(gap <= r + 1e-12))
    return cells, overlap


def build_covering(space: SpaceDescriptor, r: float, region=3.0, *, shape: str = "ball") -> Covering:
    """Build a covering of a bounded region by disjoint cells of diameter ``<= 2 r``.

    Parameters
    ----------
    space : SpaceDescriptor
        Bergman family: cells are Bergman-metric annuli of width ``r / 2``
        split into equal angular sectors (``n = 1``). Fock family: cubes of
        side ``2 r / sqrt(2 n)`` on a lattice centred at the origin.
    r : float
        Covering radius.
    region : float
        Radius of the metric ball about the origin to be covered, or the
        half-width of a cube when ``shape == "cube"`` (plane only).
    shape : {"ball", "cube"}

    Returns
    -------
    Covering
    """
    r = float(r)
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"covering radius must be positive and finite, got {r!r}")
    size = float(region)
    if not (size > 0 and math.isfinite(size)):
        raise DomainError(f"region size must be positive and finite, got {region!r}")
    if shape not in ("ball", "cube"):
        raise DomainError(f"unknown region shape {shape!r}")
    if space.is_bergman:
        if shape != "ball":
            raise DomainError("Bergman coverings use metric balls as regions")
        reg = {"shape": "ball", "radius": size}
        cells, overlap = _ball_covering(space, r, size)
        return Covering(space, "bergman", r, reg, cells, overlap)
    reg = {"shape": shape, ("radius" if shape == "ball" else "half_width"): size}
    cells, overlap = _plane_covering(space, r, reg)
    return Covering(space, "euclidean", r, reg, cells, overlap)


@dataclass(frozen=True)
class CoveringReport:
    """Outcome of `verify_covering`."""

    max_overlap: int
    max_diameter: float
    gaps_found: bool
    overlaps_found: bool
    n_samples: int
    overlap_bound: int
    r: float

    @property
    def passed(self) -> bool:
        return (not self.gaps_found and not self.overlaps_found
                and self.max_overlap <= self.overlap_bound
                and self.max_diameter <= 2 * self.r + 1e-9)

    def to_dict(self) -> dict:
        return {
            "max_overlap": self.max_overlap, "max_diameter": self.max_diameter,
            "gaps_found": self.gaps_found, "overlaps_found": self.overlaps_found,
            "n_samples": self.n_samples, "overlap_bound": self.overlap_bound,
            "r": self.r, "passed": self.passed,
        }


def _region_samples(c: Covering, samples: int, seed: int):
    """Deterministic grid plus seeded Monte Carlo points in the covered region, plus cell centres."""
    rng = np.random.default_rng(seed)
    n_grid = samples // 2
    n_mc = samples - n_grid
    if c.metric == "bergman":
        R = float(c.region["radius"])
        g = max(2, int(math.sqrt(n_grid)))
        bb, tt = np.meshgrid((np.arange(g) + 0.5) / g * R, 2 * np.pi * (np.arange(g) + 0.5) / g)
        grid = _polar(bb.ravel(), tt.ravel())
        mc = _polar(R * np.sqrt(rng.random(n_mc)), 2 * np.pi * rng.random(n_mc))
        lo, hi, tlo, thi = _sector_arrays(c.cells)
        centers = _polar((lo + hi) / 2, (tlo + thi) / 2)
        return np.concatenate([grid, mc, centers])
    n = c.space.n
    d = 2 * n
    if c.region["shape"] == "cube":
        H = float(c.region["half_width"])
        g = max(2, int(round(n_grid ** (1 / d))))
        ax = -H + 2 * H * (np.arange(g) + 0.5) / g
        grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), -1).reshape(-1, d)
        mc = rng.uniform(-H, H, size=(n_mc, d))
        inside = lambda x: np.all(np.abs(x) <= H, axis=1)
    else:
        R = float(c.region["radius"])
        g = max(2, int(round(n_grid ** (1 / d))))
        ax = -R + 2 * R * (np.arange(g) + 0.5) / g
        grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), -1).reshape(-1, d)
        v = rng.standard_normal((n_mc, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        mc = v * R * rng.random((n_mc, 1)) ** (1 / d)
        inside = lambda x: np.linalg.norm(x, axis=1) <= R
    centers, _ = _cube_arrays(c.cells)
    pts = np.concatenate([grid, mc, centers.reshape(-1, d)])
    pts = pts[inside(pts)]
    return pts[:, :n] + 1j * pts[:, n:]


def _point_sector_distance(x, lo, hi, tlo, thi, h):
    pts = _sector_boundary(lo, hi, tlo, thi, h)
    return float(np.min(_pairwise_beta(np.atleast_1d(x), pts)))


def verify_covering(c: Covering, samples: int = 2000, seed: int = 0, overlap_points: int = 200) -> CoveringReport:
    """Check disjointness, coverage, diameters and enlargement overlap by sampling.

    Parameters
    ----------
    c : Covering
    samples : int
        Number of grid plus Monte Carlo points used for coverage and
        disjointness; the centre of every cell is always added.
    seed : int
        Seed of the Monte Carlo sample.
    overlap_points : int
        How many of the sample points are used for the (more expensive)
        enlargement-overlap count.

    Returns
    -------
    CoveringReport
    """
    pts = _region_samples(c, int(samples), seed)
    if len(c.cells) == 0:
        return CoveringReport(0, 0.0, True, False, len(pts), c.overlap_bound, c.r)
    member = c.membership(pts[:, None] if c.space.n == 1 else pts)
    counts = member.sum(axis=1)
    gaps = bool(np.any(counts == 0))
    overlaps = bool(np.any(counts > 1))
    step = max(1, len(pts) // max(1, overlap_points))
    probe = pts[::step][:overlap_points]

    if c.metric == "bergman":
        h = c.r / 40.0
        lo, hi, tlo, thi = _sector_arrays(c.cells)
        width = thi - tlo
        # congruent sectors (same radii and angular width) share a diameter
        shapes = {}
        for a, b, w in zip(lo, hi, width):
            key = (float(a), float(b), round(float(w), 12))
            if key not in shapes:
                shapes[key] = _sector_diameter(a, b, 0.0, w, h)
        max_diam = max(shapes.values())
        max_overlap = 0
        probe_idx = np.arange(len(pts))[::step][:overlap_points]
        annuli = sorted({(float(a), float(b)) for a, b in zip(lo, hi)})
        for i, x in zip(probe_idx, probe):
            bx = math.atanh(min(abs(x), RHO_CLAMP))
            tx = float(np.mod(np.angle(x), 2 * np.pi))
            count = int(member[i].sum())
            for a, b in annuli:
                if max(0.0, a - bx, bx - b) > c.r:
                    continue
                reach = _angular_reach((bx, bx), (a, b), c.r, grid=9)
                if reach < 0:
                    continue
                sel = np.nonzero((lo == a) & (hi == b) & ~member[i])[0]
                gaps_th = _arc_gaps(tx, tlo[sel], thi[sel])
                for j in sel[gaps_th <= reach]:
                    if _point_sector_distance(x, lo[j], hi[j], tlo[j], thi[j], h) <= c.r:
                        count += 1
            max_overlap = max(max_overlap, count)
    else:
        centers, side = _cube_arrays(c.cells)
        d = 2 * c.space.n
        corners = np.array(np.meshgrid(*([[-0.5, 0.5]] * d), indexing="ij")).reshape(d, -1).T * side
        diffs = corners[:, None, :] - corners[None, :, :]
        max_diam = float(np.max(np.sqrt(np.sum(diffs ** 2, axis=-1))))
        x = _real_coords(probe, c.space.n)
        rel = np.abs(x[:, None, :] - centers[None, :, :]) - side / 2
        dist = np.sqrt(np.sum(np.maximum(rel, 0.0) ** 2, axis=-1))
        max_overlap = int(np.max(np.sum(dist <= c.r, axis=1)))
    return CoveringReport(int(max_overlap), float(max_diam), gaps, overlaps, len(pts), c.overlap_bound, c.r)


def _arc_gaps(t, a, b):
    """Angular distance from angle `t` to each arc ``[a, b)`` on the circle."""
    u = np.mod(t - a, 2 * np.pi)
    outside = np.minimum(u - (b - a), 2 * np.pi - u)
    return np.where((u <= b - a) | (b - a >= 2 * np.pi - 1e-15), 0.0, outside)
