"""Product quadrature on the ball and the plane, and metric-disk tail integrals.

Ball rules are polar products: a composite radial rule (Gauss-Legendre in
``r`` or in ``log(1 - r^2)``, or Gauss-Jacobi in ``t = 1 - r^2`` for a last
panel that reaches the boundary) times an equal-weight rule on the sphere.
Plane rules use Gauss-Legendre in ``r`` up to a cutoff and record the
closed-form Gaussian tail beyond it.

Every rule also carries an embedded coarse rule on every other angular node;
the difference of the two estimates is reported as a quadrature error bar.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaincc, roots_jacobi, roots_legendre

from ._validation import DomainError, check_finite, check_positive_int
from .geometry import mobius
from .kernels import user_view

__all__ = [
    "QuadratureRule",
    "build_ball_rule",
    "build_plane_rule",
    "integrate",
    "tail_integral",
    "pullback",
]

BALL_LEBESGUE = "ball-lebesgue"
BALL_INVARIANT = "ball-invariant"
PLANE_GAUSSIAN = "plane-gaussian"
PLANE_LEBESGUE = "plane-lebesgue"


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights for one measure on one region.

    Attributes
    ----------
    nodes : ndarray, shape (N, n)
    weights : ndarray, shape (N,)
    coarse_weights : ndarray, shape (N,)
        Weights of the embedded rule on every other angular node (zero elsewhere).
    domain : str
        ``"ball-lebesgue"``, ``"ball-invariant"``, ``"plane-gaussian"`` or
        ``"plane-lebesgue"``.
    params : dict
        Everything needed to rebuild the rule.
    truncation_bound : float
        Mass of the measure outside the represented region (times a unit
        majorant for the plane-Lebesgue case); ``inf`` if no finite bound exists.
    panel_edges : tuple of float
        Radial panel boundaries.
    panel : ndarray, shape (N,)
        Panel index of each node.
    """

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    coarse_weights: np.ndarray = field(repr=False)
    domain: str
    params: dict = field(hash=False)
    truncation_bound: float
    panel_edges: tuple
    panel: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("nodes", "weights", "coarse_weights", "panel"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (np.all(self.weights > 0) and np.all(np.isfinite(self.weights))):
            raise DomainError("quadrature weights must be positive and finite")

    @property
    def n(self) -> int:
        return int(self.params["n"])

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def is_ball(self) -> bool:
        return self.domain.startswith("ball")

    @property
    def measure(self) -> str:
        return self.domain.split("-", 1)[1]

    def closed_form_mass(self) -> float:
        """Exact measure of the represented region (``inf`` when unbounded)."""
        n = self.n
        lo, hi = self.panel_edges[0], self.panel_edges[-1]
        if self.domain == BALL_LEBESGUE:
            return hi ** (2 * n) - lo ** (2 * n)
        if self.domain == BALL_INVARIANT:
            if hi >= 1.0:
                return math.inf
            return (hi ** 2 / (1 - hi ** 2)) ** n - (lo ** 2 / (1 - lo ** 2)) ** n
        if self.domain == PLANE_GAUSSIAN:
            a = float(self.params["alpha"])
            return float(gammainc(n, a * hi ** 2) - gammainc(n, a * lo ** 2))
        return math.pi ** n / math.factorial(n) * (hi ** (2 * n) - lo ** (2 * n))

    def tail_mask(self, inner: float) -> np.ndarray:
        """Nodes in panels lying at radius ``>= inner``; `inner` must be a panel edge."""
        edges = np.asarray(self.panel_edges)
        k = int(np.argmin(np.abs(edges - inner)))
        if abs(edges[k] - inner) > 1e-14 * max(1.0, inner):
            raise DomainError(f"{inner!r} is not a panel edge of this rule")
        return self.panel >= k

    def annulus(self, inner: float) -> "QuadratureRule":
        """Rule of the same resolution restricted to radii ``>= inner``."""
        params = dict(self.params)
        key = "rho_min" if self.is_ball else "r_min"
        lo, hi = self.panel_edges[0], self.panel_edges[-1]
        if not (lo <= inner < hi):
            raise DomainError(f"annulus inner radius {inner!r} outside [{lo}, {hi})")
        params[key] = float(inner)
        params["breaks"] = [b for b in params.get("breaks", []) if b > inner]
        return _rebuild(params)

    def refined(self, factor: int = 2) -> "QuadratureRule":
        """Same region with radial and angular counts multiplied by `factor`."""
        params = dict(self.params)
        params["radial_nodes"] = int(params["radial_nodes"]) * factor
        params["angular_nodes"] = int(params["angular_nodes"]) * factor
        return _rebuild(params)

    def to_dict(self, include_nodes: bool = False) -> dict:
        d = {
            "domain": self.domain,
            "params": _jsonable(self.params),
            "truncation_bound": self.truncation_bound,
            "size": self.size,
        }
        if include_nodes:
            d["nodes"] = [[[float(c.real), float(c.imag)] for c in row] for row in self.nodes]
            d["weights"] = [float(x) for x in self.weights]
        return d

    def to_json(self, include_nodes: bool = False) -> str:
        return json.dumps(self.to_dict(include_nodes), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "QuadratureRule":
        rule = _rebuild(d["params"])
        if "weights" in d:
            nodes = np.array([[complex(a, b) for a, b in row] for row in d["nodes"]])
            weights = np.array(d["weights"], dtype=float)
            if nodes.shape != rule.nodes.shape or not np.array_equal(weights, rule.weights):
                raise DomainError("stored nodes/weights disagree with the stored parameters")
        return rule

    @classmethod
    def from_json(cls, text: str) -> "QuadratureRule":
        return cls.from_dict(json.loads(text))


def _jsonable(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, (list, tuple)):
            out[k] = [float(x) for x in v]
        elif isinstance(v, (np.floating, np.integer)):
            out[k] = v.item()
        else:
            out[k] = v
    return out


def _rebuild(params):
    p = dict(params)
    kind = p.pop("kind")
    if kind == "ball":
        return build_ball_rule(**p)
    return build_plane_rule(**p)


# ---------------------------------------------------------------------------
# angular parts


def _sphere_rule(n: int, m: int):
    """Equal-angle rule on the unit sphere of ``C^n`` (normalized mass 1).

    Returns ``(points (K, n), weights (K,), coarse (K,))``.
    """
    if n == 1:
        th = 2 * np.pi * np.arange(m) / m
        w = np.full(m, 1.0 / m)
        coarse = np.where(np.arange(m) % 2 == 0, 2.0 / m, 0.0)
        return np.exp(1j * th)[:, None], w, coarse
    if n == 2:
        # |xi_2|^2 = s is uniform on [0, 1]; both arguments uniform
        k = max(4, m // 2)
        x, wx = roots_legendre(k)
        s = 0.5 * (x + 1)
        ws = 0.5 * wx
        th = 2 * np.pi * np.arange(m) / m
        S, T1, T2 = np.meshgrid(s, th, th, indexing="ij")
        WS = np.broadcast_to(ws[:, None, None], S.shape)
        pts = np.stack([np.sqrt(1 - S) * np.exp(1j * T1), np.sqrt(S) * np.exp(1j * T2)], axis=-1)
        w = WS / m ** 2
        even = (np.arange(m) % 2 == 0)
        mask = even[None, :, None] & even[None, None, :]
        coarse = np.where(mask, 4 * w, 0.0)
        return pts.reshape(-1, 2), w.ravel(), coarse.ravel()
    raise DomainError("quadrature rules are implemented for n = 1 and n = 2")


def _sphere_area(n):
    """Surface area of the unit sphere ``S^{2n-1}``."""
    return 2 * math.pi ** n / math.factorial(n - 1)


# ---------------------------------------------------------------------------
# radial parts


def _ball_radial(n, m, edges, measure, s):
    """Composite radial rule on ``[edges[0], edges[-1]]`` for the ball; returns radii, weights, panel ids."""
    xg, wg = roots_legendre(m)
    radii, weights, panels = [], [], []
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if b >= 1.0 and s is not None:
            T = 1.0 - a * a
            xj, wj = roots_jacobi(m, 0.0, s)
            t = 0.5 * T * (1 + xj)
            # weight of the integrand's smooth part times t^s, returned per unit integrand
            wt = wj * (0.5 * T) ** (s + 1) / t ** s
            r = np.sqrt(1 - t)
            dens = n * (1 - t) ** (n - 1)
            if measure == "invariant":
                dens = dens / t ** (n + 1)
            w = wt * dens
        elif measure == "invariant":
            y_lo, y_hi = math.log1p(-b * b), math.log1p(-a * a)
            y = 0.5 * (y_hi - y_lo) * xg + 0.5 * (y_hi + y_lo)
            t = np.exp(y)
            r = np.sqrt(1 - t)
            w = 0.5 * (y_hi - y_lo) * wg * t * n * (1 - t) ** (n - 1) / t ** (n + 1)
        else:
            r = 0.5 * (b - a) * xg + 0.5 * (b + a)
            w = 0.5 * (b - a) * wg * 2 * n * r ** (2 * n - 1)
        radii.append(r)
        weights.append(w)
        panels.append(np.full(m, k))
    return np.concatenate(radii), np.concatenate(weights), np.concatenate(panels)


def _edges(lo, hi, breaks):
    inner = sorted({float(b) for b in breaks if lo < b < hi})
    return [float(lo)] + inner + [float(hi)]


def build_ball_rule(n: int = 1, radial_nodes: int = 400, angular_nodes: int = 256,
                    rho_max: float = 1.0 - 1e-6, *, rho_min: float = 0.0,
                    measure: str = "lebesgue", boundary_exponent: float | None = None,
                    breaks=()) -> QuadratureRule:
    """Polar product rule on ``{rho_min <= |z| <= rho_max}`` in the unit ball.

    Parameters
    ----------
    n : int
        Dimension (1 or 2).
    radial_nodes : int
        Nodes per radial panel.
    angular_nodes : int
        Equal-angle nodes per circle (even, so the coarse rule is embedded).
    rho_max : float
        Outer radius. ``rho_max < 1`` in general; ``rho_max == 1`` is accepted
        for the Lebesgue measure, and for either measure when
        `boundary_exponent` is given.
    rho_min : float
        Inner radius.
    measure : {"lebesgue", "invariant"}
        Normalized volume ``dv`` or ``dlambda = dv / (1 - |z|^2)^{n+1}``.
    boundary_exponent : float, optional
        Exponent ``s > -1`` such that the integrand times the radial density
        behaves like ``(1 - |z|^2)^s`` at the boundary; the panel touching the
        boundary then uses Gauss-Jacobi nodes in ``t = 1 - |z|^2``.
    breaks : sequence of float
        Interior radii where radial panels are split.

    Returns
    -------
    QuadratureRule

    Examples
    --------
    >>> rule = build_ball_rule(rho_max=0.999, radial_nodes=50, angular_nodes=8)
    >>> round(float(rule.weights.sum()), 9)
    0.998001
    """
    n = check_positive_int(n, "n")
    m = check_positive_int(radial_nodes, "radial_nodes", 4)
    a = check_positive_int(angular_nodes, "angular_nodes", 4)
    if a % 2:
        raise DomainError("angular_nodes must be even")
    if measure not in ("lebesgue", "invariant"):
        raise DomainError(f"unknown ball measure {measure!r}")
    rho_min, rho_max = float(rho_min), float(rho_max)
    if not (0.0 <= rho_min < rho_max <= 1.0):
        raise DomainError(f"need 0 <= rho_min < rho_max <= 1, got {rho_min!r}, {rho_max!r}")
    s = None if boundary_exponent is None else float(boundary_exponent)
    if s is not None and not s > -1.0:
        raise DomainError(f"boundary_exponent must exceed -1, got {s!r}")
    if rho_max >= 1.0 and s is None and measure == "invariant":
        raise DomainError("rho_max = 1 with the invariant measure needs a boundary_exponent")
    if s is not None and rho_max < 1.0:
        raise DomainError("boundary_exponent applies only to rules reaching rho_max = 1")

    edges = _edges(rho_min, rho_max, breaks)
    radii, rw, panel = _ball_radial(n, m, edges, measure, s)
    sph, sw, sc = _sphere_rule(n, a)
    nodes = (radii[:, None, None] * sph[None, :, :]).reshape(-1, n)
    weights = (rw[:, None] * sw[None, :]).ravel()
    coarse = (rw[:, None] * sc[None, :]).ravel()
    panel = np.repeat(panel, len(sw))

    if rho_max >= 1.0:
        trunc = 0.0
    elif measure == "lebesgue":
        trunc = 1.0 - rho_max ** (2 * n)
    else:
        trunc = math.inf
    params = {
        "kind": "ball", "n": n, "radial_nodes": m, "angular_nodes": a,
        "rho_max": rho_max, "rho_min": rho_min, "measure": measure,
        "boundary_exponent": s, "breaks": [float(b) for b in edges[1:-1]],
    }
    return QuadratureRule(nodes, weights, coarse, f"ball-{measure}", params, trunc, tuple(edges), panel)


def build_plane_rule(n: int = 1, alpha: float = 1.0, range_R: float = 8.0, radial_nodes: int = 200,
                     angular_nodes: int = 128, *, r_min: float = 0.0, measure: str = "gaussian",
                     breaks=()) -> QuadratureRule:
    """Polar product rule on ``{r_min <= |z| <= range_R}`` in ``C^n``.

    Parameters
    ----------
    n : int
    alpha : float
        Gaussian parameter of the measure ``(alpha/pi)^n exp(-alpha |z|^2) dv``.
    range_R : float
        Cutoff radius.
    radial_nodes, angular_nodes : int
        Nodes per radial panel and per circle.
    r_min : float
        Inner radius.
    measure : {"gaussian", "lebesgue"}
        The Gaussian probability measure, or plain Lebesgue ``dv``.
    breaks : sequence of float
        Interior radii where radial panels are split.

    Notes
    -----
    The recorded truncation bound is the Gaussian mass beyond `range_R`; for
    the Lebesgue measure it is the integral of the majorant
    ``exp(-alpha |z|^2 / 2)`` beyond `range_R`, which bounds the tails of
    normalized-kernel correlations.
    """
    n = check_positive_int(n, "n")
    m = check_positive_int(radial_nodes, "radial_nodes", 4)
    a = check_positive_int(angular_nodes, "angular_nodes", 4)
    if a % 2:
        raise DomainError("angular_nodes must be even")
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DomainError(f"alpha must be positive, got {alpha!r}")
    R, r_min = float(range_R), float(r_min)
    if not (R > 0 and math.isfinite(R)):
        raise DomainError(f"range_R must be positive and finite, got {range_R!r}")
    if not (0.0 <= r_min < R):
        raise DomainError(f"need 0 <= r_min < range_R, got {r_min!r}")
    if measure not in ("gaussian", "lebesgue"):
        raise DomainError(f"unknown plane measure {measure!r}")

    edges = _edges(r_min, R, breaks)
    xg, wg = roots_legendre(m)
    radii, rw, panel = [], [], []
    area = _sphere_area(n)
    for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        r = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * wg * area * r ** (2 * n - 1)
        if measure == "gaussian":
            w = w * (alpha / math.pi) ** n * np.exp(-alpha * r * r)
        radii.append(r)
        rw.append(w)
        panel.append(np.full(m, k))
    radii, rw, panel = np.concatenate(radii), np.concatenate(rw), np.concatenate(panel)
    keep = rw > 0  # Gaussian weights underflow far out
    sph, sw, sc = _sphere_rule(n, a)
    nodes = (radii[keep, None, None] * sph[None, :, :]).reshape(-1, n)
    weights = (rw[keep, None] * sw[None, :]).ravel()
    coarse = (rw[keep, None] * sc[None, :]).ravel()
    panel = np.repeat(panel[keep], len(sw))

    if measure == "gaussian":
        trunc = float(gammaincc(n, alpha * R * R))
    else:
        trunc = float((2 * math.pi / alpha) ** n * gammaincc(n, alpha * R * R / 2))
    params = {
        "kind": "plane", "n": n, "alpha": alpha, "range_R": R, "radial_nodes": m,
        "angular_nodes": a, "r_min": r_min, "measure": measure,
        "breaks": [float(b) for b in edges[1:-1]],
    }
    return QuadratureRule(nodes, weights, coarse, f"plane-{measure}", params, trunc, tuple(edges), panel)


# ---------------------------------------------------------------------------
# integration


def integrate(f, rule: QuadratureRule, return_error: bool = False):
    """Apply `rule` to `f`.

    Parameters
    ----------
    f : callable
        Evaluated once on all nodes (plain complex array for ``n = 1``,
        shape ``(N, n)`` otherwise).
    rule : QuadratureRule
    return_error : bool
        Also return ``|I - I_coarse|`` from the embedded angular rule.

    Returns
    -------
    complex or (complex, float)
    """
    vals = np.asarray(f(user_view(rule.nodes)), dtype=complex)
    vals = np.broadcast_to(vals, rule.weights.shape)
    check_finite(vals, "integrand value", rule.nodes)
    val = complex(np.sum(vals * rule.weights))
    if return_error:
        coarse = complex(np.sum(vals * rule.coarse_weights))
        return val, abs(val - coarse)
    return val


def pullback(rule: QuadratureRule, center, space_n: int | None = None):
    """Map a rule centred at the origin to one centred at `center`.

    Ball: ``w = phi_center(u)``. The invariant measure is preserved; for
    ``dv`` the weights pick up the real Jacobian ``|k_center(u)|^2``. Plane:
    ``w = center + u``; Gaussian weights are re-weighted by the density ratio.

    Returns
    -------
    w : ndarray, shape (N, n)
    weights : ndarray, shape (N,)
    coarse : ndarray, shape (N,)
    gap : ndarray or None
        ``1 - |w|^2`` computed without cancellation (ball only).
    """
    n = rule.n if space_n is None else space_n
    c = np.asarray(center, dtype=complex).reshape(n)
    u = rule.nodes
    if rule.is_ball:
        if np.sum(np.abs(c) ** 2) >= 1.0:
            raise DomainError("centre outside the open unit ball")
        w = mobius(c, u, n)
        w = w[:, None] if n == 1 else w
        gap_u = 1.0 - np.sum(np.abs(u) ** 2, axis=-1)
        c2 = float(np.sum(np.abs(c) ** 2))
        denom = np.abs(1.0 - u @ np.conj(c)) ** 2
        gap_w = (1.0 - c2) * gap_u / denom
        if rule.measure == "lebesgue":
            jac = ((1.0 - c2) / denom) ** (n + 1)
            return w, rule.weights * jac, rule.coarse_weights * jac, gap_w
        return w, rule.weights, rule.coarse_weights, gap_w
    w = u + c
    if rule.measure == "gaussian":
        alpha = float(rule.params["alpha"])
        ratio = np.exp(-alpha * (np.sum(np.abs(w) ** 2, -1) - np.sum(np.abs(u) ** 2, -1)))
        return w, rule.weights * ratio, rule.coarse_weights * ratio, None
    return w, rule.weights, rule.coarse_weights, None


def tail_integral(f, center, R: float, rule: QuadratureRule, return_error: bool = False):
    """Integral of ``|f|`` outside the metric disk ``D(center, R)``.

    The ball uses the Bergman metric: after ``w = phi_center(u)`` the excluded
    region becomes ``|u| < tanh(R)``. The plane uses the Euclidean metric.
    `rule` describes the region in the centred variable ``u``.
    """
    R = float(R)
    if not R >= 0:
        raise DomainError(f"tail radius must be nonnegative, got {R!r}")
    inner = math.tanh(R) if rule.is_ball else R
    lo, hi = rule.panel_edges[0], rule.panel_edges[-1]
    if inner >= hi:
        return (0.0, 0.0) if return_error else 0.0
    sub = rule if inner <= lo else _restrict(rule, inner)
    w, wt, wc, _ = pullback(sub, center)
    vals = np.abs(np.asarray(f(user_view(w)), dtype=complex))
    vals = np.broadcast_to(vals, wt.shape)
    check_finite(vals, "integrand value", w)
    val = float(np.sum(vals * wt))
    if return_error:
        return val, abs(val - float(np.sum(vals * wc)))
    return val


def _restrict(rule, inner):
    edges = np.asarray(rule.panel_edges)
    if np.any(np.abs(edges - inner) <= 1e-14 * max(1.0, inner)):
        mask = rule.tail_mask(inner)
        params = dict(rule.params)
        params["rho_min" if rule.is_ball else "r_min"] = float(inner)
        params["breaks"] = [b for b in params.get("breaks", []) if b > inner]
        return QuadratureRule(rule.nodes[mask], rule.weights[mask], rule.coarse_weights[mask], rule.domain,
                              params, rule.truncation_bound,
                              tuple(e for e in rule.panel_edges if e >= inner - 1e-14 * max(1.0, inner)),
                              rule.panel[mask] - int(np.argmin(np.abs(edges - inner))))
    return rule.annulus(inner)
