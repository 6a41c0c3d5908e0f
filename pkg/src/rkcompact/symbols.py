"""Built-in symbol library and expression symbols."""

from __future__ import annotations

import numpy as np
import sympy

from ._validation import DomainError
from .operators import Symbol

__all__ = [
    "constant",
    "one_minus_r2",
    "r2",
    "radial_step",
    "radial_bump",
    "angular",
    "gaussian_decay",
    "expression",
    "from_spec",
    "LIBRARY",
]


def _radius(z):
    z = np.asarray(z, dtype=complex)
    if z.ndim >= 2 and z.shape[-1] > 1:
        return np.sqrt(np.sum(np.abs(z) ** 2, axis=-1))
    return np.abs(z)


def _radial_symbol(g, sup_bound, label, breakpoints=(), spec=None):
    return Symbol(lambda z: g(_radius(z)), sup_bound, label, radial=g, breakpoints=breakpoints, spec=spec)


def constant(c: float = 1.0) -> Symbol:
    """``u = c``."""
    c = complex(c)
    if c == 0:
        return Symbol(lambda z: np.zeros(np.shape(_radius(z)), dtype=complex), 1.0, "0",
                      radial=lambda r: np.zeros_like(r, dtype=complex), spec={"name": "constant", "c": 0.0})
    return _radial_symbol(lambda r: np.full(np.shape(r), c), abs(c), f"{c.real:g}" if c.imag == 0 else str(c),
                          spec={"name": "constant", "c": c.real if c.imag == 0 else [c.real, c.imag]})


def one_minus_r2() -> Symbol:
    """``u = 1 - |z|^2``; vanishes on the sphere. Bounded by 1 on the ball."""
    return _radial_symbol(lambda r: 1.0 - r * r, 1.0, "1-|z|^2", spec={"name": "one_minus_r2"})


def r2(sup_bound: float = 1.0) -> Symbol:
    """``u = |z|^2``. On the plane pass an explicit bound covering the quadrature range."""
    return _radial_symbol(lambda r: r * r, sup_bound, "|z|^2", spec={"name": "r2", "sup_bound": sup_bound})


def radial_step(radius: float = 0.5, inside: float = -1.0, outside: float = 1.0) -> Symbol:
    """Piecewise constant radial symbol, `inside` for ``|z| < radius`` and `outside` beyond."""
    return _radial_symbol(lambda r: np.where(r < radius, inside, outside).astype(float),
                          max(abs(inside), abs(outside)), f"step({radius:g})", breakpoints=(radius,),
                          spec={"name": "radial_step", "radius": radius, "inside": inside, "outside": outside})


def radial_bump(radius: float = 0.6) -> Symbol:
    """Smooth bump ``exp(1 - 1/(1 - (|z|/radius)^2))`` supported in ``|z| < radius``; maximum 1 at 0."""

    def g(r):
        x = np.clip(np.asarray(r, dtype=float) / radius, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            val = np.exp(1.0 - 1.0 / (1.0 - x * x))
        return np.where(x < 1.0, val, 0.0)

    return _radial_symbol(g, 1.0, f"bump({radius:g})", breakpoints=(radius,),
                          spec={"name": "radial_bump", "radius": radius})


def angular(k: int = 1, profile: str = "one") -> Symbol:
    """Non-radial symbol ``e^{i k theta}`` times a radial profile.

    ``profile`` is ``"one"`` (modulus 1) or ``"one_minus_r2"`` (vanishes on the sphere).
    Only defined for ``n = 1``.
    """
    if profile not in ("one", "one_minus_r2"):
        raise DomainError(f"unknown angular profile {profile!r}")

    def f(z):
        z = np.asarray(z, dtype=complex)
        if z.ndim >= 2 and z.shape[-1] > 1:
            raise DomainError("the angular symbol is defined for n = 1")
        r = np.abs(z)
        with np.errstate(invalid="ignore", divide="ignore"):
            ph = np.where(r > 0, (z / np.where(r > 0, r, 1.0)) ** k, 1.0)
        return ph * (1.0 - r * r if profile == "one_minus_r2" else 1.0)

    label = f"e^(i{k}theta)" + ("(1-|z|^2)" if profile == "one_minus_r2" else "")
    return Symbol(f, 1.0, label, spec={"name": "angular", "k": k, "profile": profile})


def gaussian_decay(scale: float = 1.0) -> Symbol:
    """``u = exp(-scale |z|^2)``; decays at infinity (compact Toeplitz operator on the Fock space)."""
    return _radial_symbol(lambda r: np.exp(-scale * r * r), 1.0, f"exp(-{scale:g}|z|^2)",
                          spec={"name": "gaussian_decay", "scale": scale})


_SYMS = {name: sympy.Symbol(name, real=True) for name in ("r", "x", "y", "theta")}


def expression(expr: str, sup_bound: float, label: str | None = None) -> Symbol:
    """Symbol from an expression in ``r = |z|``, ``x = Re z``, ``y = Im z``, ``theta = arg z`` (n = 1).

    Parsed with sympy and compiled with numpy; the declared bound is
    enforced at every node where the symbol is evaluated.
    """
    try:
        parsed = sympy.sympify(expr, locals=_SYMS)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise DomainError(f"cannot parse symbol expression {expr!r}: {exc}") from exc
    free = {s.name for s in parsed.free_symbols}
    unknown = free - set(_SYMS)
    if unknown:
        raise DomainError(f"unknown variables {sorted(unknown)} in symbol expression")
    args = [_SYMS[k] for k in ("r", "x", "y", "theta")]
    fn = sympy.lambdify(args, parsed, modules="numpy")
    spec = {"name": "expression", "expression": expr, "sup_bound": float(sup_bound)}

    def f(z):
        z = np.asarray(z, dtype=complex)
        if z.ndim >= 2 and z.shape[-1] > 1:
            raise DomainError("expression symbols are defined for n = 1")
        out = fn(np.abs(z), z.real, z.imag, np.angle(z))
        return np.broadcast_to(np.asarray(out, dtype=complex), z.shape)

    radial = None
    if free <= {"r"}:
        fr = sympy.lambdify([_SYMS["r"]], parsed, modules="numpy")
        radial = lambda r: np.broadcast_to(np.asarray(fr(r), dtype=complex), np.shape(r))  # noqa: E731
    return Symbol(f, sup_bound, label or expr, radial=radial, spec=spec)


LIBRARY = {
    "constant": constant,
    "one_minus_r2": one_minus_r2,
    "r2": r2,
    "radial_step": radial_step,
    "radial_bump": radial_bump,
    "angular": angular,
    "gaussian_decay": gaussian_decay,
}


def from_spec(spec: dict) -> Symbol:
    """Build a symbol from ``{"name": ..., **params}`` or ``{"expression": ..., "sup_bound": ...}``."""
    spec = dict(spec)
    if "expression" in spec:
        if "sup_bound" not in spec:
            raise DomainError("expression symbols need a sup_bound")
        return expression(spec["expression"], float(spec["sup_bound"]), spec.get("label"))
    name = spec.pop("name", None)
    if name not in LIBRARY:
        raise DomainError(f"unknown symbol {name!r}; choose from {sorted(LIBRARY)} or give an expression")
    if name == "expression":
        raise DomainError("use the 'expression' key for expression symbols")
    try:
        return LIBRARY[name](**spec)
    except TypeError as exc:
        raise DomainError(f"bad parameters for symbol {name!r}: {exc}") from exc
