"""Experiment configuration: loading, validation, canonical form and hash.

A configuration is one YAML (or JSON) mapping. Missing entries take the
defaults below; unknown keys are rejected so typos never pass silently.
Every range is checked before any computation starts.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ._validation import DomainError
from .diagnostics import ReportConfig
from .localization import BERGMAN_SHELLS, DEFAULT_RADII, FOCK_SHELLS, LocalizationParams, Thresholds
from .operators import Symbol
from .spaces import SpaceDescriptor
from .symbols import from_spec

__all__ = ["ExperimentConfig", "load_config", "DEFAULTS"]

DEFAULTS = {
    "space": {"family": "bergman", "n": 1, "p": 2.0, "alpha": 1.0},
    "symbol": {"name": "constant"},
    "degree": None,
    "resolution": {
        "toeplitz_radial_nodes": 400,
        "localization": [48, 256],
        "schur": [32, 128],
        "rudin_forelli": None,
        "region": [40, 64],
        "disk": [6, 16],
    },
    "grids": {
        "shells": None,
        "angles": 8,
        "r_list": list(DEFAULT_RADII),
        "z_grid": None,
    },
    "localization": {"delta": 1.0},
    "diagnostics": {"m": None, "rhs_r": 1.0, "probe_r_list": [0.5, 1.0, 2.0], "probe_fixed_r": 1.0},
    "thresholds": {"full": 50.0, "tail_fraction": 0.05, "tau_B": 0.05, "tau_e": 0.1, "tau_nc": 0.5},
    "covering": {"r": 1.0, "region": None, "shape": "ball", "samples": 2000},
    "rudin_forelli": {"a": 0.5, "refine": True},
    "berezin_map": {"extent": None, "points": 41},
    "seed": 0,
    "output": "out",
}


def _merge(defaults, given, path=""):
    if not isinstance(given, dict):
        raise DomainError(f"{path or 'config'} must be a mapping, got {type(given).__name__}")
    unknown = set(given) - set(defaults)
    if unknown:
        raise DomainError(f"unknown key(s) {sorted(unknown)} in {path or 'config'}")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(defaults[k], dict) and k != "symbol":
            out[k] = _merge(defaults[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _num(x, name, lo=-math.inf, hi=math.inf, *, open_lo=False, open_hi=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise DomainError(f"{name} must be a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    if (x <= lo if open_lo else x < lo) or (x >= hi if open_hi else x > hi):
        raise DomainError(f"{name}={x!r} is outside its allowed range")
    return x


def _int(x, name, lo=0, hi=None):
    if isinstance(x, bool) or not isinstance(x, int) or x < lo or (hi is not None and x > hi):
        raise DomainError(f"{name} must be an integer in [{lo}, {hi if hi is not None else 'inf'}], got {x!r}")
    return x


def _pair(x, name, even_second=False):
    if not (isinstance(x, (list, tuple)) and len(x) == 2):
        raise DomainError(f"{name} must be a pair of integers")
    a, b = _int(x[0], f"{name}[0]", 1), _int(x[1], f"{name}[1]", 2)
    if even_second and b % 2:
        raise DomainError(f"{name}[1] must be even")
    return [a, b]


def _radii(xs, name, hi=math.inf):
    if not isinstance(xs, (list, tuple)) or not xs:
        raise DomainError(f"{name} must be a non-empty list")
    vals = [_num(x, f"{name} entry", 0.0, hi, open_lo=True) for x in xs]
    if sorted(vals) != vals or len(set(vals)) != len(vals):
        raise DomainError(f"{name} must be strictly increasing")
    return vals


def _validate(d: dict) -> dict:
    sp = d["space"]
    if sp["family"] not in ("bergman", "fock"):
        raise DomainError(f"space.family must be 'bergman' or 'fock', got {sp['family']!r}")
    sp["n"] = _int(sp["n"], "space.n", 1, 8)
    sp["p"] = _num(sp["p"], "space.p", 1.0, math.inf, open_lo=True, open_hi=True)
    sp["alpha"] = _num(sp["alpha"], "space.alpha", 0.0, math.inf, open_lo=True)
    space = SpaceDescriptor(sp["family"], sp["n"], sp["p"], sp["alpha"])

    if not isinstance(d["symbol"], dict):
        raise DomainError("symbol must be a mapping")
    from_spec(d["symbol"])
    # default truncation degree: 60 on the disk or plane, 20 (total degree) for n >= 2
    d["degree"] = _int((60 if space.n == 1 else 20) if d["degree"] is None else d["degree"], "degree", 1, 400)

    res = d["resolution"]
    res["toeplitz_radial_nodes"] = _int(res["toeplitz_radial_nodes"], "resolution.toeplitz_radial_nodes", 8)
    for key in ("localization", "schur", "region"):
        res[key] = _pair(res[key], f"resolution.{key}", even_second=True)
    if res["rudin_forelli"] is not None:
        res["rudin_forelli"] = _pair(res["rudin_forelli"], "resolution.rudin_forelli", even_second=True)
    res["disk"] = _pair(res["disk"], "resolution.disk")

    g = d["grids"]
    bound = 1.0 if space.is_bergman else math.inf
    if g["shells"] is not None:
        shells = [_num(s, "grids.shells entry", 0.0, bound, open_hi=space.is_bergman) for s in g["shells"]]
        if not shells or sorted(shells) != shells:
            raise DomainError("grids.shells must be a non-empty increasing list")
        g["shells"] = shells
    g["angles"] = _int(g["angles"], "grids.angles", 1)
    g["r_list"] = _radii(g["r_list"], "grids.r_list")
    if g["z_grid"] is not None:
        g["z_grid"] = [_point(z, space, f"grids.z_grid[{i}]") for i, z in enumerate(g["z_grid"])]

    d["localization"]["delta"] = _num(d["localization"]["delta"], "localization.delta", 0.0,
                                      min(space.p, space.p_conj), open_lo=True, open_hi=True)
    if space.is_bergman:
        params = LocalizationParams(space.p, d["localization"]["delta"], space.n)
        lo = (space.n - 1) / (space.n + 1)
        for name, a in (("a_T", params.a_T), ("a_T*", params.a_T_star)):
            if not lo < a < 1:
                raise DomainError(f"localization exponent {name}={a!r} leaves ({lo}, 1); change delta or p")

    dg = d["diagnostics"]
    if dg["m"] is not None:
        dg["m"] = _int(dg["m"], "diagnostics.m", 0, d["degree"])
    dg["rhs_r"] = _num(dg["rhs_r"], "diagnostics.rhs_r", 0.0, open_lo=True)
    dg["probe_r_list"] = _radii(dg["probe_r_list"], "diagnostics.probe_r_list")
    dg["probe_fixed_r"] = _num(dg["probe_fixed_r"], "diagnostics.probe_fixed_r", 0.0, open_lo=True)

    t = d["thresholds"]
    t["full"] = _num(t["full"], "thresholds.full", 0.0, open_lo=True)
    for key in ("tail_fraction", "tau_B", "tau_e", "tau_nc"):
        t[key] = _num(t[key], f"thresholds.{key}", 0.0, open_lo=True)

    c = d["covering"]
    c["r"] = _num(c["r"], "covering.r", 0.0, open_lo=True)
    if c["region"] is not None:
        c["region"] = _num(c["region"], "covering.region", 0.0, open_lo=True)
    if c["shape"] not in ("ball", "cube"):
        raise DomainError(f"covering.shape must be 'ball' or 'cube', got {c['shape']!r}")
    if space.is_bergman and c["shape"] != "ball":
        raise DomainError("Bergman coverings use metric-ball regions")
    c["samples"] = _int(c["samples"], "covering.samples", 1)

    rf = d["rudin_forelli"]
    rf["a"] = _num(rf["a"], "rudin_forelli.a", 0.0, open_lo=True)
    if not isinstance(rf["refine"], bool):
        raise DomainError("rudin_forelli.refine must be true or false")

    bm = d["berezin_map"]
    if bm["extent"] is not None:
        bm["extent"] = _num(bm["extent"], "berezin_map.extent", 0.0, bound, open_lo=True,
                            open_hi=space.is_bergman)
    bm["points"] = _int(bm["points"], "berezin_map.points", 2, 1001)
    d["seed"] = _int(d["seed"], "seed", 0)
    if not isinstance(d["output"], str) or not d["output"]:
        raise DomainError("output must be a non-empty path string")
    return d


def _point(z, space, name):
    """``[re, im]`` (n = 1) or a list of n such pairs."""
    def is_pair(x):
        return isinstance(x, (list, tuple)) and len(x) == 2 and not any(isinstance(c, (list, tuple)) for c in x)

    pairs = [z] if space.n == 1 and is_pair(z) else z
    if not isinstance(pairs, (list, tuple)) or len(pairs) != space.n or not all(is_pair(c) for c in pairs):
        raise DomainError(f"{name} must list {space.n} complex coordinate(s) as [re, im] pairs")
    coords = [[_num(a, name), _num(b, name)] for a, b in pairs]
    if space.is_bergman and sum(a * a + b * b for a, b in coords) >= 1.0:
        raise DomainError(f"{name} lies outside the open unit ball")
    return coords[0] if space.n == 1 else coords


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully populated experiment configuration.

    `data` holds the canonical nested mapping; everything else is derived.
    """

    data: dict = field(repr=False)

    @classmethod
    def from_dict(cls, d: dict | None) -> "ExperimentConfig":
        return cls(_validate(_merge(DEFAULTS, d or {})))

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise DomainError(f"cannot parse config: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        """Canonical text: sorted keys, fixed separators."""
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        """sha256 of the canonical text, excluding the output directory."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()

    # derived objects

    @property
    def space(self) -> SpaceDescriptor:
        s = self.data["space"]
        return SpaceDescriptor(s["family"], s["n"], s["p"], s["alpha"])

    @property
    def symbol(self) -> Symbol:
        return from_spec(self.data["symbol"])

    @property
    def degree(self) -> int:
        return self.data["degree"]

    @property
    def shells(self) -> tuple:
        s = self.data["grids"]["shells"]
        if s is None:
            return BERGMAN_SHELLS if self.space.is_bergman else FOCK_SHELLS
        return tuple(s)

    @property
    def z_grid(self):
        zg = self.data["grids"]["z_grid"]
        if zg is None:
            return None
        if self.space.n == 1:
            return [complex(a, b) for a, b in zg]
        return [[complex(a, b) for a, b in z] for z in zg]

    @property
    def r_list(self) -> tuple:
        return tuple(self.data["grids"]["r_list"])

    @property
    def params(self) -> LocalizationParams | None:
        if not self.space.is_bergman:
            return None
        return LocalizationParams(self.space.p, self.data["localization"]["delta"], self.space.n)

    @property
    def thresholds(self) -> Thresholds:
        t = self.data["thresholds"]
        return Thresholds(t["full"], t["tail_fraction"])

    @property
    def covering_region(self) -> float:
        reg = self.data["covering"]["region"]
        return (3.0 if self.space.is_bergman else 5.0) if reg is None else reg

    @property
    def _covering_r(self) -> float | None:
        # Bergman coverings exist for n = 1 only; larger n skips the decomposition step
        if self.space.is_bergman and self.space.n > 1:
            return None
        return self.data["covering"]["r"]

    def report_config(self) -> ReportConfig:
        t, dg, res = self.data["thresholds"], self.data["diagnostics"], self.data["resolution"]
        return ReportConfig(
            shells=self.shells, angles=self.data["grids"]["angles"], rhs_r=dg["rhs_r"], m=dg["m"],
            delta=self.data["localization"]["delta"], r_list=self.r_list, thresholds=self.thresholds,
            tau_B=t["tau_B"], tau_e=t["tau_e"], tau_nc=t["tau_nc"], covering_r=self._covering_r,
            covering_region=self.covering_region,
            localization_resolution=tuple(res["localization"]), schur_resolution=tuple(res["schur"]),
            region_resolution=tuple(res["region"]), disk=tuple(res["disk"]),
            z_grid=None if self.z_grid is None else tuple(self.z_grid),
        )


def load_config(path) -> ExperimentConfig:
    """Read and validate a YAML or JSON configuration file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainError(f"cannot read config {str(p)!r}: {exc.strerror}") from exc
    return ExperimentConfig.from_text(text)
