"""Command-line runner: one validated config in, JSON reports and plot-ready CSV out.

Usage::

    rkcompact <subcommand> --config <path> [--out <dir>] [--threads <k>]

Every run writes ``config.echo.json`` and ``report.json`` into the output
directory, plus subcommand-specific CSV files. Exit codes: 0 success, 2
validation error, 3 numerical failure; failures also write ``error.json``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import DomainError, NumericalError
from .config import ExperimentConfig, load_config
from .diagnostics import (compactness_report, equivalence_probe, essential_norm_proxy, kernel_identity_suite,
                          profile_csv)
from .geometry import build_covering, verify_covering
from .localization import certify, default_z_grid, rudin_forelli_check, rudin_forelli_tail
from .operators import TruncatedOperator, berezin, monomial_basis, singular_values, sub_degree, toeplitz

__all__ = ["main", "run", "SUBCOMMANDS"]

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


class _Writer:
    """Writes UTF-8, LF-terminated artifacts into one directory."""

    def __init__(self, out: Path):
        self.out = out
        self.written = []

    def text(self, name: str, text: str):
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.written.append(name)

    def json(self, name: str, obj):
        self.text(name, _dump(obj))


def _operator(cfg: ExperimentConfig) -> TruncatedOperator:
    res = cfg.data["resolution"]
    return toeplitz(cfg.space, cfg.symbol, cfg.degree, radial_nodes=res["toeplitz_radial_nodes"])


def _z_points(cfg):
    zg = cfg.z_grid
    return default_z_grid(cfg.space, cfg.shells, cfg.data["grids"]["angles"]) if zg is None else \
        cfg.space.points(zg)[0].reshape(-1, cfg.space.n)


def _radius_of(pts):
    return np.sqrt(np.sum(np.abs(pts) ** 2, axis=-1))


# ---------------------------------------------------------------------------
# subcommands; each returns the report body


def cmd_kernel_identities(cfg, w, threads):
    checks = kernel_identity_suite(cfg.space, seed=cfg.data["seed"])
    rows = ["check,max_error,tolerance,passed"]
    rows += [f"{c['check']},{c['max_error']!r},{c['tolerance']!r},{str(c['passed']).lower()}" for c in checks]
    w.text("identities.csv", "\n".join(rows) + "\n")
    return {"checks": checks, "passed": all(c["passed"] for c in checks)}


def cmd_rudin_forelli(cfg, w, threads):
    space = cfg.space
    rf = cfg.data["rudin_forelli"]
    pts = _z_points(cfg)
    res = rudin_forelli_check(space, rf["a"], pts, refine=rf["refine"],
                              resolution=cfg.data["resolution"]["rudin_forelli"])
    bars = res.errors + res.truncation_bound
    w.text("rudin_forelli.csv", profile_csv(zip(_radius_of(pts), res.values, bars)))
    body = {"result": res.to_dict(), "z_grid": pts}
    s_ok = not space.is_bergman or 0.5 * (space.n + 1) * (rf["a"] - 1.0) > -1
    if s_ok:
        tail = rudin_forelli_tail(space, rf["a"], cfg.r_list, pts)
        w.text("rudin_forelli_tail.csv", profile_csv(tail))
        body["tail_profile"] = tail
    return body


def cmd_toeplitz(cfg, w, threads):
    T = _operator(cfg)
    w.json("operator.json", T.to_dict())
    s = singular_values(T)
    return {"provenance": T.provenance, "degree": T.degree, "dim": T.dim,
            "operator_norm": float(s[0]), "symbol": cfg.data["symbol"],
            "essnorm_proxy": essential_norm_proxy(T)}


def cmd_berezin_map(cfg, w, threads):
    space = cfg.space
    T = _operator(cfg)
    bm = cfg.data["berezin_map"]
    extent = bm["extent"] if bm["extent"] is not None else max(cfg.shells)
    axis = np.linspace(-extent, extent, bm["points"])
    X, Y = np.meshgrid(axis, axis, indexing="xy")
    Z = (X + 1j * Y).ravel()
    if space.is_bergman:
        Z = Z[np.abs(Z) < 1.0]
    pts = np.zeros((len(Z), space.n), dtype=complex)
    pts[:, 0] = Z
    val, err = berezin(T, pts if space.n > 1 else Z, True)
    w.text("berezin_map.csv", profile_csv(zip(Z.real, Z.imag, val.real, val.imag, err),
                                          ("re", "im", "value", "value_imag", "error_bar")))
    return {"points": int(len(Z)), "extent": extent, "max_abs": float(np.max(np.abs(val))),
            "max_error_bar": float(np.max(err)), "degree": T.degree}


def cmd_localize(cfg, w, threads):
    T = _operator(cfg)
    rad, ang = cfg.data["resolution"]["localization"]
    cert = certify(T, cfg.params, cfg.r_list, _z_points(cfg), None, cfg.thresholds,
                   {"radial_nodes": rad, "angular_nodes": ang}, threads)
    w.text("tail_profile.csv", cert.tail_csv())
    w.text("tail_profile_T.csv", profile_csv(cert.tail_profile_T))
    w.text("tail_profile_T_star.csv", profile_csv(cert.tail_profile_T_star))
    return {"certificate": cert.to_dict()}


def cmd_covering(cfg, w, threads):
    c = cfg.data["covering"]
    cov = build_covering(cfg.space, c["r"], cfg.covering_region, shape=c["shape"])
    rep = verify_covering(cov, samples=c["samples"], seed=cfg.data["seed"])
    w.json("covering.json", cov.to_dict())
    return {"N": cov.N, "cells": len(cov.cells), "verification": rep.to_dict(), "passed": rep.passed}


def cmd_compactness(cfg, w, threads):
    T = _operator(cfg)
    rep = compactness_report(T, cfg.report_config(), threads)
    dg = cfg.data["diagnostics"]
    probe = equivalence_probe(T, dg["probe_r_list"], cfg.shells, dg["probe_fixed_r"],
                              angles=cfg.data["grids"]["angles"], disk=tuple(cfg.data["resolution"]["disk"]))
    w.text("berezin_profile.csv", rep.berezin_profile.csv())
    w.text("tail_profile.csv", rep.certificate.tail_csv())
    w.text("equivalence.csv", probe.csv())
    body = rep.to_dict()
    body["equivalence_probe"] = probe.to_dict()
    return body


def cmd_spectrum(cfg, w, threads):
    T = _operator(cfg)
    s = singular_values(T)
    k = monomial_basis(T.space, sub_degree(T.degree)).dim
    s_sub = singular_values(TruncatedOperator(T.space, sub_degree(T.degree), T.matrix[:k, :k]))
    bars = np.full(len(s), np.nan)
    bars[:k] = np.abs(s[:k] - s_sub)
    w.text("singular_values.csv", profile_csv(zip(np.arange(len(s)), s, bars), ("index", "value", "error_bar")))
    return {"dim": T.dim, "degree": T.degree, "operator_norm": float(s[0]),
            "essnorm_proxy": essential_norm_proxy(T), "m": sub_degree(T.degree),
            "error_bar": "change of each singular value under compression to degree round(2D/3); "
                         "nan where that compression has fewer singular values"}


SUBCOMMANDS = {
    "kernel-identities": cmd_kernel_identities,
    "rudin-forelli": cmd_rudin_forelli,
    "toeplitz": cmd_toeplitz,
    "berezin-map": cmd_berezin_map,
    "localize": cmd_localize,
    "covering": cmd_covering,
    "compactness": cmd_compactness,
    "spectrum": cmd_spectrum,
}


def _resolution_meta(cfg: ExperimentConfig) -> dict:
    return {"degree": cfg.degree, **cfg.data["resolution"]}


def run(subcommand: str, cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    """Run one subcommand and write its artifacts; returns the exit status."""
    w = _Writer(Path(out))
    w.json("config.echo.json", cfg.to_dict())
    try:
        body = SUBCOMMANDS[subcommand](cfg, w, threads)
    except DomainError as exc:
        _fail(w, subcommand, cfg, "validation", exc)
        return EXIT_VALIDATION
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        _fail(w, subcommand, cfg, "numerical", exc)
        return EXIT_NUMERICAL
    report = {"subcommand": subcommand, "config_hash": cfg.hash, "version": __version__,
              "resolution": _resolution_meta(cfg), "artifacts": sorted(w.written + ["report.json"]),
              "result": body}
    w.json("report.json", report)
    return EXIT_OK


def _fail(w, subcommand, cfg, kind, exc):
    err = {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc),
           "subcommand": subcommand, "config_hash": None if cfg is None else cfg.hash}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    try:
        w.json("error.json", err)
    except OSError:
        pass


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rkcompact", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML or JSON experiment file")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for grid sweeps")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    w = _Writer(Path(args.out or "."))
    try:
        if args.threads < 1:
            raise DomainError(f"--threads must be >= 1, got {args.threads}")
        cfg = load_config(args.config)
    except DomainError as exc:
        if args.out:
            _fail(w, args.subcommand, None, "validation", exc)
        else:
            print(json.dumps({"status": "error", "kind": "validation", "type": type(exc).__name__,
                              "message": str(exc), "subcommand": args.subcommand}, sort_keys=True),
                  file=sys.stderr)
        return EXIT_VALIDATION
    # --out overrides where artifacts go; the echoed config stays as loaded
    return run(args.subcommand, cfg, Path(args.out or cfg.data["output"]), args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
