"""Command line entry point: ``landscape-counting <subcommand> --config run.json``.

Exit status: 0 success, 1 invalid configuration, 2 numerical failure,
3 an inequality of the counting theory is violated on the computed data.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import counting, reports, spectra, verify
from .counting import ResolutionError
from .discretize import Grid, ScalarField, assemble, build_grid, node_potential
from .landscape import LandscapeError, effective_potential, solve_landscape
from .potential import (BracketError, DimensionError, NegativePotentialError, Polynomial,
                        make_potential, maximal_profile)

log = logging.getLogger("landscape_counting")

SUBCOMMANDS = ("solve", "msweep", "count", "spectra", "verify", "diagnose")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_FINDING = 0, 1, 2, 3

DEFAULTS = {
    "potential": "harmonic",
    "grid": {"dimension": 1, "half_width": 10.0, "nodes_per_side": 255, "margin_fraction": 0.1},
    "method": "auto",
    "mu_grid": {"auto": True, "count": 20, "decades": 1.0, "min": None, "max": None,
                "spacing": "log"},
    "count": {"field": "effective", "half_widths": None, "check_resolution": True},
    "samples": {"maximal": {"count": 200, "seed": 0, "box": None, "design": "log-radial"},
                "harnack": {"sample": None, "seed": 0}},
    "verify": {"lemma_checks": True, "refine": False},
    "diagnose": {"shells": None, "l1_half_widths": None, "l1_spacing": None},
    "outputs": {"prefix": ""},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    """Validated run configuration; :attr:`data` is the canonical, fully defaulted dict."""

    data: dict
    potential: Polynomial
    grid: Grid

    @classmethod
    def from_dict(cls, raw: dict) -> RunConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        data = _merge(DEFAULTS, raw)
        try:
            g = data["grid"]
            grid = build_grid(g["dimension"], g["half_width"], g["nodes_per_side"],
                              g["margin_fraction"])
            pot = make_potential(data["potential"], grid.dimension)
        except (ValueError, TypeError, KeyError, MemoryError) as exc:
            raise ConfigError(str(exc)) from exc
        if data["method"] not in ("auto", "banded", "sparse", "sturm"):
            raise ConfigError(f"unknown method {data['method']!r}")
        if data["method"] == "sturm" and grid.dimension != 1:
            raise ConfigError("method 'sturm' needs a one-dimensional grid")
        mg = data["mu_grid"]
        if not mg.get("auto"):
            for k in ("min", "max"):
                if mg[k] is None:
                    raise ConfigError(f"mu_grid.{k} is required unless mu_grid.auto is true")
            if not 0 < mg["min"] < mg["max"] or int(mg["count"]) < 1:
                raise ConfigError("mu_grid needs 0 < min < max and count >= 1")
            if mg.get("spacing", "log") not in ("log", "linear"):
                raise ConfigError("mu_grid.spacing must be 'log' or 'linear'")
        elif int(mg.get("count", 20)) < 1 or float(mg.get("decades", 1.0)) <= 0:
            raise ConfigError("mu_grid needs count >= 1 and decades > 0")
        if data["count"]["field"] not in ("effective", "raw"):
            raise ConfigError("count.field must be 'effective' or 'raw'")
        hw = data["count"]["half_widths"]
        if hw is not None and (not hw or any(float(x) <= 0 for x in hw)):
            raise ConfigError("count.half_widths must be positive")
        try:
            count_grids(data, grid)
        except (ValueError, MemoryError) as exc:
            raise ConfigError(f"count box: {exc}") from exc
        sm = data["samples"]["maximal"]
        if sm["design"] not in ("log-radial", "uniform"):
            raise ConfigError("samples.maximal.design must be 'log-radial' or 'uniform'")
        if sm["box"] is not None and float(sm["box"]) <= 0.01:
            raise ConfigError("samples.maximal.box must exceed 0.01")
        dg = data["diagnose"]
        if dg["shells"] is not None and any(b <= a for a, b in zip(dg["shells"], dg["shells"][1:])):
            raise ConfigError("diagnose.shells must be increasing")
        if dg["l1_half_widths"] is not None and dg["l1_spacing"] is None:
            raise ConfigError("diagnose.l1_spacing is required with l1_half_widths")
        return cls(data, pot, grid)

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.from_dict(raw)

    @property
    def sha256(self) -> str:
        return reports.config_hash(self.data)


def count_grids(data: dict, g0: Grid) -> list:
    """Grids for the count subcommand: every box at the spacing of the configured grid."""
    boxes = data["count"]["half_widths"] or [g0.half_width]
    # raw potentials assemble no operator, so the band-storage cap is irrelevant
    cap = math.inf if data["count"]["field"] == "raw" else g0.max_band_entries
    return [build_grid(g0.dimension, float(L), int(round(2 * float(L) / g0.spacing)) - 1,
                       g0.margin_fraction, cap) for L in boxes]


def mu_values(cfg: RunConfig, op=None, sol=None) -> np.ndarray:
    mg = cfg.data["mu_grid"]
    if mg.get("auto"):
        if op is None:
            op = assemble(cfg.potential, cfg.grid)
        bounds = verify.landscape_bounds(op, sol) if sol is not None else None
        return verify.default_mu_grid(op, int(mg.get("count", 20)), float(mg.get("decades", 1.0)),
                                      cfg.data["method"], bounds)
    if mg.get("spacing", "log") == "log":
        return np.geomspace(mg["min"], mg["max"], int(mg["count"]))
    return np.linspace(mg["min"], mg["max"], int(mg["count"]))


class Run:
    def __init__(self, cfg: RunConfig, out_dir: Path, svg: bool):
        self.cfg, self.out_dir, self.svg = cfg, out_dir, svg
        self.files = []
        self.finding = False

    def path(self, name: str) -> Path:
        p = self.cfg.data["outputs"]["prefix"]
        return self.out_dir / (f"{p}_{name}" if p else name)

    def csv(self, name, header, rows):
        self.files.append(reports.write_csv(self.path(name), header, rows, self.cfg.data))

    def json(self, name, payload, kind):
        self.files.append(reports.write_json(self.path(name), payload, self.cfg.data, kind))

    def plot(self, name, x, y, **kw):
        if self.svg:
            self.files.append(reports.write_svg(self.path(name), x, y, self.cfg.data, **kw))


def _axis_profile(f: ScalarField):
    """Values along the first axis through the box centre (a single curve in any dimension)."""
    a = f.as_array()
    mid = f.grid.nodes_per_side // 2
    idx = (slice(None),) + (mid,) * (f.grid.dimension - 1)
    return f.grid.axis, a[idx]


def cmd_solve(run: Run):
    cfg = run.cfg
    op = assemble(cfg.potential, cfg.grid)
    sol = solve_landscape(op, "full", "auto" if cfg.data["method"] == "sturm" else cfg.data["method"])
    W = effective_potential(sol)
    coords = cfg.grid.coordinates()
    names = ["x", "y", "z"][: cfg.grid.dimension]
    run.csv("landscape.csv", names + ["u", "inv_u"],
            (list(c) + [u, w] for c, u, w in zip(coords, sol.u.values, W.values)))
    run.files.append(reports.write_field(run.path("landscape.field"), sol.u))
    run.json("landscape.json", {"grid": cfg.grid.to_dict(), "u_interior": sol.u.stats(),
                                "u_full_box": sol.u.stats(full_box=True),
                                "inv_u_interior": W.stats(), "residual": sol.stats["residual"],
                                "method": sol.stats["method"]}, "landscape")
    x, y = _axis_profile(sol.u)
    run.plot("landscape.svg", x, y, xlabel="x", ylabel="u", title="landscape function")


def _sample_points(cfg: RunConfig):
    s = cfg.data["samples"]["maximal"]
    box = s["box"]
    if box is None:
        return verify.interior_sample(cfg.grid, int(s["count"]), int(s["seed"]))
    if s["design"] == "log-radial":
        return verify.multiscale_sample(cfg.grid.dimension, int(s["count"]), float(box),
                                        seed=int(s["seed"]))
    rng = np.random.default_rng(int(s["seed"]))
    pts = rng.uniform(-box, box, size=(int(s["count"]), cfg.grid.dimension))
    return pts[np.lexsort(pts.T[::-1])]


def cmd_msweep(run: Run):
    cfg = run.cfg
    pts = _sample_points(cfg)
    prof = maximal_profile(cfg.potential, pts)
    names = ["x", "y", "z"][: cfg.grid.dimension]
    run.csv("maximal.csv", names + ["m", "M", "contiguous"],
            (list(p) + [m, M, c] for p, m, M, c in zip(prof.points, prof.m, prof.M, prof.contiguous)))
    r = np.linalg.norm(prof.points, axis=1) if cfg.grid.dimension > 1 else prof.points[:, 0]
    order = np.argsort(r, kind="stable")
    run.plot("maximal.svg", r[order], prof.m[order], xlabel="|x|" if cfg.grid.dimension > 1 else "x",
             ylabel="m(x, V)", title="maximal function")
    if not prof.contiguous.all():
        log.warning("feasible radius set non-contiguous at %d sample points",
                    int((~prof.contiguous).sum()))


def _count_field(cfg: RunConfig, grid: Grid) -> ScalarField:
    if cfg.data["count"]["field"] == "raw":
        return ScalarField(grid, node_potential(cfg.potential, grid))
    return effective_potential(solve_landscape(assemble(cfg.potential, grid)))


def cmd_count(run: Run):
    cfg = run.cfg
    cc = cfg.data["count"]
    grids = count_grids(cfg.data, cfg.grid)
    boxes = [g.half_width for g in grids]
    mus = mu_values(cfg)
    summary = []
    for grid in grids:
        L, n = grid.half_width, grid.nodes_per_side
        f = _count_field(cfg, grid)
        rows = counting.count_rows(f, mus, check_resolution=cc["check_resolution"])
        name = "counts.csv" if len(boxes) == 1 else f"counts_L{L:g}.csv"
        run.csv(name, ["mu", "volume", "N", "n", "boxes_total"],
                ([r.mu, r.volume, r.N, r.n, r.boxes_total] for r in rows))
        summary.append({"half_width": L, "nodes_per_side": n,
                        "volumes": [r.volume for r in rows]})
        if len(boxes) == 1:
            run.plot("counts.svg", mus, [r.volume for r in rows], xlabel="mu",
                     ylabel="sublevel volume", logx=True, step=True)
    payload = {"field": cc["field"], "mu": mus, "boxes": summary}
    if len(boxes) > 1:
        vols = np.array([b["volumes"] for b in summary])
        payload["volume_strictly_increasing_in_box"] = [bool(v) for v in
                                                        np.all(np.diff(vols, axis=0) > 0, axis=0)]
        run.plot("counts.svg", [float(b) for b in boxes], vols[:, 0], xlabel="box half width",
                 ylabel=f"sublevel volume at mu={mus[0]:g}")
    run.json("counts.json", payload, "counts")


def cmd_spectra(run: Run):
    cfg = run.cfg
    op = assemble(cfg.potential, cfg.grid)
    mus = mu_values(cfg, op)
    res = spectra.count_sweep(op, mus, cfg.data["method"])
    run.csv("spectra.csv", ["mu", "count", "retries"], ([r.mu, r.count, r.retries] for r in res))
    run.plot("spectra.svg", mus, [r.count for r in res], xlabel="mu", ylabel="eigenvalues <= mu",
             logx=cfg.data["mu_grid"].get("spacing", "log") == "log", step=True)


def cmd_verify(run: Run):
    cfg = run.cfg
    vc = cfg.data["verify"]
    mg = cfg.data["mu_grid"]
    hs = cfg.data["samples"]["harnack"]
    mus = None if mg.get("auto") else mu_values(cfg)
    res = verify.run_verify(cfg.potential, cfg.grid, mus, int(mg.get("count", 20)),
                            float(mg.get("decades", 1.0)), cfg.data["method"], vc["lemma_checks"],
                            harnack_sample=hs["sample"], seed=int(hs["seed"]))
    log.info("verify timings: %s", {k: round(v, 2) for k, v in res.timings.items()})
    s = res.sandwich
    payload = {"grid": cfg.grid.to_dict(), "sandwich": s, "sandwich_valid": s.valid,
               "harnack": res.harnack, "chain": res.chain, "chain_holds": res.chain_ok,
               "chain_exponent": "chain uses mu^(d/2) V(mu); the mu^1 V(mu) variant is "
                                 "stored as scaled_volume_linear",
               "lemmas": res.lemmas, "landscape_residual": res.landscape_stats["residual"]}
    if vc["refine"]:
        fine = verify.run_verify(cfg.potential, cfg.grid.refined(), mus, int(mg.get("count", 20)),
                                 float(mg.get("decades", 1.0)), cfg.data["method"], False)
        payload["refinement"] = {
            "nodes_per_side": cfg.grid.refined().nodes_per_side,
            "c_est": fine.sandwich.c_est, "C_est": fine.sandwich.C_est,
            "c_shift": verify.refinement_shift(s.c_est, fine.sandwich.c_est),
            "C_shift": verify.refinement_shift(s.C_est, fine.sandwich.C_est)}
    equiv = {}
    sm = cfg.data["samples"]["maximal"]
    pts = verify.interior_sample(cfg.grid, int(sm["count"]), int(sm["seed"]))
    # u needs grid nodes; the pure maximal-function checks may sample a wider box
    far = pts if sm["box"] is None else _sample_points(cfg)
    try:
        equiv["u-vs-m"] = verify.equivalence_u_m(res.solution, cfg.potential, pts).to_dict()
        if isinstance(cfg.potential, Polynomial):
            equiv["m-vs-M"] = verify.equivalence_m_M(cfg.potential, far).to_dict()
        if cfg.grid.dimension < 3:
            equiv["m-lift"] = verify.equivalence_lift(cfg.potential, far).to_dict()
        equiv["m-growth"] = verify.growth_exponent(cfg.potential, far).to_dict()
    except BracketError as exc:
        equiv["error"] = str(exc)
    payload["equivalences"] = equiv
    run.json("verify.json", payload, "verify")
    run.csv("sandwich.csv", ["mu", "count", "vol_c", "lower", "vol_C", "upper"],
            ([r["mu"], r["count"], r.get("vol_c", math.nan), r.get("lower", math.nan),
              r.get("vol_C", math.nan), r.get("upper", math.nan)] for r in s.rows))
    run.plot("sandwich.svg", s.mu_grid, s.counts, xlabel="mu", ylabel="eigenvalues <= mu",
             logx=True, step=True)
    run.finding = not (s.valid and res.chain_ok and s.adequate)
    for f in s.findings:
        log.warning("finding: %s", f)


def cmd_diagnose(run: Run):
    cfg = run.cfg
    dg = cfg.data["diagnose"]
    payload = {}
    if isinstance(cfg.potential, Polynomial):
        payload["polynomial_discrete"] = verify.diagnose_discreteness_polynomial(cfg.potential)
    sol = solve_landscape(assemble(cfg.potential, cfg.grid))
    shells = dg["shells"]
    if shells is None:
        rmax = float(cfg.grid.interior_axis()[-1])
        shells = np.linspace(0.0, rmax, 6)[:-1].tolist()
    trend = verify.diagnose_discreteness_numeric(sol, shells)
    payload["numeric"] = trend
    if dg["l1_half_widths"] is not None:
        payload["l1_probe"] = verify.l1_probe(cfg.potential, dg["l1_half_widths"], dg["l1_spacing"],
                                              cfg.grid.margin_fraction)
    run.json("diagnose.json", payload, "diagnose")
    run.plot("diagnose.svg", trend.radii, trend.values, xlabel="R", ylabel="sup of u on |x| >= R")


COMMANDS = {"solve": cmd_solve, "msweep": cmd_msweep, "count": cmd_count,
            "spectra": cmd_spectra, "verify": cmd_verify, "diagnose": cmd_diagnose}


def run_subcommand(name: str, cfg: RunConfig, out_dir, svg: bool = False) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = Run(cfg, out_dir, svg)
    try:
        COMMANDS[name](run)
    except (ConfigError, DimensionError, ResolutionError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except (LandscapeError, spectra.FactorizationError, BracketError, NegativePotentialError,
            MemoryError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    reports.write_manifest(out_dir, run.files, cfg.data, name)
    return EXIT_FINDING if run.finding else EXIT_OK


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="landscape-counting",
                                description="Landscape function and eigenvalue counting checks.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out-dir", default=".", help="output directory (default: current)")
    p.add_argument("--svg", action="store_true", help="also write an SVG of the primary curve")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    return run_subcommand(args.subcommand, cfg, args.out_dir, args.svg)


if __name__ == "__main__":
    sys.exit(main())
