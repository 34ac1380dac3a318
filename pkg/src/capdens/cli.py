"""Command-line experiment driver.

    capdens --config annulus.yaml --out results --format both

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from .capacity import superlevel_set, variational_capacity
from .config import ExperimentConfig, load_config, resolve_set
from .density import DensityParams, density_scan, sobolev_density_scan
from .errors import CapacityLabError, ConfigError, InputError, NumericalError
from .predicates import (
    corkscrew_profile,
    inner_approx_curve,
    john_lower_bound,
    stability_probe,
)
from .report import Report, Table, emit_report
from .space import AMBIENT, INNER, build_graph

log = logging.getLogger("capdens")


class StageError(Exception):
    """A module error annotated with the stage that raised it."""

    def __init__(self, stage, error):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.error = error


def _point(graph, node):
    return [float(v) for v in graph.coords[node]]


def _centers(params):
    c = params.get("centers")
    return None if c is None else tuple(tuple(map(float, x)) for x in c)


def _density_params(cfg, r, metric):
    p = cfg.params
    return DensityParams(r=float(r), tau=float(p.get("tau", 2.0)), metric=metric,
                         centers=_centers(p), stride=p.get("stride"),
                         adversarial=bool(p.get("adversarial", False)), solver=cfg.solver)


def _scan_rows(graph, scan, h):
    return [[h, rec.center, *_point(graph, rec.center), rec.numerator, rec.denominator, rec.ratio]
            for rec in scan.records]


def _run_one(cfg, graph, h, report, threads):
    """Append the results of one grid spacing to ``report``."""
    p, kind, n = cfg.params, cfg.kind, graph.n
    coord_cols = [f"x{d}" for d in range(n)]
    scan_cols = ["h", "center", *coord_cols, "numerator", "denominator", "ratio"]

    def table(name, columns):
        return report.tables.setdefault(name, Table(columns, []))

    if kind in ("capacity", "potential", "superlevel-check"):
        E = resolve_set(graph, p["E"])
        omega = resolve_set(graph, p["omega"])
        res = variational_capacity(graph, E, omega, cfg.solver)
        table("capacity", ["h", "nodes", "capacity", "iterations", "residual"]).rows.append(
            [h, graph.num_nodes, res.value, res.iterations, res.residual])
        report.warnings.extend(res.warnings)
        if kind == "potential":
            t = table("potential", ["h", *coord_cols, "u"])
            if "points" in p:
                for pt in p["points"]:
                    i = graph.node_at(pt)
                    t.rows.append([h, *_point(graph, i), float(res.potential.values[i])])
            else:
                for i in range(graph.num_nodes):
                    t.rows.append([h, *_point(graph, i), float(res.potential.values[i])])
        if kind == "superlevel-check":
            t = table("superlevel", ["h", "M", "capacity_M", "capacity", "ratio", "expected"])
            for M in p["levels"]:
                EM = superlevel_set(res.potential, M, bool(p.get("strict", True)))
                cm = variational_capacity(graph, EM, omega, cfg.solver).value if not EM.is_empty else 0.0
                t.rows.append([h, M, cm, res.value, cm / res.value, M ** (1 - cfg.solver.p)])
        return

    if kind == "density-scan":
        E = resolve_set(graph, p["E"])
        scan = density_scan(graph, E, _density_params(cfg, p["r"], p.get("metric", AMBIENT)),
                            skip_errors=bool(p.get("skip_errors", False)), threads=threads)
        table("scan", scan_cols).rows.extend(_scan_rows(graph, scan, h))
        table("minimum", ["h", "r", "minimum", "argmin_center", *coord_cols]).rows.append(
            [h, scan.r, scan.minimum, scan.argmin.center, *_point(graph, scan.argmin.center)])
        if scan.skipped:
            report.warnings.append(f"skipped centers {scan.skipped}")
        return

    if kind == "sobolev-density":
        E = resolve_set(graph, p["E"])
        scan = sobolev_density_scan(graph, E, float(p["r"]), _centers(p), cfg.solver, threads)
        table("scan", scan_cols).rows.extend(_scan_rows(graph, scan, h))
        table("minimum", ["h", "r", "minimum", "argmin_center", *coord_cols]).rows.append(
            [h, scan.r, scan.minimum, scan.argmin.center, *_point(graph, scan.argmin.center)])
        return

    if kind == "dichotomy":
        E = resolve_set(graph, p["E"])
        t = table("ladder", ["h", "R", "D_min", "D_in_min", *[f"argmin_{c}" for c in coord_cols],
                             *[f"argmin_in_{c}" for c in coord_cols]])
        for R in p["radii"]:
            skip = bool(p.get("skip_errors", False))
            amb = density_scan(graph, E, _density_params(cfg, R, AMBIENT), skip, threads)
            inn = density_scan(graph, E, _density_params(cfg, R, INNER), skip, threads)
            t.rows.append([h, R, amb.minimum, inn.minimum, *_point(graph, amb.argmin.center),
                           *_point(graph, inn.argmin.center)])
        return

    if kind == "inner-approx":
        U = resolve_set(graph, p["U"])
        omega = resolve_set(graph, p["omega"])
        probe = inner_approx_curve(graph, U, omega, p["rhos"], cfg.solver, p.get("metric", AMBIENT))
        t = table("curve", ["h", "rho", "ratio", "flag"])
        t.rows.extend([h, row[0], row[2], row[4]] for row in probe.rows)
        return

    if kind == "corkscrew":
        U = resolve_set(graph, p["U"])
        prof = corkscrew_profile(graph, U, x_samples=p.get("points"), radii=p.get("radii"),
                                 metric=p.get("metric", AMBIENT), stride=p.get("stride"),
                                 r_range=p.get("r_range"))
        t = table("profile", ["h", "x_node", "r", "kappa", "witness_node"])
        t.rows.extend([h, *s] for s in prof.samples)
        table("minimum", ["h", "kappa_min", "x_node", "r"]).rows.append(
            [h, prof.kappa_min, prof.worst[0], prof.worst[1]])
        return

    if kind == "john":
        U = resolve_set(graph, p["U"])
        t = table("john", ["h", "center", *coord_cols, "c_min", "argmin", "path_nodes"])
        for c in p["centers"]:
            est = john_lower_bound(graph, U, tuple(map(float, c)), float(p.get("resolution", 1e-3)))
            t.rows.append([h, est.center, *_point(graph, est.center), est.c_min, est.argmin,
                           len(est.path)])
        best = max((row for row in t.rows if row[0] == h), key=lambda row: (row[-3], -row[1]))
        report.results.setdefault("john_best", []).append({"h": h, "c": best[-3], "center": best[1]})
        return

    if kind == "stability-probe":
        probe = stability_probe(graph, p["collection"], tuple(map(float, p["center"])), p["radii"],
                                p["rhos"], float(p.get("tau", 2.0)), float(p.get("gamma", 1.0)),
                                float(p.get("beta", 0.5)), cfg.solver, p.get("metric", AMBIENT))
        t = table("stability", ["h", "rho", "R", "ratio", "phi"])
        t.rows.extend([h, row[0], row[1], row[2], row[3]] for row in probe.rows)
        return

    raise ConfigError(f"unknown experiment kind {kind!r}")


def run_config(cfg: ExperimentConfig, threads=1) -> Report:
    """Run the configured experiment on every grid spacing of the config."""
    report = Report(config=cfg.raw, kind=cfg.kind)
    report.diagnostics["h"] = list(cfg.hs)
    report.diagnostics["nodes"] = []
    report.diagnostics["wall_time_s"] = []
    for h in cfg.hs:
        start = time.perf_counter()
        try:
            graph = build_graph(cfg.space, cfg.box, h)
        except CapacityLabError as exc:
            raise StageError("build_graph", exc) from exc
        try:
            _run_one(cfg, graph, h, report, threads)
        except CapacityLabError as exc:
            raise StageError(cfg.kind, exc) from exc
        report.diagnostics["nodes"].append(graph.num_nodes)
        report.diagnostics["wall_time_s"].append(round(time.perf_counter() - start, 3))
        log.info("%s h=%g nodes=%d done", cfg.kind, h, graph.num_nodes)
    # plain Python floats keep the JSON round-trip exact
    for t in report.tables.values():
        t.rows = [[v.item() if isinstance(v, np.generic) else v for v in row] for row in t.rows]
    return report


def build_parser():
    ap = argparse.ArgumentParser(prog="capdens", description="Run a capacity experiment from a config file.")
    ap.add_argument("--config", required=True, help="YAML experiment config")
    ap.add_argument("--out", default=None, help="output directory (overrides config)")
    ap.add_argument("--format", choices=["json", "csv", "both"], default=None)
    ap.add_argument("--threads", type=int, default=1, help="worker threads for per-center scans")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 3
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return 1
    try:
        report = run_config(cfg, threads=args.threads)
    except StageError as exc:
        code = 2 if isinstance(exc.error, NumericalError) else 1
        label = getattr(exc.error, "code", "error")
        print(f"error in stage {exc.stage} ({label}): {exc.error}", file=sys.stderr)
        return code
    except InputError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return 1
    out_dir = args.out or cfg.output["dir"]
    fmt = args.format or cfg.output["format"]
    try:
        paths = emit_report(report, out_dir, fmt, cfg.output["name"])
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
